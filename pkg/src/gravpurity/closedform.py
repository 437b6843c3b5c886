"""Closed-form kernels of the self-decoherence model.

All formulas are hard-coded in Planck units (hbar = c = G = 1).  The
general-unit forms are noted next to each expression; restoring units
amounts to reinserting hbar via lambda_bar = hbar/m and measuring
lengths/times in Planck units.

The model: a free particle of mass m, prepared as an isotropic Gaussian
wavepacket of width sigma, interacts gravitationally with a virtual
clone of itself through the potential -m^2/d, where d is the Euclidean
distance regularized by the cutoff l_c added in quadrature.  Tracing
the clone out of the pair state produces a mixed particle state whose
purity decay this package estimates.
"""

from __future__ import annotations

import enum
import math

import numpy as np
from scipy.special import erfcx

from .units import InvalidParameterError, ModelParams

__all__ = [
    "KU_THRESHOLD",
    "RegionLabel",
    "NoEvolutionWindowError",
    "regularized_distance",
    "phase",
    "pair_wavefunction",
    "bracket_b",
    "msq_position",
    "msq_momentum",
    "kinetic_over_potential",
    "sigma_b_of_mass",
    "sigma_b",
    "t_f",
    "classify_region",
]

# The potential-dominated reduction is trusted while the kinetic-to-
# potential ratio K/|U| stays below this threshold; the validity window
# ends when the growing ratio reaches it.
KU_THRESHOLD = 0.5

SQRT3 = math.sqrt(3.0)


class NoEvolutionWindowError(ValueError):
    """sigma <= sigma_B: the validity window (0, t_F] is empty."""


class RegionLabel(enum.Enum):
    """Classification of a parameter point in the (mu, sigma) plane."""

    BEYOND_CUT = "beyond_cut"
    HATCHED = "hatched"
    BELOW_QUANTUM_MINIMUM = "below_quantum_minimum"
    REGION_I = "region_i"
    REGION_II = "region_ii"


def regularized_distance(dx, l_c: float):
    """Cutoff-regularized separation sqrt(|dx|^2 + l_c^2).

    ``dx`` is a coordinate difference of shape (..., 3); broadcasting
    over leading axes.  Always >= l_c, which bounds 1/d at the cutoff
    scale.
    """
    dx = np.asarray(dx, dtype=float)
    return np.sqrt(np.sum(dx * dx, axis=-1) + l_c * l_c)


def phase(r, rbar, t: float, params: ModelParams):
    """Phase angle of the pair wavefunction, m^2 t / d(r - rbar).

    General-unit form (hbar/lambda_bar^2) * t / d.  Doubling t doubles
    the phase exactly (scaling by two is exact in floating point).
    """
    d = regularized_distance(np.asarray(r, dtype=float) - np.asarray(rbar, dtype=float), params.l_c)
    return (params.mass * params.mass) * t / d


def pair_wavefunction(r, rbar, t: float, params: ModelParams):
    """Particle-clone pair amplitude at time t.

    Psi = (2 pi sigma^2)^(-3/2) exp(-(r^2 + rbar^2)/(4 sigma^2)) e^{i theta}
    with theta = phase(r, rbar, t).  The modulus is t-independent: the
    interaction only winds phase.
    """
    r = np.asarray(r, dtype=float)
    rbar = np.asarray(rbar, dtype=float)
    sigma = params.sigma
    norm = (2.0 * math.pi * sigma * sigma) ** -1.5
    gauss = np.exp(-(np.sum(r * r, axis=-1) + np.sum(rbar * rbar, axis=-1)) / (4.0 * sigma * sigma))
    return norm * gauss * np.exp(1j * phase(r, rbar, t, params))


def bracket_b(sigma_tilde):
    """Growth coefficient B of the mean-square momentum, as a function
    of the width ratio sigma_tilde = sigma / l_c.

    B = sqrt(pi) (1 + 12 s^2 + 12 s^4) e^{1/(4 s^2)} erfc(1/(2 s))
        - 2 s (1 + 10 s^2)

    Evaluated as sqrt(pi) * P(s) * erfcx(1/(2s)) - Q(s) with the scaled
    complementary error function, which keeps relative error uniform
    over the whole domain (for s >= 1 the exponent is <= 1/4, so
    overflow is impossible either way).  B ~ 12 sqrt(pi) s^4 as
    s -> infinity.
    """
    s = np.asarray(sigma_tilde, dtype=float)
    if np.any(~np.isfinite(s)) or np.any(s <= 0.0):
        raise InvalidParameterError("sigma_tilde must be finite and > 0")
    s2 = s * s
    poly_p = 1.0 + 12.0 * s2 + 12.0 * s2 * s2
    poly_q = 2.0 * s * (1.0 + 10.0 * s2)
    out = math.sqrt(math.pi) * poly_p * erfcx(1.0 / (2.0 * s)) - poly_q
    return out if out.ndim else float(out)


def msq_position(params: ModelParams) -> float:
    """Mean-square position <r^2> = 3 sigma^2, constant in time."""
    return 3.0 * params.sigma * params.sigma


def msq_momentum(t: float, params: ModelParams) -> float:
    """Mean-square momentum of the reduced particle state at time t.

    <p^2> = (3 / (4 sigma^2)) * {1 + t^2 B(sigma_tilde)
            / (96 lambda_bar^4 sigma_tilde^5 l_c^2)}

    (general-unit form carries 3 hbar^2/4 sigma^2 outside and
    hbar^2 t^2 inside the braces).  Equal to 3/(4 sigma^2) at t = 0 and
    strictly increasing in t.
    """
    sigma = params.sigma
    lam = 1.0 / params.mass
    st = sigma / params.l_c
    growth = t * t * bracket_b(st) / (96.0 * lam**4 * st**5 * params.l_c**2)
    return (3.0 / (4.0 * sigma * sigma)) * (1.0 + growth)


def kinetic_over_potential(t: float, params: ModelParams) -> float:
    """Kinetic-to-potential ratio K/|U| of the particle-clone pair.

    K ~ 2 <p^2>/(2 m) = lambda_bar <p^2> (the factor 2 counts particle
    and clone) and |U| ~ m^2 / sqrt(<r^2>) with sqrt(<r^2>) =
    sqrt(3) sigma, so the ratio is sqrt(3) lambda_bar^3 sigma <p^2>.
    Uses the unregularized |U| estimate, consistent with sigma >> l_c
    in the validated region.
    """
    lam = 1.0 / params.mass
    return SQRT3 * lam**3 * params.sigma * msq_momentum(t, params)


def sigma_b_of_mass(mass: float) -> float:
    """Balance width sigma_B = (3 sqrt(3) / 2) lambda_bar^3.

    The width at which K/|U| = 1/2 at t = 0; the boundary between
    region I and region II.  Depends only on the mass.
    """
    lam = 1.0 / mass
    return 1.5 * SQRT3 * lam**3


def sigma_b(params: ModelParams) -> float:
    """Balance width for the given parameters (mass alone decides)."""
    return sigma_b_of_mass(params.mass)


def t_f(params: ModelParams) -> float:
    """Final validity time: K/|U| grows from its t = 0 value to 1/2.

    t_F = l_c * sqrt( 64 sigma_tilde^5 (lambda_bar l_c)
                      ((sigma - sigma_B)/l_c) / (sqrt(3) B(sigma_tilde)) )

    Requires sigma > sigma_B; the root of
    kinetic_over_potential(t) = 1/2 coincides with this closed form.
    """
    sb = sigma_b(params)
    if not params.sigma > sb:
        raise NoEvolutionWindowError(
            f"sigma = {params.sigma!r} <= sigma_B = {sb!r}: no evolution window"
        )
    lam = 1.0 / params.mass
    l_c = params.l_c
    st = params.sigma / l_c
    num = 64.0 * st**5 * (lam * l_c) * ((params.sigma - sb) / l_c)
    den = SQRT3 * bracket_b(st)
    return l_c * math.sqrt(num / den)


def classify_region(params: ModelParams) -> RegionLabel:
    """Classify a parameter point, first matching label wins.

    Precedence: mu > 1 -> BEYOND_CUT; sigma/l_c <= 1 -> HATCHED;
    sigma/lambda_bar < 1/2 -> BELOW_QUANTUM_MINIMUM; sigma <= sigma_B
    -> REGION_I; otherwise REGION_II.

    Boundary ties: mu = 1 and sigma/lambda_bar = 1/2 are allowed,
    sigma/l_c = 1 is hatched, sigma = sigma_B is region I (t_F = 0, so
    there is no evolution window there).
    """
    mu = params.mass * params.l_c
    if mu > 1.0:
        return RegionLabel.BEYOND_CUT
    if params.sigma <= params.l_c:
        return RegionLabel.HATCHED
    if params.sigma * params.mass < 0.5:  # sigma / lambda_bar < 1/2
        return RegionLabel.BELOW_QUANTUM_MINIMUM
    if params.sigma <= sigma_b(params):
        return RegionLabel.REGION_I
    return RegionLabel.REGION_II
