"""Planck-unit parameter handling and SI conversion.

Every computation in this package happens in Planck units (hbar = c =
G = 1), so lengths, masses and times are plain floats.  The only place
SI values appear is the display helper :func:`to_si`; they never feed
back into any calculation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "PLANCK_LENGTH_M",
    "PLANCK_MASS_KG",
    "PLANCK_TIME_S",
    "InvalidParameterError",
    "ModelParams",
    "DerivedScales",
    "SigmaSpec",
    "SIGMA_MODES",
    "derive",
    "resolve_sigma",
    "to_si",
]

# CODATA 2018 Planck scales, fixed as constants so reports are reproducible.
PLANCK_LENGTH_M = 1.616255e-35
PLANCK_MASS_KG = 2.176434e-8
PLANCK_TIME_S = 5.391247e-44

_SI_FACTORS = {
    "length": (PLANCK_LENGTH_M, "m"),
    "mass": (PLANCK_MASS_KG, "kg"),
    "time": (PLANCK_TIME_S, "s"),
}


class InvalidParameterError(ValueError):
    """A model parameter is non-positive, non-finite, or malformed."""


def _check_positive_finite(name: str, value: float) -> float:
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise InvalidParameterError(f"{name} must be a real number, got {value!r}")
    if not math.isfinite(value) or value <= 0.0:
        raise InvalidParameterError(f"{name} must be finite and > 0, got {value!r}")
    return value


@dataclass(frozen=True)
class ModelParams:
    """A physical point (l_c, mass, sigma) in Planck units.

    Only positivity and finiteness are enforced here.  Whether a point
    lies in the physically allowed region is the region classifier's
    job, so that boundary curves themselves can be evaluated on
    out-of-region points.

    Attributes
    ----------
    l_c : float
        Short-distance cutoff length [Planck lengths].
    mass : float
        Particle mass [Planck masses].
    sigma : float
        Standard deviation of the initial Gaussian wavepacket
        [Planck lengths].
    """

    l_c: float
    mass: float
    sigma: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "l_c", _check_positive_finite("l_c", self.l_c))
        object.__setattr__(self, "mass", _check_positive_finite("mass", self.mass))
        object.__setattr__(self, "sigma", _check_positive_finite("sigma", self.sigma))


@dataclass(frozen=True)
class DerivedScales:
    """Secondary scales implied by a :class:`ModelParams` point.

    lambda_bar = 1/mass   (reduced Compton wavelength, hbar = 1)
    m_c        = 1/l_c    (cut mass scale)
    sigma_tilde = sigma/l_c
    mu         = mass/m_c = mass * l_c
    """

    lambda_bar: float
    m_c: float
    sigma_tilde: float
    mu: float


SIGMA_MODES = ("absolute", "multiple_of_sigma_b", "multiple_of_lambda_bar")


@dataclass(frozen=True)
class SigmaSpec:
    """A wavepacket width given either absolutely or as a multiple.

    mode is one of ``absolute`` (value in Planck lengths),
    ``multiple_of_sigma_b`` (value times the kinetic/potential balance
    width sigma_B of the given mass) or ``multiple_of_lambda_bar``
    (value times 1/mass).
    """

    mode: str
    value: float

    def __post_init__(self) -> None:
        if self.mode not in SIGMA_MODES:
            raise InvalidParameterError(
                f"sigma mode must be one of {SIGMA_MODES}, got {self.mode!r}"
            )
        object.__setattr__(self, "value", _check_positive_finite("sigma value", self.value))


def derive(params: ModelParams) -> DerivedScales:
    """Derive all secondary scales from a parameter point.

    Pure function: identical inputs give bitwise-identical outputs.
    """
    return DerivedScales(
        lambda_bar=1.0 / params.mass,
        m_c=1.0 / params.l_c,
        sigma_tilde=params.sigma / params.l_c,
        mu=params.mass * params.l_c,
    )


def resolve_sigma(spec: SigmaSpec, l_c: float, mass: float) -> float:
    """Resolve a :class:`SigmaSpec` to an absolute width in Planck lengths."""
    l_c = _check_positive_finite("l_c", l_c)
    mass = _check_positive_finite("mass", mass)
    if spec.mode == "absolute":
        return spec.value
    if spec.mode == "multiple_of_lambda_bar":
        return spec.value * (1.0 / mass)
    # import here: closedform owns sigma_b and itself imports this module
    from .closedform import sigma_b_of_mass

    return spec.value * sigma_b_of_mass(mass)


def to_si(value: float, kind: str) -> tuple[float, str]:
    """Convert a Planck-unit value to SI for display.

    Returns the SI value and its unit string.  Display only; SI values
    are never used in computation.
    """
    if kind not in _SI_FACTORS:
        raise InvalidParameterError(
            f"unknown quantity kind {kind!r}; expected one of {tuple(_SI_FACTORS)}"
        )
    factor, unit = _SI_FACTORS[kind]
    return float(value) * factor, unit
