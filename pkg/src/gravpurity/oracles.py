"""Independent verification oracles.

Each oracle recomputes a quantity of the model along a route that
shares nothing with its closed-form or Monte-Carlo counterpart beyond
the elementary kernels in :mod:`gravpurity.closedform`, so agreement is
evidence rather than tautology:

* a randomized quasi-Monte-Carlo (scrambled Sobol) second estimator of
  the purity, using the same inverse-CDF transport map as the plain
  sampler but a low-discrepancy point set;
* a 1-D radial quadrature for the mean-square-momentum growth, built on
  the identity <p^2>(t) - <p^2>(0) = m^4 t^2 J with
  J = E[u^2 / (u^2 + l_c^2)^3] over the Maxwell-distributed distance u
  of two Gaussian points (per-component variance 2 sigma^2); the
  identity follows from |grad Psi|^2 = |Psi|^2 [r^2/(4 sigma^4)
  + m^4 t^2 f'(u)^2] with f(u) = (u^2 + l_c^2)^(-1/2);
* a bracketed root finder for the validity time t_F;
* a deterministic Gauss-Hermite probe of the reduced density matrix and
  a fully deterministic nested quadrature of the 12-D purity integral,
  reduced to (|r|, |r'|, cos gamma) by rotational invariance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq
from scipy.stats import qmc

from . import closedform, mcpurity
from .closedform import KU_THRESHOLD, NoEvolutionWindowError
from .mcpurity import McConfig, PurityEstimate, normals_from_uniforms
from .units import InvalidParameterError, ModelParams

__all__ = [
    "QuadConfig",
    "OracleReport",
    "QuadraturePurity",
    "QuadratureError",
    "BudgetExceededError",
    "rqmc_purity",
    "radial_j_integral",
    "radial_msq_excess",
    "tf_rootfind",
    "density_matrix_element",
    "rho_trace",
    "rho_msq_position",
    "quadrature_purity",
    "run_all",
]

_EVAL_BUDGET = 1_200_000_000  # complex kernel evaluations per nested quadrature
_SLAB = 1 << 14  # inner-node slab size bounding matmul memory


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to converge; message carries diagnostics."""


class BudgetExceededError(RuntimeError):
    """Requested nested quadrature exceeds the evaluation budget."""


@dataclass(frozen=True)
class QuadConfig:
    """Grid sizes and tolerances for the deterministic oracles.

    ``nodes_per_dim`` is the inner Gauss-Hermite count per axis,
    ``outer_nodes`` the outer radial/angular count, ``abs_tol`` the
    acceptance tolerance applied to unit-scale identity checks.
    """

    nodes_per_dim: int = 24
    outer_nodes: int = 20
    rqmc_points: int = 2**14
    rqmc_shifts: int = 16
    abs_tol: float = 1e-6
    seed: int = 20250810

    def __post_init__(self) -> None:
        if self.nodes_per_dim < 8:
            raise InvalidParameterError("nodes_per_dim must be >= 8")
        if self.rqmc_shifts < 8:
            raise InvalidParameterError("rqmc_shifts must be >= 8")
        if self.rqmc_points < 2:
            raise InvalidParameterError("rqmc_points must be >= 2")
        if self.outer_nodes < 4:
            raise InvalidParameterError("outer_nodes must be >= 4")


@dataclass(frozen=True)
class OracleReport:
    """Outcome of one oracle comparison; pure data, manifest-ready."""

    name: str
    reference_value: float
    candidate_value: float
    discrepancy: float
    tolerance: float
    passed: bool = field(init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "passed", abs(self.discrepancy) <= self.tolerance)


@dataclass(frozen=True)
class QuadraturePurity:
    """Nested-quadrature purity value with a grid-refinement error proxy."""

    value: float
    refine_delta: float
    nodes_inner: int
    nodes_outer: int


# ---------------------------------------------------------------------------
# randomized quasi-Monte-Carlo purity estimator
# ---------------------------------------------------------------------------


def _delta_f(z: np.ndarray, params: ModelParams) -> np.ndarray:
    # own four-term evaluation (not mcpurity's), sharing only the
    # regularized-distance primitive
    d = closedform.regularized_distance
    l_c = params.l_c
    r, rp, rb, rbp = z[:, 0], z[:, 1], z[:, 2], z[:, 3]
    return (1.0 / d(r - rb, l_c) - 1.0 / d(rp - rb, l_c)) - (
        1.0 / d(r - rbp, l_c) - 1.0 / d(rp - rbp, l_c)
    )


def rqmc_purity(t: float, params: ModelParams, cfg: QuadConfig, *, force: bool = False) -> PurityEstimate:
    """Purity estimate from scrambled-Sobol point sets.

    ``rqmc_shifts`` independent scramblings of a 12-D Sobol set are
    pushed through the same inverse-CDF transport as the plain sampler;
    the spread of the per-scrambling means gives the standard error.
    """
    if t < 0.0:
        raise InvalidParameterError("t must be >= 0")
    if not force:
        mcpurity._require_region_ii(params, t)
    m2 = max(1, math.ceil(math.log2(cfg.rqmc_points)))
    n_pts = 2**m2
    m2t = params.mass * params.mass * t
    cos_means: list[float] = []
    sin_means: list[float] = []
    for child in np.random.SeedSequence(cfg.seed).spawn(cfg.rqmc_shifts):
        eng = qmc.Sobol(d=12, scramble=True, seed=np.random.default_rng(child))
        u = eng.random_base2(m2)
        z = normals_from_uniforms(u).reshape(-1, 4, 3) * params.sigma
        phi = m2t * _delta_f(z, params)
        cos_means.append(math.fsum(np.cos(phi)) / n_pts)
        sin_means.append(math.fsum(np.sin(phi)) / n_pts)
    k = cfg.rqmc_shifts
    eta = math.fsum(cos_means) / k
    imag = math.fsum(sin_means) / k
    se = math.sqrt(math.fsum((c - eta) ** 2 for c in cos_means) / (k - 1) / k)
    imag_se = math.sqrt(math.fsum((s - imag) ** 2 for s in sin_means) / (k - 1) / k)
    return PurityEstimate(eta=eta, std_error=se, n=k * n_pts, imag_part=imag, imag_se=imag_se, t=t)


# ---------------------------------------------------------------------------
# radial quadrature for the mean-square-momentum growth
# ---------------------------------------------------------------------------


def radial_j_integral(params: ModelParams, cfg: QuadConfig | None = None) -> float:
    """J = integral_0^inf p(u) u^2 / (u^2 + l_c^2)^3 du.

    p(u) is the Maxwell density of the distance between two isotropic
    Gaussian points, per-component variance 2 sigma^2.
    """
    l_c = params.l_c
    s2 = 2.0 * params.sigma * params.sigma  # Maxwell scale^2
    s = math.sqrt(s2)
    norm = math.sqrt(2.0 / math.pi) / (s2 * s)

    def integrand(u: float) -> float:
        d2 = u * u + l_c * l_c
        return norm * u**4 * math.exp(-u * u / (2.0 * s2)) / (d2 * d2 * d2)

    u_hi = 12.0 * l_c + 30.0 * s  # Gaussian tail beyond is < e^-450
    breaks = sorted({min(l_c, u_hi * 0.5), min(s, u_hi * 0.5), min(2.0 * s, u_hi * 0.9)})
    value, abserr = quad(integrand, 0.0, u_hi, points=breaks, limit=400, epsabs=0.0, epsrel=1e-12)
    if not math.isfinite(value) or (value != 0.0 and abserr > 1e-9 * abs(value)):
        raise QuadratureError(
            f"radial J quadrature did not converge: value={value!r}, abserr={abserr!r}, "
            f"sigma={params.sigma!r}, l_c={l_c!r}"
        )
    return value


def radial_msq_excess(t: float, params: ModelParams, cfg: QuadConfig | None = None) -> float:
    """<p^2>(t) - <p^2>(0) = m^4 t^2 J, J by adaptive radial quadrature."""
    if t < 0.0:
        raise InvalidParameterError("t must be >= 0")
    if t == 0.0:
        return 0.0
    return params.mass**4 * t * t * radial_j_integral(params, cfg)


# ---------------------------------------------------------------------------
# root-finding oracle for the validity time
# ---------------------------------------------------------------------------


def tf_rootfind(params: ModelParams) -> float:
    """Bracketed root of kinetic_over_potential(t) = 1/2.

    The upper bracket grows geometrically until the ratio exceeds the
    threshold; the ratio is strictly increasing in t, so the root is
    unique.  Fails like t_f when sigma <= sigma_B.
    """
    ratio0 = closedform.kinetic_over_potential(0.0, params)
    if ratio0 >= KU_THRESHOLD:
        raise NoEvolutionWindowError(
            f"K/|U| = {ratio0!r} >= {KU_THRESHOLD} already at t = 0"
        )
    t_hi = params.l_c
    for _ in range(400):
        if closedform.kinetic_over_potential(t_hi, params) > KU_THRESHOLD:
            break
        t_hi *= 2.0
    else:
        raise QuadratureError("could not bracket the K/|U| threshold crossing")
    return brentq(
        lambda t: closedform.kinetic_over_potential(t, params) - KU_THRESHOLD,
        0.0,
        t_hi,
        xtol=1e-300,
        rtol=1e-13,
        maxiter=300,
    )


# ---------------------------------------------------------------------------
# Gauss-Hermite density-matrix probe
# ---------------------------------------------------------------------------


@lru_cache(maxsize=16)
def _gh_nodes(n: int) -> tuple[np.ndarray, np.ndarray]:
    return np.polynomial.hermite.hermgauss(n)


@lru_cache(maxsize=8)
def _gh_grid3(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Flattened 3-D Gauss-Hermite grid (n^3, 3) and product weights."""
    x, w = _gh_nodes(n)
    gx, gy, gz = np.meshgrid(x, x, x, indexing="ij")
    nodes = np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)
    weights = (w[:, None, None] * w[None, :, None] * w[None, None, :]).ravel()
    return nodes, weights


def density_matrix_element(r, rp, t: float, params: ModelParams, cfg: QuadConfig) -> complex:
    """rho(r, r', t) by 3-D Gauss-Hermite integration over the clone.

    rho(r, r', t) = integral d3rbar Psi(r, rbar, t) Psi*(r', rbar, t).
    Hermitian by construction: swapping r and r' conjugates the value
    exactly.
    """
    r = np.asarray(r, dtype=float)
    rp = np.asarray(rp, dtype=float)
    sigma = params.sigma
    nodes, weights = _gh_grid3(cfg.nodes_per_dim)
    rbar = math.sqrt(2.0) * sigma * nodes
    d = closedform.regularized_distance
    dtheta = (params.mass * params.mass * t) * (
        1.0 / d(r[None, :] - rbar, params.l_c) - 1.0 / d(rp[None, :] - rbar, params.l_c)
    )
    s = complex(np.sum(weights * np.cos(dtheta)), np.sum(weights * np.sin(dtheta)))
    prefactor = 2.0**1.5 / (8.0 * math.pi**3 * sigma**3)
    gauss = math.exp(-(float(r @ r) + float(rp @ rp)) / (4.0 * sigma * sigma))
    return prefactor * gauss * s


def _diagonal_radial_moment(power: int, t: float, params: ModelParams, cfg: QuadConfig) -> float:
    """4 pi integral r^(2+power) rho(r, r, t) dr via half-range Hermite."""
    sigma = params.sigma
    x, w = _gh_nodes(cfg.outer_nodes)
    pos = x > 0.0
    a, wa = x[pos], w[pos]
    scale = math.sqrt(2.0) * sigma
    total = 0.0
    for ai, wi in zip(a, wa):
        point = np.array([0.0, 0.0, scale * ai])
        rho = density_matrix_element(point, point, t, params, cfg)
        # divide the sampled Gaussian back out: rho carries e^{-a^2}
        total += wi * ai ** (2 + power) * rho.real * math.exp(ai * ai)
    return 4.0 * math.pi * scale ** (3 + power) * total


def rho_trace(t: float, params: ModelParams, cfg: QuadConfig) -> float:
    """integral d3r rho(r, r, t); equals 1 for a normalized state."""
    return _diagonal_radial_moment(0, t, params, cfg)


def rho_msq_position(t: float, params: ModelParams, cfg: QuadConfig) -> float:
    """integral d3r r^2 rho(r, r, t); equals 3 sigma^2 at all times."""
    return _diagonal_radial_moment(2, t, params, cfg)


# ---------------------------------------------------------------------------
# deterministic nested quadrature of the purity integral
# ---------------------------------------------------------------------------


def _eta_nested(t: float, params: ModelParams, n_inner: int, n_outer: int) -> float:
    """eta(t) by rotational reduction to (|r|, |r'|, cos gamma).

    With a = |r|/(sqrt(2) sigma), b = |r'|/(sqrt(2) sigma) and
    c = cos gamma,

        eta = (8 / pi^4) int da db dc a^2 b^2 e^{-a^2 - b^2} |S(a,b,c)|^2,

    where S is the inner 3-D Gauss-Hermite integral over the clone.
    The inner sum is evaluated as a complex matrix product, sliced into
    node slabs to bound memory.
    """
    sigma = params.sigma
    l_c2 = params.l_c * params.l_c
    m2t = params.mass * params.mass * t
    scale = math.sqrt(2.0) * sigma

    nodes, weights = _gh_grid3(n_inner)
    rbar = scale * nodes  # (M, 3)

    x, w = _gh_nodes(n_outer)
    pos = x > 0.0
    a, wa = x[pos], w[pos]  # half-range radial nodes for |r| and |r'|
    cg, cw = np.polynomial.legendre.leggauss(n_outer)

    # r along z: distances to the clone grid depend on a only
    ra = scale * a
    d1 = np.sqrt(rbar[None, :, 0] ** 2 + rbar[None, :, 1] ** 2 + (ra[:, None] - rbar[None, :, 2]) ** 2 + l_c2)

    # r' in the xz-plane at angle gamma: one row per (b, c) pair
    sing = np.sqrt(np.clip(1.0 - cg * cg, 0.0, None))
    rpx = (scale * a)[:, None] * sing[None, :]
    rpz = (scale * a)[:, None] * cg[None, :]
    rp = np.stack([rpx.ravel(), np.zeros(rpx.size), rpz.ravel()], axis=1)  # (B*C, 3)
    d2 = np.sqrt(
        (rp[:, 0:1] - rbar[None, :, 0]) ** 2
        + (rp[:, 1:2] - rbar[None, :, 1]) ** 2
        + (rp[:, 2:3] - rbar[None, :, 2]) ** 2
        + l_c2
    )

    n_a, n_bc, n_m = d1.shape[0], d2.shape[0], rbar.shape[0]
    s_mat = np.zeros((n_a, n_bc), dtype=complex)
    for lo in range(0, n_m, _SLAB):
        hi = min(lo + _SLAB, n_m)
        e1 = np.exp(1j * (m2t / d1[:, lo:hi])) * weights[None, lo:hi]
        e2 = np.exp(-1j * (m2t / d2[:, lo:hi]))
        s_mat += e1 @ e2.T

    s_abs2 = (s_mat.real**2 + s_mat.imag**2).reshape(n_a, len(a), len(cg))
    w_rad = wa * a * a
    return float(8.0 / math.pi**4 * np.einsum("i,j,k,ijk->", w_rad, w_rad, cw, s_abs2))


def quadrature_purity(t: float, params: ModelParams, cfg: QuadConfig, *, force: bool = False) -> QuadraturePurity:
    """Deterministic nested-quadrature purity with a refinement proxy.

    The value is computed at ``nodes_per_dim``; the difference against
    a half-resolution inner grid is reported as ``refine_delta``.
    Intended for coarse cross-validation of the Monte-Carlo estimators.
    """
    if t < 0.0:
        raise InvalidParameterError("t must be >= 0")
    if not force:
        mcpurity._require_region_ii(params, t)
    n = cfg.nodes_per_dim
    n_half = max(8, n // 2)
    half_outer = (cfg.outer_nodes + 1) // 2
    evals = half_outer * (half_outer * cfg.outer_nodes) * n**3
    if evals > _EVAL_BUDGET:
        raise BudgetExceededError(
            f"nested quadrature needs ~{evals:.2e} kernel evaluations, budget {_EVAL_BUDGET:.2e}"
        )
    coarse = _eta_nested(t, params, n_half, cfg.outer_nodes)
    value = _eta_nested(t, params, n, cfg.outer_nodes)
    return QuadraturePurity(
        value=value,
        refine_delta=abs(value - coarse),
        nodes_inner=n,
        nodes_outer=cfg.outer_nodes,
    )


# ---------------------------------------------------------------------------
# oracle suite
# ---------------------------------------------------------------------------


def _reference_point() -> ModelParams:
    mass, l_c = 0.5, 1.0
    return ModelParams(l_c=l_c, mass=mass, sigma=30.0 * closedform.sigma_b_of_mass(mass))


def run_all(
    params: ModelParams | None = None,
    mc: McConfig | None = None,
    quad_cfg: QuadConfig | None = None,
    only: str | None = None,
) -> list[OracleReport]:
    """Run the verification suite and return one report per check.

    ``only`` restricts the suite to checks whose name contains the
    given substring.
    """
    params = params if params is not None else _reference_point()
    mc = mc if mc is not None else McConfig(seed=20250810, target_se=5e-4)
    quad_cfg = quad_cfg if quad_cfg is not None else QuadConfig()
    reports: list[OracleReport] = []

    def wanted(name: str) -> bool:
        return only is None or only in name

    scales_tf = closedform.t_f(params)
    t_probe = 0.5 * scales_tf

    if wanted("bracket_positive_sweep"):
        grid = np.geomspace(1.0, 1e6, 200)
        min_b = float(np.min(closedform.bracket_b(grid)))
        reports.append(
            OracleReport(
                name="bracket_positive_sweep",
                reference_value=0.0,
                candidate_value=min_b,
                discrepancy=min(min_b, 0.0),
                tolerance=0.0,
            )
        )

    if wanted("msq_momentum_vs_radial_quadrature"):
        candidate = closedform.msq_momentum(t_probe, params)
        reference = closedform.msq_momentum(0.0, params) + radial_msq_excess(t_probe, params, quad_cfg)
        reports.append(
            OracleReport(
                name="msq_momentum_vs_radial_quadrature",
                reference_value=reference,
                candidate_value=candidate,
                discrepancy=(candidate - reference) / reference,
                tolerance=1e-8,
            )
        )

    if wanted("bracket_identity_128"):
        st = params.sigma / params.l_c
        candidate = closedform.bracket_b(st)
        reference = 128.0 * st**7 * params.l_c**4 * radial_j_integral(params, quad_cfg)
        reports.append(
            OracleReport(
                name="bracket_identity_128",
                reference_value=reference,
                candidate_value=candidate,
                discrepancy=(candidate - reference) / reference,
                tolerance=1e-8,
            )
        )

    if wanted("tf_closed_form_vs_rootfind"):
        root = tf_rootfind(params)
        reports.append(
            OracleReport(
                name="tf_closed_form_vs_rootfind",
                reference_value=root,
                candidate_value=scales_tf,
                discrepancy=(scales_tf - root) / root,
                tolerance=1e-9,
            )
        )

    if wanted("ku_ratio_residual_at_tf"):
        ratio = closedform.kinetic_over_potential(scales_tf, params)
        reports.append(
            OracleReport(
                name="ku_ratio_residual_at_tf",
                reference_value=KU_THRESHOLD,
                candidate_value=ratio,
                discrepancy=ratio - KU_THRESHOLD,
                tolerance=1e-9,
            )
        )

    if wanted("rho_trace_unit"):
        trace = rho_trace(t_probe, params, quad_cfg)
        reports.append(
            OracleReport(
                name="rho_trace_unit",
                reference_value=1.0,
                candidate_value=trace,
                discrepancy=trace - 1.0,
                tolerance=1e-3,
            )
        )

    if wanted("rho_hermiticity"):
        rng = np.random.Generator(np.random.Philox(key=quad_cfg.seed))
        defect = 0.0
        for _ in range(8):
            r = params.sigma * rng.standard_normal(3)
            rp = params.sigma * rng.standard_normal(3)
            a = density_matrix_element(r, rp, t_probe, params, quad_cfg)
            b = density_matrix_element(rp, r, t_probe, params, quad_cfg)
            defect = max(defect, abs(a - b.conjugate()))
        reports.append(
            OracleReport(
                name="rho_hermiticity",
                reference_value=0.0,
                candidate_value=defect,
                discrepancy=defect,
                tolerance=1e-10,
            )
        )

    if wanted("rho_msq_position"):
        msq = rho_msq_position(t_probe, params, quad_cfg)
        expected = closedform.msq_position(params)
        reports.append(
            OracleReport(
                name="rho_msq_position",
                reference_value=expected,
                candidate_value=msq,
                discrepancy=(msq - expected) / expected,
                tolerance=1e-3,
            )
        )

    if wanted("purity_t0_exact"):
        est = rqmc_purity(0.0, params, quad_cfg)
        reports.append(
            OracleReport(
                name="purity_t0_exact",
                reference_value=1.0,
                candidate_value=est.eta,
                discrepancy=est.eta - 1.0,
                tolerance=0.0,
            )
        )

    if wanted("mc_vs_rqmc_purity"):
        est_mc = mcpurity.estimate_purity(t_probe, params, mc)
        est_q = rqmc_purity(t_probe, params, quad_cfg)
        diff = est_mc.eta - est_q.eta
        tol = 3.0 * math.hypot(est_mc.std_error, est_q.std_error)
        reports.append(
            OracleReport(
                name="mc_vs_rqmc_purity",
                reference_value=est_q.eta,
                candidate_value=est_mc.eta,
                discrepancy=diff,
                tolerance=tol,
            )
        )

    if wanted("mc_vs_nested_quadrature"):
        est_mc = mcpurity.estimate_purity(t_probe, params, mc)
        nested = quadrature_purity(t_probe, params, quad_cfg)
        diff = est_mc.eta - nested.value
        tol = max(0.02, 3.0 * est_mc.std_error)
        reports.append(
            OracleReport(
                name="mc_vs_nested_quadrature",
                reference_value=nested.value,
                candidate_value=est_mc.eta,
                discrepancy=diff,
                tolerance=tol,
            )
        )

    return reports
