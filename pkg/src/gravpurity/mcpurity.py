"""Monte-Carlo estimator of the purity eta(t) with rigorous error bars.

The purity of the reduced particle state,

    eta(t) = integral d3r d3r' |rho(r, r', t)|^2,

expands into a 12-D integral whose Gaussian factor is exactly the
product density of four independent 3-D normal vectors r, r', rbar,
rbar' with per-component variance sigma^2 (the |Psi|^4 prefactor equals
(2 pi sigma^2)^-6, the product normalization).  What remains of the
integrand is exp(i phi) with phi = m^2 t Delta f and

    Delta f = 1/d(r,rbar) - 1/d(r',rbar) - 1/d(r,rbar') + 1/d(r',rbar'),

all distances cutoff-regularized.  Swapping r and r' negates Delta f,
so the expectation of sin(phi) vanishes and eta(t) = E[cos phi].  The
estimator therefore draws four Gaussian points per sample and averages
cos(phi) with no importance weights.  (Full derivation in the README.)

Reproducibility contract: samples come from counter-based Philox
streams keyed by (seed, stream, chunk index), normals are produced by
inverse-CDF on an exactly symmetric uniform lattice, per-chunk sums use
exact compensated summation and chunks are merged by fixed-order
pairwise summation.  Results are therefore bitwise identical across
runs and across worker counts.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import ndtri

from .closedform import RegionLabel, classify_region, t_f
from .units import InvalidParameterError, ModelParams

__all__ = [
    "RegionViolationError",
    "McConfig",
    "PurityEstimate",
    "PurityCurve",
    "Estimate",
    "normals_from_uniforms",
    "phase_delta",
    "estimate_purity",
    "purity_curve",
    "final_purity",
    "short_time_coefficient",
]

# Stream ids keep independent operations on non-overlapping Philox keys:
# single estimates use stream 0, curve point i uses 1 + i, and the
# short-time coefficient draws from its own block.
STREAM_SHORT_TIME = 1 << 20

_U_LOW = 2.0**-64
_U_HIGH = 1.0 - 2.0**-53


class RegionViolationError(RuntimeError):
    """Estimate requested outside region II without an explicit override."""


@dataclass(frozen=True)
class McConfig:
    """Sampling configuration for the purity estimator.

    Either ``n_samples`` fixes the sample count, or ``target_se`` makes
    the estimator add chunks until the standard error drops to the
    target (capped at ``n_cap`` samples; hitting the cap flags the
    estimate as partial).  ``chunk_size`` is the unit of work and of
    RNG keying; ``workers`` only parallelizes, never changes results.
    """

    seed: int = 20250810
    n_samples: int | None = None
    target_se: float = 1e-3
    n_cap: int = 10**8
    chunk_size: int = 2**16
    workers: int = 1
    antithetic: bool = True

    def __post_init__(self) -> None:
        if self.chunk_size < 1:
            raise InvalidParameterError("chunk_size must be >= 1")
        if self.workers < 1:
            raise InvalidParameterError("workers must be >= 1")
        if self.n_samples is not None:
            if self.n_samples < 1:
                raise InvalidParameterError("n_samples must be >= 1")
        else:
            if not self.target_se > 0.0:
                raise InvalidParameterError("target_se must be > 0 when n_samples is unset")
            if self.n_cap < self.chunk_size:
                raise InvalidParameterError("n_cap must be >= chunk_size")


@dataclass(frozen=True)
class PurityEstimate:
    """eta(t) estimate with its sampling diagnostics.

    ``std_error`` is the sample standard deviation of cos(phi) over
    sqrt(n).  With antithetic pairing the sine channel cancels exactly
    and ``imag_part``/``imag_se`` are identically zero.  ``hit_cap``
    marks a partial result: the sample cap was exhausted before the
    requested standard error was reached.
    """

    eta: float
    std_error: float
    n: int
    imag_part: float
    imag_se: float
    t: float
    hit_cap: bool = False


@dataclass(frozen=True)
class Estimate:
    """A plain scalar Monte-Carlo estimate."""

    value: float
    std_error: float
    n: int


@dataclass(frozen=True)
class PurityCurve:
    """eta(t) sampled on a strictly increasing time grid."""

    params: ModelParams
    t_grid: tuple[float, ...]
    points: tuple[PurityEstimate, ...]


def normals_from_uniforms(u: np.ndarray) -> np.ndarray:
    """Inverse-CDF transport from (0, 1) uniforms to standard normals.

    The single map shared by the plain-MC and quasi-MC samplers, so both
    estimators integrate the identical transformed function.  Endpoints
    are clipped away from {0, 1} to keep ndtri finite.
    """
    return ndtri(np.clip(u, _U_LOW, _U_HIGH))


def _chunk_key(seed: int, stream: int, index: int) -> np.ndarray:
    # 2 x 64-bit Philox key; chunk indices stay below 2^32 for any
    # n_cap <= 2^32 samples even at chunk_size 1.
    return np.array([seed & 0xFFFFFFFFFFFFFFFF, (stream << 32) | index], dtype=np.uint64)


def _chunk_points(seed: int, stream: int, index: int, count: int, sigma: float) -> np.ndarray:
    """Draw ``count`` samples of four iid Gaussian 3-vectors, (count, 4, 3)."""
    gen = np.random.Generator(np.random.Philox(key=_chunk_key(seed, stream, index)))
    lattice = gen.integers(0, 1 << 53, size=(count, 4, 3), dtype=np.int64)
    # (k + 1/2) * 2^-53 is an exactly symmetric open-interval lattice
    u = (lattice + 0.5) * 2.0**-53
    return normals_from_uniforms(u) * sigma


def phase_delta(r, rp, rbar, rbarp, params: ModelParams):
    """Four-point combination Delta f entering the purity phase.

    Delta f = 1/d(r,rbar) - 1/d(r',rbar) - 1/d(r,rbar') + 1/d(r',rbar').
    Grouped as (f1 - f2) - (f3 - f4) so that both the r <-> r' and the
    rbar <-> rbar' swaps negate the result exactly, in floating point,
    and so that it vanishes exactly when r = r' or rbar = rbar'.
    """
    from .closedform import regularized_distance

    r = np.asarray(r, dtype=float)
    rp = np.asarray(rp, dtype=float)
    rbar = np.asarray(rbar, dtype=float)
    rbarp = np.asarray(rbarp, dtype=float)
    l_c = params.l_c
    f1 = 1.0 / regularized_distance(r - rbar, l_c)
    f2 = 1.0 / regularized_distance(rp - rbar, l_c)
    f3 = 1.0 / regularized_distance(r - rbarp, l_c)
    f4 = 1.0 / regularized_distance(rp - rbarp, l_c)
    return (f1 - f2) - (f3 - f4)


@dataclass(frozen=True)
class _ChunkStats:
    n: int
    sum_cos: float
    sumsq_cos: float
    sum_sin: float
    sumsq_sin: float


def _eval_chunk(t, params, cfg, stream, index, count) -> _ChunkStats:
    pts = _chunk_points(cfg.seed, stream, index, count, params.sigma)
    df = phase_delta(pts[:, 0], pts[:, 1], pts[:, 2], pts[:, 3], params)
    phi = (params.mass * params.mass) * t * df
    c = np.cos(phi)
    # exact compensated sums inside the chunk
    sum_cos = math.fsum(c)
    sumsq_cos = math.fsum(c * c)
    if cfg.antithetic:
        # pairing each sample with its r <-> r' swap repeats cos(phi)
        # and cancels sin(phi) exactly, so the sine channel is not
        # sampled at all
        sum_sin = 0.0
        sumsq_sin = 0.0
    else:
        s = np.sin(phi)
        sum_sin = math.fsum(s)
        sumsq_sin = math.fsum(s * s)
    return _ChunkStats(count, sum_cos, sumsq_cos, sum_sin, sumsq_sin)


def _pairwise_sum(values: list[float]) -> float:
    """Fixed-order pairwise reduction; independent of worker scheduling."""
    n = len(values)
    if n == 0:
        return 0.0
    if n == 1:
        return values[0]
    if n == 2:
        return values[0] + values[1]
    half = (n + 1) // 2
    return _pairwise_sum(values[:half]) + _pairwise_sum(values[half:])


def _mean_and_se(total: float, total_sq: float, n: int) -> tuple[float, float]:
    mean = total / n
    if n < 2:
        return mean, 0.0
    var = max(total_sq - total * total / n, 0.0) / (n - 1)
    return mean, math.sqrt(var / n)


def _chunk_sizes(cfg: McConfig) -> tuple[int, int]:
    """Total budget and chunk size for the current mode."""
    if cfg.n_samples is not None:
        return cfg.n_samples, min(cfg.chunk_size, cfg.n_samples)
    return cfg.n_cap, cfg.chunk_size


def _run_chunks(t, params, cfg, stream) -> tuple[list[_ChunkStats], bool]:
    """Evaluate chunks in index order until the stopping rule fires.

    The stopping decision is taken by scanning prefixes in chunk order,
    so it cannot depend on worker count or scheduling; extra chunks a
    wide batch may have computed past the stopping index are discarded.
    """
    budget, chunk = _chunk_sizes(cfg)
    n_chunks = (budget + chunk - 1) // chunk
    adaptive = cfg.n_samples is None

    sizes = [chunk] * n_chunks
    sizes[-1] = budget - chunk * (n_chunks - 1)

    def job(i: int) -> _ChunkStats:
        return _eval_chunk(t, params, cfg, stream, i, sizes[i])

    kept: list[_ChunkStats] = []
    hit_cap = False
    run_n, run_sum, run_sumsq = 0, 0.0, 0.0
    i = 0
    while i < n_chunks:
        batch = list(range(i, min(i + cfg.workers, n_chunks)))
        if cfg.workers > 1 and len(batch) > 1:
            with ThreadPoolExecutor(max_workers=cfg.workers) as ex:
                results = list(ex.map(job, batch))
        else:
            results = [job(j) for j in batch]
        stop = False
        for st in results:
            kept.append(st)
            run_n += st.n
            run_sum += st.sum_cos
            run_sumsq += st.sumsq_cos
            if adaptive:
                _, se = _mean_and_se(run_sum, run_sumsq, run_n)
                if run_n >= 2 and se <= cfg.target_se:
                    stop = True
                    break
        if stop:
            break
        i += len(batch)
    else:
        hit_cap = adaptive  # exhausted the cap without reaching target_se
    return kept, hit_cap


def _estimate_from_chunks(chunks: list[_ChunkStats], t: float, antithetic: bool, hit_cap: bool) -> PurityEstimate:
    n = sum(c.n for c in chunks)
    sum_cos = _pairwise_sum([c.sum_cos for c in chunks])
    sumsq_cos = _pairwise_sum([c.sumsq_cos for c in chunks])
    eta, se = _mean_and_se(sum_cos, sumsq_cos, n)
    if antithetic:
        imag, imag_se = 0.0, 0.0
    else:
        sum_sin = _pairwise_sum([c.sum_sin for c in chunks])
        sumsq_sin = _pairwise_sum([c.sumsq_sin for c in chunks])
        imag, imag_se = _mean_and_se(sum_sin, sumsq_sin, n)
    return PurityEstimate(eta=eta, std_error=se, n=n, imag_part=imag, imag_se=imag_se, t=t, hit_cap=hit_cap)


def _require_region_ii(params: ModelParams, t: float | None) -> None:
    label = classify_region(params)
    if label is not RegionLabel.REGION_II:
        raise RegionViolationError(
            f"parameters classify as {label.value}, not region_ii; pass force=True to override"
        )
    if t is not None and t > t_f(params):
        raise RegionViolationError(
            f"t = {t!r} exceeds the validity time t_F = {t_f(params)!r}; pass force=True to override"
        )


def estimate_purity(
    t: float,
    params: ModelParams,
    cfg: McConfig,
    *,
    force: bool = False,
    stream: int = 0,
) -> PurityEstimate:
    """Estimate eta(t) = E[cos(m^2 t Delta f)] over four iid Gaussians.

    Refuses parameters outside region II and times beyond t_F unless
    ``force`` is set.  Deterministic for fixed (seed, stream,
    chunk_size): eta is bitwise reproducible for any worker count.
    """
    if t < 0.0:
        raise InvalidParameterError("t must be >= 0")
    if not force:
        _require_region_ii(params, t)
    chunks, hit_cap = _run_chunks(t, params, cfg, stream)
    return _estimate_from_chunks(chunks, t, cfg.antithetic, hit_cap)


def purity_curve(
    t_grid,
    params: ModelParams,
    cfg: McConfig,
    *,
    force: bool = False,
) -> PurityCurve:
    """Estimate eta on a strictly increasing grid of times in (0, t_F].

    Each grid point draws from its own stream (1 + index), so curves
    are reproducible point by point.
    """
    grid = tuple(float(t) for t in t_grid)
    if not grid:
        raise InvalidParameterError("t_grid must be non-empty")
    if any(t <= 0.0 for t in grid):
        raise InvalidParameterError("t_grid values must be > 0")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise InvalidParameterError("t_grid must be strictly increasing")
    if not force:
        _require_region_ii(params, grid[-1])
    points = tuple(
        estimate_purity(t, params, cfg, force=True, stream=1 + i) for i, t in enumerate(grid)
    )
    return PurityCurve(params=params, t_grid=grid, points=points)


def final_purity(params: ModelParams, cfg: McConfig, *, force: bool = False) -> PurityEstimate:
    """eta_F = eta(t_F): the purity at the end of the validity window."""
    return estimate_purity(t_f(params), params, cfg, force=force)


def short_time_coefficient(params: ModelParams, cfg: McConfig, *, force: bool = False) -> Estimate:
    """Coefficient c2 of the short-time law 1 - eta(t) ~ c2 t^2.

    Expanding E[cos phi] to second order gives c2 = m^4 E[Delta f^2]/2,
    estimated here by plain Monte Carlo over Delta f^2 (the Delta f
    distribution itself is mass-independent).
    """
    if not force:
        _require_region_ii(params, None)
    n = cfg.n_samples if cfg.n_samples is not None else min(cfg.n_cap, 2**18)
    chunk = min(cfg.chunk_size, n)
    n_chunks = (n + chunk - 1) // chunk
    sizes = [chunk] * n_chunks
    sizes[-1] = n - chunk * (n_chunks - 1)
    sums: list[float] = []
    sumsqs: list[float] = []
    for i in range(n_chunks):
        pts = _chunk_points(cfg.seed, STREAM_SHORT_TIME, i, sizes[i], params.sigma)
        df2 = phase_delta(pts[:, 0], pts[:, 1], pts[:, 2], pts[:, 3], params) ** 2
        sums.append(math.fsum(df2))
        sumsqs.append(math.fsum(df2 * df2))
    mean, se = _mean_and_se(_pairwise_sum(sums), _pairwise_sum(sumsqs), n)
    scale = params.mass**4 / 2.0
    return Estimate(value=scale * mean, std_error=scale * se, n=n)


def sequential_config(cfg: McConfig) -> McConfig:
    """Copy of ``cfg`` with chunk-level parallelism disabled."""
    return replace(cfg, workers=1)
