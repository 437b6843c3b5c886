import dataclasses
import math

import numpy as np
import pytest

from gravpurity.closedform import sigma_b_of_mass, t_f
from gravpurity.mcpurity import (
    McConfig,
    RegionViolationError,
    estimate_purity,
    final_purity,
    phase_delta,
    purity_curve,
    short_time_coefficient,
)
from gravpurity.units import InvalidParameterError, ModelParams
from gravpurity import closedform


def _params(mass=0.5, l_c=1.0, sigma_sb=30.0):
    return ModelParams(l_c=l_c, mass=mass, sigma=sigma_sb * sigma_b_of_mass(mass))


# ---------------------------------------------------------------------------
# phase_delta
# ---------------------------------------------------------------------------


def test_phase_delta_vanishes_on_equal_points():
    params = _params()
    rng = np.random.default_rng(5)
    r = rng.normal(size=(40, 3))
    rbar = rng.normal(size=(40, 3))
    rbarp = rng.normal(size=(40, 3))
    assert np.all(phase_delta(r, r, rbar, rbarp, params) == 0.0)
    assert np.all(phase_delta(r, rbar, rbarp, rbarp, params) == 0.0)


def test_phase_delta_swap_antisymmetry_is_exact():
    params = _params()
    rng = np.random.default_rng(6)
    r, rp, rb, rbp = (rng.normal(size=(60, 3)) * params.sigma for _ in range(4))
    base = phase_delta(r, rp, rb, rbp, params)
    assert np.all(phase_delta(rp, r, rb, rbp, params) == -base)
    assert np.all(phase_delta(r, rp, rbp, rb, params) == -base)


def test_phase_delta_matches_direct_four_term_evaluation():
    params = _params()
    rng = np.random.default_rng(7)
    r, rp, rb, rbp = (rng.normal(size=(30, 3)) * params.sigma for _ in range(4))
    d = closedform.regularized_distance
    direct = (
        1.0 / d(r - rb, params.l_c)
        - 1.0 / d(rp - rb, params.l_c)
        - 1.0 / d(r - rbp, params.l_c)
        + 1.0 / d(rp - rbp, params.l_c)
    )
    assert phase_delta(r, rp, rb, rbp, params) == pytest.approx(direct, rel=1e-12)


# ---------------------------------------------------------------------------
# configuration validation
# ---------------------------------------------------------------------------


def test_mcconfig_validation():
    with pytest.raises(InvalidParameterError):
        McConfig(chunk_size=0)
    with pytest.raises(InvalidParameterError):
        McConfig(n_samples=0)
    with pytest.raises(InvalidParameterError):
        McConfig(target_se=0.0)
    with pytest.raises(InvalidParameterError):
        McConfig(target_se=1e-3, n_cap=100, chunk_size=200)
    with pytest.raises(InvalidParameterError):
        McConfig(workers=0)


# ---------------------------------------------------------------------------
# estimator basics
# ---------------------------------------------------------------------------


def test_eta_is_one_with_zero_variance_at_t0(reference_params, target_mc):
    est = estimate_purity(0.0, reference_params, target_mc)
    assert est.eta == 1.0
    assert est.std_error == 0.0
    assert est.imag_part == 0.0 and est.imag_se == 0.0


def test_estimates_are_deterministic(reference_params):
    tf = t_f(reference_params)
    for cfg in (McConfig(seed=11, n_samples=3 * 2**14), McConfig(seed=11, target_se=2e-3)):
        a = estimate_purity(tf / 3, reference_params, cfg)
        b = estimate_purity(tf / 3, reference_params, cfg)
        assert a == b


def test_eta_bitwise_identical_across_worker_counts(reference_params):
    tf = t_f(reference_params)
    results = []
    for workers in (1, 3, 7):
        cfg = McConfig(seed=13, n_samples=5 * 2**14, chunk_size=2**14, workers=workers)
        results.append(estimate_purity(tf / 2, reference_params, cfg))
    assert results[0].eta == results[1].eta == results[2].eta
    assert results[0].std_error == results[1].std_error == results[2].std_error
    # adaptive mode must stop at the same chunk regardless of batching
    for workers in (1, 4):
        cfg = McConfig(seed=13, target_se=1.2e-3, chunk_size=2**13, workers=workers)
        results.append(estimate_purity(tf / 2, reference_params, cfg))
    assert results[-1] == results[-2]


def test_region_refusal_and_override(fast_mc):
    inside_region_i = ModelParams(l_c=1.0, mass=0.5, sigma=0.5 * sigma_b_of_mass(0.5))
    with pytest.raises(RegionViolationError):
        estimate_purity(1.0, inside_region_i, fast_mc)
    est = estimate_purity(1.0, inside_region_i, fast_mc, force=True)
    assert est.n == fast_mc.n_samples


def test_time_beyond_window_refused(reference_params, fast_mc):
    tf = t_f(reference_params)
    with pytest.raises(RegionViolationError):
        estimate_purity(1.5 * tf, reference_params, fast_mc)
    est = estimate_purity(1.5 * tf, reference_params, fast_mc, force=True)
    assert est.eta < 1.0


def test_negative_time_rejected(reference_params, fast_mc):
    with pytest.raises(InvalidParameterError):
        estimate_purity(-1.0, reference_params, fast_mc)


def test_variance_bound(reference_params, fast_mc):
    est = estimate_purity(t_f(reference_params), reference_params, fast_mc)
    assert est.eta <= 1.0 + 3.0 * est.std_error
    assert est.std_error <= 1.0 / math.sqrt(est.n) + 1e-15


def test_sine_channel_without_pairing_is_noise(reference_params):
    cfg = McConfig(seed=20250810, n_samples=2**16, antithetic=False)
    est = estimate_purity(t_f(reference_params) / 2, reference_params, cfg)
    assert est.imag_se > 0.0
    assert abs(est.imag_part) <= 3.0 * est.imag_se


def test_target_se_mode_reaches_target(reference_params):
    cfg = McConfig(seed=3, target_se=8e-4)
    est = estimate_purity(t_f(reference_params), reference_params, cfg)
    assert est.std_error <= 8e-4
    assert not est.hit_cap


def test_cap_exhaustion_is_flagged(reference_params):
    cfg = McConfig(seed=3, target_se=1e-9, n_cap=2**17, chunk_size=2**16)
    est = estimate_purity(t_f(reference_params), reference_params, cfg)
    assert est.hit_cap
    assert est.n == 2**17


# ---------------------------------------------------------------------------
# curves
# ---------------------------------------------------------------------------


def test_curve_grid_validation(reference_params, fast_mc):
    tf = t_f(reference_params)
    with pytest.raises(InvalidParameterError):
        purity_curve([], reference_params, fast_mc)
    with pytest.raises(InvalidParameterError):
        purity_curve([0.0, tf / 2], reference_params, fast_mc)
    with pytest.raises(InvalidParameterError):
        purity_curve([tf / 2, tf / 3], reference_params, fast_mc)
    with pytest.raises(RegionViolationError):
        purity_curve([tf / 2, 2.0 * tf], reference_params, fast_mc)


def test_curve_monotone_within_noise(reference_params):
    cfg = McConfig(seed=5, target_se=1e-3)
    tf = t_f(reference_params)
    grid = np.geomspace(tf / 50.0, tf, 10)
    curve = purity_curve(grid, reference_params, cfg)
    assert curve.t_grid == tuple(float(t) for t in grid)
    for a, b in zip(curve.points, curve.points[1:]):
        assert b.eta <= a.eta + 2.0 * (a.std_error + b.std_error)
    assert all(p.eta <= 1.0 + 3.0 * p.std_error for p in curve.points)


def test_final_purity_matches_estimate_at_tf(reference_params, target_mc):
    direct = estimate_purity(t_f(reference_params), reference_params, target_mc)
    assert final_purity(reference_params, target_mc) == direct


def test_final_purity_paper_anchor():
    # m = M_P, l_c = L_P, sigma = 30 sigma_B: eta_F = 0.78 +- 0.03
    params = _params(mass=1.0, l_c=1.0)
    est = final_purity(params, McConfig(seed=20250810, target_se=3e-3))
    assert abs(est.eta - 0.78) <= 0.03


def test_final_purity_insensitive_to_sigma(target_mc):
    a = final_purity(_params(sigma_sb=30.0), target_mc)
    b = final_purity(_params(sigma_sb=60.0), target_mc)
    assert abs(a.eta - b.eta) <= 0.05


def test_final_purity_approaches_one_for_light_particles(target_mc):
    est = final_purity(_params(mass=0.1), target_mc)
    assert est.eta >= 0.995


# ---------------------------------------------------------------------------
# short-time coefficient
# ---------------------------------------------------------------------------


def test_short_time_coefficient_positive(reference_params, fast_mc):
    c2 = short_time_coefficient(reference_params, fast_mc)
    assert c2.value > 0.0
    assert c2.std_error > 0.0
    assert c2.n == fast_mc.n_samples


def test_short_time_mass_scaling_is_exact_factor_16():
    # identical draws (same seed, sigma, l_c), so the m^4 prefactor is
    # the only difference and scales by exactly 2^4
    sigma = 400.0
    cfg = McConfig(seed=8, n_samples=2**15)
    c_light = short_time_coefficient(ModelParams(l_c=1.0, mass=0.25, sigma=sigma), cfg, force=True)
    c_heavy = short_time_coefficient(ModelParams(l_c=1.0, mass=0.5, sigma=sigma), cfg, force=True)
    assert c_heavy.value == 16.0 * c_light.value


def test_short_time_sigma_scaling_slope():
    # c2 ~ sigma^-2 for sigma >> l_c; same-seed sweep so the MC noise
    # cancels in the log-log slope
    cfg = McConfig(seed=8, n_samples=2**15)
    sigmas = [1e3, 1e4, 1e5]
    values = [
        short_time_coefficient(ModelParams(l_c=1.0, mass=0.5, sigma=s), cfg).value for s in sigmas
    ]
    slope = np.polyfit(np.log(sigmas), np.log(values), 1)[0]
    assert abs(slope + 2.0) < 0.1


def test_short_time_law_matches_purity(reference_params):
    cfg = McConfig(seed=10, n_samples=2**18)
    c2 = short_time_coefficient(reference_params, cfg)
    t = math.sqrt(1e-3 / c2.value)
    est = estimate_purity(t, reference_params, cfg)
    predicted = c2.value * t * t
    tol = 0.1 * predicted + 3.0 * (est.std_error + c2.std_error * t * t)
    assert abs((1.0 - est.eta) - predicted) <= tol
