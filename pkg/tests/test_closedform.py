import math

import numpy as np
import pytest

from gravpurity.closedform import (
    NoEvolutionWindowError,
    RegionLabel,
    bracket_b,
    classify_region,
    kinetic_over_potential,
    msq_momentum,
    msq_position,
    pair_wavefunction,
    phase,
    regularized_distance,
    sigma_b,
    sigma_b_of_mass,
    t_f,
)
from gravpurity.units import InvalidParameterError, ModelParams

# arbitrary-precision value of the momentum-growth bracket at
# sigma_tilde = 1, frozen from an mpmath evaluation at 40 digits:
# sqrt(pi) * 25 * exp(1/4) * erfc(1/2) - 22
BRACKET_B_AT_1 = 5.2820680382523521


def _params(l_c=1.0, mass=0.5, sigma_sb=30.0):
    return ModelParams(l_c=l_c, mass=mass, sigma=sigma_sb * sigma_b_of_mass(mass))


# ---------------------------------------------------------------------------
# regularized distance and phase
# ---------------------------------------------------------------------------


def test_distance_coincident_points_return_cutoff():
    assert regularized_distance(np.zeros(3), 1.0) == 1.0
    assert regularized_distance(np.zeros(3), 0.25) == 0.25


def test_distance_arithmetic():
    assert regularized_distance(np.array([3.0, 4.0, 0.0]), 1.0) == pytest.approx(math.sqrt(26.0))


def test_distance_far_field_expansion():
    # sqrt(L^2 + l^2) = L (1 + (l/L)^2/2 + ...) for l << L
    d = regularized_distance(np.array([100.0, 0.0, 0.0]), 1.0)
    assert 0.0 < d - 100.0 < 100.0 * (1.0 / 100.0) ** 2 / 2.0 + 1e-12


def test_distance_broadcasts():
    dx = np.zeros((5, 3))
    assert regularized_distance(dx, 2.0).shape == (5,)


def test_phase_zero_at_t0():
    params = _params()
    rng = np.random.default_rng(0)
    for _ in range(5):
        r, rbar = rng.normal(size=3), rng.normal(size=3)
        assert phase(r, rbar, 0.0, params) == 0.0


def test_phase_at_cutoff_distance():
    params = ModelParams(l_c=1.0, mass=1.0, sigma=10.0)
    r = np.array([0.3, -0.2, 0.9])
    assert phase(r, r, 1.0, params) == 1.0


def test_phase_mass_squared_scaling():
    r = np.array([1.0, 2.0, -0.5])
    rbar = np.array([-0.3, 0.1, 4.0])
    p1 = ModelParams(l_c=1.0, mass=0.4, sigma=10.0)
    p2 = ModelParams(l_c=1.0, mass=0.8, sigma=10.0)
    assert phase(r, rbar, 3.7, p2) == pytest.approx(4.0 * phase(r, rbar, 3.7, p1), rel=1e-15)


def test_phase_doubles_exactly_with_time():
    params = _params()
    rng = np.random.default_rng(1)
    for _ in range(20):
        r, rbar = rng.normal(size=3) * 5, rng.normal(size=3) * 5
        t = float(rng.uniform(0.1, 50.0))
        assert phase(r, rbar, 2.0 * t, params) == 2.0 * phase(r, rbar, t, params)


# ---------------------------------------------------------------------------
# pair wavefunction
# ---------------------------------------------------------------------------


def test_pair_wavefunction_origin_value():
    params = ModelParams(l_c=1.0, mass=1.0, sigma=1.0)
    value = pair_wavefunction(np.zeros(3), np.zeros(3), 0.0, params)
    assert value == pytest.approx((2.0 * math.pi) ** -1.5)
    assert value.imag == 0.0


def test_pair_wavefunction_modulus_is_time_independent():
    # phase-only evolution; the modulus can differ by at most one
    # rounding of the unit circle
    params = _params()
    rng = np.random.default_rng(3)
    r = rng.normal(size=(50, 3)) * params.sigma
    rbar = rng.normal(size=(50, 3)) * params.sigma
    m0 = np.abs(pair_wavefunction(r, rbar, 0.0, params))
    m1 = np.abs(pair_wavefunction(r, rbar, 7.3, params))
    np.testing.assert_array_max_ulp(m0, m1, maxulp=1)


def test_pair_wavefunction_arg_matches_phase():
    params = _params()
    r = np.array([10.0, -3.0, 2.0])
    rbar = np.array([1.0, 4.0, -2.0])
    t = 11.0
    expected = phase(r, rbar, t, params) % (2.0 * math.pi)
    got = np.angle(pair_wavefunction(r, rbar, t, params)) % (2.0 * math.pi)
    assert got == pytest.approx(expected, abs=1e-9)


def test_pair_wavefunction_normalization_by_quadrature():
    # 6-D Gauss-Hermite oracle for integral |Psi|^2 over both coordinates
    params = ModelParams(l_c=1.0, mass=0.5, sigma=2.0)
    x, w = np.polynomial.hermite.hermgauss(8)
    axes = np.meshgrid(*([x] * 6), indexing="ij")
    pts = np.stack([a.ravel() for a in axes], axis=1)
    weight = np.ones(len(pts))
    for axis_w in np.meshgrid(*([w] * 6), indexing="ij"):
        weight = weight * axis_w.ravel() if weight.ndim else axis_w.ravel()
    scale = math.sqrt(2.0) * params.sigma
    r, rbar = scale * pts[:, :3], scale * pts[:, 3:]
    density = np.abs(pair_wavefunction(r, rbar, 0.4, params)) ** 2
    integral = scale**6 * np.sum(weight * density * np.exp(np.sum(pts * pts, axis=1)))
    assert integral == pytest.approx(1.0, abs=1e-10)


# ---------------------------------------------------------------------------
# momentum bracket
# ---------------------------------------------------------------------------


def test_bracket_b_against_high_precision_value():
    assert bracket_b(1.0) == pytest.approx(BRACKET_B_AT_1, rel=1e-12)


def test_bracket_b_asymptote():
    # B ~ 12 sqrt(pi) s^4; within 1% by s = 1e3
    for s in (1e3, 1e4):
        ratio = bracket_b(s) / (12.0 * math.sqrt(math.pi) * s**4)
        assert abs(ratio - 1.0) < 0.01


def test_bracket_b_positive_over_validated_domain():
    grid = np.geomspace(1.0, 1e6, 500)
    assert np.all(bracket_b(grid) > 0.0)


def test_bracket_b_rejects_nonpositive():
    with pytest.raises(InvalidParameterError):
        bracket_b(0.0)
    with pytest.raises(InvalidParameterError):
        bracket_b(-2.0)


# ---------------------------------------------------------------------------
# moments
# ---------------------------------------------------------------------------


def test_msq_position_values():
    assert msq_position(ModelParams(l_c=1.0, mass=1.0, sigma=1.0)) == 3.0
    assert msq_position(ModelParams(l_c=1.0, mass=1.0, sigma=2.0)) == 12.0


def test_msq_momentum_at_t0():
    # the braces reduce to 1 at t = 0, so <p^2>(0) 4 sigma^2 / 3 = 1 up to 1 ulp
    for sigma in (1.0, 7.3, 623.5):
        params = ModelParams(l_c=1.0, mass=0.5, sigma=sigma)
        assert math.isclose(msq_momentum(0.0, params) * 4.0 * sigma * sigma / 3.0, 1.0, rel_tol=3e-16)


def test_msq_momentum_monotone_and_quadratic():
    params = _params()
    base = msq_momentum(0.0, params)
    t = 37.0
    excess_1 = msq_momentum(t, params) - base
    excess_2 = msq_momentum(2.0 * t, params) - base
    assert excess_1 > 0.0
    assert excess_2 / excess_1 == pytest.approx(4.0, rel=1e-12)


# ---------------------------------------------------------------------------
# kinetic/potential balance, sigma_B, t_F
# ---------------------------------------------------------------------------


def test_ratio_is_half_at_sigma_b():
    for mass in (0.3, 0.5, 1.0):
        params = ModelParams(l_c=1.0, mass=mass, sigma=sigma_b_of_mass(mass))
        assert math.isclose(kinetic_over_potential(0.0, params), 0.5, rel_tol=1e-12)


def test_ratio_scales_inversely_with_sigma_at_t0():
    mass = 0.5
    params = ModelParams(l_c=1.0, mass=mass, sigma=2.0 * sigma_b_of_mass(mass))
    assert kinetic_over_potential(0.0, params) == pytest.approx(0.25, rel=1e-12)


def test_ratio_strictly_increasing_in_time():
    params = _params()
    ts = np.linspace(0.0, t_f(params), 30)
    ratios = [kinetic_over_potential(t, params) for t in ts]
    assert all(b > a for a, b in zip(ratios, ratios[1:]))


def test_sigma_b_frozen_values():
    # independent hand evaluations of (3 sqrt3/2) lambda_bar^3
    assert sigma_b(ModelParams(l_c=1.0, mass=0.5, sigma=1.0)) == pytest.approx(
        12.0 * math.sqrt(3.0), rel=1e-15
    )
    assert sigma_b(ModelParams(l_c=1.0, mass=1.0, sigma=1.0)) == pytest.approx(
        1.5 * math.sqrt(3.0), rel=1e-15
    )


def test_sigma_b_mass_scaling():
    assert sigma_b_of_mass(1.0) / sigma_b_of_mass(2.0) == pytest.approx(8.0, rel=1e-15)


def test_tf_vanishes_at_window_edge():
    mass = 0.5
    sb = sigma_b_of_mass(mass)
    params = ModelParams(l_c=1.0, mass=mass, sigma=sb * (1.0 + 1e-12))
    assert 0.0 < t_f(params) < 1.0


def test_tf_requires_window():
    mass = 0.5
    sb = sigma_b_of_mass(mass)
    for sigma in (sb, 0.5 * sb):
        with pytest.raises(NoEvolutionWindowError):
            t_f(ModelParams(l_c=1.0, mass=mass, sigma=sigma))


def test_tf_grows_with_sigma():
    assert t_f(_params(sigma_sb=60.0)) > t_f(_params(sigma_sb=30.0))


def test_ratio_at_tf_is_half():
    for l_c, mass in [(1.0, 0.5), (0.5, 1.0), (0.25, 0.7)]:
        params = ModelParams(l_c=l_c, mass=mass, sigma=30.0 * sigma_b_of_mass(mass))
        assert math.isclose(kinetic_over_potential(t_f(params), params), 0.5, rel_tol=1e-12)


# ---------------------------------------------------------------------------
# region classification
# ---------------------------------------------------------------------------


def test_classify_hatched():
    params = ModelParams(l_c=1.0, mass=0.5, sigma=0.5)
    assert classify_region(params) is RegionLabel.HATCHED


def test_classify_below_quantum_minimum():
    # sigma/lambda_bar = 0.3 while sigma/l_c > 1
    params = ModelParams(l_c=1.0, mass=0.1, sigma=3.0)
    assert params.sigma * params.mass == pytest.approx(0.3)
    assert classify_region(params) is RegionLabel.BELOW_QUANTUM_MINIMUM


def test_classify_region_ii_reference():
    params = _params()
    assert params.sigma > 20.7  # above sigma_B = 12 sqrt3
    assert classify_region(params) is RegionLabel.REGION_II


def test_classify_region_i():
    mass = 0.5
    params = ModelParams(l_c=1.0, mass=mass, sigma=0.9 * sigma_b_of_mass(mass))
    assert classify_region(params) is RegionLabel.REGION_I


def test_classify_beyond_cut():
    params = ModelParams(l_c=1.0, mass=1.5, sigma=30.0 * sigma_b_of_mass(1.5))
    assert classify_region(params) is RegionLabel.BEYOND_CUT


def test_classify_boundary_ties():
    mass = 0.5
    sb = sigma_b_of_mass(mass)
    # sigma = l_c is hatched (the model demands sigma/l_c strictly > 1)
    assert classify_region(ModelParams(l_c=30.0, mass=0.01, sigma=30.0)) is RegionLabel.HATCHED
    # sigma/lambda_bar = 1/2 exactly is allowed: the point falls through
    # to the sigma_B comparison instead of being excluded
    params = ModelParams(l_c=1.0, mass=0.05, sigma=10.0)
    assert params.sigma * params.mass == 0.5
    assert classify_region(params) is RegionLabel.REGION_I
    # sigma = sigma_B exactly has an empty window: region I
    assert classify_region(ModelParams(l_c=1.0, mass=mass, sigma=sb)) is RegionLabel.REGION_I
    # the cut itself (mu = 1) stays classifiable and usable
    assert (
        classify_region(ModelParams(l_c=1.0, mass=1.0, sigma=30.0 * sigma_b_of_mass(1.0)))
        is RegionLabel.REGION_II
    )
    assert classify_region(ModelParams(l_c=1.0, mass=1.0 + 1e-9, sigma=50.0)) is RegionLabel.BEYOND_CUT


def test_boundary_power_law():
    # sigma_B / lambda_bar is proportional to mu^-2: log-log slope -2
    l_c = 1.0
    for mu_a, mu_b in [(0.1, 0.9), (0.05, 0.3), (0.2, 0.8)]:
        ya = sigma_b_of_mass(mu_a / l_c) * (mu_a / l_c)
        yb = sigma_b_of_mass(mu_b / l_c) * (mu_b / l_c)
        slope = (math.log(yb) - math.log(ya)) / (math.log(mu_b) - math.log(mu_a))
        assert slope == pytest.approx(-2.0, abs=1e-12)


def test_classify_is_total_and_deterministic():
    rng = np.random.default_rng(9)
    for _ in range(300):
        l_c, mass, sigma = np.exp(rng.uniform(-2, 2, size=3))
        params = ModelParams(l_c=l_c, mass=mass, sigma=sigma)
        assert classify_region(params) is classify_region(params)
