import dataclasses
import math

import numpy as np
import pytest
from scipy import integrate

from feedback_coverage.coverage import (
    METHODS,
    ApproximationRegimeError,
    CoverageCurve,
    aps_feedback,
    aps_feedback_cumulative_exact,
    aps_forward,
    aps_forward_numeric,
    coverage_curve,
    coverage_feedback_closed,
    coverage_feedback_closed_raw,
    coverage_feedback_exact,
    coverage_feedback_gl,
    coverage_forward,
    forward_threshold_for,
    prop1_coefficients,
    threshold_function_g,
    uplink_z2,
)
from feedback_coverage.specfun import gauss_laguerre, lower_incomplete_gamma
from feedback_coverage.thresholds import critical_snr_feedback

GRID = [float(r) for r in range(25, 301, 25)]


def pinned(cfg, u5=-1e-3):
    """Feedback threshold pinned to 10^(u5/10): ceiling and floor coincide."""
    code = dataclasses.replace(cfg.code, u=(1.0, 2.0, 0.01, 90.0, 1e12, u5))
    return cfg.replace(code=code)


# ---------------------------------------------------------------- g and the oracle

def test_g_floor_and_ceiling(cfg):
    u4, u5 = cfg.code.u[4], cfg.code.u[5]
    base = uplink_z2(cfg) * 150.0 ** cfg.uplink.exponent
    assert threshold_function_g(150.0, 1e6, cfg) == pytest.approx(10 ** (u5 / 10) * base,
                                                                 rel=1e-12)
    ceil = 10 ** ((1 / u4 + u5) / 10) * base
    assert threshold_function_g(150.0, 1e-300, cfg) == pytest.approx(ceil, rel=1e-12)


@pytest.mark.parametrize("u", [None, (0.1, 0.5, 0.01, -3.0, 0.05, -6.0)])
def test_g_composition(cfg, u):
    if u is not None:
        cfg = cfg.replace(code=dataclasses.replace(cfg.code, u=u))
    from feedback_coverage.channel import snr
    from feedback_coverage.config import linear_to_db
    eta_d = snr(150.0, 0.5, cfg.downlink)
    omega = critical_snr_feedback(linear_to_db(eta_d), cfg.code.a_ratio, cfg.code.u)
    eta_u_per_fade = snr(150.0, 1.0, cfg.uplink)
    assert threshold_function_g(150.0, 0.5, cfg) == pytest.approx(
        omega.omega_linear / eta_u_per_fade, rel=1e-12)


def test_g_domain(cfg):
    with pytest.raises(ValueError):
        threshold_function_g(100.0, 0.0, cfg)
    with pytest.raises(ValueError):
        threshold_function_g(0.0, 1.0, cfg)


def test_exact_zero_noise_limit(cfg):
    quiet = cfg.replace(uplink=dataclasses.replace(cfg.uplink, noise_power=1e-250))
    assert coverage_feedback_exact(100.0, quiet) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("r", [50.0, 150.0, 250.0])
def test_exact_pinned_threshold_reduces_to_forward_form(cfg, r):
    c = pinned(cfg, u5=-3.0)
    omega = 10 ** (-3.0 / 10)
    expected = math.exp(-c.uplink.fading_rate * omega * uplink_z2(c) * r ** 4)
    assert coverage_feedback_exact(r, c) == pytest.approx(expected, rel=1e-9, abs=1e-12)


@pytest.mark.parametrize("u", [(1.0, 2.0, 0.01, 90.0, 0.25, -0.5),
                               (0.1, 0.5, 0.01, -3.0, 0.05, -6.0)])
@pytest.mark.parametrize("r", [50.0, 100.0, 150.0, 200.0])
def test_exact_against_independent_integral(cfg, u, r):
    # plain x-domain integral with the threshold composed from public ops
    c = cfg.replace(code=dataclasses.replace(cfg.code, u=u))
    mu_u, mu_d = c.uplink.fading_rate, c.downlink.fading_rate

    def f(x):
        return math.exp(-mu_u * float(threshold_function_g(r, x, c))) * mu_d * math.exp(-mu_d * x)

    edges = [1e-30, 1e-12, 1e-8, 1e-4, 1e-2, 0.5, 2.0, 30.0]
    ref = sum(integrate.quad(f, lo, hi, epsabs=1e-13, epsrel=1e-12, limit=400)[0]
              for lo, hi in zip(edges, edges[1:]))
    assert coverage_feedback_exact(r, c) == pytest.approx(ref, abs=1e-9)


def test_exact_nonincreasing_in_r(cfg, gentle_cfg):
    for c in (cfg, gentle_cfg):
        values = [coverage_feedback_exact(r, c) for r in np.linspace(5, 400, 80)]
        assert np.all(np.diff(values) <= 1e-12)


def test_exact_domain(cfg):
    with pytest.raises(ValueError):
        coverage_feedback_exact(0.0, cfg)


# ---------------------------------------------------------------- Gauss-Laguerre tier

def test_gl_single_node(cfg):
    rule = gauss_laguerre(1)
    g = threshold_function_g(120.0, 1.0 / cfg.downlink.fading_rate, cfg)
    assert coverage_feedback_gl(120.0, cfg, rule) == pytest.approx(
        math.exp(-cfg.uplink.fading_rate * g), rel=1e-14)


def test_gl_against_oracle(cfg):
    rule = gauss_laguerre(32)
    for r in GRID:
        assert abs(coverage_feedback_gl(r, cfg, rule) - coverage_feedback_exact(r, cfg)) <= 1e-6


def test_gl_converges_on_gentle_config(gentle_cfg):
    # the transition sits inside the fade distribution here, so L matters;
    # the logistic is steep in log(x) near x = 0, so convergence is only
    # algebraic (about a factor 2 per doubling)
    errs = []
    for order in (4, 8, 16, 32, 64):
        rule = gauss_laguerre(order)
        errs.append(max(abs(coverage_feedback_gl(r, gentle_cfg, rule)
                            - coverage_feedback_exact(r, gentle_cfg)) for r in GRID))
    assert np.all(np.diff(errs) < 0)
    assert errs[-1] <= 2e-3


def test_gl_in_unit_interval(cfg, gentle_cfg):
    for c in (cfg, gentle_cfg):
        for r in GRID:
            assert 0.0 < coverage_feedback_gl(r, c) <= 1.0


# ---------------------------------------------------------------- coefficients

def independent_coefficients(cfg, order, a):
    """Second, loop-based evaluation of the per-node closed-form coefficients."""
    rule = gauss_laguerre(order)
    u0, u1, u2, u3, u4, u5 = cfg.code.u
    d, up = cfg.downlink, cfg.uplink
    z2 = up.noise_power / (up.power * up.g_tx * up.g_rx * up.intercept)
    b2 = (u0 + u2 * a) * 10.0 / math.log(10.0)
    rows = []
    for x in rule.nodes:
        z1 = d.power * d.g_tx * d.g_rx * d.intercept * float(x) / (d.fading_rate * d.noise_power)
        lg = math.log10(z1)
        b1 = 1 + u1 * a + u3 + u4 + 10 * (u0 + u2 * a) * (lg - 1 / math.log(10.0))
        k = 1 + u5 * b1
        l10 = math.log(10.0)
        j1 = z2 * (1 + k * l10 / (10 * b1) + (k * l10) ** 2 / (200 * b1 * b1))
        j2 = z2 * b2 * (l10 / (10 * b1 * b1) + k * l10 * l10 / (100 * b1 ** 3))
        rows.append((z1, b1, j1, j2))
    return z2, b2, np.array(rows)


@pytest.mark.parametrize("a", [1, 4, 8])
def test_coefficients_dual_implementation(cfg, a):
    co = prop1_coefficients(cfg, gauss_laguerre(16), a=a)
    z2, b2, rows = independent_coefficients(cfg, 16, a)
    assert co.z2 == pytest.approx(z2, rel=1e-13)
    assert co.b2 == pytest.approx(b2, rel=1e-13)
    for col, name in enumerate(("z1", "b1", "j1", "j2")):
        assert getattr(co, name) == pytest.approx(rows[:, col], rel=1e-12), name


def test_coefficient_invariants(cfg):
    co = prop1_coefficients(cfg)
    assert np.all(co.z1 > 0) and co.z2 > 0 and np.all(co.j1 > 0)
    assert np.sign(co.b2) == np.sign(cfg.code.u[0] + cfg.code.u[2] * co.a) == 1
    assert np.array_equal(co.b1, co.w_const + co.q_const * co.a)
    assert co.order == 16


def test_coefficients_regime_error(cfg):
    code = dataclasses.replace(cfg.code, u=(0.1, 0.5, 0.01, -300.0, 0.05, -6.0))
    with pytest.raises(ApproximationRegimeError, match="node k=0"):
        prop1_coefficients(cfg.replace(code=code))


# ---------------------------------------------------------------- closed forms

def test_closed_shift_free_single_node(cfg):
    co = prop1_coefficients(cfg, gauss_laguerre(1))
    co = dataclasses.replace(co, j2=np.zeros(1))
    r = 90.0
    assert coverage_feedback_closed_raw(r, co, cfg) == pytest.approx(
        math.exp(-cfg.uplink.fading_rate * co.j1[0] * r ** 4), rel=1e-14)


def test_closed_near_oracle_at_150(cfg):
    co = prop1_coefficients(cfg)
    exact = coverage_feedback_exact(150.0, cfg)
    assert abs(coverage_feedback_closed(150.0, co, cfg) / exact - 1) <= 0.05


def test_closed_clamps_and_keeps_raw(gentle_cfg):
    co = prop1_coefficients(gentle_cfg)
    raw = coverage_feedback_closed_raw(np.array([5.0, 25.0, 50.0]), co, gentle_cfg)
    clamped = coverage_feedback_closed(np.array([5.0, 25.0, 50.0]), co, gentle_cfg)
    assert np.all(clamped <= 1.0) and np.all(clamped >= 0.0)
    assert np.array_equal(clamped, np.clip(raw, 0, 1))
    curve = coverage_curve("feedback-closed", [5.0, 25.0, 50.0], gentle_cfg)
    assert curve.raw_probabilities is not None
    assert np.array_equal(curve.raw_probabilities, raw)


def test_closed_decays(cfg):
    co = prop1_coefficients(cfg)
    assert coverage_feedback_closed(1e4, co, cfg) == 0.0


def test_forward_limits_and_power_law(cfg):
    assert coverage_forward(1e-3, cfg) == pytest.approx(1.0, abs=1e-12)
    p = coverage_forward(60.0, cfg)
    assert coverage_forward(120.0, cfg) == pytest.approx(p ** 16, rel=1e-12)


def test_forward_matches_fade_tail(cfg):
    # P(|h|^2 > Omega_c / mean-free SNR) from the exponential law directly
    from feedback_coverage.channel import snr
    omega = forward_threshold_for(cfg).omega_linear
    for r in (50.0, 150.0):
        tail = math.exp(-cfg.uplink.fading_rate * omega / snr(r, 1.0, cfg.uplink))
        assert coverage_forward(r, cfg) == pytest.approx(tail, rel=1e-12)


# ---------------------------------------------------------------- AP counts

@pytest.mark.parametrize("d", [25.0, 100.0, 200.0, 300.0, 1000.0])
def test_aps_forward_against_radial_integral(cfg, d):
    assert aps_forward(d, cfg) == pytest.approx(aps_forward_numeric(d, cfg), rel=1e-8)


def test_aps_forward_saturates(cfg):
    from scipy.special import gamma
    from feedback_coverage.coverage import forward_rate
    A = forward_rate(cfg, forward_threshold_for(cfg))
    limit = 2 * math.pi * cfg.ap_density * gamma(0.5) / (4 * A ** 0.5)
    assert aps_forward(5000.0, cfg) == pytest.approx(limit, rel=1e-12)


def test_aps_linear_in_density(cfg):
    double = cfg.replace(ap_density=2 * cfg.ap_density)
    for d in (80.0, 220.0):
        assert aps_forward(d, double) == pytest.approx(2 * aps_forward(d, cfg), rel=1e-14)
        assert aps_feedback(d, prop1_coefficients(double), double) == pytest.approx(
            2 * aps_feedback(d, prop1_coefficients(cfg), cfg), rel=1e-14)


def test_aps_feedback_matches_termwise_integral(cfg):
    # the gamma closed form equals the radial integral of the closed-form coverage
    co = prop1_coefficients(cfg)
    val, _ = integrate.quad(lambda r: coverage_feedback_closed_raw(r, co, cfg) * r, 0, 200.0,
                            epsabs=0, epsrel=1e-12, limit=200)
    assert aps_feedback(200.0, co, cfg) == pytest.approx(2 * math.pi * cfg.ap_density * val,
                                                         rel=1e-9)


def test_aps_nondecreasing(cfg):
    co = prop1_coefficients(cfg)
    d = np.linspace(1, 400, 60)
    assert np.all(np.diff([aps_forward(x, cfg) for x in d]) >= 0)
    assert np.all(np.diff([aps_feedback(x, co, cfg) for x in d]) >= 0)


def test_aps_feedback_oracle_cumulative(cfg):
    d = [50.0, 150.0, 250.0]
    cum = aps_feedback_cumulative_exact(d, cfg)
    single = [aps_feedback_cumulative_exact([x], cfg)[0] for x in d]
    assert cum == pytest.approx(single, rel=1e-8)
    closed = [aps_feedback(x, prop1_coefficients(cfg), cfg) for x in d]
    assert closed == pytest.approx(list(cum), rel=0.05)


def test_aps_pinned_threshold(cfg):
    # with a constant threshold the feedback count is the forward form at that threshold
    c = pinned(cfg)
    omega = 10 ** (c.code.u[5] / 10)
    A = c.uplink.fading_rate * omega * uplink_z2(c)
    expect = 2 * math.pi * c.ap_density * lower_incomplete_gamma(0.5, A * 200.0 ** 4) / (
        4 * A ** 0.5)
    assert aps_feedback_cumulative_exact([200.0], c)[0] == pytest.approx(expect, rel=1e-8)


# ---------------------------------------------------------------- dominance and curves

def test_feedback_dominates_forward_on_grid(cfg):
    for r in GRID:
        assert coverage_feedback_exact(r, cfg) >= coverage_forward(r, cfg)


@pytest.mark.parametrize("method", METHODS)
def test_curve_serialisation(cfg, method):
    curve = coverage_curve(method, [50.0, 100.0], cfg)
    lines = curve.to_csv().split("\n")
    assert lines[0] == "distance_m,probability,method"
    assert lines[1].startswith("50.0,") and lines[1].endswith("," + method)
    assert "\r" not in curve.to_csv()
    d = curve.to_dict()
    assert d["config_hash"] == cfg.config_hash and len(d["points"]) == 2
    assert curve.to_json().endswith("\n")


def test_curve_invariants(cfg):
    with pytest.raises(ValueError):
        CoverageCurve("feedback-exact", np.array([2.0, 1.0]), np.array([0.5, 0.5]), "h")
    with pytest.raises(ValueError):
        CoverageCurve("feedback-exact", np.array([1.0, 2.0]), np.array([0.5, 1.5]), "h")
    with pytest.raises(ValueError):
        CoverageCurve("bogus", np.array([1.0]), np.array([0.5]), "h")
    with pytest.raises(ValueError):
        coverage_curve("bogus", [1.0], cfg)
