import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from feedback_coverage.config import default_config
from feedback_coverage.thresholds import (
    LOG2E,
    ThresholdResult,
    channel_dispersion,
    critical_snr_feedback,
    critical_snr_forward,
    omega_feedback_db,
    per_forward,
)

U = default_config().code.u


def test_dispersion_values():
    assert channel_dispersion(0.0) == 0.0
    assert channel_dispersion(1.0) == pytest.approx(3.0 / 8.0 * LOG2E ** 2, rel=1e-15)
    assert channel_dispersion(1e9) == pytest.approx(LOG2E ** 2 / 2, rel=1e-8)
    assert LOG2E ** 2 / 2 == pytest.approx(1.0407, abs=1e-4)


def test_per_at_capacity_is_half():
    eta = 2.0 ** (2 * 48 / 144) - 1.0
    assert per_forward(eta, 48, 144) == pytest.approx(0.5, abs=1e-12)


def test_per_deep_inside_capacity():
    assert per_forward(1e6, 48, 144) < 1e-12


def test_per_domain():
    with pytest.raises(ValueError):
        per_forward(0.0, 48, 144)


def test_critical_snr_round_trip():
    res = critical_snr_forward(48, 144, 1e-4)
    assert res.mode == "forward"
    assert per_forward(res.omega_linear, 48, 144) == pytest.approx(1e-4, abs=1e-6)
    assert res.omega_db == pytest.approx(10 * math.log10(res.omega_linear), abs=1e-12)


def test_critical_snr_against_grid_scan():
    # 1e6-point log grid: the PER crosses the target once, at the bisection result
    eta = np.geomspace(0.5, 5.0, 1_000_000)
    x = (72.0 * np.log2(1.0 + eta) - 48.0) / np.sqrt(144.0 * channel_dispersion(eta))
    from scipy.special import erfc
    per = 0.5 * erfc(x / math.sqrt(2.0))
    assert np.all(np.diff(per) < 0)
    idx = int(np.argmax(per <= 1e-4))
    omega = critical_snr_forward(48, 144, 1e-4).omega_linear
    assert eta[idx - 1] <= omega <= eta[idx]


def test_critical_snr_near_half():
    res = critical_snr_forward(48, 144, 0.5 - 1e-12)
    assert res.omega_linear == pytest.approx(2.0 ** (2.0 / 3.0) - 1.0, abs=1e-6)
    assert 2.0 ** (2.0 / 3.0) - 1.0 == pytest.approx(0.5874, abs=1e-4)


def test_critical_snr_monotone_in_target():
    targets = [1e-8, 1e-6, 1e-4, 1e-2, 0.1, 0.3]
    omegas = [critical_snr_forward(48, 144, e).omega_linear for e in targets]
    assert np.all(np.diff(omegas) < 0)


def test_critical_snr_decreasing_in_n():
    omegas = [critical_snr_forward(48, n, 1e-4).omega_linear for n in (96, 120, 144, 200, 400)]
    assert np.all(np.diff(omegas) < 0)


@pytest.mark.parametrize("eps", [0.0, 0.5, 0.7, -1e-3])
def test_critical_snr_range(eps):
    with pytest.raises(ValueError):
        critical_snr_forward(48, 144, eps)


def test_critical_snr_bracket_failure():
    with pytest.raises(ValueError, match="bracket"):
        critical_snr_forward(48, 144, 1e-4, bracket=(10.0, 1e6))


def test_feedback_asymptotes():
    assert omega_feedback_db(1e6, 4, U) == pytest.approx(U[5], abs=1e-15)
    assert omega_feedback_db(-1e6, 4, U) == pytest.approx(1 / U[4] + U[5], abs=1e-15)


def test_feedback_direct_evaluation():
    u0, u1, u2, u3, u4, u5 = U
    eta, a = 20.0, 4
    direct = 1.0 / (math.exp(u0 * eta + u1 * a + u2 * eta * a + u3) + u4) + u5
    res = critical_snr_feedback(eta, a, U)
    assert res.omega_db == direct
    assert res.mode == "feedback"
    # gentle set: value away from the floor
    g = (0.1, 0.5, 0.01, -3.0, 0.05, -6.0)
    direct = 1.0 / (math.exp(g[0] * eta + g[1] * a + g[2] * eta * a + g[3]) + g[4]) + g[5]
    assert omega_feedback_db(eta, a, g) == pytest.approx(direct, rel=1e-15)


@pytest.mark.parametrize("u", [U, (0.1, 0.5, 0.01, -3.0, 0.05, -6.0)])
def test_feedback_decreasing_and_bounded(u):
    eta = np.linspace(-10.0, 40.0, 201)
    for a in range(1, 9):
        om = omega_feedback_db(eta, a, u)
        inner = (om > u[5]) & (om < 1 / u[4] + u[5])
        # strictly decreasing wherever the logistic is not saturated in float64
        d = np.diff(om)
        assert np.all(d <= 0)
        assert np.all(d[inner[:-1] & inner[1:]] < 0) or not inner.any()
        assert np.all((om >= u[5]) & (om <= 1 / u[4] + u[5]))


@given(st.floats(-200, 200), st.floats(-200, 200), st.integers(1, 8))
@settings(max_examples=200, deadline=None)
def test_feedback_monotone_property(x1, x2, a):
    u = (0.1, 0.5, 0.01, -3.0, 0.05, -6.0)
    lo, hi = sorted((x1, x2))
    assert omega_feedback_db(lo, a, u) >= omega_feedback_db(hi, a, u)
    assert u[5] <= omega_feedback_db(lo, a, u) <= 1 / u[4] + u[5]


def test_feedback_higher_a_lowers_threshold():
    u = (0.1, 0.5, 0.01, -3.0, 0.05, -6.0)
    values = [omega_feedback_db(20.0, a, u) for a in range(1, 9)]
    assert np.all(np.diff(values) < 0)


def test_threshold_result_consistency():
    r = ThresholdResult.from_db(3.0, "feedback")
    assert r.omega_linear == pytest.approx(10 ** 0.3, rel=1e-12)
    back = ThresholdResult.from_linear(r.omega_linear, "feedback")
    assert back.omega_db == pytest.approx(3.0, abs=1e-12)
