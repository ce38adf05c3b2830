"""Error analysis of the three Taylor steps behind the closed form.

Step 1 replaces ``exp(y)`` by ``1 + y`` inside the logistic threshold,
step 2 replaces ``1/(1+z)`` by ``1 - z`` and step 3 linearises the square
in the second-order remainder.  Each step error is evaluated per
quadrature node; monotonicity in ``a`` and ``R`` is checked numerically
on grids, after checking the sign conditions under which it is expected.
The end-to-end check compares the closed-form AP count with a nested
quadrature oracle over an (a, D, P_U) grid.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Literal, Sequence

import numpy as np

from .config import SystemConfig
from .coverage import (
    ApproximationRegimeError,
    PropOneCoefficients,
    aps_feedback,
    aps_feedback_cumulative_exact,
    prop1_coefficients,
)

LN10 = math.log(10.0)

DEFAULT_A_VALUES = tuple(range(1, 9))
DEFAULT_R_VALUES = tuple(float(r) for r in range(25, 301, 25))
DEFAULT_PU_VALUES = (0.5e-3, 1e-3, 2e-3)

INSUFFICIENT = "insufficient axis length"


@dataclass(frozen=True)
class StepErrorPoint:
    step: int
    a: int
    R: float
    node_index: int
    error: float


@lru_cache(maxsize=512)
def _coeffs(cfg: SystemConfig, a: int) -> PropOneCoefficients:
    return prop1_coefficients(cfg, a=a)


def _node(coeffs: PropOneCoefficients, k: int) -> int:
    if not 0 <= k < coeffs.order:
        raise IndexError(f"node index {k} out of range for order {coeffs.order}")
    return k


def _check_a_r(a, R):
    if a < 1:
        raise ValueError(f"a must be >= 1, got {a!r}")
    if not R > 0:
        raise ValueError(f"R must be > 0, got {R!r}")


def delta_y(y: float, u4: float) -> float:
    """``1/(y + 1 + u4) - 1/(e^y + u4)``."""
    exp_y = math.exp(y) if y < 709.0 else math.inf
    return 1.0 / (y + 1.0 + u4) - 1.0 / (exp_y + u4)


def delta_z(z: float, b1: float) -> float:
    """Step-2 error in its reduced form ``z^2 / (1 + z) / b1``."""
    return z * z / (1.0 + z) / b1


def delta_z_direct(z: float, b1: float) -> float:
    return (1.0 / (1.0 + z) - (1.0 - z)) / b1


def delta_v(v: float, b1: float, u5: float) -> float:
    """Step-3 error in its reduced form ``ln(10)^2/200 (1/b1 + u5)^2 v^2``."""
    return LN10 ** 2 / 200.0 * (1.0 / b1 + u5) ** 2 * v * v


def delta_v_direct(v: float, b1: float, u5: float) -> float:
    return (LN10 ** 2 / (200.0 * b1 ** 2) * (1.0 + u5 * b1) ** 2
            * ((1.0 + v) ** 2 - (1.0 + 2.0 * v)))


def step1_y(a: int, R: float, k: int, cfg: SystemConfig) -> float:
    c = _coeffs(cfg, a)
    u4 = cfg.code.u[4]
    return float(c.b1[_node(c, k)] + c.b2 * R ** (-cfg.downlink.exponent) - 1.0 - u4)


def step1_error(a: int, R: float, k: int, cfg: SystemConfig) -> StepErrorPoint:
    """Error of ``exp(y) ~ 1 + y`` in the feedback threshold (dB)."""
    _check_a_r(a, R)
    u4 = cfg.code.u[4]
    y = step1_y(a, R, k, cfg)
    if not y + 1.0 + u4 > 0:
        raise ApproximationRegimeError(
            f"step 1 regime violated: y + 1 + u4 = {y + 1.0 + u4:.6g} <= 0 "
            f"(a={a}, R={R}, k={k})")
    return StepErrorPoint(1, a, float(R), k, delta_y(y, u4))


def step2_z(a: int, R: float, k: int, cfg: SystemConfig) -> float:
    c = _coeffs(cfg, a)
    k = _node(c, k)
    return float(c.b2 * R ** (-cfg.downlink.exponent) / c.b1[k])


def step2_error(a: int, R: float, k: int, cfg: SystemConfig) -> StepErrorPoint:
    """Error of ``1/(1+z) ~ 1 - z`` in the feedback threshold (dB)."""
    _check_a_r(a, R)
    c = _coeffs(cfg, a)
    k = _node(c, k)
    b1 = float(c.w_const[k] + c.q_const[k] * a)
    if not b1 > 0:
        raise ApproximationRegimeError(f"step 2 regime violated: W + Qa = {b1:.6g} <= 0")
    z = float(c.b2 * R ** (-cfg.downlink.exponent) / b1)
    if not 1.0 + z > 0:
        raise ApproximationRegimeError(f"step 2 regime violated: 1 + z = {1.0 + z:.6g} <= 0")
    return StepErrorPoint(2, a, float(R), k, delta_z(z, b1))


def step3_v(a: int, R: float, k: int, cfg: SystemConfig) -> float:
    c = _coeffs(cfg, a)
    k = _node(c, k)
    b1 = float(c.b1[k])
    denom = b1 * (1.0 + cfg.code.u[5] * b1)
    if denom == 0.0:
        raise ApproximationRegimeError(
            f"step 3 degenerate: B1 (1 + u5 B1) = 0 at a={a}, k={k}")
    return float(-c.b2 * R ** (-cfg.downlink.exponent) / denom)


def step3_error(a: int, R: float, k: int, cfg: SystemConfig) -> StepErrorPoint:
    """Error of linearising the square in the third remainder (unitless)."""
    _check_a_r(a, R)
    v = step3_v(a, R, k, cfg)
    b1 = float(_coeffs(cfg, a).b1[k])
    return StepErrorPoint(3, a, float(R), k, delta_v(v, b1, cfg.code.u[5]))


_STEP_FUNCS = {1: step1_error, 2: step2_error, 3: step3_error}


@dataclass(frozen=True)
class StepErrorTable:
    """Errors of one step on an (a, R, node) grid plus the weight-aggregated sum."""

    step: int
    a_values: tuple
    r_values: tuple
    per_node: np.ndarray     # shape (len(a), len(R), L)
    weighted: np.ndarray     # shape (len(a), len(R)): sum_k w_k delta_k

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["step", "a", "distance_m", "node", "error"])
        for i, a in enumerate(self.a_values):
            for j, r in enumerate(self.r_values):
                for k in range(self.per_node.shape[2]):
                    writer.writerow([self.step, a, repr(float(r)), k,
                                     repr(float(self.per_node[i, j, k]))])
                writer.writerow([self.step, a, repr(float(r)), "weighted",
                                 repr(float(self.weighted[i, j]))])
        return buf.getvalue()


def step_error_table(step: int, cfg: SystemConfig, a_values: Sequence[int] = DEFAULT_A_VALUES,
                     r_values: Sequence[float] = DEFAULT_R_VALUES) -> StepErrorTable:
    func = _STEP_FUNCS[step]
    order = cfg.quadrature_order
    per_node = np.empty((len(a_values), len(r_values), order))
    weighted = np.empty((len(a_values), len(r_values)))
    for i, a in enumerate(a_values):
        w = _coeffs(cfg, a).weights
        for j, r in enumerate(r_values):
            per_node[i, j] = [func(a, r, k, cfg).error for k in range(order)]
            weighted[i, j] = float(np.dot(w, per_node[i, j]))
    return StepErrorTable(step, tuple(a_values), tuple(float(r) for r in r_values),
                          per_node, weighted)


def gamma_bound(cfg: SystemConfig, k: int) -> float:
    """Lower bound on ``y(a, R)`` over a >= 1 (diagnostic only)."""
    u0, u1, u2, u3, _, _ = cfg.code.u
    c = _coeffs(cfg, 1)
    lg_z1 = math.log10(c.z1[_node(c, k)])
    return u1 + u3 + 10.0 * (u0 + u2) * (lg_z1 - 1.0 / LN10)


Trend = Literal["increasing", "decreasing", "nonincreasing", "nondecreasing"]


def monotone(values: Iterable[float], trend: Trend, atol: float = 0.0) -> bool:
    v = np.asarray(list(values), dtype=float)
    d = np.diff(v)
    if trend == "increasing":
        return bool(np.all(d > 0))
    if trend == "decreasing":
        return bool(np.all(d < 0))
    if trend == "nonincreasing":
        return bool(np.all(d <= atol))
    if trend == "nondecreasing":
        return bool(np.all(d >= -atol))
    raise ValueError(f"unknown trend {trend!r}")


def axis_verdict(array: np.ndarray, axis: int, trend: Trend, atol: float = 0.0) -> str:
    """'pass' if every 1-D slice along ``axis`` follows ``trend``."""
    array = np.asarray(array)
    if array.shape[axis] < 2:
        return INSUFFICIENT
    moved = np.moveaxis(array, axis, -1).reshape(-1, array.shape[axis])
    return "pass" if all(monotone(row, trend, atol) for row in moved) else "fail"


def _v_slope_in_a(a: float, R: float, b1_w: float, b1_q: float, cfg: SystemConfig) -> float:
    """d v / d a, from the quotient rule applied to v(a)."""
    u0, _, u2, _, _, u5 = cfg.code.u
    b1 = b1_w + b1_q * a
    num = u0 + u2 * a
    den = b1 * (1.0 + u5 * b1)
    dden = b1_q * (1.0 + 2.0 * u5 * b1)
    return -(10.0 / LN10) * R ** (-cfg.downlink.exponent) * (u2 * den - num * dden) / den ** 2


def preconditions(cfg: SystemConfig, a_values: Sequence[int] = DEFAULT_A_VALUES,
                  r_values: Sequence[float] = DEFAULT_R_VALUES) -> dict:
    """Sign conditions under which the monotonicity claims are expected to hold."""
    u0, u1, u2, u3, u4, u5 = cfg.code.u
    c1 = _coeffs(cfg, 1)
    positive_slope = all(u0 + u2 * a > 0 for a in a_values)
    y1 = [step1_y(1, r, k, cfg) for r in r_values for k in range(c1.order)]
    ys = [step1_y(a, r, k, cfg) for a in a_values for r in r_values for k in range(c1.order)]
    with np.errstate(over="ignore"):
        s_prime = [2.0 * y + 2.0 - (math.exp(y) if y < 709 else math.inf) for y in y1]
        s_val = [(y + 1.0) ** 2 - (math.exp(y) if y < 709 else math.inf) + 2.0 * u4 for y in y1]
    z_slope = c1.w_const * u2 - c1.q_const * u0
    v_slopes = [_v_slope_in_a(1.0, r, float(c1.w_const[k]), float(c1.q_const[k]), cfg)
                for r in r_values for k in range(c1.order)]
    return {
        "u0_plus_u2_a_positive": positive_slope,
        "b1_positive": bool(all(np.all(_coeffs(cfg, a).b1 > 0) for a in a_values)),
        "step1_s_second_negative": bool(all(y > math.log(2.0) for y in ys)),
        "step1_s_prime_at_a1_negative": bool(all(v < 0 for v in s_prime)),
        "step1_s_at_a1_negative": bool(all(v < 0 for v in s_val)),
        "step2_z_decreasing_in_a": bool(np.all(z_slope < 0)),
        "step3_u2_u5_q2_negative": bool(np.all(u2 * u5 * c1.q_const ** 2 < 0)),
        "step3_v_slope_at_a1_negative": bool(all(v < 0 for v in v_slopes)),
    }


_CLAIM_PRECONDITIONS = {
    "step1_decreasing_in_a": ("u0_plus_u2_a_positive", "step1_s_second_negative",
                              "step1_s_prime_at_a1_negative", "step1_s_at_a1_negative"),
    "step1_increasing_in_R": ("u0_plus_u2_a_positive", "step1_s_prime_at_a1_negative",
                              "step1_s_at_a1_negative"),
    "step2_decreasing_in_a": ("u0_plus_u2_a_positive", "b1_positive",
                              "step2_z_decreasing_in_a"),
    "step2_decreasing_in_R": ("u0_plus_u2_a_positive", "b1_positive"),
    "step3_decreasing_in_a": ("u0_plus_u2_a_positive", "step3_u2_u5_q2_negative",
                              "step3_v_slope_at_a1_negative"),
    "step3_decreasing_in_R": ("u0_plus_u2_a_positive",),
    "mf_error_nonincreasing_in_a": ("u0_plus_u2_a_positive",),
}


@dataclass(frozen=True)
class ErrorGrid:
    """Absolute error of the closed-form AP count over (a, D, P_U)."""

    a_values: tuple
    d_values: tuple
    pu_values: tuple
    cells: np.ndarray          # |closed - oracle|, shape (a, D, P_U)
    closed: np.ndarray
    oracle: np.ndarray
    reference: str = "nested adaptive quadrature of the exact feedback coverage"
    oracle_rel_tol: float = 1e-8

    @property
    def axes(self) -> tuple:
        return (self.a_values, self.d_values, self.pu_values)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["a", "D", "P_U", "error"])
        for i, a in enumerate(self.a_values):
            for j, d in enumerate(self.d_values):
                for k, p in enumerate(self.pu_values):
                    writer.writerow([a, repr(float(d)), repr(float(p)),
                                     repr(float(self.cells[i, j, k]))])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "axes": {"a": list(self.a_values), "D": list(self.d_values),
                     "P_U": list(self.pu_values)},
            "reference": self.reference,
            "oracle_rel_tol": self.oracle_rel_tol,
            "cells": [{"a": a, "D": d, "P_U": p,
                       "error": float(self.cells[i, j, k]),
                       "closed": float(self.closed[i, j, k]),
                       "oracle": float(self.oracle[i, j, k])}
                      for i, a in enumerate(self.a_values)
                      for j, d in enumerate(self.d_values)
                      for k, p in enumerate(self.pu_values)],
        }


def _check_axis(values, name):
    v = list(values)
    if not v:
        raise ValueError(f"{name} axis must be nonempty")
    if any(b <= a for a, b in zip(v, v[1:])):
        raise ValueError(f"{name} axis must be strictly increasing")
    return tuple(v)


def mf_error_grid(cfg: SystemConfig, a_values: Sequence[int] = DEFAULT_A_VALUES,
                  d_values: Sequence[float] = DEFAULT_R_VALUES,
                  pu_values: Sequence[float] = DEFAULT_PU_VALUES,
                  oracle_rel_tol: float = 1e-8) -> ErrorGrid:
    """Closed-form vs oracle AP count on every (a, D, P_U) cell."""
    a_values = _check_axis(a_values, "a")
    d_values = tuple(float(d) for d in _check_axis(d_values, "D"))
    pu_values = tuple(float(p) for p in _check_axis(pu_values, "P_U"))
    shape = (len(a_values), len(d_values), len(pu_values))
    closed = np.empty(shape)
    oracle = np.empty(shape)
    for k, p in enumerate(pu_values):
        cfg_p = cfg.with_uplink_power(p)
        for i, a in enumerate(a_values):
            coeffs = _coeffs(cfg_p, a)
            closed[i, :, k] = [aps_feedback(d, coeffs, cfg_p) for d in d_values]
            oracle[i, :, k] = aps_feedback_cumulative_exact(d_values, cfg_p, a=a,
                                                            epsrel=oracle_rel_tol)
    return ErrorGrid(a_values, d_values, pu_values, np.abs(closed - oracle), closed, oracle,
                     oracle_rel_tol=oracle_rel_tol)


@dataclass
class SensitivityReport:
    steps: dict[int, StepErrorTable]
    grid: ErrorGrid
    preconditions: dict
    verdicts: dict = field(default_factory=dict)

    def summary(self) -> dict:
        return {"preconditions": self.preconditions, "verdicts": self.verdicts}

    def to_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True) + "\n"


def _claim(observed: str, precondition_keys, pre: dict) -> dict:
    met = all(pre[key] for key in precondition_keys)
    if observed == INSUFFICIENT:
        status = INSUFFICIENT
    elif met:
        status = observed
    else:
        # sign conditions fail, so the claim is reported but not asserted
        status = "not asserted"
    return {"observed": observed, "preconditions_met": met,
            "preconditions": list(precondition_keys), "status": status}


def run_sensitivity(cfg: SystemConfig, a_values: Sequence[int] = DEFAULT_A_VALUES,
                    r_values: Sequence[float] = DEFAULT_R_VALUES,
                    pu_values: Sequence[float] = DEFAULT_PU_VALUES,
                    d_values: Sequence[float] | None = None) -> SensitivityReport:
    """Step tables, M_f error grid, preconditions and per-claim verdicts."""
    a_values = _check_axis(a_values, "a")
    r_values = tuple(float(r) for r in _check_axis(r_values, "R"))
    d_values = r_values if d_values is None else d_values
    steps = {s: step_error_table(s, cfg, a_values, r_values) for s in (1, 2, 3)}
    grid = mf_error_grid(cfg, a_values, d_values, pu_values)
    pre = preconditions(cfg, a_values, r_values)

    observed = {
        "step1_decreasing_in_a": axis_verdict(steps[1].per_node, 0, "decreasing"),
        "step1_increasing_in_R": axis_verdict(steps[1].per_node, 1, "increasing"),
        "step2_decreasing_in_a": axis_verdict(steps[2].per_node, 0, "decreasing"),
        "step2_decreasing_in_R": axis_verdict(steps[2].per_node, 1, "decreasing"),
        "step3_decreasing_in_a": axis_verdict(steps[3].per_node, 0, "decreasing"),
        "step3_decreasing_in_R": axis_verdict(steps[3].per_node, 1, "decreasing"),
        "mf_error_nonincreasing_in_a": axis_verdict(grid.cells, 0, "nonincreasing"),
    }
    verdicts = {name: _claim(obs, _CLAIM_PRECONDITIONS[name], pre)
                for name, obs in observed.items()}
    # informational: growth of the M_f error with D beyond 150 m, up to oracle accuracy
    far = [j for j, d in enumerate(grid.d_values) if d >= 150.0]
    if len(far) >= 2:
        sub = grid.cells[:, far, :]
        atol = 2 * grid.oracle_rel_tol * float(np.max(grid.oracle))
        obs = axis_verdict(sub, 1, "nondecreasing", atol=atol)
    else:
        obs = INSUFFICIENT
    verdicts["mf_error_increasing_in_D_beyond_150m"] = {
        "observed": obs, "preconditions_met": True, "preconditions": [], "status": obs}
    return SensitivityReport(steps, grid, pre, verdicts)
