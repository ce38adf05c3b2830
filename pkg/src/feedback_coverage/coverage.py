"""Coverage probability and connectable-AP counts.

Feedback-mode coverage is available at three levels of approximation:

* ``coverage_feedback_exact``: adaptive quadrature of the exact
  downlink-fade integral (the ground truth for everything else),
* ``coverage_feedback_gl``: Gauss-Laguerre quadrature of the same
  integrand, isolating the quadrature error,
* ``coverage_feedback_closed``: the closed form built from the
  per-node coefficients J1, J2, which also carries the Taylor steps.

Forward mode has an exact closed form.  AP counts integrate coverage
over a disk, in closed form through the lower incomplete gamma function
and numerically for the oracles.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy import integrate

from .config import SystemConfig
from .specfun import QuadratureRule, gauss_laguerre, lower_incomplete_gamma
from .thresholds import ThresholdResult, critical_snr_forward, omega_feedback_db

LN10 = math.log(10.0)

METHODS = ("forward-closed", "feedback-exact", "feedback-gl", "feedback-closed")


class IntegrationError(ArithmeticError):
    """Adaptive quadrature failed to reach the requested tolerance."""


class ApproximationRegimeError(ValueError):
    """The Taylor chain behind the closed form is invalid for this input."""


def _check_r(R: float) -> float:
    R = float(R)
    if not R > 0:
        raise ValueError(f"distance must be > 0, got {R!r}")
    return R


def uplink_z2(cfg: SystemConfig) -> float:
    """``sigma_U^2 / (P_U Gt Gr C_U)``: uplink threshold scale per unit SNR."""
    return 1.0 / cfg.uplink.gain_product


@lru_cache(maxsize=256)
def forward_threshold(k_bits: int, n_uses: int, eps_star: float) -> ThresholdResult:
    return critical_snr_forward(k_bits, n_uses, eps_star)


def forward_threshold_for(cfg: SystemConfig) -> ThresholdResult:
    code = cfg.code
    return forward_threshold(code.k_bits, code.n_uses, code.target_per)


def threshold_function_g(R: float, h_d_sq, cfg: SystemConfig, a: int | None = None):
    """Fade threshold on ``|h_U|^2`` given the downlink fade ``h_d_sq``.

    The uplink succeeds iff ``|h_U|^2 >= g``; ``g = Omega_f Z2 R^alpha_U``
    with the exact (un-approximated) feedback threshold ``Omega_f``.
    """
    R = _check_r(R)
    h = np.asarray(h_d_sq, dtype=float)
    if np.any(~(h > 0)):
        raise ValueError(f"downlink fading gain must be > 0, got {h_d_sq!r}")
    a = cfg.code.a_ratio if a is None else a
    eta_d_db = 10.0 * np.log10(cfg.downlink.gain_product * R ** (-cfg.downlink.exponent) * h)
    omega_db = omega_feedback_db(eta_d_db, a, cfg.code.u)
    out = 10.0 ** (np.asarray(omega_db) / 10.0) * uplink_z2(cfg) * R ** cfg.uplink.exponent
    return float(out) if out.ndim == 0 else out


# mass of the downlink fade below this point is ignored (<= 1e-14)
_FADE_FLOOR_MASS = 1e-14
# e^-40 upper tail of the exponential is ignored
_FADE_TAIL = 40.0


def coverage_feedback_exact(R: float, cfg: SystemConfig, a: int | None = None,
                            epsabs: float = 1e-10, epsrel: float = 1e-10) -> float:
    """Feedback coverage by adaptive quadrature over the downlink fade.

    Integrates ``exp(-mu_U g(R, x)) mu_D exp(-mu_D x)`` after the
    substitution ``x = e^t``, in which the logistic threshold is a smooth
    sigmoid in ``t``.
    """
    R = _check_r(R)
    a = cfg.code.a_ratio if a is None else a
    u0, u1, u2, u3, u4, u5 = cfg.code.u
    mu_u = cfg.uplink.fading_rate
    mu_d = cfg.downlink.fading_rate
    scale = uplink_z2(cfg) * R ** cfg.uplink.exponent
    eta0_db = 10.0 * math.log10(cfg.downlink.gain_product * R ** (-cfg.downlink.exponent))
    slope = u0 + u2 * a
    offset = u1 * a + u3
    db_per_t = 10.0 / LN10

    def threshold(t: float) -> float:
        arg = slope * (eta0_db + db_per_t * t) + offset
        omega_db = (1.0 / (math.exp(arg) + u4) if arg < 700.0 else 0.0) + u5
        return scale * 10.0 ** (omega_db / 10.0)

    def integrand(t: float) -> float:
        x = math.exp(t)
        return mu_d * math.exp(t - mu_d * x - mu_u * threshold(t))

    x_lo = _FADE_FLOOR_MASS / mu_d
    t_lo = math.log(x_lo)
    t_hi = math.log(_FADE_TAIL / mu_d)
    points = [math.log(1.0 / mu_d)]
    if slope != 0:
        # centre of the logistic transition
        t_mid = (-offset / slope - eta0_db) / db_per_t
        if t_lo < t_mid < t_hi:
            points.append(t_mid)
    value, err = integrate.quad(integrand, t_lo, t_hi, points=sorted(points),
                                epsabs=epsabs / 4, epsrel=epsrel, limit=400)
    if not err <= max(epsabs, epsrel * abs(value)):
        raise IntegrationError(
            f"feedback coverage integral did not converge at R={R} (error estimate {err:.3g})"
        )
    # below x_lo: g is largest there, so bound the piece by its value at x_lo
    value += -math.expm1(-mu_d * x_lo) * math.exp(-mu_u * threshold(t_lo))
    return min(max(value, 0.0), 1.0)


def coverage_feedback_gl(R: float, cfg: SystemConfig, rule: QuadratureRule | None = None,
                         a: int | None = None) -> float:
    """Gauss-Laguerre evaluation of the exact feedback coverage integrand."""
    R = _check_r(R)
    rule = gauss_laguerre(cfg.quadrature_order) if rule is None else rule
    g = threshold_function_g(R, rule.nodes / cfg.downlink.fading_rate, cfg, a=a)
    return float(np.dot(rule.weights, np.exp(-cfg.uplink.fading_rate * np.atleast_1d(g))))


@dataclass(frozen=True)
class PropOneCoefficients:
    """Per-node coefficients of the closed-form feedback coverage.

    ``b1 = w_const + q_const * a`` node by node.  ``w_const`` and
    ``q_const`` carry ``lg Z1_k`` and therefore vary with the node.
    """

    a: int
    nodes: np.ndarray
    weights: np.ndarray
    z1: np.ndarray
    b1: np.ndarray
    j1: np.ndarray
    j2: np.ndarray
    w_const: np.ndarray
    q_const: np.ndarray
    z2: float
    b2: float

    def __post_init__(self):
        for name in ("nodes", "weights", "z1", "b1", "j1", "j2", "w_const", "q_const"):
            getattr(self, name).setflags(write=False)

    @property
    def order(self) -> int:
        return len(self.nodes)


def prop1_coefficients(cfg: SystemConfig, rule: QuadratureRule | None = None,
                       a: int | None = None) -> PropOneCoefficients:
    """Z, B, W, Q and J coefficients for each quadrature node."""
    rule = gauss_laguerre(cfg.quadrature_order) if rule is None else rule
    a = cfg.code.a_ratio if a is None else a
    u0, u1, u2, u3, u4, u5 = cfg.code.u
    dl = cfg.downlink
    x = np.array(rule.nodes, dtype=float)
    z1 = dl.power * dl.g_tx * dl.g_rx * dl.intercept * x / (dl.fading_rate * dl.noise_power)
    z2 = uplink_z2(cfg)
    lg_term = np.log10(z1) - 1.0 / LN10
    w_const = 1.0 + u3 + u4 + 10.0 * u0 * lg_term
    q_const = u1 + 10.0 * u2 * lg_term
    b1 = w_const + q_const * a
    b2 = 10.0 / LN10 * (u0 + u2 * a)
    bad = np.flatnonzero(~(b1 > 0))
    if bad.size:
        k = int(bad[0])
        raise ApproximationRegimeError(
            f"B1 must be positive for the closed form; node k={k} (x={x[k]:.6g}) "
            f"has B1={b1[k]:.6g} at a={a}"
        )
    c = 1.0 + u5 * b1
    j1 = z2 + z2 * c * LN10 / (10.0 * b1) + z2 * c ** 2 * LN10 ** 2 / (200.0 * b1 ** 2)
    j2 = z2 * b2 * LN10 / (10.0 * b1 ** 2) + z2 * b2 * c * LN10 ** 2 / (100.0 * b1 ** 3)
    return PropOneCoefficients(
        a=a, nodes=x, weights=np.array(rule.weights, dtype=float), z1=z1, b1=b1,
        j1=j1, j2=j2, w_const=w_const, q_const=q_const, z2=z2, b2=b2,
    )


def coverage_feedback_closed_raw(R, coeffs: PropOneCoefficients, cfg: SystemConfig):
    """Unclamped closed form ``sum_k w_k exp(-mu_U (J1_k R^alpha - J2_k))``."""
    R = np.asarray(R, dtype=float)
    if np.any(~(R > 0)):
        raise ValueError(f"distance must be > 0, got {R!r}")
    mu = cfg.uplink.fading_rate
    ra = R[..., None] ** cfg.uplink.exponent
    out = np.sum(coeffs.weights * np.exp(-mu * (coeffs.j1 * ra - coeffs.j2)), axis=-1)
    return float(out) if out.ndim == 0 else out


def coverage_feedback_closed(R, coeffs: PropOneCoefficients, cfg: SystemConfig):
    """Closed-form feedback coverage clamped to [0, 1].

    The raw value can exceed one at short range, where the J2 shift
    dominates; ``coverage_feedback_closed_raw`` exposes it.
    """
    raw = coverage_feedback_closed_raw(R, coeffs, cfg)
    return float(np.clip(raw, 0.0, 1.0)) if np.ndim(raw) == 0 else np.clip(raw, 0.0, 1.0)


def forward_rate(cfg: SystemConfig, omega_c: ThresholdResult) -> float:
    """``A = mu_U Omega_c Z2`` of the forward coverage ``exp(-A R^alpha)``."""
    return cfg.uplink.fading_rate * omega_c.omega_linear * uplink_z2(cfg)


def coverage_forward(R, cfg: SystemConfig, omega_c: ThresholdResult | None = None):
    """Forward-mode coverage ``exp(-A R^alpha_U)``."""
    omega_c = forward_threshold_for(cfg) if omega_c is None else omega_c
    R = np.asarray(R, dtype=float)
    if np.any(~(R > 0)):
        raise ValueError(f"distance must be > 0, got {R!r}")
    out = np.exp(-forward_rate(cfg, omega_c) * R ** cfg.uplink.exponent)
    return float(out) if out.ndim == 0 else out


def aps_forward(D: float, cfg: SystemConfig, omega_c: ThresholdResult | None = None) -> float:
    """Expected number of forward-connectable APs within radius ``D``."""
    D = _check_r(D)
    omega_c = forward_threshold_for(cfg) if omega_c is None else omega_c
    alpha = cfg.uplink.exponent
    A = forward_rate(cfg, omega_c)
    s = 2.0 / alpha
    return 2.0 * math.pi * cfg.ap_density * lower_incomplete_gamma(s, A * D ** alpha) / (
        alpha * A ** s)


def aps_feedback(D: float, coeffs: PropOneCoefficients, cfg: SystemConfig) -> float:
    """Expected number of feedback-connectable APs within ``D`` (closed form)."""
    D = _check_r(D)
    alpha = cfg.uplink.exponent
    mu = cfg.uplink.fading_rate
    s = 2.0 / alpha
    total = 0.0
    for w, j1, j2 in zip(coeffs.weights, coeffs.j1, coeffs.j2):
        rate = mu * j1
        total += w * math.exp(mu * j2) * lower_incomplete_gamma(s, rate * D ** alpha) / (
            rate ** s * alpha)
    return 2.0 * math.pi * cfg.ap_density * total


def aps_forward_numeric(D: float, cfg: SystemConfig, omega_c: ThresholdResult | None = None,
                        epsrel: float = 1e-12) -> float:
    """Oracle: adaptive quadrature of ``int_0^D phi_c(R) 2 pi lambda R dR``."""
    D = _check_r(D)
    omega_c = forward_threshold_for(cfg) if omega_c is None else omega_c
    A = forward_rate(cfg, omega_c)
    alpha = cfg.uplink.exponent
    value, _ = integrate.quad(lambda r: math.exp(-A * r ** alpha) * r, 0.0, D,
                              epsabs=0.0, epsrel=epsrel, limit=400)
    return 2.0 * math.pi * cfg.ap_density * value


def aps_feedback_cumulative_exact(d_values: Sequence[float], cfg: SystemConfig,
                                  a: int | None = None, epsrel: float = 1e-8) -> np.ndarray:
    """Oracle ``M_f(D)`` for each ``D`` by nested adaptive quadrature.

    The outer radial integral is accumulated segment by segment over the
    sorted ``d_values`` so a whole D grid costs one sweep.
    """
    d = np.asarray(d_values, dtype=float)
    if d.ndim != 1 or d.size == 0 or np.any(~(d > 0)) or np.any(np.diff(d) <= 0):
        raise ValueError("d_values must be a nonempty, strictly increasing positive grid")

    def integrand(r: float) -> float:
        if r == 0.0:
            return 0.0
        return coverage_feedback_exact(r, cfg, a=a, epsabs=1e-13, epsrel=1e-12) * r

    out = np.empty_like(d)
    acc = 0.0
    lo = 0.0
    for i, hi in enumerate(d):
        piece, err = integrate.quad(integrand, lo, hi, epsabs=0.0, epsrel=epsrel * 0.1,
                                    limit=200)
        if not err <= max(epsrel * 0.1 * abs(piece), 1e-300):
            raise IntegrationError(f"M_f oracle did not converge on [{lo}, {hi}]")
        acc += piece
        out[i] = 2.0 * math.pi * cfg.ap_density * acc
        lo = hi
    return out


def aps_feedback_exact(D: float, cfg: SystemConfig, a: int | None = None,
                       epsrel: float = 1e-8) -> float:
    return float(aps_feedback_cumulative_exact([_check_r(D)], cfg, a=a, epsrel=epsrel)[0])


@dataclass(frozen=True)
class CoverageCurve:
    method: str
    distances: np.ndarray
    probabilities: np.ndarray
    config_hash: str
    raw_probabilities: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown coverage method {self.method!r}")
        if np.any(np.diff(self.distances) <= 0):
            raise ValueError("curve distances must be strictly increasing")
        p = np.asarray(self.probabilities)
        if np.any((p < 0) | (p > 1)):
            raise ValueError("curve probabilities must lie in [0, 1]")

    @property
    def points(self) -> list[tuple[float, float]]:
        return [(float(r), float(p)) for r, p in zip(self.distances, self.probabilities)]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["distance_m", "probability", "method"])
        for r, p in self.points:
            writer.writerow([repr(r), repr(p), self.method])
        return buf.getvalue()

    def to_dict(self) -> dict:
        out = {
            "method": self.method,
            "config_hash": self.config_hash,
            "points": [{"distance_m": r, "probability": p} for r, p in self.points],
        }
        if self.raw_probabilities is not None:
            out["raw_probabilities"] = [float(v) for v in self.raw_probabilities]
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def coverage_curve(method: str, distances: Sequence[float], cfg: SystemConfig) -> CoverageCurve:
    """Evaluate one coverage method over a distance grid."""
    r = np.asarray(distances, dtype=float)
    raw = None
    if method == "forward-closed":
        p = np.atleast_1d(coverage_forward(r, cfg))
    elif method == "feedback-exact":
        p = np.array([coverage_feedback_exact(x, cfg) for x in r])
    elif method == "feedback-gl":
        rule = gauss_laguerre(cfg.quadrature_order)
        p = np.array([coverage_feedback_gl(x, cfg, rule) for x in r])
    elif method == "feedback-closed":
        coeffs = prop1_coefficients(cfg)
        raw = np.atleast_1d(coverage_feedback_closed_raw(r, coeffs, cfg))
        p = np.clip(raw, 0.0, 1.0)
    else:
        raise ValueError(f"unknown coverage method {method!r}; expected one of {METHODS}")
    return CoverageCurve(method=method, distances=r, probabilities=p,
                         config_hash=cfg.config_hash, raw_probabilities=raw)
