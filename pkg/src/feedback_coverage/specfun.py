"""Special functions used by the analytical coverage chain.

Gauss-Laguerre rules are built from the three-term Laguerre recurrence
with Newton refinement of each root, so no eigen-solver is needed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

_SQRT2 = math.sqrt(2.0)
_SQRT2PI = math.sqrt(2.0 * math.pi)
_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Laguerre rule for integrals of ``f(x) * exp(-x)`` on [0, inf)."""

    order: int
    nodes: np.ndarray
    weights: np.ndarray

    def __iter__(self):
        return iter(zip(self.nodes, self.weights))

    def integrate(self, f) -> float:
        """Approximate the integral of ``f(x) * exp(-x)`` over [0, inf)."""
        return float(np.dot(self.weights, f(self.nodes)))


def _laguerre_eval(n: int, x: float) -> tuple[float, float, float]:
    """Return (L_n(x), L_{n-1}(x), L_n'(x)) via the three-term recurrence."""
    p1, p2 = 1.0, 0.0
    for j in range(1, n + 1):
        p3 = p2
        p2 = p1
        p1 = ((2 * j - 1 - x) * p2 - (j - 1) * p3) / j
    dp = n * (p1 - p2) / x
    return p1, p2, dp


@lru_cache(maxsize=None)
def gauss_laguerre(order: int) -> QuadratureRule:
    """Nodes and weights of the order-``order`` Gauss-Laguerre rule.

    Roots of L_n are found by Newton's method seeded with the usual
    asymptotic guesses; each root is refined until the Newton step is
    below 1e-14 relative or stalls at roundoff
    (100 iterations at most).  Weights follow from
    ``w_k = -1 / (n * L_n'(x_k) * L_{n-1}(x_k))``.
    """
    if isinstance(order, bool) or not isinstance(order, (int, np.integer)):
        raise TypeError(f"order must be an integer, got {order!r}")
    n = int(order)
    if not 1 <= n <= 64:
        raise ValueError(f"Gauss-Laguerre order must lie in [1, 64], got {n}")

    nodes = np.empty(n)
    weights = np.empty(n)
    z = 0.0
    for i in range(n):
        if i == 0:
            z = 3.0 / (1.0 + 2.4 * n)
        elif i == 1:
            z += 15.0 / (1.0 + 2.5 * n)
        else:
            ai = i - 1
            z += (1.0 + 2.55 * ai) / (1.9 * ai) * (z - nodes[i - 2])
        prev = math.inf
        for _ in range(100):
            p1, p2, dp = _laguerre_eval(n, z)
            step = p1 / dp
            if abs(step) >= prev and abs(step) <= 1e-12 * z:
                # stagnated at the recurrence's roundoff floor (~6e-14 at n=64)
                break
            z -= step
            prev = abs(step)
            if abs(step) <= 1e-14 * z:
                break
        else:
            raise ArithmeticError(f"Newton iteration for Laguerre root {i} did not converge")
        p1, p2, dp = _laguerre_eval(n, z)
        if abs(p1 / dp) > 1e-12 * z:
            raise ArithmeticError(f"Laguerre root {i} residual too large")
        nodes[i] = z
        weights[i] = -1.0 / (dp * n * p2)

    if np.any(np.diff(nodes) <= 0) or np.any(weights <= 0):
        raise ArithmeticError(f"degenerate Gauss-Laguerre rule for order {n}")
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule(order=n, nodes=nodes, weights=weights)


def q_function(x):
    """Upper tail of the standard normal, ``0.5 * erfc(x / sqrt(2))``."""
    if np.ndim(x) == 0:
        return 0.5 * math.erfc(float(x) / _SQRT2)
    from scipy.special import erfc

    return 0.5 * erfc(np.asarray(x, dtype=float) / _SQRT2)


def _q_inverse_upper(p: float) -> float:
    """Q^-1(p) for 0 < p <= 0.5, result >= 0."""
    # Abramowitz & Stegun 26.2.23 starting point (|error| < 4.5e-4)
    t = math.sqrt(-2.0 * math.log(p))
    x = t - (2.515517 + 0.802853 * t + 0.010328 * t * t) / (
        1.0 + 1.432788 * t + 0.189269 * t * t + 0.001308 * t ** 3
    )
    lo, hi = 0.0, max(2.0 * x + 1.0, 1.0)
    while q_function(hi) > p:
        lo, hi = hi, 2.0 * hi
    x = min(max(x, lo), hi)
    log_p = math.log(p)
    for _ in range(200):
        q = q_function(x)
        if q > p:
            lo = x
        else:
            hi = x
        if abs(q - p) <= 1e-12 * p:
            break
        # Newton on log Q, which stays well scaled deep in the tail
        pdf = math.exp(-0.5 * x * x) / _SQRT2PI
        step = (math.log(q) - log_p) * q / pdf
        candidate = x + step
        if not lo < candidate < hi:
            candidate = 0.5 * (lo + hi)
        if abs(candidate - x) <= 4 * _EPS * max(1.0, abs(x)):
            x = candidate
            break
        x = candidate
    return x


def q_inverse(p: float) -> float:
    """Inverse Q-function on (0, 1) by bracketed Newton with bisection fallback."""
    p = float(p)
    if not 0.0 < p < 1.0:
        raise ValueError(f"q_inverse requires 0 < p < 1, got {p!r}")
    if p == 0.5:
        return 0.0
    if p < 0.5:
        return _q_inverse_upper(p)
    return -_q_inverse_upper(1.0 - p)


def _gamma_series(s: float, x: float) -> float:
    # gamma(s, x) = e^-x x^s sum_n x^n / (s (s+1) ... (s+n))
    term = 1.0 / s
    total = term
    denom = s
    for _ in range(10_000):
        denom += 1.0
        term *= x / denom
        total += term
        if abs(term) < abs(total) * 1e-17:
            break
    else:
        raise ArithmeticError(f"incomplete gamma series did not converge for s={s}, x={x}")
    return total * math.exp(-x + s * math.log(x))


def _upper_gamma_cf(s: float, x: float) -> float:
    # Gamma(s, x) by the modified Lentz continued fraction
    tiny = 1e-300
    b = x + 1.0 - s
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 10_000):
        an = -i * (i - s)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    else:
        raise ArithmeticError(f"incomplete gamma fraction did not converge for s={s}, x={x}")
    return math.exp(-x + s * math.log(x)) * h


def lower_incomplete_gamma(s: float, x: float) -> float:
    """Lower incomplete gamma ``gamma(s, x) = int_0^x t^(s-1) e^-t dt``.

    Uses the power series for ``x < s + 1`` and ``Gamma(s) - Gamma(s, x)``
    with a continued fraction for the upper function otherwise.
    """
    s = float(s)
    x = float(x)
    if not (s > 0 and math.isfinite(s)):
        raise ValueError(f"lower_incomplete_gamma requires s > 0, got {s!r}")
    if not x >= 0:
        raise ValueError(f"lower_incomplete_gamma requires x >= 0, got {x!r}")
    if x == 0.0:
        return 0.0
    if math.isinf(x):
        return math.gamma(s)
    if x < s + 1.0:
        return _gamma_series(s, x)
    return math.gamma(s) - _upper_gamma_cf(s, x)
