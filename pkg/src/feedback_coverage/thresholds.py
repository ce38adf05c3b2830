"""Critical uplink SNR in forward mode (finite blocklength) and feedback mode (logistic fit)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from .specfun import q_function

LOG2E = math.log2(math.e)


@dataclass(frozen=True)
class ThresholdResult:
    omega_linear: float
    omega_db: float
    mode: Literal["forward", "feedback"]

    @classmethod
    def from_linear(cls, value: float, mode) -> "ThresholdResult":
        return cls(omega_linear=value, omega_db=10.0 * math.log10(value), mode=mode)

    @classmethod
    def from_db(cls, value_db: float, mode) -> "ThresholdResult":
        return cls(omega_linear=10.0 ** (value_db / 10.0), omega_db=value_db, mode=mode)


def channel_dispersion(eta):
    """Dispersion ``eta (eta + 2) / (2 (eta + 1)^2) * log2(e)^2`` in bits^2."""
    eta = np.asarray(eta, dtype=float)
    out = eta * (eta + 2.0) / (2.0 * (eta + 1.0) ** 2) * LOG2E ** 2
    return float(out) if out.ndim == 0 else out


def per_forward(eta: float, k_bits: int, n_uses: int) -> float:
    """Packet error rate at SNR ``eta`` from the normal approximation.

    ``Q((N/2 log2(1 + eta) - K) / sqrt(N V(eta)))``, with ``N/2`` as
    written for real-valued channel uses.
    """
    if not eta > 0:
        raise ValueError(f"per_forward requires eta > 0, got {eta!r}")
    backoff = math.sqrt(n_uses * channel_dispersion(eta))
    return q_function((0.5 * n_uses * math.log2(1.0 + eta) - k_bits) / backoff)


def critical_snr_forward(k_bits: int, n_uses: int, eps_star: float,
                         bracket=(1e-6, 1e6), rel_tol: float = 1e-9) -> ThresholdResult:
    """SNR at which the forward-mode PER equals ``eps_star``.

    Geometric bisection on the decreasing PER curve; the returned value is
    within ``rel_tol`` (relative) of the crossing.
    """
    if not 0.0 < eps_star < 0.5:
        raise ValueError(f"eps_star must lie in (0, 0.5), got {eps_star!r}")
    lo, hi = bracket
    if not (per_forward(lo, k_bits, n_uses) > eps_star > per_forward(hi, k_bits, n_uses)):
        raise ValueError(
            f"target PER {eps_star} not bracketed by SNR in [{lo}, {hi}] "
            f"for K={k_bits}, N={n_uses}"
        )
    while hi / lo - 1.0 > rel_tol:
        mid = math.sqrt(lo * hi)
        if per_forward(mid, k_bits, n_uses) > eps_star:
            lo = mid
        else:
            hi = mid
    return ThresholdResult.from_linear(math.sqrt(lo * hi), "forward")


def _omega_feedback_db(eta_d_db, a, u: Sequence[float]):
    u0, u1, u2, u3, u4, u5 = u
    arg = u0 * eta_d_db + u1 * a + u2 * eta_d_db * a + u3
    with np.errstate(over="ignore"):
        return 1.0 / (np.exp(arg) + u4) + u5


def omega_feedback_db(eta_d_db, a, u: Sequence[float]):
    """Vectorised feedback critical SNR in dB (see ``critical_snr_feedback``)."""
    out = _omega_feedback_db(np.asarray(eta_d_db, dtype=float), a, u)
    return float(out) if np.ndim(out) == 0 else out


def critical_snr_feedback(eta_d_db: float, a: int, u: Sequence[float]) -> ThresholdResult:
    """Feedback-mode threshold from the logistic fit.

    ``Omega_dB = 1 / (exp(u0 eta + u1 a + u2 eta a + u3) + u4) + u5`` with
    ``eta`` the downlink SNR in dB.  Lies between the floor ``u5`` and the
    ceiling ``1/u4 + u5``.
    """
    return ThresholdResult.from_db(omega_feedback_db(eta_d_db, a, u), "feedback")
