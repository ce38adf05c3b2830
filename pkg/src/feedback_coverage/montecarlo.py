"""Monte Carlo estimates of coverage probability and connectable-AP counts.

Trials are grouped in fixed-size chunks and chunk ``c`` always draws from
``stream(seed, c)``, so the estimate depends on (seed, n_trials) only and
not on how many workers process the chunks.  Aggregation is a sum of
integer success counts.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Literal

import numpy as np

from .channel import sample_fading, sample_ppp_disk, stream
from .config import SystemConfig
from .coverage import forward_threshold_for
from .thresholds import omega_feedback_db

Mode = Literal["forward", "feedback"]

CHUNK_SIZE = 1 << 16
_COVERAGE_DOMAIN = 1
_APS_DOMAIN = 2
Z95 = 1.959963984540054


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_error: float
    ci95: tuple[float, float]
    n_trials: int
    seed: int
    successes: int | None = None
    # Wilson score interval, filled in when successes or failures are few
    wilson95: tuple[float, float] | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def wilson_interval(successes: int, n: int, z: float = Z95) -> tuple[float, float]:
    p = successes / n
    denom = 1.0 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1.0 - p) / n + z * z / (4 * n * n)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


def required_trials(p: float, rel_precision: float = 0.2, z: float = Z95) -> int:
    """Trials needed so the 95% half-width is ``rel_precision * p``.

    For p = 1e-4 and 20 % this is about 1e6; a 3-sigma half-width needs
    about 2.3e6.
    """
    if not 0 < p < 1:
        return 1
    return math.ceil(z * z * (1.0 - p) / (p * rel_precision ** 2))


def z_score(est: McEstimate, expected: float) -> float:
    """Standardised distance of an estimate from its predicted value.

    When a proportion sample has no successes (or no failures) its own
    standard error is zero, so the error implied by ``expected`` is used.
    """
    se = est.std_error
    if se == 0.0 and est.wilson95 is not None and 0.0 < expected < 1.0:
        se = math.sqrt(expected * (1.0 - expected) / est.n_trials)
    if se == 0.0:
        return 0.0 if est.mean == expected else math.copysign(math.inf, est.mean - expected)
    return (est.mean - expected) / se


def _proportion(successes: int, n: int, seed: int) -> McEstimate:
    p = successes / n
    se = math.sqrt(p * (1.0 - p) / n)
    wilson = None
    if min(successes, n - successes) < 10:
        wilson = wilson_interval(successes, n)
    return McEstimate(mean=p, std_error=se, ci95=(p - Z95 * se, p + Z95 * se),
                      n_trials=n, seed=seed, successes=successes, wilson95=wilson)


def feedback_success(R, h_u, h_d, cfg: SystemConfig, a: int | None = None) -> np.ndarray:
    """Per-trial uplink success given paired uplink/downlink fades."""
    a = cfg.code.a_ratio if a is None else a
    R = np.asarray(R, dtype=float)
    eta_u = cfg.uplink.gain_product * R ** (-cfg.uplink.exponent) * h_u
    with np.errstate(divide="ignore"):
        eta_d_db = 10.0 * np.log10(cfg.downlink.gain_product * R ** (-cfg.downlink.exponent)
                                   * h_d)
    omega = 10.0 ** (np.asarray(omega_feedback_db(eta_d_db, a, cfg.code.u)) / 10.0)
    return eta_u >= omega


def forward_success(R, h_u, cfg: SystemConfig, omega_linear: float) -> np.ndarray:
    R = np.asarray(R, dtype=float)
    return cfg.uplink.gain_product * R ** (-cfg.uplink.exponent) * h_u >= omega_linear


def _chunks(n: int) -> list[tuple[int, int]]:
    return [(c, min(CHUNK_SIZE, n - c * CHUNK_SIZE)) for c in range(-(-n // CHUNK_SIZE))]


def _map(func, items, workers: int):
    if workers <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))


def mc_coverage(R: float, mode: Mode, cfg: SystemConfig, n_trials: int, seed: int,
                workers: int = 1, fixed_threshold: float | None = None) -> McEstimate:
    """Empirical probability that an AP at distance ``R`` is connectable.

    Each trial draws ``|h_U|^2`` (and ``|h_D|^2`` in feedback mode), forms
    the uplink SNR and the mode's threshold and scores ``eta_U >= threshold``.
    ``fixed_threshold`` (linear) replaces the mode's threshold in every
    trial, which decouples the two links.
    """
    if n_trials < 100:
        raise ValueError(f"n_trials must be >= 100, got {n_trials!r}")
    if mode not in ("forward", "feedback"):
        raise ValueError(f"mode must be 'forward' or 'feedback', got {mode!r}")
    if not R > 0:
        raise ValueError(f"R must be > 0, got {R!r}")
    omega_c = forward_threshold_for(cfg).omega_linear if mode == "forward" else None

    def run(chunk):
        index, size = chunk
        rng = stream(seed, index, _COVERAGE_DOMAIN)
        h_u = sample_fading(cfg.uplink.fading_rate, rng, size)
        if fixed_threshold is not None:
            ok = forward_success(R, h_u, cfg, fixed_threshold)
        elif mode == "forward":
            ok = forward_success(R, h_u, cfg, omega_c)
        else:
            h_d = sample_fading(cfg.downlink.fading_rate, rng, size)
            ok = feedback_success(R, h_u, h_d, cfg)
        return int(np.count_nonzero(ok))

    successes = sum(_map(run, _chunks(n_trials), workers))
    return _proportion(successes, n_trials, seed)


def mc_connectable_aps(D: float, mode: Mode, cfg: SystemConfig, n_realizations: int,
                       seed: int, workers: int = 1) -> McEstimate:
    """Mean number of connectable APs in a disk of radius ``D``.

    Each realization draws a radial PPP, then independent fades per AP,
    and counts the APs meeting the mode's threshold.
    """
    if n_realizations < 10:
        raise ValueError(f"n_realizations must be >= 10, got {n_realizations!r}")
    if mode not in ("forward", "feedback"):
        raise ValueError(f"mode must be 'forward' or 'feedback', got {mode!r}")
    if not D > 0:
        raise ValueError(f"D must be > 0, got {D!r}")
    omega_c = forward_threshold_for(cfg).omega_linear

    def run(index):
        rng = stream(seed, index, _APS_DOMAIN)
        r = sample_ppp_disk(cfg.ap_density, D, rng, cfg.min_distance)
        h_u = sample_fading(cfg.uplink.fading_rate, rng, r.size)
        if mode == "forward":
            ok = forward_success(r, h_u, cfg, omega_c)
        else:
            h_d = sample_fading(cfg.downlink.fading_rate, rng, r.size)
            ok = feedback_success(r, h_u, h_d, cfg)
        return int(np.count_nonzero(ok))

    counts = np.array(_map(run, range(n_realizations), workers), dtype=float)
    mean = float(counts.mean())
    se = float(counts.std(ddof=1) / math.sqrt(n_realizations))
    return McEstimate(mean=mean, std_error=se, ci95=(mean - Z95 * se, mean + Z95 * se),
                      n_trials=n_realizations, seed=seed, successes=int(counts.sum()))
