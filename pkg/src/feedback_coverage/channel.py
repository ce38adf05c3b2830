"""Link budget (path loss, SNR) and the random primitives of the simulator.

The PPP is represented radially: only AP distances are generated since
every downstream quantity depends on distance alone.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import LinkParams


@dataclass(frozen=True)
class LinkRealization:
    distance: float
    fading_gain: float
    snr_linear: float


def _check_distance(R):
    R = np.asarray(R, dtype=float)
    if np.any(~(R > 0)):
        raise ValueError(f"distance must be > 0, got {R!r}")
    return R


def path_loss(R, link: LinkParams):
    """Large-scale gain ``C * R**-alpha``."""
    R = _check_distance(R)
    out = link.intercept * R ** (-link.exponent)
    return float(out) if out.ndim == 0 else out


def snr(R, fading_gain, link: LinkParams):
    """Received SNR ``P Gt Gr C R**-alpha |h|^2 / sigma^2`` (linear)."""
    R = _check_distance(R)
    h = np.asarray(fading_gain, dtype=float)
    if np.any(~(h >= 0)):
        raise ValueError(f"fading gain must be >= 0, got {fading_gain!r}")
    out = link.gain_product * R ** (-link.exponent) * h
    return float(out) if out.ndim == 0 else out


def realize(R: float, link: LinkParams, rng: np.random.Generator) -> LinkRealization:
    h = sample_fading(link.fading_rate, rng)
    return LinkRealization(distance=float(R), fading_gain=h, snr_linear=snr(R, h, link))


def sample_fading(rate: float, rng: np.random.Generator, size=None):
    """Exponential power gain with mean ``1/rate`` by inverse CDF."""
    if not rate > 0:
        raise ValueError(f"fading rate must be > 0, got {rate!r}")
    u = rng.random(size)
    # 1 - u lies in (0, 1], so the log is finite
    return -np.log1p(-u) / rate


def sample_ppp_disk(density: float, radius: float, rng: np.random.Generator,
                    min_distance: float = 0.1) -> np.ndarray:
    """Distances of a homogeneous PPP restricted to a disk of ``radius``.

    The count is Poisson(density * pi * radius^2) and each distance has
    density ``2 r / radius^2``.  Distances are clamped to ``min_distance``
    (far-field guard).  Returned unsorted.
    """
    if not density > 0:
        raise ValueError(f"density must be > 0, got {density!r}")
    if not radius > 0:
        raise ValueError(f"radius must be > 0, got {radius!r}")
    count = rng.poisson(density * np.pi * radius * radius)
    r = radius * np.sqrt(rng.random(count))
    return np.maximum(r, min_distance)


def stream(seed: int, index: int, domain: int = 0) -> np.random.Generator:
    """Independent counter-based generator for ``(seed, domain, index)``.

    Streams depend only on these keys, never on which worker draws them,
    so results do not change with the degree of parallelism.  ``domain``
    separates unrelated uses of the same master seed.
    """
    seq = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(domain), int(index)))
    return np.random.Generator(np.random.Philox(seq))
