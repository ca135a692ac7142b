"""Per-edge reductions over CSR-ordered triangle entries.

All sums go through ``np.bincount``, which accumulates in input order, so
results are bit-reproducible for a fixed triangle index.
"""

from __future__ import annotations

import numpy as np


def segment_sum(values: np.ndarray, owner: np.ndarray, m: int) -> np.ndarray:
    return np.bincount(owner, weights=values, minlength=m)


def segment_min(values: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    """Minimum of each nonempty segment; ``+inf`` for empty ones."""
    m = len(offsets) - 1
    out = np.full(m, np.inf)
    counts = np.diff(offsets)
    nonempty = counts > 0
    if np.any(nonempty):
        out[nonempty] = np.minimum.reduceat(values, offsets[:-1][nonempty])
    return out


def softmin_average(
    cost: np.ndarray,
    values: np.ndarray,
    owner: np.ndarray,
    offsets: np.ndarray,
    beta: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Average ``values`` per segment with weights ``exp(-beta * cost)``.

    The exponent is shifted by the segment minimum before exponentiation,
    which leaves the normalized weights unchanged but avoids underflow of
    every term at large ``beta * cost``.

    Returns:
        (averages, nonempty mask); averages are 0 where the segment is empty.
    """
    m = len(offsets) - 1
    nonempty = np.diff(offsets) > 0
    if len(cost) == 0:
        return np.zeros(m), nonempty
    shift = segment_min(cost, offsets)
    w = np.exp(-beta * (cost - shift[owner]))
    num = segment_sum(w * values, owner, m)
    den = segment_sum(w, owner, m)
    avg = np.zeros(m)
    avg[nonempty] = num[nonempty] / den[nonempty]
    return avg, nonempty
