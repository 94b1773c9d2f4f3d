"""Huber cost and the matching IRLS weight.

Both functions accept scalars or arrays and broadcast like numpy ufuncs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class HuberParams:
    """Huber thresholds.

    ``delta1`` (meters) applies to the MDE and sensor factors, ``delta2``
    (log-depth units) to the log-slope factors.
    """

    delta1: float = 0.002
    delta2: float = 0.01

    def __post_init__(self):
        if not (self.delta1 > 0 and self.delta2 > 0):
            raise ValueError("Huber thresholds must be positive")


def huber_cost(r, delta):
    """``0.5 r**2`` for ``|r| <= delta``, else ``delta (|r| - 0.5 delta)``."""
    a = np.abs(r)
    out = np.where(a <= delta, 0.5 * a * a, delta * (a - 0.5 * delta))
    return out if np.ndim(out) else float(out)


def huber_irls_weight(r, delta):
    """IRLS weight ``psi(r) / r``: 1 inside the threshold, ``delta/|r|`` outside."""
    a = np.abs(r)
    # evaluate delta/|r| only where it is used
    out = np.where(a <= delta, 1.0, delta / np.where(a > delta, a, 1.0))
    return out if np.ndim(out) else float(out)
