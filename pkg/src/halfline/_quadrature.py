"""Composite quadrature weights used by the transform and operator quadratures."""

from __future__ import annotations

import numpy as np


def trapezoid_weights(count: int, step: float) -> np.ndarray:
    if count < 2:
        raise ValueError("trapezoid rule needs at least 2 nodes.")
    w = np.full(count, step, dtype=float)
    w[0] = w[-1] = step / 2.0
    return w


def simpson_weights(count: int, step: float) -> np.ndarray:
    """Composite Simpson weights; `count` must be odd (an even number of panels)."""
    if count < 3 or count % 2 == 0:
        raise ValueError("Simpson rule needs an odd node count of at least 3.")
    w = np.empty(count, dtype=float)
    w[0::2] = 2.0
    w[1::2] = 4.0
    w[0] = w[-1] = 1.0
    return w * (step / 3.0)


def integration_weights(count: int, step: float) -> np.ndarray:
    """Simpson when the panel count allows it, trapezoid otherwise."""
    if count >= 3 and count % 2 == 1:
        return simpson_weights(count, step)
    return trapezoid_weights(count, step)
