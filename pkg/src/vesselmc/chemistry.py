"""First-order degradation of messenger molecules."""

from __future__ import annotations

import math

import numba as nb

from .rng import RngStream


@nb.njit(cache=True, inline="always", error_model="numpy")
def survives_draw(rate, dt, u):
    # rate == 0 gives exp(0) == 1 > u for every u in [0, 1)
    return u < math.exp(-rate * dt)


def survival_probability(rate_per_s: float, dt: float) -> float:
    return math.exp(-rate_per_s * dt)


def survives(rate_per_s: float, dt: float, rng: RngStream) -> bool:
    """Whether one molecule survives a step of length ``dt``."""
    if rate_per_s < 0 or dt <= 0:
        raise ValueError("need rate >= 0 and dt > 0")
    return bool(survives_draw(rate_per_s, dt, rng.uniform()))
