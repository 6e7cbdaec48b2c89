import math

import numpy as np
import pytest

from vesselmc.chemistry import survival_probability, survives, survives_draw
from vesselmc.rng import RngStream


def test_zero_rate_always_survives():
    rng = RngStream(1, 0)
    assert all(survives(0.0, 1e-3, rng) for _ in range(1000))
    # including the largest uniform the generator can produce
    assert survives_draw(0.0, 1.0, 1.0 - 2**-53)


def test_survival_frequency():
    rng = RngStream(8, 3)
    u = rng.uniform(100_000)
    frac = np.mean([survives_draw(0.5, 0.01, x) for x in u])
    assert frac == pytest.approx(0.99501, abs=0.001)


def test_huge_rate_never_survives():
    assert survival_probability(1e6, 1e-3) == pytest.approx(0.0, abs=1e-300)
    rng = RngStream(1, 1)
    assert not any(survives(1e6, 1e-3, rng) for _ in range(100))


def test_memoryless_steps():
    k, dt = 3.0, 0.01
    assert survival_probability(k, dt) ** 2 == pytest.approx(survival_probability(k, 2 * dt), rel=1e-14)
    rng = RngStream(4, 4)
    u = rng.uniform(400_000).reshape(-1, 2)
    two = np.mean([survives_draw(k, dt, a) and survives_draw(k, dt, b) for a, b in u])
    one = math.exp(-k * 2 * dt)
    assert abs(two - one) < 4 * math.sqrt(one * (1 - one) / len(u))


def test_bad_arguments():
    with pytest.raises(ValueError):
        survives(-1.0, 1e-3, RngStream(0, 0))
    with pytest.raises(ValueError):
        survives(1.0, 0.0, RngStream(0, 0))
