import numpy as np
import pytest

from aoi_mg11.analytic import SystemConfig
from aoi_mg11.distributions import Deterministic, Exponential, Gamma, Uniform


def random_system_config(rng: np.random.Generator) -> SystemConfig:
    """A random but well-conditioned model for cross-checking closed forms.

    Rejects draws where some stream's delivery rate gets tiny: numeric
    differentiation of the interdeparture MGF near its pole would then need
    problem-dependent step sizes, and simulation cross-checks would need huge
    horizons.
    """
    while True:
        m = int(rng.integers(1, 5))
        lam = float(rng.uniform(0.6, 1.8))
        raw = rng.exponential(1.0, m)
        p = 0.6 * raw / raw.sum() + 0.4 / m
        p = p / p.sum()
        kind = rng.integers(0, 4)
        if kind == 0:
            dist = Exponential(float(rng.uniform(0.7, 2.0)))
        elif kind == 1:
            dist = Gamma(float(rng.uniform(0.6, 2.5)), float(rng.uniform(0.3, 1.0)))
        elif kind == 2:
            dist = Deterministic(float(rng.uniform(0.3, 1.2)))
        else:
            a = float(rng.uniform(0.0, 0.5))
            dist = Uniform(a, a + float(rng.uniform(0.3, 1.2)))
        cfg = SystemConfig(lam, tuple(p), dist)
        p_lam = cfg.service_beats_arrival()
        if min(cfg.stream_rate(i) for i in range(1, m + 1)) * p_lam >= 0.08:
            return cfg


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
