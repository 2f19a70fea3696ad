from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_hermitian(rng: np.random.Generator, k: int, scale: float = 1.0) -> np.ndarray:
    z = rng.normal(size=(k, k)) + 1j * rng.normal(size=(k, k))
    return scale * (z + z.conj().T) / 2


def random_tuple(rng: np.random.Generator, n: int, k: int, scale: float = 1.0) -> np.ndarray:
    return np.stack([random_hermitian(rng, k, scale) for _ in range(n)])


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240917)
