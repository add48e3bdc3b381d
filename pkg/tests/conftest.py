import math

import numpy as np
import pytest

from qflow.qstate import BlochVector, DensityMatrix, density_from_bloch

SEED = 20240811


@pytest.fixture
def rng():
    return np.random.default_rng(SEED)


def random_bloch_array(rng: np.random.Generator, n: int) -> np.ndarray:
    """n Bloch vectors uniform in the unit ball, shape (n, 3)."""
    r = rng.random(n) ** (1.0 / 3.0)
    cos_t = rng.uniform(-1.0, 1.0, n)
    sin_t = np.sqrt(1.0 - cos_t * cos_t)
    phi = rng.uniform(0.0, 2.0 * math.pi, n)
    return np.stack([r * sin_t * np.cos(phi), r * sin_t * np.sin(phi), r * cos_t], axis=1)


def density_of(b: np.ndarray) -> DensityMatrix:
    return density_from_bloch(BlochVector(float(b[0]), float(b[1]), float(b[2])))
