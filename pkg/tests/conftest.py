import numpy as np
import pytest

from gridlessdoa.geometry import ArrayGeometry
from gridlessdoa.sigmodel import manifold


def steering_outer(u: float, power: float, g: ArrayGeometry) -> np.ndarray:
    """Forward-construction oracle: one source's contribution to the covariance."""
    phi = manifold(u, g)
    return power * np.outer(phi, phi.conj())


def scene_covariance(us, powers, g: ArrayGeometry, noise: float = 0.0) -> np.ndarray:
    """Exact model covariance built directly from manifold outer products."""
    r = sum(steering_outer(u, p, g) for u, p in zip(us, powers))
    return r + noise * np.eye(g.m)


def toeplitz_scene(us, powers, order: int, noise: float = 0.0) -> np.ndarray:
    """Exact PSD Toeplitz covariance of a virtual ULA of the given order."""
    return scene_covariance(us, powers, ArrayGeometry.ula(order), noise)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
