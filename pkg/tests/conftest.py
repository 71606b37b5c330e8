import os
import sys

import pytest

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..', 'src')))

from core.geometry import HelixSpec  # noqa: E402


@pytest.fixture
def helix_spec():
    """τ = κ = 1, ρ₀ = 0.1 (ε = 0.1)."""
    return HelixSpec(kappa=1.0, tau=1.0, rho0=0.1)


@pytest.fixture
def cylinder_spec():
    return HelixSpec(kappa=0.0, tau=1.0, rho0=1.0)


@pytest.fixture
def torus_spec():
    return HelixSpec(kappa=1.0, tau=0.0, rho0=0.1)


@pytest.fixture
def small_eps_spec():
    """κ = τ = 1, ρ₀ = ε = 0.05."""
    return HelixSpec(kappa=1.0, tau=1.0, rho0=0.05)


@pytest.fixture
def rng():
    import numpy as np
    return np.random.default_rng(12345)
