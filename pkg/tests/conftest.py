"""
Shared pytest fixtures for CaRBM tests.

Keeps the decomposition cache inside a temporary directory and provides
small models, decompositions and density matrices.
"""

import sys
from pathlib import Path

import numpy as np
import pytest

# Add project root to path
PROJECT_ROOT = Path(__file__).parent.parent
sys.path.insert(0, str(PROJECT_ROOT))


# =============================================================================
# Environment Setup
# =============================================================================

@pytest.fixture(autouse=True)
def isolated_cache_dir(tmp_path: Path, monkeypatch):
    """Point CARBM_CACHE_DIR at a per-test directory and reload settings."""
    from carbm.core.config import get_settings

    cache_dir = tmp_path / "carbm_cache"
    monkeypatch.setenv("CARBM_CACHE_DIR", str(cache_dir))
    get_settings.cache_clear()
    yield cache_dir
    get_settings.cache_clear()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


# =============================================================================
# Cache
# =============================================================================

@pytest.fixture
def cache_manager(tmp_path: Path):
    """CacheManager on a fresh directory."""
    from carbm.engine.cache_manager import CacheConfig, CacheManager
    return CacheManager(CacheConfig(cache_dir=str(tmp_path / "cache")))


# =============================================================================
# Models
# =============================================================================

@pytest.fixture
def xxz2():
    """Two-site XXZ chain with a probe field."""
    from carbm.engine.models import XXZSpec, build_xxz
    return build_xxz(XXZSpec(L=2, J=1.0, Jz=0.5, g_r=0.3))


@pytest.fixture
def xxz3_spec():
    from carbm.engine.models import XXZSpec
    return XXZSpec(L=3, J=1.0, Jz=0.5, g_r=0.2)


@pytest.fixture
def xxz3(xxz3_spec):
    from carbm.engine.models import build_xxz
    return build_xxz(xxz3_spec)


@pytest.fixture
def decomposition3(xxz3):
    """Converged decomposition of the three-site XXZ chain."""
    from carbm.engine.cartan import decompose, z_product_hint
    return decompose(xxz3, csa_hint=z_product_hint(3), seed=0)


@pytest.fixture
def gn_spec():
    """Smallest Gross-Neveu lattice: two flavors on two sites."""
    from carbm.engine.models import GrossNeveuSpec
    return GrossNeveuSpec(N=2, L=2, G=1.0, mu=0.3, m=0.0)


# =============================================================================
# States
# =============================================================================

@pytest.fixture
def random_density():
    """Factory for random full-rank density matrices on n qubits."""
    def _make(n: int, seed: int = 0) -> np.ndarray:
        gen = np.random.default_rng(seed)
        dim = 1 << n
        g = gen.normal(size=(dim, dim)) + 1j * gen.normal(size=(dim, dim))
        rho = g @ g.conj().T
        return rho / np.trace(rho).real
    return _make


@pytest.fixture
def mixed_state():
    """Factory for maximally mixed system states with the ancilla in |0>."""
    from carbm.engine.simulator import prepare_initial
    return lambda n: prepare_initial(n, "mixed_density")

