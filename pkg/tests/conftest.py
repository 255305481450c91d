from functools import lru_cache

import pytest

from watertank.model import Params
from watertank.spectral import BcKind, build_basis, w_modes


@lru_cache(maxsize=None)
def _basis(params: Params, kind: BcKind, N: int, with_duals: bool = True):
    return build_basis(params, kind, N, with_duals=with_duals)


@lru_cache(maxsize=None)
def _wmodes(params: Params, N: int):
    return w_modes(params, _basis(params, BcKind.CONSERVATIVE, N))


@pytest.fixture(scope="session")
def basis_cache():
    """Session-wide memoized basis builder (shooting is the expensive part)."""
    return _basis


@pytest.fixture(scope="session")
def wmodes_cache():
    return _wmodes


@pytest.fixture(scope="session")
def p_gamma0():
    return Params(gamma=0.0, mu=2.0, nu=0.5, n_modes=20, grid_points=2049)


@pytest.fixture(scope="session")
def p_std():
    """The gamma = 0.05 diagnostic point used across the suite."""
    return Params(gamma=0.05, mu=2.0, nu=0.5, n_modes=20, grid_points=2049)


@pytest.fixture(scope="session")
def p_synth():
    """The synthesis regime of the closed-loop criteria."""
    return Params(gamma=0.03, mu=2.0, nu=0.5, n_modes=20, grid_points=2049)
