import numpy as np
import pytest

from mpcat import SystemConfig, build_projectors, materialize_unitary, period_applier


def dense_system(**kwargs):
    cfg = SystemConfig(**kwargs)
    U = materialize_unitary(period_applier(cfg), cfg.dim, cfg.axis_dims)
    return cfg, U, build_projectors(cfg)


@pytest.fixture(scope="session")
def cat8():
    return dense_system(N=8)


@pytest.fixture(scope="session")
def cat16():
    return dense_system(N=16)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)
