"""
Pytest configuration and shared fixtures for hp-nitsche-coupling tests
"""

import numpy as np
import pytest

from hp_nitsche_coupling.geometry_mesh import (
    Element,
    Mesh2D,
    build_lshape_decomposition,
    build_square_decomposition,
)
from hp_nitsche_coupling.models import (
    ConvergenceRecord,
    ElementKind,
    ErrorBreakdown,
)
from hp_nitsche_coupling.settings import ENV_LOG_LEVEL, ENV_NUM_THREADS, ENV_OUTPUT_DIR
from hp_nitsche_coupling.verification import coarse_problem

# Package is installed, no path manipulation needed


@pytest.fixture
def unit_triangle():
    """Reference triangle (0,0), (1,0), (0,1)"""
    return Element(ElementKind.TRIANGLE, (0, 1, 2), np.array([(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]))


@pytest.fixture
def unit_square():
    """Reference square [0,1]^2"""
    return Element(
        ElementKind.PARALLELOGRAM,
        (0, 1, 2, 3),
        np.array([(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]),
    )


@pytest.fixture
def single_square_mesh(unit_square):
    """One-element mesh without boundary arcs (pure Neumann patch)"""
    return Mesh2D(unit_square.vertices, (unit_square,), ())


@pytest.fixture(scope="session")
def square_meshes():
    """Default FE/BE meshes of the smooth square problem (32 elements, 20 panels)"""
    return build_square_decomposition()


@pytest.fixture(scope="session")
def lshape_split_meshes():
    """L-shape split along the diagonal, FE part refined once"""
    return build_lshape_decomposition(2, fe_h=0.5)


@pytest.fixture(scope="session")
def coarse_p2():
    """Assembled smooth square problem at p = 2, eta0 = 2"""
    return coarse_problem(degree=2, eta0=2.0)


@pytest.fixture(scope="session")
def coarse_p2_eta3():
    """Assembled smooth square problem at p = 2, eta0 = 3"""
    return coarse_problem(degree=2, eta0=3.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def clean_env(monkeypatch):
    """Environment without any HPNC_* variables"""
    for name in (ENV_NUM_THREADS, ENV_LOG_LEVEL, ENV_OUTPUT_DIR):
        monkeypatch.delenv(name, raising=False)
    return monkeypatch


@pytest.fixture
def make_record():
    """Factory for convergence records with a given total error"""

    def factory(step=0, total=1.0, h_max=0.5, p_max=1, n_fe=40, n_be=10, study="square_smooth-p"):
        part = total / np.sqrt(3.0)
        return ConvergenceRecord(
            study=study,
            step=step,
            n_dofs=n_fe + n_be,
            n_fe=n_fe,
            n_be=n_be,
            h_max=h_max,
            p_max=p_max,
            sigma=1.0,
            mu=0.0,
            errors=ErrorBreakdown.from_components(part, part, part),
        )

    return factory


@pytest.fixture
def h_study_records(make_record):
    """Synthetic h-study with err = h^(2/3) and N ~ h^-2"""
    hs = [0.5, 0.25, 0.125, 0.0625, 0.03125]
    return [
        make_record(step=i, total=h ** (2.0 / 3.0), h_max=h, n_fe=int(8 / h**2), n_be=int(4 / h))
        for i, h in enumerate(hs)
    ]
