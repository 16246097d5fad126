import warnings

import pytest

from abeigen import DomainSpec, RefinementSpec, build_mesh, assemble_branch_cut, solve_eigs
from abeigen.geometry import PoleFluxParams


@pytest.fixture(scope="session")
def ref():
    return RefinementSpec()


@pytest.fixture(scope="session")
def disk_mesh(ref):
    return build_mesh(DomainSpec.disk(), (0.0, 0.0), ref)


@pytest.fixture(scope="session")
def square_mesh(ref):
    return build_mesh(DomainSpec.square(), (0.0, 0.0), ref)


@pytest.fixture(scope="session")
def off_mesh(ref):
    return build_mesh(DomainSpec.square(), (0.1, 0.05), ref)


@pytest.fixture(scope="session")
def disk_half(disk_mesh):
    pen = assemble_branch_cut(disk_mesh, PoleFluxParams((0.0, 0.0), 0.5))
    return pen, solve_eigs(pen, 6)


@pytest.fixture(scope="session")
def square_half(square_mesh):
    pen = assemble_branch_cut(square_mesh, PoleFluxParams((0.0, 0.0), 0.5))
    return pen, solve_eigs(pen, 4)


@pytest.fixture(scope="session")
def off_half(off_mesh):
    pen = assemble_branch_cut(off_mesh, PoleFluxParams((0.1, 0.05), 0.5))
    return pen, solve_eigs(pen, 3)


@pytest.fixture
def no_warnings():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        yield
