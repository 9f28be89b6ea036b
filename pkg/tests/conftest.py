import numpy as np
import pytest

from patchasym import fem, layer_ops
from patchasym.geometry import DomainSpec, make_patch, standard_partition


@pytest.fixture(scope="session")
def plain_partition():
    return standard_partition(np.pi / 2)


@pytest.fixture(scope="session")
def plain_mesh(plain_partition):
    return fem.generate_mesh(DomainSpec(), plain_partition, 0.08)


@pytest.fixture(scope="session")
def dirichlet_patch_case():
    part = make_patch(standard_partition(np.pi / 2), 0.05)
    return part, fem.generate_mesh(DomainSpec(), part, 0.08)


@pytest.fixture(scope="session")
def neumann_patch_case():
    c = 1.5 * np.pi
    part = make_patch(standard_partition(c), 0.05)
    return part, fem.generate_mesh(DomainSpec(patch_center_angle=c), part, 0.08)


@pytest.fixture(scope="session")
def disk_ops():
    """The 64 x 64 disk operators; assembled once per session (about 20 s)."""
    return layer_ops.op_S1("disk", 64), layer_ops.op_R1("disk", 64)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(RESULTS):
            terminalreporter.write_line(line)
