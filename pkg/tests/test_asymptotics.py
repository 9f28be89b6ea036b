import numpy as np
import pytest

from patchasym import asymptotics as asy
from patchasym import fem
from patchasym.errors import SingularEvaluation, SourceTooCloseToBoundary
from patchasym.layer_ops import green_free


def test_coefficient_cross_checks():
    d = asy.coefficient_cross_checks()
    for key in ("dirichlet_2d", "dirichlet_3d", "neumann_2d", "neumann_3d"):
        assert d[key] < 1e-12


def test_fundamental_solution_symmetry(plain_mesh):
    x, y = np.array([0.2, -0.3]), np.array([-0.25, 0.1])
    nx = asy.fundamental_solution(plain_mesh, x)
    ny = asy.fundamental_solution(plain_mesh, y)
    assert nx(y)[0] == pytest.approx(ny(x)[0], rel=5e-3)


def test_fundamental_solution_reproduces_green_representation(plain_mesh):
    # u(x) = int N(x, y) f(y) dy for the background solution with f = 1
    x = np.array([0.1, -0.2])
    n = asy.fundamental_solution(plain_mesh, x)
    u = fem.solve_mixed(plain_mesh, 1.0, 1.0, ("dirichlet",))
    tri = plain_mesh.nodes[plain_mesh.triangles]
    # edge-midpoint rule; the log singularity at x only costs a small local error
    pts = np.einsum("qk,tkd->tqd", np.array([[0.5, 0.5, 0], [0, 0.5, 0.5], [0.5, 0, 0.5]]), tri)
    vals = n(pts.reshape(-1, 2)).reshape(pts.shape[:2])
    approx = np.sum(vals.mean(axis=1) * plain_mesh.areas)
    assert approx == pytest.approx(u.at(x)[0], rel=0.02)


def test_fundamental_solution_vanishes_on_dirichlet_part(plain_mesh):
    n = asy.fundamental_solution(plain_mesh, np.array([0.0, 0.2]))
    th = np.linspace(np.pi + 0.1, 2 * np.pi - 0.1, 7)
    y = 0.999 * np.stack([np.cos(th), np.sin(th)], axis=1)
    assert np.abs(n(y)).max() < 0.02 * abs(green_free(np.array([0.0, 0.2]), np.array([[0.0, 0.0]]))[0])


def test_fundamental_solution_errors(plain_mesh):
    with pytest.raises(SourceTooCloseToBoundary):
        asy.fundamental_solution(plain_mesh, np.array([0.0, 0.98]))
    n = asy.fundamental_solution(plain_mesh, np.array([0.0, 0.0]))
    with pytest.raises(SingularEvaluation):
        n(np.zeros((1, 2)))


def test_variable_conductivity_corrector(plain_mesh):
    g = lambda p: 1 + 0.3 * p[..., 0]  # noqa: E731
    x, y = np.array([0.2, -0.3]), np.array([-0.25, 0.1])
    a = asy.fundamental_solution(plain_mesh, x, g)(y)[0]
    b = asy.fundamental_solution(plain_mesh, y, g)(x)[0]
    assert a == pytest.approx(b, rel=1e-2)


def test_predictions_signs():
    assert asy.predict_dirichlet_patch(None, 0.01, 0.5, 1.0, 1.0) < 0
    assert asy.predict_neumann_patch(None, 0.01, 0.5, 1.0, 1.0) > 0
    assert asy.predict_compliance_delta("dirichlet", 0.01, 0.3, 1.0) < 0
    assert asy.predict_compliance_delta("neumann", 0.01, -0.3, 1.0) > 0
    with pytest.raises(ValueError):
        asy.predict_compliance_delta("robin", 0.01, 1.0, 1.0)
    eps = 0.01
    delta = asy.predict_dirichlet_patch(None, eps, 0.4, 0.7, 1.0)
    assert asy.extracted_coefficient(delta, eps, 0.7, 0.4) == pytest.approx(np.pi)
