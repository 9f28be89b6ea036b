import numpy as np
import pytest

from patchasym import fem
from patchasym.errors import MeshFailure, SingularSystem
from patchasym.geometry import DomainSpec, standard_partition


def test_affine_solutions_are_exact(plain_mesh):
    u = lambda p: 0.3 + 1.2 * p[..., 0] - 0.7 * p[..., 1]  # noqa: E731
    fld = fem.solve_mixed(plain_mesh, 1.0, 0.0, ("dirichlet", "neumann"), u)
    np.testing.assert_allclose(fld.values, u(plain_mesh.nodes), atol=1e-12)
    # flux data use the circle normal, the mesh edges the chord normal: O(h^2) defect
    flux = lambda p: 1.2 * p[..., 0] - 0.7 * p[..., 1]  # noqa: E731
    fld = fem.solve_mixed(plain_mesh, 1.0, 0.0, ("dirichlet",), u, ("neumann",), flux)
    np.testing.assert_allclose(fld.values, u(plain_mesh.nodes), atol=2e-3)


def test_manufactured_rate():
    # -Laplace u = 4 with u = 1 - |x|^2 vanishing on the whole circle
    exact = lambda p: 1 - np.sum(p**2, axis=-1)  # noqa: E731
    errs, hs = [], [0.2, 0.1, 0.05]
    for h in hs:
        m = fem.generate_mesh(DomainSpec(), standard_partition(), h)
        fld = fem.solve_mixed(m, 1.0, 4.0, ("dirichlet", "neumann"))
        errs.append(fem.l2_norm(m, fld.values - exact(m.nodes)))
    rates = np.log2(np.array(errs[:-1]) / errs[1:])
    assert np.all(rates > 1.7), rates


def test_normal_flux_of_manufactured_solution():
    m = fem.generate_mesh(DomainSpec(), standard_partition(), 0.05)
    fld = fem.solve_mixed(m, 1.0, 4.0, ("dirichlet", "neumann"))
    q = fem.normal_flux(fld)
    # pointwise recovery is first order, the integral is much sharper
    assert np.abs(q.values + 2.0).max() < 0.1
    assert np.abs(q.values + 2.0).mean() < 0.03
    assert q.integral() == pytest.approx(-4 * np.pi, rel=1e-3)


def test_variable_conductivity_flux_balance(plain_mesh):
    g = lambda p: 1 + 0.5 * p[..., 0] ** 2  # noqa: E731
    fld = fem.solve_mixed(plain_mesh, g, 1.0, ("dirichlet",))
    # total conormal flux balances the source: int gamma du/dn = -int f = -pi (polygon area)
    q = fem.normal_flux(fld, conormal=True)
    assert q.integral() == pytest.approx(-plain_mesh.areas.sum(), rel=1e-10)


def test_maximum_principle(dirichlet_patch_case):
    part, m = dirichlet_patch_case
    chi = fem.solve_chi_eps(m, part)
    assert chi.values.min() >= -1e-12 and chi.values.max() <= 1 + 1e-12
    u0 = fem.solve_background(m, part)
    assert u0.values.min() >= -1e-12


def test_zeta_energy_identity(neumann_patch_case):
    part, m = neumann_patch_case
    z = fem.solve_zeta_eps(m, part)
    edges = m.edges_with("patch")
    trace = fem.BoundaryFunction(m, np.unique(edges), z.values[np.unique(edges)], ("patch",))
    assert fem.dirichlet_energy(m, z.values) == pytest.approx(trace.integral(), rel=1e-10)
    assert z.values.min() >= -1e-12


def test_compliance_signs(dirichlet_patch_case, neumann_patch_case):
    part, m = dirichlet_patch_case
    assert fem.compliance(fem.solve_perturbed(m, part), 1.0) < fem.compliance(fem.solve_background(m, part), 1.0)
    part, m = neumann_patch_case
    assert fem.compliance(fem.solve_perturbed(m, part), 1.0) > fem.compliance(fem.solve_background(m, part), 1.0)


def test_renumbering_invariance(plain_mesh):
    perm = np.random.default_rng(3).permutation(plain_mesh.n_nodes)
    m2 = plain_mesh.renumbered(perm)
    a = fem.solve_mixed(plain_mesh, 1.0, 1.0, ("dirichlet",))
    b = fem.solve_mixed(m2, 1.0, 1.0, ("dirichlet",))
    pts = np.array([[0.1, 0.2], [-0.3, -0.4]])
    np.testing.assert_allclose(a.at(pts), b.at(pts), atol=1e-12)
    assert fem.compliance(a, 1.0) == pytest.approx(fem.compliance(b, 1.0), rel=1e-12)


def test_galerkin_orthogonality(plain_mesh):
    fld = fem.solve_mixed(plain_mesh, 1.0, 1.0, ("dirichlet",))
    v = np.where(fld.essential, 0.0, np.random.default_rng(0).normal(size=plain_mesh.n_nodes))
    assert fem.galerkin_defect(fld, v) < 1e-10 * np.abs(v).sum()


def test_errors(plain_mesh):
    with pytest.raises(SingularSystem):
        fem.solve_mixed(plain_mesh, 1.0, 1.0, ())
    with pytest.raises(MeshFailure):
        fem.interpolate(plain_mesh, np.zeros(plain_mesh.n_nodes), [[2.0, 0.0]])
    with pytest.raises(MeshFailure):
        fem.generate_mesh(DomainSpec(), standard_partition(), -1.0)
