import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from patchasym import layer_ops as lo
from patchasym.errors import SingularEvaluation
from patchasym.geometry import DomainSpec, build_flattening


# ---------------------------------------------------------------- oracles


def s1_segment_oracle(x, phi_sqrt):
    """-(1/2pi) int log|x - y| psi(y) / sqrt(1 - y^2) dy by QUADPACK with the algebraic weight."""
    v, _ = integrate.quad(lambda y: -np.log(abs(x - y)) * phi_sqrt(y) / (2 * np.pi), -1, 1,
                          weight="alg", wvar=(-0.5, -0.5), limit=200)
    return v


def r1_segment_oracle(x, dphi):
    """(1/2pi) p.v. int phi'(y) / (y - x) dy, phi' = dphi(y) / sqrt(1 - y^2)."""
    a, b = -0.95, 0.95
    mid, _ = integrate.quad(lambda y: dphi(y) / np.sqrt(1 - y * y), a, b, weight="cauchy", wvar=x)
    lo_, _ = integrate.quad(lambda y: dphi(y) / np.sqrt(1 - y) / (y - x), -1, a, weight="alg", wvar=(-0.5, 0))
    hi_, _ = integrate.quad(lambda y: dphi(y) / np.sqrt(1 + y) / (y - x), b, 1, weight="alg", wvar=(0, -0.5))
    return (mid + lo_ + hi_) / (2 * np.pi)


def r1_disk_center_oracle():
    """(1/4pi) f.p. int_disk sqrt(1 - |y|^2) / |y|^3 dy at the center.

    f.p. int |y|^-3 over the unit disk is -2 pi; the remainder is regular.
    """
    rem, _ = integrate.quad(lambda r: 2 * np.pi * (np.sqrt(1 - r * r) - 1) / r**2, 0, 1)
    return (rem - 2 * np.pi) / (4 * np.pi)


# ---------------------------------------------------------------- segment


def test_s1_segment_matches_quadrature():
    n = 32
    rng = np.random.default_rng(0)
    c = rng.normal(size=4)
    psi = lambda y: c[0] + c[1] * y + c[2] * y**2 + c[3] * np.cos(2 * y)  # noqa: E731
    km = lo.op_S1("segment", n)
    for x in (-0.7, 0.1, 0.55):
        assert lo.s1_segment_at(psi(km.nodes), [x])[0] == pytest.approx(s1_segment_oracle(x, psi), abs=1e-9)


def test_r1_segment_matches_quadrature():
    # phi = sqrt(1 - y^2) (1 + y/2): phi' = (1/2 - y - y^2) / sqrt(1 - y^2)
    km = lo.op_R1("segment", 24)
    psi = 1 + km.nodes / 2
    for x in (-0.6, 0.2, 0.8):
        oracle = r1_segment_oracle(x, lambda y: 0.5 - y - y * y)
        assert lo.r1_segment_at(psi, [x])[0] == pytest.approx(oracle, abs=1e-7)


def test_segment_equilibrium_means():
    s1 = lo.solve_S1(lo.op_S1("segment", 64), 1.0)
    r1 = lo.solve_R1(lo.op_R1("segment", 64), 1.0)
    # oracle: S1[1/sqrt] = log(2)/2 and R1[sqrt] = -1/2 (checked against quadrature above)
    assert s1.mean() == pytest.approx(np.pi / (np.log(2) / 2), rel=1e-12)
    assert r1.mean() == pytest.approx(-np.pi, rel=1e-12)


def test_s1_segment_symmetric_and_positive_on_mean_zero():
    km = lo.op_S1("segment", 40)
    B = km.weights[:, None] * km.matrix
    np.testing.assert_allclose(B, B.T, atol=1e-14)
    # restricted to <phi, 1> = 0 the quadratic form is positive (eigenvalues 1/(2k))
    Q = np.linalg.qr(np.column_stack([km.weights, np.eye(40)[:, 1:]]))[0][:, 1:]
    lam = np.linalg.eigvalsh(Q.T @ B @ Q)
    assert lam.min() > 0


@given(st.floats(-3, 3), st.integers(4, 40))
@settings(max_examples=25, deadline=None)
def test_operator_linearity(a, n):
    km = lo.op_R1("segment", n)
    psi = np.cos(np.arange(n))
    np.testing.assert_allclose(km.apply(a * psi), a * km.apply(psi), atol=1e-12 * (1 + abs(a)) * n)


def test_small_count_rejected():
    with pytest.raises(ValueError):
        lo.op_S1("segment", 3)


# ------------------------------------------------------------------- V_eps


@pytest.mark.parametrize("eps,gamma0", [(0.1, 1.0), (1e-3, 2.5), (0.3, 0.4)])
def test_veps_identities(eps, gamma0):
    v = lo.op_Veps(eps, gamma0, 48)
    ids = lo.veps_inverse_identities(v, np.random.default_rng(1).normal(size=48))
    assert ids["inverse"] < 1e-8 and ids["roundtrip"] < 1e-8
    assert ids["mean"] < 1e-10


def test_veps_rejects_bad_eps():
    with pytest.raises(ValueError):
        lo.op_Veps(1.5, 1.0, 16)


def test_teps_residuals_decrease():
    g = lambda p: np.exp(0.3 * p[..., 1])  # noqa: E731
    flat = build_flattening(DomainSpec("MappedHalfPlane", gamma=g))
    for variant in ("dirichlet", "neumann"):
        res = [lo.teps_residual(lo.op_Teps_P(flat, e, 32, variant)) for e in (0.1, 0.05, 0.025)]
        assert res[0] > res[1] > res[2]


# -------------------------------------------------------------------- disk


def test_disk_s1_equilibrium(disk_ops):
    s1, _ = disk_ops
    phi = lo.solve_S1(s1, 1.0)
    assert phi.mean() == pytest.approx(8.0, rel=1e-3)
    assert s1.symmetry_defect < 1e-8


def test_disk_r1_matches_finite_part_oracle(disk_ops):
    """R1 sqrt(1 - r^2) = -pi/4 at the center, so R1^{-1} 1 = -(4/pi) sqrt(1 - r^2) with mean -8/3."""
    _, r1 = disk_ops
    assert r1_disk_center_oracle() == pytest.approx(-np.pi / 4, rel=1e-10)
    r = np.linalg.norm(r1.nodes, axis=1)
    # psi = 1 is the density sqrt(1 - r^2) in the sqrt weight class
    out = r1.apply(np.ones(r1.n))
    interior = r < 0.9
    np.testing.assert_allclose(out[interior], -np.pi / 4, rtol=1e-3)
    assert lo.solve_R1(r1, 1.0).mean() == pytest.approx(-8 / 3, rel=1e-3)


# --------------------------------------------------------------- half-space


def _random_spd(rng, d):
    Q = np.linalg.qr(rng.normal(size=(d, d)))[0]
    return Q @ np.diag(rng.uniform(0.3, 3.0, d)) @ Q.T


@pytest.mark.parametrize("d", [2, 3])
@pytest.mark.parametrize("image", ["neumann", "dirichlet"])
def test_half_space_kernels(d, image):
    rng = np.random.default_rng(d)
    worst_wall = worst_pde = worst_refl = 0.0
    for _ in range(100):
        k = lo.HalfSpaceKernel(_random_spd(rng, d), image)
        x = rng.normal(size=(1, d))
        x[:, -1] = -abs(x[:, -1]) - 0.1
        y = rng.normal(size=(1, d))
        y[:, -1] = -abs(y[:, -1]) - 0.1
        wall, pde = lo.half_space_residuals(k, x, y)
        xw = x.copy()
        xw[:, -1] = 0
        worst_wall = max(worst_wall, wall.max())
        worst_pde = max(worst_pde, pde.max())
        worst_refl = max(worst_refl, lo.reflection_identity_defect(k, xw, y).max())
    assert worst_wall < 1e-8 and worst_refl < 1e-12 and worst_pde < 1e-5


def test_half_space_kernel_is_symmetric():
    rng = np.random.default_rng(7)
    k = lo.HalfSpaceKernel(_random_spd(rng, 2), "neumann")
    x, y = np.array([0.3, -0.5]), np.array([-0.2, -1.1])
    assert lo.half_space_kernel_eval(k, x, y)[0] == pytest.approx(lo.half_space_kernel_eval(k, y, x)[0], rel=1e-12)


def test_hypersingular_kernel_by_differences():
    rng = np.random.default_rng(5)
    for d in (2, 3):
        A = _random_spd(rng, d)
        k = lo.HalfSpaceKernel(A, "dirichlet")
        x = np.append(rng.normal(size=d - 1), 0.0)
        y = np.append(rng.normal(size=d - 1), 0.0)
        h = 1e-5
        # P = A grad_x (A grad_y L . e_d) . e_d, differenced along A e_d
        g = lambda xx: lo.half_space_kernel_eval(k, xx, y)[1] @ A[:, -1]  # noqa: E731
        fd = (g(x + h * A[:, -1]) - g(x - h * A[:, -1])) / (2 * h)
        assert lo.hypersingular_half_space_kernel(A, x, y) == pytest.approx(fd, rel=1e-5)
    with pytest.raises(SingularEvaluation):
        lo.hypersingular_half_space_kernel(np.eye(2), np.zeros(2), np.zeros(2))


def test_homogeneous_kernel_check():
    rng = np.random.default_rng(2)
    x, z, t = rng.normal(size=(10, 2)), rng.normal(size=(10, 2)), rng.uniform(0.2, 5, 10)
    odd, hom = lo.check_homogeneous_kernel(lambda x, z: z / np.sum(z**2, -1, keepdims=True), 2, x, z, t)
    assert odd < 1e-14 and hom < 1e-14
    odd, _ = lo.check_homogeneous_kernel(lambda x, z: np.log(np.sum(z**2, -1)), 2, x, z, t)
    assert odd > 0.1


# ------------------------------------------------------------------- jumps


def _smooth_density(rng, n=64):
    c = rng.normal(size=(2, 5)) / (1 + np.arange(5)) ** 2

    def phi(t):
        t = np.asarray(t)[..., None]
        k = np.arange(5)
        return np.sum(c[0] * np.cos(k * t) + c[1] * np.sin(k * t), axis=-1)

    return lo.circle_density(phi(2 * np.pi * np.arange(n) / n)), phi


def test_jump_relations():
    rng = np.random.default_rng(11)
    theta = np.array([0.3, 2.0, 4.4])
    for _ in range(5):
        dens, f = _smooth_density(rng)
        phi = f(theta)
        scale = np.abs(dens.values).max()
        s = lo.jump_check(dens, theta, "single")
        assert np.abs(s["trace_out"] - s["trace_in"]).max() < 1e-3 * scale
        assert np.abs(s["flux_in"] - s["flux_out"] - phi).max() < 1e-3 * scale
        dl = lo.jump_check(dens, theta, "double")
        assert np.abs(dl["trace_out"] - dl["trace_in"] - phi).max() < 1e-3 * scale
        assert np.abs(dl["flux_out"] - dl["flux_in"]).max() < 1e-3 * scale


def test_potential_on_curve_raises():
    dens = lo.circle_density(np.ones(8))
    with pytest.raises(SingularEvaluation):
        lo.single_layer_potential(dens, [[1.0, 0.0]], n_fine=8)
