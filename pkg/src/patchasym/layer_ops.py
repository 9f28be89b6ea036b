"""Kernels and boundary integral operators.

Densities on the reference segment (-1, 1) and the reference unit disk are
stored as a smooth nodal factor psi times a fixed endpoint weight:

* ``inverse_sqrt``: phi = psi / sqrt(1 - |x|^2)
* ``sqrt``: phi = psi * sqrt(1 - |x|^2)
* ``plain``: phi = psi

Operator matrices act on psi and return values at the same nodes.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .errors import IllConditioned, SingularEvaluation
from .quadrature import (
    barycentric_matrix,
    barycentric_weights,
    chebyshev_nodes,
    chebyshev_u_vandermonde,
    chebyshev_vandermonde,
    differentiation_matrix,
    gauss_jacobi_unit,
    gauss_legendre,
    lagrange_matrix,
    periodic_panels,
    trig_interp_matrix,
)

COND_LIMIT = 1e12

# Tabulated equilibrium means <phi, 1> of the reference operators.  Used by the
# cross-checks and the oracle tests only; no operator below reads them.  The
# disk R1 entry disagrees with the computed value -8/3 (see the README).
EQUILIBRIUM_MEANS = {
    ("S1", "segment"): 2 * np.pi / np.log(2.0),
    ("S1", "disk"): 8.0,
    ("R1", "segment"): -np.pi,
    ("R1", "disk"): -2.0 / 3.0,
}


def equilibrium_profile(op, geometry):
    """Closed-form equilibrium density phi(x) with op[phi] = 1, as tabulated."""
    if (op, geometry) == ("S1", "segment"):
        return lambda x: 2.0 / (np.log(2.0) * np.sqrt(1 - x**2))
    if (op, geometry) == ("S1", "disk"):
        return lambda r: 4.0 / (np.pi * np.sqrt(1 - r**2))
    if (op, geometry) == ("R1", "segment"):
        return lambda x: -2.0 * np.sqrt(1 - x**2)
    if (op, geometry) == ("R1", "disk"):
        return lambda r: -np.sqrt(1 - r**2) / np.pi
    raise ValueError(f"no closed form for {op} on {geometry}")


# ---------------------------------------------------------------- free space


def green_free(x, y, d=2):
    """Free-space fundamental solution of -Laplace: -log|x-y|/2pi or 1/(4pi|x-y|)."""
    r = np.linalg.norm(np.asarray(x, float) - np.asarray(y, float), axis=-1)
    if np.any(r == 0):
        raise SingularEvaluation("G(x, y) evaluated at x = y")
    if d == 2:
        return -np.log(r) / (2 * np.pi)
    if d == 3:
        return 1.0 / (4 * np.pi * r)
    raise ValueError("d must be 2 or 3")


def green_free_grad_y(x, y, d=2):
    """Gradient of G(x, y) with respect to y."""
    diff = np.asarray(x, float) - np.asarray(y, float)
    r = np.linalg.norm(diff, axis=-1, keepdims=True)
    if np.any(r == 0):
        raise SingularEvaluation("grad G(x, y) evaluated at x = y")
    if d == 2:
        return diff / (2 * np.pi * r**2)
    return diff / (4 * np.pi * r**3)


# ----------------------------------------------------------- half-space kernels


@dataclass(frozen=True)
class HalfSpaceKernel:
    """Fundamental solution of -div(A grad) in the lower half-space x_d < 0.

    ``image`` is "neumann" (conormal derivative vanishes on x_d = 0) or
    "dirichlet" (kernel vanishes on x_d = 0).
    """

    A: np.ndarray
    image: str = "neumann"
    M: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        if not np.allclose(A, A.T, atol=1e-14 * np.abs(A).max()):
            raise ValueError("A must be symmetric")
        lam, Q = np.linalg.eigh(A)
        if lam.min() <= 0:
            raise ValueError("A must be positive definite")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "M", (Q / np.sqrt(lam)) @ Q.T)
        if self.image not in ("neumann", "dirichlet"):
            raise ValueError("image must be 'neumann' or 'dirichlet'")

    @property
    def d(self):
        return self.A.shape[0]

    @property
    def image_vector(self):
        """v = M^{-1} e_d / |M^{-1} e_d|^2, so the image of My is My - 2 y_d v."""
        Minv_ed = np.linalg.solve(self.M, np.eye(self.d)[-1])
        return Minv_ed / (Minv_ed @ Minv_ed)


def half_space_kernel_eval(k, x, y):
    """Value and y-gradient of L_A(x, y); x and y are (..., d) arrays in the closed half-space."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    d = k.d
    M = k.M
    v = k.image_vector
    det_m = abs(np.linalg.det(M))
    sign = 1.0 if k.image == "neumann" else -1.0
    Mx = x @ M.T
    My = y @ M.T
    My_img = My - 2 * y[..., -1:] * v
    g1 = green_free(Mx, My, d)
    g2 = green_free(Mx, My_img, d)
    # chain rule: d(My)/dy = M, d(My_img)/dy = M - 2 v e_d^T
    J2 = M - 2 * np.outer(v, np.eye(d)[-1])
    grad = green_free_grad_y(Mx, My, d) @ M + green_free_grad_y(Mx, My_img, d) @ J2 * sign
    return det_m * (g1 + sign * g2), det_m * grad


def hypersingular_half_space_kernel(A, x, y):
    """Kernel P(x, y) = A grad_x (A grad_y L . n(y)) . n(x) of the Dirichlet-image L_A, x, y on x_d = 0.

    On the wall the conormal derivative A grad_y L . n(y) equals
    x_d / (c_d sqrt(det A) |M(x - y)|^d) with c_2 = pi, c_3 = 2 pi; differentiating
    in x_d and contracting with A n gives a_dd / (c_d sqrt(det A) |M(x - y)|^d).
    """
    A = np.asarray(A, float)
    d = A.shape[0]
    k = HalfSpaceKernel(A, "dirichlet")
    diff = np.asarray(x, float) - np.asarray(y, float)
    r = np.linalg.norm(diff @ k.M.T, axis=-1)
    if np.any(r == 0):
        raise SingularEvaluation("P(x, y) evaluated at x = y")
    c_d = np.pi if d == 2 else 2 * np.pi
    return A[-1, -1] / (c_d * np.sqrt(np.linalg.det(A)) * r**d)


def reflection_identity_defect(k, x, y):
    """| |Mx - My| - |Mx - My + 2 y_d v| | for x on the wall x_d = 0."""
    Mx = np.asarray(x, float) @ k.M.T
    My = np.asarray(y, float) @ k.M.T
    a = np.linalg.norm(Mx - My, axis=-1)
    b = np.linalg.norm(Mx - My + 2 * np.asarray(y)[..., -1:] * k.image_vector, axis=-1)
    return np.abs(a - b)


def half_space_residuals(k, x, y, h=1e-4):
    """Wall-condition and PDE residuals of L_A at sample pairs.

    ``wall``: A grad_y L . e_d at y on the wall (Neumann image) or L itself
    (Dirichlet image), for the points ``y`` moved onto the wall.  ``pde``:
    div_y(A grad_y L) by central differences of the analytic gradient at
    ``y`` with steps h |x - y|, relative to |A| |grad_y L| / |x - y|.
    """
    x = np.atleast_2d(np.asarray(x, float))
    y = np.atleast_2d(np.asarray(y, float))
    d = k.d
    yw = y.copy()
    yw[:, -1] = 0.0
    val, grad = half_space_kernel_eval(k, x, yw)
    if k.image == "neumann":
        wall = np.abs(grad @ k.A[:, -1]) / np.linalg.norm(grad, axis=-1)
    else:
        wall = np.abs(val)
    step = h * np.linalg.norm(x - y, axis=-1)
    div = np.zeros(len(y))
    for i in range(d):
        e = np.zeros((len(y), d))
        e[:, i] = step
        gp = half_space_kernel_eval(k, x, y + e)[1]
        gm = half_space_kernel_eval(k, x, y - e)[1]
        div += np.sum((gp - gm) / (2 * step[:, None]) * k.A[i], axis=-1)
    g0 = half_space_kernel_eval(k, x, y)[1]
    scale = np.linalg.norm(k.A, 2) * np.linalg.norm(g0, axis=-1) / np.linalg.norm(x - y, axis=-1)
    return wall, np.abs(div) / scale


def check_homogeneous_kernel(kz, d, x, z, t):
    """Parity and degree -(d-1) homogeneity defects of z -> kz(x, z) at samples.

    ``kz`` is the m-th z-derivative of a candidate kernel of class -m, evaluated
    row-wise on (N, d) arrays x, z; ``t`` holds N positive scalings.  Returns the
    largest relative defects (odd, homogeneous).
    """
    k0 = np.asarray(kz(x, z)).reshape(len(z), -1)
    k_neg = np.asarray(kz(x, -z)).reshape(len(z), -1)
    k_t = np.asarray(kz(x, t[:, None] * z)).reshape(len(z), -1)
    scale = np.abs(k0).max()
    odd = np.abs(k_neg + k0).max() / scale
    hom = np.abs(k_t - t[:, None] ** (-(d - 1)) * k0).max() / scale
    return float(odd), float(hom)


# ------------------------------------------------------------- densities


@dataclass
class BoundaryDensity:
    """Nodal representation phi = psi * w(x) on the reference segment, disk, or unit circle."""

    geometry: str
    nodes: np.ndarray
    weights: np.ndarray
    values: np.ndarray
    weight_class: str
    shape: tuple = ()

    def pair(self, g=None):
        """<phi, g> by the matched quadrature; g defaults to 1."""
        psi = self.values.ravel()
        if g is None:
            return float(self.weights @ psi)
        gv = g(self.nodes) if callable(g) else np.broadcast_to(g, psi.shape)
        return float(self.weights @ (psi * np.ravel(gv)))

    def mean(self):
        return self.pair()

    def radius(self):
        return np.abs(self.nodes) if self.nodes.ndim == 1 else np.linalg.norm(self.nodes, axis=1)

    def profile(self):
        """phi at the nodes."""
        r = self.radius()
        psi = self.values.ravel()
        if self.weight_class == "inverse_sqrt":
            return psi / np.sqrt(1 - r**2)
        if self.weight_class == "sqrt":
            return psi * np.sqrt(1 - r**2)
        return psi.copy()


# -------------------------------------------------------------- kernel matrix


class KernelMatrix:
    """Discrete boundary integral operator acting on the smooth factor psi.

    Segment operators hold a dense matrix.  Disk operators are rotation
    equivariant on the polar grid and hold, per Fourier mode, an orthonormal
    radial basis Q of the resolved subspace and the operator matrix G in that
    basis; the dense nodal matrix Q G Q^T W is assembled on request.
    """

    def __init__(self, tag, geometry, weight_class, nodes, weights, *, dense=None, blocks=None,
                 grid=None, params=None, symmetry_defect=0.0):
        self.tag = tag
        self.geometry = geometry
        self.weight_class = weight_class
        self.nodes = nodes
        self.weights = weights
        self._dense = dense
        self.blocks = blocks
        self.grid = grid
        self.params = dict(params or {})
        self.symmetry_defect = symmetry_defect

    @property
    def n(self):
        return len(self.weights)

    @property
    def matrix(self):
        if self._dense is None:
            self._dense = self.grid.dense_from_modal(self.blocks)
        return self._dense

    def apply(self, psi):
        psi = np.asarray(psi, dtype=float)
        if self.blocks is not None:
            return self.grid.apply_modal(self.blocks, psi.reshape(self.grid.shape)).ravel()
        return self.matrix @ psi.ravel()

    def cond(self):
        if self.blocks is not None:
            s = np.concatenate([np.linalg.svd(G, compute_uv=False) for _, G in self.blocks if G.size])
            return float(s.max() / s.min())
        return float(np.linalg.cond(self.matrix))

    def solve_values(self, g):
        g = np.asarray(g, dtype=float)
        if self.blocks is not None:
            return self.grid.solve_modal(self.blocks, g.reshape(self.grid.shape)).ravel()
        return np.linalg.solve(self.matrix, g.ravel())

    def galerkin(self):
        """Bilinear form matrix diag(weights) @ matrix."""
        return self.weights[:, None] * self.matrix

    def density(self, psi):
        return BoundaryDensity(self.geometry, self.nodes, self.weights, np.asarray(psi, float).ravel(),
                               self.weight_class, self.grid.shape if self.grid else ())


def _rhs_values(matrix, rhs):
    if isinstance(rhs, BoundaryDensity):
        return rhs.profile()
    if callable(rhs):
        return np.asarray(rhs(matrix.nodes), float)
    return np.broadcast_to(np.asarray(rhs, float), (matrix.n,)).copy()


def _solve(matrix, rhs, tags):
    if matrix.tag not in tags:
        raise ValueError(f"expected a matrix tagged {tags}, got {matrix.tag}")
    c = matrix.cond()
    if c > COND_LIMIT:
        raise IllConditioned(f"condition estimate {c:.3e} exceeds {COND_LIMIT:.0e}")
    return matrix.density(matrix.solve_values(_rhs_values(matrix, rhs)))


def solve_S1(matrix, rhs):
    """Density phi (weight class inverse_sqrt) with S1 phi = rhs at the nodes."""
    return _solve(matrix, rhs, ("S1_2D", "S1_3D"))


def solve_R1(matrix, rhs):
    """Density phi (weight class sqrt) with R1 phi = rhs at the nodes."""
    return _solve(matrix, rhs, ("R1_2D", "R1_3D"))


# ----------------------------------------------------------------- segment


def segment_rule(n, weight_class="inverse_sqrt"):
    """Chebyshev nodes and pairing weights for a weight class on (-1, 1)."""
    x = chebyshev_nodes(n)
    w = np.full(n, np.pi / n)
    if weight_class == "sqrt":
        w = w * (1 - x**2)
    elif weight_class == "plain":
        w = w * np.sqrt(1 - x**2)
    return x, w


def _segment_s1_matrix(n, targets=None):
    # -log|x-y| = log 2 + sum_k (2/k) T_k(x) T_k(y) on (-1, 1), hence
    # S1[T_0 / sqrt] = log(2)/2 and S1[T_k / sqrt] = T_k / (2k).
    y = chebyshev_nodes(n)
    x = y if targets is None else np.asarray(targets, float)
    lam = np.empty(n)
    lam[0] = np.log(2.0) / 2
    lam[1:] = 1.0 / (2 * np.arange(1, n))
    d = np.ones(n)
    d[0] = 0.5
    Ty = chebyshev_vandermonde(y, n)
    Tx = chebyshev_vandermonde(x, n)
    return (Tx * (lam * d * 2.0 / n)) @ Ty.T


def _segment_r1_matrix(n, targets=None):
    # Integration by parts: R1 phi(x) = (1/2pi) p.v. int phi'(y) / (y - x) dy.
    # With phi = sqrt(1-y^2) U_m:  phi' = -(m+1) T_{m+1} / sqrt(1-y^2), and the
    # Chebyshev Cauchy integral (1/pi) p.v. int T_{k}/(sqrt(1-y^2)(y-x)) = U_{k-1}(x),
    # so R1[sqrt(1-y^2) U_m] = -(m+1)/2 U_m.
    y = chebyshev_nodes(n)
    x = y if targets is None else np.asarray(targets, float)
    Uy = chebyshev_u_vandermonde(y, n)
    Ux = chebyshev_u_vandermonde(x, n)
    lam = -0.5 * np.arange(1, n + 1)
    return (Ux * lam) @ np.linalg.inv(Uy)


def _check_count(n):
    if min(np.atleast_1d(n)) < 4:
        raise ValueError("n must be at least 4")


def op_S1(geometry, n):
    """Discretized S1: -(1/2pi) int log|x-y| phi (segment) or (1/4pi) int phi/|x-y| (disk).

    For the disk, ``n`` is the radial node count and the azimuthal count
    (an int, or a pair (n_r, n_theta)).
    """
    _check_count(n)
    if geometry == "segment":
        x, w = segment_rule(n, "inverse_sqrt")
        A = _segment_s1_matrix(n)
        B = w[:, None] * A
        defect = float(np.abs(B - B.T).max() / np.abs(B).max())
        A = ((B + B.T) / 2) / w[:, None]
        return KernelMatrix("S1_2D", "segment", "inverse_sqrt", x, w, dense=A, symmetry_defect=defect)
    if geometry == "disk":
        grid = PolarGrid.make(n)
        modal, _, defect = grid.s1_modal()
        return KernelMatrix("S1_3D", "disk", "inverse_sqrt", grid.points, grid.weights("inverse_sqrt"),
                            blocks=modal, grid=grid, symmetry_defect=defect)
    raise ValueError(f"unknown geometry {geometry}")


def op_R1(geometry, n):
    """Discretized hypersingular R1 in integration-by-parts form on sqrt-class densities."""
    _check_count(n)
    if geometry == "segment":
        x, w = segment_rule(n, "sqrt")
        return KernelMatrix("R1_2D", "segment", "sqrt", x, w, dense=_segment_r1_matrix(n))
    if geometry == "disk":
        grid = PolarGrid.make(n)
        _, s1_nodal, _ = grid.s1_modal()
        modal, _ = grid.project_blocks(grid.r1_nodal_blocks(s1_nodal))
        return KernelMatrix("R1_3D", "disk", "sqrt", grid.points, grid.weights("sqrt"),
                            blocks=modal, grid=grid)
    raise ValueError(f"unknown geometry {geometry}")


def s1_segment_at(psi, targets):
    """S1 of phi = psi/sqrt(1-y^2), psi given at the n Chebyshev nodes, evaluated at arbitrary targets."""
    return _segment_s1_matrix(len(psi), targets) @ psi


def r1_segment_at(psi, targets):
    """R1 of phi = sqrt(1-y^2) psi, psi given at the n Chebyshev nodes, evaluated at arbitrary targets."""
    return _segment_r1_matrix(len(psi), targets) @ psi


# ------------------------------------------------------------- V_eps, T_eps


def op_Veps(eps, gamma0, n):
    """V_eps phi = (|log eps| + alpha) <phi, 1> + 2 pi S1 phi on the segment, alpha = log(gamma0)/2."""
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    if gamma0 <= 0:
        raise ValueError("gamma0 must be positive")
    s1 = op_S1("segment", n)
    alpha = 0.5 * np.log(gamma0)
    lam = abs(np.log(eps)) + alpha
    V = lam * np.outer(np.ones(n), s1.weights) + 2 * np.pi * s1.matrix
    return KernelMatrix("Veps", "segment", "inverse_sqrt", s1.nodes, s1.weights, dense=V,
                        params={"eps": eps, "alpha": alpha, "gamma0": gamma0, "s1": s1})


def veps_inverse_apply(veps, g):
    """Closed-form inverse of V_eps built from S1^{-1} (rank-one correction)."""
    s1 = veps.params["s1"]
    lam = abs(np.log(veps.params["eps"])) + veps.params["alpha"]
    sg = s1.solve_values(g)
    s1one = s1.solve_values(np.ones(veps.n))
    m_g = s1.weights @ sg
    m_1 = s1.weights @ s1one
    return sg / (2 * np.pi) - lam * m_g / (2 * np.pi + lam * m_1) * s1one / (2 * np.pi)


def veps_mean_formula(veps, g):
    """<V_eps^{-1} g, 1> = <S1^{-1} g, 1> / (2 pi + (|log eps| + alpha) <S1^{-1} 1, 1>)."""
    s1 = veps.params["s1"]
    lam = abs(np.log(veps.params["eps"])) + veps.params["alpha"]
    m_g = s1.weights @ s1.solve_values(g)
    m_1 = s1.weights @ s1.solve_values(np.ones(veps.n))
    return m_g / (2 * np.pi + lam * m_1)


def veps_inverse_identities(veps, g):
    """Defects of the closed-form inverse and mean formula against direct inversion."""
    g = np.asarray(g, float)
    direct = np.linalg.solve(veps.matrix, g)
    closed = veps_inverse_apply(veps, g)
    inv_defect = np.abs(closed - direct).max() / np.abs(direct).max()
    back_defect = np.abs(veps.matrix @ closed - g).max() / np.abs(g).max()
    mean_direct = veps.weights @ direct
    mean_defect = abs(veps_mean_formula(veps, g) - mean_direct) / abs(mean_direct)
    return {"inverse": float(inv_defect), "roundtrip": float(back_defect), "mean": float(mean_defect)}


def _fill_diagonal_by_neighbours(R):
    n = R.shape[0]
    i = np.arange(n)
    lo = np.clip(i - 1, 0, n - 1)
    hi = np.clip(i + 1, 0, n - 1)
    R[i, i] = 0.5 * (R[i, lo] + R[i, hi])
    R[0, 0], R[-1, -1] = R[0, 1], R[-1, -2]
    return R


def op_Teps_P(flattening, eps, n, variant="dirichlet", delta=1e-7):
    """T_eps on the reference segment for a flattened geometry.

    ``variant="dirichlet"`` discretizes phi -> int phi(z) L_{A(eps x)}(eps x, eps z) dz
    with the Neumann-image kernel (inverse_sqrt densities).  ``variant="neumann"``
    discretizes phi -> int P(eps x, eps z) phi(z) dz with the Dirichlet-image
    hypersingular kernel (sqrt densities).  The leading singular part of the
    kernel is extracted numerically at each target and handled by the S1 / R1
    product rules; the smooth remainder is integrated by the matched rule.
    """
    wc = "inverse_sqrt" if variant == "dirichlet" else "sqrt"
    x, w = segment_rule(n, wc)
    pts = lambda s: np.stack([eps * s, np.zeros_like(s)], axis=-1)
    A_at = np.array([flattening.a_field(p) for p in pts(x)])
    X, Z = np.meshgrid(x, x, indexing="ij")
    off = X != Z
    K = np.zeros((n, n))
    if variant == "dirichlet":
        for i in range(n):
            k = HalfSpaceKernel(A_at[i], "neumann")
            zi = Z[i, off[i]]
            K[i, off[i]] = half_space_kernel_eval(k, pts(np.full_like(zi, x[i])), pts(zi))[0]
        # singular part c(x) * (-log|x - z|), c from a two-point probe
        c = np.empty(n)
        for i in range(n):
            k = HalfSpaceKernel(A_at[i], "neumann")
            a = np.array([x[i], x[i]])
            b = a + np.array([delta, 2 * delta])
            v = half_space_kernel_eval(k, pts(a), pts(b))[0]
            c[i] = (v[0] - v[1]) / np.log(2.0)
        with np.errstate(divide="ignore"):
            R = K + c[:, None] * np.log(np.abs(X - Z))
        R = _fill_diagonal_by_neighbours(np.where(off, R, 0.0))
        T = 2 * np.pi * c[:, None] * _segment_s1_matrix(n) + R * w[None, :]
        tag = "Teps_P"
    else:
        for i in range(n):
            zi = Z[i, off[i]]
            K[i, off[i]] = hypersingular_half_space_kernel(A_at[i], pts(np.full_like(zi, x[i])), pts(zi))
        kappa = np.empty(n)
        for i in range(n):
            p = hypersingular_half_space_kernel(A_at[i], pts(np.array([x[i]])), pts(np.array([x[i] + delta])))
            kappa[i] = p[0] * (eps * delta) ** 2
        with np.errstate(divide="ignore"):
            R = K - kappa[:, None] / (eps * (X - Z)) ** 2
        R = _fill_diagonal_by_neighbours(np.where(off, R, 0.0))
        T = 2 * np.pi * (kappa / eps**2)[:, None] * _segment_r1_matrix(n) + R * w[None, :]
        tag = "Teps_P"
    return KernelMatrix(tag, "segment", wc, x, w, dense=T,
                        params={"eps": eps, "variant": variant, "gamma0": float(flattening.gamma(np.zeros(2)))})


def teps_residual(teps):
    """Proxy operator-norm residual of T_eps against its constant-coefficient model.

    Dirichlet: ||T - (1/(pi g0)) (|log eps| + alpha) <., 1> - (2/g0) S1||_2.
    Neumann:   eps^2 ||T - (2 g0/eps^2) R1||_2.
    Norms are discrete l2-induced norms on the nodal psi values.
    """
    eps = teps.params["eps"]
    g0 = teps.params["gamma0"]
    n = teps.n
    if teps.params["variant"] == "dirichlet":
        s1 = op_S1("segment", n)
        alpha = 0.5 * np.log(g0)
        model = (abs(np.log(eps)) + alpha) / (np.pi * g0) * np.outer(np.ones(n), s1.weights) + 2 / g0 * s1.matrix
        return float(np.linalg.norm(teps.matrix - model, 2))
    model = 2 * g0 / eps**2 * _segment_r1_matrix(n)
    return float(eps**2 * np.linalg.norm(teps.matrix - model, 2))


# -------------------------------------------------------------------- disk


class PolarGrid:
    """Polar tensor grid on the unit disk for rotation-equivariant operators.

    Radial nodes r_j = sqrt(s_j) with s_j Gauss-Jacobi nodes for the weight
    (1-s)^{-1/2} on (0, 1); azimuthal nodes are equispaced.  Functions are
    interpolated on the doubled radial grid {-r_j, r_j} using
    f(-r, theta) = f(r, theta + pi).
    """

    def __init__(self, n_r, n_t):
        if n_t % 2:
            raise ValueError("azimuthal node count must be even")
        self.n_r, self.n_t = n_r, n_t
        s, ws = gauss_jacobi_unit(n_r, -0.5, 0.0)
        order = np.argsort(s)
        self.s, self.ws = s[order], ws[order]
        self.r = np.sqrt(self.s)
        self.theta = 2 * np.pi * np.arange(n_t) / n_t
        self.doubled = np.concatenate([-self.r[::-1], self.r])
        Dd = differentiation_matrix(self.doubled)
        self._d_pos = Dd[n_r:, n_r:]
        self._d_neg = Dd[n_r:, :n_r][:, ::-1]

    @classmethod
    def make(cls, n):
        if np.isscalar(n):
            return cls(int(n), int(n))
        return cls(int(n[0]), int(n[1]))

    @property
    def shape(self):
        return (self.n_r, self.n_t)

    @property
    def points(self):
        R, T = np.meshgrid(self.r, self.theta, indexing="ij")
        return np.stack([R * np.cos(T), R * np.sin(T)], axis=-1).reshape(-1, 2)

    def weights(self, weight_class):
        # int psi / sqrt(1-r^2) dA = int dtheta * (1/2) int psi (1-s)^{-1/2} ds
        wr = 0.5 * self.ws * (2 * np.pi / self.n_t)
        if weight_class == "sqrt":
            wr = wr * (1 - self.s)
        elif weight_class == "plain":
            wr = wr * np.sqrt(1 - self.s)
        return np.repeat(wr, self.n_t)

    def radial_derivative(self, parity):
        return self._d_pos + parity * self._d_neg

    def mode(self, k):
        """Signed Fourier mode for FFT index k."""
        return k if k <= self.n_t // 2 else k - self.n_t

    # interpolation of nodal values to arbitrary points, as weights on the grid
    def interp_weights(self, pts, qw):
        """Matrix (n_r, n_t) with entries sum_q qw_q * cardinal_{j,l}(pts_q)."""
        rho = np.hypot(pts[:, 0], pts[:, 1])
        th = np.arctan2(pts[:, 1], pts[:, 0])
        L = lagrange_matrix(self.doubled, rho)
        Lneg = L[:, : self.n_r][:, ::-1]
        Lpos = L[:, self.n_r:]
        Tp = trig_interp_matrix(self.n_t, th)
        Tm = trig_interp_matrix(self.n_t, th + np.pi)
        return (Lpos * qw[:, None]).T @ Tp + (Lneg * qw[:, None]).T @ Tm

    def s1_nodal_blocks(self, panel_order=16, extra_u=16):
        """Mode blocks of S1 (inverse_sqrt class) on the nodal grid: array (n_t, n_r, n_r).

        Row i is computed for the target (r_i, 0) by local polar quadrature;
        rotation equivariance gives the other targets.  Trigonometric
        interpolation reproduces e^{ik theta} for |k| < n_t/2, so block k is
        sum_q w_q L_j(rho_q) e^{ik theta_q} with L_j the doubled-grid radial
        cardinal functions; reflection symmetry about the x-axis turns the
        exponential into 2 cos(k theta) over the upper half plane.
        """
        n_r, n_t = self.n_r, self.n_t
        # along a ray the integrand is a polynomial of degree up to 2 n_r in cos u
        n_u = 2 * n_r + extra_u
        xi, wxi = gauss_legendre(n_u, 0.0, 1.0)
        ks = np.arange(n_t // 2)
        odd_k = (ks % 2).astype(bool)
        half = np.zeros((n_t // 2, n_r, n_r))
        bw = barycentric_weights(self.doubled)
        for i, r0 in enumerate(self.r):
            # the ray length varies on an angular scale sqrt(1 - r0^2) around pi/2
            width = np.sqrt(1 - r0**2) / max(r0, 1e-3)
            levels = int(np.clip(np.ceil(np.log2(np.pi / width)) + 2, 1, 40))
            offs = (np.pi / 2) * 0.5 ** np.arange(1, levels + 1)
            n_base = 2 * max(1, int(np.ceil(2 * n_r / panel_order)))
            base = np.pi * np.arange(n_base + 1) / n_base
            breaks = np.unique(np.round(np.concatenate([base, np.pi / 2 + offs, np.pi / 2 - offs]), 15))
            phi, wphi = periodic_panels(breaks, panel_order)
            b = r0 * np.cos(phi)
            s = np.sqrt(b**2 + 1 - r0**2)
            u0 = np.arccos(np.clip(b / s, -1, 1))
            # along a ray, 1 - |y|^2 = (rho - t)(t + rho~); t = -b + s cos u maps it to du
            t = -b[:, None] + s[:, None] * np.cos(u0[:, None] * xi[None, :])
            wq = (2 * wphi * u0)[:, None] * wxi[None, :] / (4 * np.pi)
            px = (r0 + t * np.cos(phi)[:, None]).ravel()
            py = (t * np.sin(phi)[:, None]).ravel()
            rho = np.hypot(px, py)
            th = np.arctan2(py, px)
            L = barycentric_matrix(self.doubled, bw, rho) * wq.ravel()[:, None]
            l_pos = L[:, n_r:]
            l_neg = L[:, :n_r][:, ::-1]
            cs = np.cos(np.outer(th, ks))
            even = (l_pos + l_neg).T @ cs
            odd = (l_pos - l_neg).T @ cs
            half[:, i, :] = np.where(odd_k[None, :], odd, even).T
        blocks = np.zeros((n_t, n_r, n_r), dtype=complex)
        blocks[: n_t // 2] = half
        blocks[n_t // 2 + 1:] = half[1:][::-1]
        return blocks

    def modal_basis(self, k):
        """Nodal values (n_r, K) of an orthonormal basis of r^|m| p(r^2) for FFT index k.

        The degree bound |m| + 2 deg p <= 2 n_r - 2 keeps every product of two
        basis functions, and every S1 image, integrated exactly by the radial
        rule.  The Nyquist mode is not resolved and gets an empty basis.
        """
        m = abs(self.mode(k))
        if 2 * m >= self.n_t:
            return np.zeros((self.n_r, 0))
        K = (2 * self.n_r - 2 - m) // 2 + 1
        if K <= 0:
            return np.zeros((self.n_r, 0))
        V = self.r[:, None] ** m * np.stack(
            [special.eval_jacobi(j, -0.5, m, 2 * self.s - 1) for j in range(K)], axis=1)
        sw = np.sqrt(self.radial_weights)
        q, rr = np.linalg.qr(sw[:, None] * V)
        return q / sw[:, None]

    @property
    def radial_weights(self):
        return 0.5 * self.ws * (2 * np.pi / self.n_t)

    def project_blocks(self, nodal_blocks, hermitian=False):
        """Restrict nodal mode blocks to the resolved subspace; returns (Q, G) pairs and defect."""
        w = self.radial_weights
        out, defect = [], 0.0
        for k in range(self.n_t):
            Q = self.modal_basis(k)
            G = Q.T @ (w[:, None] * nodal_blocks[k]) @ Q
            if hermitian and G.size:
                GH = G.conj().T
                defect = max(defect, float(np.abs(G - GH).max() / np.abs(G).max()))
                G = (G + GH) / 2
            out.append((Q, G))
        return out, defect

    def s1_modal(self):
        nodal = self.s1_nodal_blocks()
        modal, defect = self.project_blocks(nodal, hermitian=True)
        return modal, nodal, defect

    def r1_nodal_blocks(self, s1_blocks):
        """R1 phi = div_x S1[grad phi] on sqrt-class densities, mode by mode.

        With phi = sqrt(1-r^2) psi, grad phi = ((1-r^2) grad psi - y psi)/sqrt(1-r^2),
        an inverse_sqrt vector density.  Complex components g+- = g_x +- i g_y of a
        mode-m psi live in modes m +- 1, and div V = d_z V+ + d_zbar V-.
        """
        n_r, n_t = self.n_r, self.n_t
        r = self.r
        Dr = lambda m: self.radial_derivative(-1.0 if m % 2 else 1.0)
        out = np.zeros((n_t, n_r, n_r), dtype=complex)
        for k in range(n_t):
            m = self.mode(k)
            if 2 * abs(m) >= n_t:
                continue
            D = Dr(m)
            p_plus = (1 - r**2)[:, None] * (D - np.diag(m / r)) - np.diag(r)
            p_minus = (1 - r**2)[:, None] * (D + np.diag(m / r)) - np.diag(r)
            a_plus = s1_blocks[(m + 1) % n_t]
            a_minus = s1_blocks[(m - 1) % n_t]
            div_plus = Dr(m + 1) + np.diag((m + 1) / r)
            div_minus = Dr(m - 1) - np.diag((m - 1) / r)
            out[k] = 0.5 * (div_plus @ a_plus @ p_plus + div_minus @ a_minus @ p_minus)
        return out

    def apply_modal(self, modal, psi):
        ph = np.fft.fft(psi, axis=1)
        w = self.radial_weights
        out = np.zeros_like(ph)
        for k, (Q, G) in enumerate(modal):
            if G.size:
                out[:, k] = Q @ (G @ (Q.T @ (w * ph[:, k])))
        return np.real(np.fft.ifft(out, axis=1))

    def solve_modal(self, modal, g):
        gh = np.fft.fft(g, axis=1)
        w = self.radial_weights
        out = np.zeros_like(gh)
        for k, (Q, G) in enumerate(modal):
            if G.size:
                out[:, k] = Q @ np.linalg.solve(G, Q.T @ (w * gh[:, k]))
        return np.real(np.fft.ifft(out, axis=1))

    def dense_from_modal(self, modal):
        w = self.radial_weights
        blocks = np.zeros((self.n_t, self.n_r, self.n_r), dtype=complex)
        for k, (Q, G) in enumerate(modal):
            if G.size:
                blocks[k] = Q @ G @ (Q.T * w[None, :])
        c = np.real(np.fft.ifft(blocks, axis=0))  # A[(i,l),(j,l')] = c[(l'-l) mod n, i, j]
        l = np.arange(self.n_t)
        idx = (l[None, :] - l[:, None]) % self.n_t
        A = c[idx]  # (l, l', i, j)
        return np.transpose(A, (2, 0, 3, 1)).reshape(self.n_r * self.n_t, self.n_r * self.n_t)


# ------------------------------------------------------ layer potentials


def circle_density(values):
    """Density on the unit circle sampled at equispaced angles."""
    values = np.asarray(values, float)
    n = len(values)
    theta = 2 * np.pi * np.arange(n) / n
    return BoundaryDensity("circle", theta, np.full(n, 2 * np.pi / n), values, "plain")


def _upsample(density, n_fine):
    v = density.values
    n = len(v)
    if n_fine <= n:
        return density.nodes, v
    c = np.fft.rfft(v)
    fine = np.fft.irfft(c, n_fine) * (n_fine / n)
    return 2 * np.pi * np.arange(n_fine) / n_fine, fine


def _circle_sums(density, x, n_fine, kind):
    th, phi = _upsample(density, n_fine)
    y = np.stack([np.cos(th), np.sin(th)], axis=1)
    w = 2 * np.pi / len(th)
    x = np.atleast_2d(np.asarray(x, float))
    diff = x[:, None, :] - y[None, :, :]
    r2 = np.sum(diff**2, axis=-1)
    if np.any(r2 == 0):
        raise SingularEvaluation("layer potential evaluated on the curve")
    if kind == "single":
        val = -np.log(r2) / (4 * np.pi)
        grad = -diff / (2 * np.pi * r2[..., None])
    else:
        # dG/dn_y with n_y = y on the unit circle: (x - y).n_y / (2 pi |x - y|^2)
        dn = np.sum(diff * y[None], axis=-1)
        val = dn / (2 * np.pi * r2)
        # grad_x of (x - y).n / r^2 = n / r^2 - 2 (x-y) (x-y).n / r^4
        grad = (y[None] / r2[..., None] - 2 * diff * (dn / r2**2)[..., None]) / (2 * np.pi)
    return w * (val @ phi), w * np.einsum("tsk,s->tk", grad, phi)


def single_layer_potential(density, x, n_fine=1 << 14):
    """Single layer potential int G(x, y) phi(y) ds(y) over the unit circle."""
    return _circle_sums(density, x, n_fine, "single")[0]


def double_layer_potential(density, x, n_fine=1 << 14):
    """Double layer potential int dG/dn_y(x, y) phi(y) ds(y) over the unit circle."""
    return _circle_sums(density, x, n_fine, "double")[0]


def _richardson3(f1, f2, f4):
    # values at offsets h, 2h, 4h with error c1 t + c2 t^2
    return (8 * f1 - 6 * f2 + f4) / 3


def jump_check(density, theta, kind="single", h=2e-3, n_fine=1 << 15):
    """One-sided traces and normal derivatives at boundary angles by Richardson extrapolation.

    Returns dict with keys trace_in, trace_out, flux_in, flux_out (arrays over theta).
    '+' is the exterior side and n the outward normal.
    """
    theta = np.atleast_1d(np.asarray(theta, float))
    nrm = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    res = {}
    for side, sgn in (("in", -1.0), ("out", 1.0)):
        vals, fluxes = [], []
        for t in (h, 2 * h, 4 * h):
            x = nrm * (1 + sgn * t)
            v, g = _circle_sums(density, x, n_fine, kind)
            vals.append(v)
            fluxes.append(np.sum(g * nrm, axis=1))
        res["trace_" + side] = _richardson3(*vals)
        res["flux_" + side] = _richardson3(*fluxes)
    return res
