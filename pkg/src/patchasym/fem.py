"""P1 finite elements for the mixed conductivity problem and its auxiliary problems.

Labels on the unit-disk meshes are "dirichlet", "neumann" and "patch"; the
patch takes the condition opposite to its host region in the perturbed
problems and the host's condition in the background problem.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .errors import MeshFailure, SingularSystem, SolverFailure
from .geometry import TWO_PI, angular_distance, wrap
from .meshing import Mesh, SizeField, disk_mesh, dump_mesh, read_mesh  # noqa: F401

# edge-midpoint rule on a triangle: weights 1/3 each, exact for quadratics
_MID = np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]])
# 6-point interior rule (degree 4), barycentric coordinates and weights
_A, _B = 0.445948490915965, 0.091576213509771
_Q6 = np.array([[_A, _A, 1 - 2 * _A], [_A, 1 - 2 * _A, _A], [1 - 2 * _A, _A, _A],
                [_B, _B, 1 - 2 * _B], [_B, 1 - 2 * _B, _B], [1 - 2 * _B, _B, _B]])
_W6 = np.array([0.223381589678011] * 3 + [0.109951743655322] * 3)
_G2 = 0.5 + np.array([-0.5, 0.5]) / np.sqrt(3)


def as_field(value):
    """Scalar or callable on points (..., 2) -> callable."""
    if callable(value):
        return value
    c = float(value)
    return lambda x: np.full(np.shape(x)[:-1], c)


# ------------------------------------------------------------------ meshes


def generate_mesh(spec, partition, h, *, patch_ratio=16, center_ratio=4, grade=0.25, sigma_ratio=4,
                  extra_sources=()):
    """Graded mesh of the unit disk for a partition (with or without patch).

    Element size is h away from the special points, ``eps / patch_ratio`` at
    the patch endpoints and ``h / sigma_ratio`` at the interface points, and
    grows by ``grade`` per unit distance in between (the size halves once per
    layer of width ~ s / grade).
    """
    if h <= 0:
        raise MeshFailure("mesh size must be positive")
    if spec.kind != "UnitDisk":
        raise MeshFailure("only the unit disk is meshed")
    r = spec.radius
    sigma = partition.interface_points
    sources = [r * np.array([np.cos(t), np.sin(t)]) for t in sigma]
    sizes = [h / sigma_ratio] * len(sigma)
    breaks = list(sigma) + [partition.center]
    if partition.patch is not None:
        eps = partition.eps
        for t in partition.patch:
            sources.append(r * np.array([np.cos(t), np.sin(t)]))
            sizes.append(eps / patch_ratio)
            breaks.append(t)
        sources.append(r * np.array([np.cos(partition.center), np.sin(partition.center)]))
        sizes.append(eps / center_ratio)
    for p, s in extra_sources:
        sources.append(np.asarray(p, float))
        sizes.append(s)
    size = SizeField(h, np.array(sources), np.array(sizes), grade)
    return disk_mesh(r, size, breaks, partition.label_at)


# --------------------------------------------------------------- assembly


def _gradients(mesh):
    p = mesh.nodes[mesh.triangles]
    area = mesh.areas
    # gradient of barycentric coordinate k: rot90 of the opposite edge / (2 area)
    e = np.stack([p[:, 2] - p[:, 1], p[:, 0] - p[:, 2], p[:, 1] - p[:, 0]], axis=1)
    grads = np.stack([-e[..., 1], e[..., 0]], axis=-1) / (2 * area[:, None, None])
    return grads, area


def stiffness(mesh, gamma=1.0):
    grads, area = _gradients(mesh)
    p = mesh.nodes[mesh.triangles]
    g = as_field(gamma)(np.einsum("qk,tkd->tqd", _MID, p)).mean(axis=1)
    local = np.einsum("tid,tjd->tij", grads, grads) * (g * area)[:, None, None]
    return _scatter(mesh, local)


def mass(mesh):
    area = mesh.areas
    local = (np.ones((3, 3)) + np.eye(3))[None] * (area / 12)[:, None, None]
    return _scatter(mesh, local)


def _scatter(mesh, local):
    t = mesh.triangles
    rows = np.repeat(t, 3, axis=1).ravel()
    cols = np.tile(t, (1, 3)).ravel()
    n = mesh.n_nodes
    return sparse.csr_matrix((local.ravel(), (rows, cols)), shape=(n, n))


def load(mesh, f):
    """Entries int f phi_i dx by the degree-4 interior rule."""
    p = mesh.nodes[mesh.triangles]
    x = np.einsum("qk,tkd->tqd", _Q6, p)
    fv = as_field(f)(x)
    local = np.einsum("tq,qk->tk", fv * _W6[None, :], _Q6) * mesh.areas[:, None]
    return np.bincount(mesh.triangles.ravel(), local.ravel(), minlength=mesh.n_nodes)


def boundary_load(mesh, labels, g):
    """Entries int g phi_i ds over edges with the given labels (2-point Gauss per edge)."""
    out = np.zeros(mesh.n_nodes)
    edges = mesh.edges_with(labels)
    if len(edges) == 0:
        return out
    a, b = mesh.nodes[edges[:, 0]], mesh.nodes[edges[:, 1]]
    length = np.linalg.norm(b - a, axis=1)
    gf = as_field(g)
    for s in _G2:
        val = gf(a + s * (b - a)) * length * 0.5
        out += np.bincount(edges[:, 0], val * (1 - s), minlength=mesh.n_nodes)
        out += np.bincount(edges[:, 1], val * s, minlength=mesh.n_nodes)
    return out


def boundary_mass(mesh, edges):
    length = np.linalg.norm(mesh.nodes[edges[:, 1]] - mesh.nodes[edges[:, 0]], axis=1)
    local = (np.ones((2, 2)) + np.eye(2))[None] * (length / 6)[:, None, None]
    rows = np.repeat(edges, 2, axis=1).ravel()
    cols = np.tile(edges, (1, 2)).ravel()
    n = mesh.n_nodes
    return sparse.csr_matrix((local.ravel(), (rows, cols)), shape=(n, n))


# ----------------------------------------------------------------- solving


@dataclass(frozen=True)
class ScalarField:
    """P1 field on a mesh together with the system it solves."""

    mesh: Mesh
    values: np.ndarray
    essential: np.ndarray
    gamma: object = 1.0
    f: object = 0.0
    residual: np.ndarray = field(default=None, repr=False)
    info: dict = field(default_factory=dict)

    def __sub__(self, other):
        return ScalarField(self.mesh, self.values - other.values, self.essential | other.essential)

    def at(self, pts):
        return interpolate(self.mesh, self.values, pts)


def _essential_values(mesh, labels, data):
    n = mesh.n_nodes
    mask = np.zeros(n, dtype=bool)
    vals = np.zeros(n)
    for lab in sorted(labels, key=lambda s: s != "dirichlet"):
        nodes = mesh.nodes_with(lab)
        if len(nodes) == 0:
            continue
        d = data.get(lab, 0.0) if isinstance(data, dict) else data
        vals[nodes] = as_field(d)(mesh.nodes[nodes])
        mask[nodes] = True
    return mask, vals


def solve_mixed(mesh, gamma=1.0, f=0.0, essential_labels=("dirichlet",), essential_data=0.0,
                flux_labels=(), flux_data=0.0, extra_load=None, tol=1e-10):
    """Galerkin solution of -div(gamma grad u) = f with mixed boundary data.

    ``essential_data`` / ``flux_data`` are a scalar, a callable on points, or
    a dict keyed by label.  Flux data prescribe gamma du/dn.  Nodes touching
    an essential edge are essential (closed Dirichlet set convention).
    """
    mask, ub = _essential_values(mesh, set(essential_labels), essential_data)
    if not mask.any():
        raise SingularSystem("the essential set is empty")
    K = stiffness(mesh, gamma)
    F = load(mesh, f)
    for lab in flux_labels:
        g = flux_data.get(lab, 0.0) if isinstance(flux_data, dict) else flux_data
        F = F + boundary_load(mesh, lab, g)
    if extra_load is not None:
        F = F + extra_load
    free = ~mask
    u = ub.copy()
    if free.any():
        Kff = K[free][:, free].tocsc()
        rhs = F[free] - K[free][:, mask] @ ub[mask]
        try:
            u[free] = splu(Kff).solve(rhs)
        except RuntimeError as exc:
            raise SolverFailure(str(exc)) from exc
        res = np.linalg.norm(Kff @ u[free] - rhs) / max(np.linalg.norm(rhs), np.finfo(float).tiny)
        if not np.isfinite(res) or (np.linalg.norm(rhs) > 0 and res > tol):
            raise SolverFailure(f"relative residual {res:.2e} exceeds {tol:.0e}")
    return ScalarField(mesh, u, mask, gamma, f, residual=K @ u - F)


def background_labels(partition):
    """Essential labels of the unperturbed problem: the patch behaves like its host."""
    if partition.patch is not None and partition.host_kind == "dirichlet":
        return ("dirichlet", "patch")
    return ("dirichlet",)


def solve_background(mesh, partition, gamma=1.0, f=1.0):
    return solve_mixed(mesh, gamma, f, background_labels(partition))


def solve_perturbed(mesh, partition, gamma=1.0, f=1.0):
    return solve_mixed(mesh, gamma, f, tuple(partition.essential_labels()))


def solve_chi_eps(mesh, partition):
    """chi = 1 on the patch, 0 on Gamma_D, harmonic with zero flux elsewhere."""
    if partition.patch is None:
        return ScalarField(mesh, np.zeros(mesh.n_nodes), np.zeros(mesh.n_nodes, bool))
    if partition.patch_kind != "dirichlet":
        raise ValueError("chi_eps needs a patch hosted in the Neumann region")
    return solve_mixed(mesh, 1.0, 0.0, ("dirichlet", "patch"), {"dirichlet": 0.0, "patch": 1.0})


def solve_zeta_eps(mesh, partition):
    """zeta = 0 on Gamma_D minus the patch, unit flux on the patch, harmonic."""
    if partition.patch is None:
        return ScalarField(mesh, np.zeros(mesh.n_nodes), np.zeros(mesh.n_nodes, bool))
    if partition.patch_kind != "neumann":
        raise ValueError("zeta_eps needs a patch hosted in the Dirichlet region")
    return solve_mixed(mesh, 1.0, 0.0, ("dirichlet",), 0.0, ("patch",), 1.0)


# ---------------------------------------------------------- postprocessing


@dataclass(frozen=True)
class BoundaryFunction:
    """Nodal values of a boundary quantity on the nodes of labeled edges."""

    mesh: Mesh
    nodes: np.ndarray
    values: np.ndarray
    labels: tuple = ()

    @property
    def angles(self):
        return wrap(np.arctan2(self.mesh.nodes[self.nodes, 1], self.mesh.nodes[self.nodes, 0]))

    def at_angle(self, theta):
        """Piecewise-linear interpolation along a circular boundary."""
        a = self.angles
        order = np.argsort(a)
        a, v = a[order], self.values[order]
        a = np.concatenate([a[-1:] - TWO_PI, a, a[:1] + TWO_PI])
        v = np.concatenate([v[-1:], v, v[:1]])
        return np.interp(wrap(theta), a, v)

    def integral(self):
        """Integral over the labeled edges (trapezoid rule on the P1 trace)."""
        edges = self._edges
        length = self.mesh.edge_length(edges)
        lookup = dict(zip(self.nodes.tolist(), self.values))
        va = np.array([lookup[i] for i in edges[:, 0]])
        vb = np.array([lookup[i] for i in edges[:, 1]])
        return float(np.sum(0.5 * (va + vb) * length))

    @property
    def _edges(self):
        e = self.mesh.boundary_edges
        return e[np.isin(e, self.nodes).all(axis=1) & np.isin(self.mesh.edge_labels, list(self.labels))]


def normal_flux(fld, label=None, conormal=False):
    """Flux du/dn (or gamma du/dn) on the nodes of edges with ``label`` by the residual method.

    The residual K u - F of the full system equals the boundary integrals of
    gamma du/dn against the hat functions; a boundary mass solve turns it
    into nodal values.  ``label=None`` uses the whole boundary.
    """
    mesh = fld.mesh
    all_edges = mesh.boundary_edges
    labels = set(np.unique(mesh.edge_labels)) if label is None else (
        {label} if isinstance(label, str) else set(label))
    # project over every edge of the connected boundary so reactions are not cut off
    Mb = boundary_mass(mesh, all_edges)
    bn = np.unique(all_edges)
    q = np.zeros(mesh.n_nodes)
    q[bn] = splu(Mb[bn][:, bn].tocsc()).solve(fld.residual[bn])
    nodes = mesh.nodes_with(labels)
    vals = q[nodes]
    if not conormal:
        vals = vals / as_field(fld.gamma)(mesh.nodes[nodes])
    return BoundaryFunction(mesh, nodes, vals, tuple(sorted(labels)))


def compliance(fld, f):
    """int f u dx with the degree-4 rule (u is P1, exact for f of degree <= 3)."""
    return float(load(fld.mesh, f) @ fld.values)


def l2_norm(mesh, values):
    return float(np.sqrt(max(values @ (mass(mesh) @ values), 0.0)))


def dirichlet_energy(mesh, values):
    return float(values @ (stiffness(mesh) @ values))


def h1_norm(mesh, values):
    return float(np.sqrt(dirichlet_energy(mesh, values) + l2_norm(mesh, values) ** 2))


def interpolate(mesh, values, pts):
    """P1 interpolant at points inside the mesh (MeshFailure if a point is outside)."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    tri = locate(mesh, pts)
    p = mesh.nodes[mesh.triangles[tri]]
    lam = _barycentric(p, pts)
    return np.sum(lam * values[mesh.triangles[tri]], axis=1)


def _barycentric(p, x):
    T = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=-1)
    l12 = np.linalg.solve(T, (x - p[:, 0])[..., None])[..., 0]
    return np.concatenate([1 - l12.sum(axis=1, keepdims=True), l12], axis=1)


def locate(mesh, pts):
    p = mesh.nodes[mesh.triangles]
    out = np.empty(len(pts), dtype=int)
    for k, x in enumerate(pts):
        lam = _barycentric(p, np.broadcast_to(x, (len(p), 2)))
        ok = np.nonzero(lam.min(axis=1) > -1e-12)[0]
        if len(ok) == 0:
            raise MeshFailure(f"point {x} lies outside the mesh")
        out[k] = ok[0]
    return out


def nearest_boundary_node(mesh, theta):
    b = np.unique(mesh.boundary_edges)
    ang = np.arctan2(mesh.nodes[b, 1], mesh.nodes[b, 0])
    return int(b[np.argmin(angular_distance(ang, theta))])


def galerkin_defect(fld, v):
    """|int gamma grad u . grad v - int f v| for a test vector v vanishing on the essential set."""
    return float(abs(fld.residual @ v))
