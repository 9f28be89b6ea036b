"""Domains, boundary partitions, shrinking patches and the local flattening map.

Boundary points of the unit disk are addressed by their polar angle, so arc
length and geodesic radius coincide with angle differences.
"""

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import SeparationViolation, UnsupportedGeometry

TWO_PI = 2 * np.pi


def wrap(theta):
    """Angle(s) reduced to [0, 2 pi)."""
    return np.mod(theta, TWO_PI)


def arc_contains(arc, theta):
    """True where the angle lies in the open arc (a, b), a < b, taken modulo 2 pi."""
    a, b = arc
    return wrap(np.asarray(theta) - a) < (b - a)


def arc_length(arc):
    return arc[1] - arc[0]


def angular_distance(s, t):
    d = np.abs(wrap(np.asarray(s) - t))
    return np.minimum(d, TWO_PI - d)


@dataclass(frozen=True)
class DomainSpec:
    """Unit disk (or the flattened half-plane picture near a patch) with conductivity gamma."""

    kind: str = "UnitDisk"
    radius: float = 1.0
    patch_center_angle: float = np.pi / 2
    gamma: object = 1.0
    gamma_bounds: tuple = (1e-6, 1e6)

    def __post_init__(self):
        if self.kind not in ("UnitDisk", "MappedHalfPlane"):
            raise UnsupportedGeometry(f"unknown domain kind {self.kind}")
        if self.radius <= 0:
            raise ValueError("radius must be positive")

    def gamma_at(self, pts):
        """Conductivity at points of shape (..., 2)."""
        pts = np.asarray(pts, dtype=float)
        if callable(self.gamma):
            g = np.asarray(self.gamma(pts), dtype=float)
            g = np.broadcast_to(g, pts.shape[:-1])
        else:
            g = np.full(pts.shape[:-1], float(self.gamma))
        lo, hi = self.gamma_bounds
        if np.any(g < lo) or np.any(g > hi) or not np.all(np.isfinite(g)):
            raise ValueError("conductivity outside its admissible bounds")
        return g

    @property
    def is_constant(self):
        return not callable(self.gamma)

    def boundary_point(self, theta):
        theta = np.asarray(theta, dtype=float)
        return self.radius * np.stack([np.cos(theta), np.sin(theta)], axis=-1)


@dataclass(frozen=True)
class BoundaryPartition:
    """Dirichlet and Neumann arcs of the circle, an optional patch, and the separation d_min.

    ``patch_kind`` is the condition imposed on the patch: "dirichlet" for a
    patch inside the Neumann region and "neumann" for a patch inside the
    Dirichlet region.
    """

    dirichlet_arcs: tuple
    neumann_arcs: tuple
    center: float = np.pi / 2
    patch: Optional[tuple] = None
    d_min: Optional[float] = None

    def __post_init__(self):
        if not self.dirichlet_arcs or not self.neumann_arcs:
            raise ValueError("both boundary regions must be nonempty")
        total = sum(arc_length(a) for a in self.dirichlet_arcs + self.neumann_arcs)
        if abs(total - TWO_PI) > 1e-12:
            raise ValueError("arcs must cover the circle up to the interface points")
        for a in self.dirichlet_arcs:
            for b in self.neumann_arcs:
                if _arcs_overlap(a, b):
                    raise ValueError("Dirichlet and Neumann arcs overlap")
        if self.host_arc is None:
            raise ValueError("patch center must lie inside a boundary region")
        if self.d_min is None:
            object.__setattr__(self, "d_min", 0.1 * arc_length(self.host_arc))

    @property
    def host_arc(self):
        for arc in self.dirichlet_arcs + self.neumann_arcs:
            if arc_contains(arc, self.center):
                return arc
        return None

    @property
    def host_kind(self):
        return "dirichlet" if self.host_arc in self.dirichlet_arcs else "neumann"

    @property
    def patch_kind(self):
        return "neumann" if self.host_kind == "dirichlet" else "dirichlet"

    @property
    def interface_points(self):
        """The set Sigma where the condition changes type."""
        pts = []
        for arc in self.dirichlet_arcs:
            pts += [wrap(arc[0]), wrap(arc[1])]
        return np.unique(np.round(pts, 14))

    @property
    def eps(self):
        return 0.0 if self.patch is None else 0.5 * arc_length(self.patch)

    def label_at(self, theta):
        """Edge label ('dirichlet', 'neumann' or 'patch') for boundary angles."""
        theta = np.atleast_1d(theta)
        out = np.full(theta.shape, "neumann", dtype=object)
        for arc in self.dirichlet_arcs:
            out[arc_contains(arc, theta)] = "dirichlet"
        if self.patch is not None:
            out[arc_contains(self.patch, theta)] = "patch"
        return out

    def essential_labels(self):
        """Labels that carry the Dirichlet condition of the perturbed problem."""
        if self.patch is not None and self.patch_kind == "dirichlet":
            return {"dirichlet", "patch"}
        return {"dirichlet"}


def _arcs_overlap(a, b):
    return bool(arc_contains(a, b[0] + 1e-12) or arc_contains(b, a[0] + 1e-12))


def standard_partition(center=np.pi / 2, d_min=None):
    """Gamma_N = upper half circle, Gamma_D = lower half circle, Sigma = {0, pi}."""
    return BoundaryPartition(dirichlet_arcs=((np.pi, TWO_PI),), neumann_arcs=((0.0, np.pi),),
                             center=center, d_min=d_min)


def make_patch(partition, eps):
    """Partition with the patch of geodesic radius eps around ``partition.center``."""
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    if eps == 0:
        return replace(partition, patch=None)
    patch = (partition.center - eps, partition.center + eps)
    gap = angular_distance(partition.interface_points, partition.center).min()
    if gap - eps < partition.d_min:
        raise SeparationViolation(
            f"patch of radius {eps:g} comes within {gap - eps:g} < d_min = {partition.d_min:g} of Sigma")
    return replace(partition, patch=patch)


def geodesic_distance(p, q, geometry="circle"):
    """Intrinsic distance between boundary points of the unit circle or the unit sphere."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if (geometry, p.shape[-1]) not in (("circle", 2), ("sphere", 3)):
        raise UnsupportedGeometry(f"no closed-form geodesic distance for {geometry} in dimension {p.shape[-1]}")
    pn = p / np.linalg.norm(p, axis=-1, keepdims=True)
    qn = q / np.linalg.norm(q, axis=-1, keepdims=True)
    if geometry == "circle":
        cross = np.abs(pn[..., 0] * qn[..., 1] - pn[..., 1] * qn[..., 0])
    else:
        cross = np.linalg.norm(np.cross(pn, qn), axis=-1)
    return np.arctan2(cross, np.sum(pn * qn, axis=-1))


# ---------------------------------------------------------------- flattening


def _smooth_step(t):
    """C-infinity step: 0 for t <= 0, 1 for t >= 1."""
    t = np.clip(t, 0.0, 1.0)
    a = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
    b = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1 - t, 1.0)), 0.0)
    return a / (a + b)


def _smooth_step_d(t):
    t = np.asarray(t, dtype=float)
    inside = (t > 0) & (t < 1)
    u = np.where(inside, t, 0.5)
    a, b = np.exp(-1.0 / u), np.exp(-1.0 / (1 - u))
    da, db = a / u**2, -b / (1 - u) ** 2
    return np.where(inside, (da * b - a * db) / (a + b) ** 2, 0.0)


@dataclass(frozen=True)
class FlatteningMap:
    """Smooth map T from the lower half-plane picture onto the disk near the patch center.

    Local coordinates put the patch center at 0 with outward normal e_2, so
    the unit disk is the disk of radius 1 centered at (0, -1).  T lifts the
    wall y_2 = 0 onto the circle for |y_1| <= 1/4 and is the identity for
    |y_1| >= 1/2 or y_2 <= -1.
    """

    spec: DomainSpec
    f: Callable = field(default=lambda x: np.zeros(np.shape(x)[:-1]))
    inner: float = 0.25
    outer: float = 0.5

    def _chi(self, s):
        return 1 - _smooth_step((np.abs(s) - self.inner) / (self.outer - self.inner))

    def _chi_d(self, s):
        return -np.sign(s) * _smooth_step_d((np.abs(s) - self.inner) / (self.outer - self.inner)) / (
            self.outer - self.inner)

    @staticmethod
    def _eta(t):
        return _smooth_step((t + 1.0) / 0.5)

    @staticmethod
    def _eta_d(t):
        return _smooth_step_d((t + 1.0) / 0.5) / 0.5

    @staticmethod
    def _h(s):
        s = np.clip(s, -0.999, 0.999)
        return np.sqrt(1 - s**2) - 1

    @staticmethod
    def _h_d(s):
        s = np.clip(s, -0.999, 0.999)
        return -s / np.sqrt(1 - s**2)

    def local(self, y):
        """T in local coordinates."""
        y = np.asarray(y, dtype=float)
        s, t = y[..., 0], y[..., 1]
        return np.stack([s, t + self._h(s) * self._chi(s) * self._eta(t)], axis=-1)

    def to_global(self, z):
        """Local coordinates -> points of the unit disk."""
        c = self.spec.patch_center_angle
        n = np.array([np.cos(c), np.sin(c)])
        tau = np.array([-np.sin(c), np.cos(c)])
        z = np.asarray(z, dtype=float)
        return n + z[..., :1] * tau + z[..., 1:2] * n

    def forward(self, y):
        return self.to_global(self.local(y))

    def jacobian(self, y):
        """Local-coordinate Jacobian of T, shape (..., 2, 2); the rotation to global axes is orthogonal."""
        y = np.asarray(y, dtype=float)
        s, t = y[..., 0], y[..., 1]
        h, chi, eta = self._h(s), self._chi(s), self._eta(t)
        J = np.zeros(y.shape[:-1] + (2, 2))
        J[..., 0, 0] = 1.0
        J[..., 1, 0] = (self._h_d(s) * chi + h * self._chi_d(s)) * eta
        J[..., 1, 1] = 1.0 + h * chi * self._eta_d(t)
        return J

    def gamma(self, y):
        return self.spec.gamma_at(self.forward(y))

    def a_field(self, y):
        """A(y) = |det DT| gamma(T y) DT^{-1} DT^{-T}."""
        J = self.jacobian(y)
        Ji = np.linalg.inv(J)
        det = np.abs(np.linalg.det(J))
        g = self.gamma(y)
        return (det * g)[..., None, None] * Ji @ np.swapaxes(Ji, -1, -2)

    def g_field(self, y):
        """g(y) = |det DT| f(T y)."""
        return np.abs(np.linalg.det(self.jacobian(y))) * self.f(self.forward(y))


def build_flattening(spec, f=None):
    if spec.kind != "MappedHalfPlane":
        raise UnsupportedGeometry("the flattening map needs a MappedHalfPlane DomainSpec")
    if f is None:
        return FlatteningMap(spec)
    return FlatteningMap(spec, f=f)
