"""H^1 capacity, Neumann capacity and the boundary surrogates of small patches.

Both capacities are exterior minimizations for -Laplace + 1 in the plane.
They are truncated to a disk of radius R around the patch, which is cut
along the patch as a crack.  A Dirichlet condition at |x| = R gives a value
from above and a free boundary a value from below.
"""

import itertools
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.sparse.linalg import splu

from .errors import QuadratureFailure, TruncationTooSmall
from .fem import boundary_load, mass, stiffness
from .geometry import TWO_PI
from .meshing import SizeField, disk_mesh

MAX_COMPONENTS = 8
DEPTH_LIMIT = 30


@dataclass(frozen=True)
class CapacityResult:
    value: float
    truncation_radius: float
    mesh_h: float
    richardson_estimate: float
    upper: float = np.nan
    lower: float = np.nan
    by_radius: dict = field(default_factory=dict)


@dataclass(frozen=True)
class NeumannCapacityResult:
    value: float
    sign_pattern: tuple
    truncation_radius: float
    upper: float = np.nan
    lower: float = np.nan
    by_pattern: dict = field(default_factory=dict)


def _components(patch):
    """Normalize a patch to a list of (a, b) segments on the x-axis; eps > 0 means (-eps, eps)."""
    if patch is None:
        return []
    if np.isscalar(patch):
        return [] if patch <= 0 else [(-float(patch), float(patch))]
    comps = [tuple(map(float, c)) for c in patch]
    comps = [c for c in comps if c[1] > c[0]]
    if len(comps) > MAX_COMPONENTS:
        raise ValueError(f"at most {MAX_COMPONENTS} patch components are supported")
    return sorted(comps)


def _segment_crack(a, b, label, two_sided):
    def dist(x):
        t = np.clip(x[:, 0], a, b)
        return np.hypot(x[:, 0] - t, x[:, 1])

    return {"curve": lambda t: np.stack([t, np.zeros_like(t)], axis=-1), "interval": (a, b),
            "normal": lambda t: np.tile([0.0, 1.0], (len(t), 1)), "dist": dist,
            "label": label, "two_sided": two_sided}


def crack_mesh(comps, radius, h, two_sided, tip_ratio=128, body_ratio=32, grade=0.1):
    sources, sizes, cracks = [], [], []
    for k, (a, b) in enumerate(comps):
        half = 0.5 * (b - a)
        sources += [[a, 0.0], [b, 0.0], [0.5 * (a + b), 0.0]]
        sizes += [half / tip_ratio, half / tip_ratio, half / body_ratio]
        cracks.append(_segment_crack(a, b, f"patch{k}", two_sided))
    size = SizeField(h, np.array(sources), np.array(sizes), grade)
    return disk_mesh(radius, size, [0.0], lambda th: np.full(len(th), "far", dtype=object), cracks)


def _solve_exterior(mesh, essential, values, load):
    A = (stiffness(mesh) + mass(mesh)).tocsr()
    free = ~essential
    u = values.copy()
    rhs = load[free] - A[free][:, essential] @ values[essential]
    u[free] = splu(A[free][:, free].tocsc()).solve(rhs)
    return u, float(u @ (A @ u))


def _truncated_cap(comps, radius, h, **mesh_kw):
    mesh = crack_mesh(comps, radius, h, two_sided=False, **mesh_kw)
    crack = mesh.nodes_with({f"patch{k}" for k in range(len(comps))})
    far = mesh.nodes_with("far")
    out = {}
    for side, ess in (("upper", np.concatenate([crack, far])), ("lower", crack)):
        mask = np.zeros(mesh.n_nodes, bool)
        mask[ess] = True
        vals = np.zeros(mesh.n_nodes)
        vals[crack] = 1.0
        out[side] = _solve_exterior(mesh, mask, vals, np.zeros(mesh.n_nodes))[1]
    return out


def _richardson(v1, v2, r1, r2):
    # exterior solutions decay like exp(-|x|), energies at the cut like exp(-2R)
    q = np.exp(-2 * (r2 - r1))
    return (v2 - q * v1) / (1 - q)


def _check_sandwich(upper, lower, radius):
    if lower <= 0 or (upper - lower) / upper > 0.2:
        raise TruncationTooSmall(f"one-sided values {lower:.4g}, {upper:.4g} differ by >20% at R = {radius:g}")


def cap(patch, truncation_radius=8.0, h=None, radii=None, **mesh_kw):
    """H^1(R^2) capacity of a planar segment patch (or a list of collinear segments).

    Returns the upper (Dirichlet cut) and lower (free cut) truncated values
    at ``truncation_radius`` and a Richardson estimate over two radii.
    """
    comps = _components(patch)
    radii = radii or (truncation_radius / 2, truncation_radius)
    h = h or truncation_radius / 8
    if not comps:
        return CapacityResult(0.0, truncation_radius, h, 0.0, 0.0, 0.0)
    by_radius = {}
    for r in radii:
        res = _truncated_cap(comps, r, h, **mesh_kw)
        _check_sandwich(res["upper"], res["lower"], r)
        by_radius[r] = res
    r1, r2 = radii
    mid = {r: 0.5 * (v["upper"] + v["lower"]) for r, v in by_radius.items()}
    est = _richardson(mid[r1], mid[r2], r1, r2)
    top = by_radius[r2]
    return CapacityResult(mid[r2], r2, h, est, top["upper"], top["lower"], by_radius)


def neumann_capacity(patch, truncation_radius=8.0, h=None, **mesh_kw):
    """Neumann capacity e(omega): maximal exterior energy over sign patterns of unit flux.

    Each face gets conormal data -kappa (upper face, the domain lies on the
    +e_2 side) or +kappa (lower face), so du/de_2 = kappa from both sides.
    The energy equals the load functional at the solution.
    """
    comps = _components(patch)
    h = h or truncation_radius / 8
    if not comps:
        return NeumannCapacityResult(0.0, (), truncation_radius, 0.0, 0.0)
    mesh = crack_mesh(comps, truncation_radius, h, two_sided=True, **mesh_kw)
    far = mesh.nodes_with("far")
    faces = []
    for k in range(len(comps)):
        faces.append((boundary_load(mesh, f"patch{k}+", 1.0), boundary_load(mesh, f"patch{k}-", 1.0)))
    # the first sign is fixed: flipping every sign flips z and keeps the energy
    patterns = [(1,) + p for p in itertools.product((1, -1), repeat=len(comps) - 1)]
    results = {}
    for pattern in patterns:
        F = sum(kap * (fm - fp) for kap, (fp, fm) in zip(pattern, faces))
        # the energy is a supremum of 2F(v) - a(v, v): a Dirichlet cut lowers it, a free cut raises it
        mask = np.zeros(mesh.n_nodes, bool)
        mask[far] = True
        vals = {"lower": _solve_exterior(mesh, mask, np.zeros(mesh.n_nodes), F)[1]}
        A = (stiffness(mesh) + mass(mesh)).tocsc()
        u = splu(A).solve(F)
        vals["upper"] = float(u @ (A @ u))
        _check_sandwich(vals["upper"], vals["lower"], truncation_radius)
        results[pattern] = vals
    best = max(results, key=lambda p: results[p]["lower"] + results[p]["upper"])
    v = results[best]
    return NeumannCapacityResult(0.5 * (v["upper"] + v["lower"]), best, truncation_radius,
                                 v["upper"], v["lower"], results)


# ---------------------------------------------------------------- surrogates


def rho_closed_form(theta, patch):
    """rho_omega on the unit circle: 1/2 [cot(a/2) + cot(b/2)] with a, b the angular gaps to the ends."""
    lo, hi = patch
    return 0.5 * (1 / np.tan((np.asarray(theta) - lo) / 2) + 1 / np.tan((hi - np.asarray(theta)) / 2))


def rho_weight(theta, patch, tol=1e-10):
    """rho_omega(x) = int over the circle minus the patch of |x - y|^{-2} ds(y), x at angle theta.

    The complement arc is split geometrically toward both patch ends (spacing
    proportional to the distance from x) and each piece is integrated by
    adaptive Gauss-Kronrod quadrature.
    """
    lo, hi = patch
    if not lo < theta < hi:
        raise ValueError("x must lie strictly inside the patch")
    d_lo, d_hi = theta - lo, hi - theta
    start, stop = hi, lo + TWO_PI
    span = stop - start
    levels = int(np.ceil(np.log2(span / min(d_lo, d_hi, span)))) + 1
    if levels > DEPTH_LIMIT:
        raise QuadratureFailure(f"refinement depth {levels} exceeds the limit {DEPTH_LIMIT}")
    cuts = [start + d_hi * 2.0**k for k in range(levels) if d_hi * 2.0**k < span / 2]
    cuts += [stop - d_lo * 2.0**k for k in range(levels) if d_lo * 2.0**k < span / 2]
    breaks = np.unique(np.concatenate([[start, stop], cuts, [start + span / 2]]))

    def f(phi):
        return 0.25 / np.sin(0.5 * (phi - theta)) ** 2

    total = 0.0
    for a, b in zip(breaks[:-1], breaks[1:]):
        with warnings.catch_warnings():
            warnings.simplefilter("error", integrate.IntegrationWarning)
            try:
                val, _ = integrate.quad(f, a, b, epsabs=0.0, epsrel=tol, limit=DEPTH_LIMIT)
            except integrate.IntegrationWarning as exc:
                raise QuadratureFailure(str(exc)) from exc
        total += val
    return total


def d_surrogate(patch, tol=1e-8):
    """D(omega) = int_omega ds / rho_omega on the unit circle."""
    if patch is None or patch[1] <= patch[0]:
        return 0.0
    lo, hi = patch
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, _ = integrate.quad(lambda t: 1.0 / rho_weight(t, patch), lo, hi, epsabs=0.0, epsrel=tol,
                                    limit=DEPTH_LIMIT)
        except integrate.IntegrationWarning as exc:
            raise QuadratureFailure(str(exc)) from exc
    return val


def dist_integral(patch):
    """int_omega dist(x, boundary of omega) ds for an arc: (length / 2)^2."""
    if patch is None:
        return 0.0
    return (0.5 * (patch[1] - patch[0])) ** 2


def check_cap_sandwich(chi_energy, cap_value):
    """Ratio of a patch-problem energy to the matching capacity."""
    if cap_value <= 0:
        raise ValueError("capacity must be positive")
    return chi_energy / cap_value
