"""Graded triangular meshes of disks, optionally cut by a crack curve.

Nodes come from nested hexagonal lattices whose spacing halves per level,
selected by a size function that grows linearly away from a few source
points; boundary and crack nodes are placed by equidistributing the same
size function along the curves.  scipy's Delaunay does the triangulation.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import Delaunay, cKDTree

from .errors import IoFailure, MeshFailure


@dataclass(frozen=True)
class SizeField:
    """s(x) = min(h, min_i (s_i + grade |x - p_i|)): halving per layer of width ~ s / grade."""

    h: float
    sources: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    sizes: np.ndarray = field(default_factory=lambda: np.zeros(0))
    grade: float = 0.25

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.full(x.shape[:-1], self.h)
        for p, s in zip(self.sources, self.sizes):
            out = np.minimum(out, s + self.grade * np.linalg.norm(x - p, axis=-1))
        return out

    @property
    def s_min(self):
        return float(min(self.h, self.sizes.min())) if len(self.sizes) else self.h

    def layers(self):
        return int(np.ceil(np.log2(self.h / self.s_min)))


@dataclass(frozen=True)
class Mesh:
    """Triangulation with labeled boundary edges.

    ``boundary_edges`` lists node pairs with one label each; crack faces are
    ordinary boundary edges of the (cut) domain.  ``grading`` records how the
    mesh was refined.
    """

    nodes: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    edge_labels: np.ndarray
    grading: dict = field(default_factory=dict)

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def areas(self):
        p = self.nodes[self.triangles]
        d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @property
    def edges(self):
        e = np.sort(self.triangles[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
        return np.unique(e, axis=0)

    def edge_length(self, edges=None):
        edges = self.boundary_edges if edges is None else edges
        return np.linalg.norm(self.nodes[edges[:, 1]] - self.nodes[edges[:, 0]], axis=1)

    def edges_with(self, labels):
        if isinstance(labels, str):
            labels = {labels}
        return self.boundary_edges[np.isin(self.edge_labels, list(labels))]

    def nodes_with(self, labels):
        """Sorted node indices touching an edge with one of the labels."""
        return np.unique(self.edges_with(labels))

    def min_angle(self):
        p = self.nodes[self.triangles]
        ang = []
        for k in range(3):
            a = p[:, (k + 1) % 3] - p[:, k]
            b = p[:, (k + 2) % 3] - p[:, k]
            c = np.sum(a * b, axis=1) / (np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1))
            ang.append(np.arccos(np.clip(c, -1, 1)))
        return float(np.degrees(np.min(ang)))

    def euler_characteristic(self):
        return self.n_nodes - len(self.edges) + len(self.triangles)

    def renumbered(self, perm):
        """Same mesh with node i moved to position perm[i]."""
        perm = np.asarray(perm)
        nodes = np.empty_like(self.nodes)
        nodes[perm] = self.nodes
        return Mesh(nodes, perm[self.triangles], perm[self.boundary_edges], self.edge_labels, self.grading)


# ------------------------------------------------------------------ curves


def _equidistribute(curve, t0, t1, size, n_sample=4000):
    """Parameters t0 = t_0 < ... < t_N = t1 with spacing |curve'| dt ~ size(curve(t))."""
    # geometric sampling near both ends so tiny sizes at the ends are resolved
    span = t1 - t0
    g = span * np.geomspace(1e-9, 0.5, 400)
    t = np.unique(np.concatenate([np.linspace(t0, t1, n_sample), t0 + g, t1 - g]))
    pts = curve(t)
    ds = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    inv = 1.0 / size(pts)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (inv[1:] + inv[:-1]) * ds)])
    n = max(1, int(np.round(cum[-1])))
    out = np.interp(np.linspace(0.0, cum[-1], n + 1), cum, t)
    out[0], out[-1] = t0, t1
    return out


def circle_nodes(radius, size, breaks):
    """Boundary angles on the circle of given radius, containing every angle in ``breaks``."""
    curve = lambda t: radius * np.stack([np.cos(t), np.sin(t)], axis=-1)
    breaks = np.sort(np.mod(np.asarray(breaks, dtype=float), 2 * np.pi))
    if len(breaks) == 0:
        breaks = np.array([0.0])
    ext = np.concatenate([breaks, [breaks[0] + 2 * np.pi]])
    out = []
    for a, b in zip(ext[:-1], ext[1:]):
        if b - a < 1e-14:
            continue
        out.append(_equidistribute(curve, a, b, size)[:-1])
    return np.concatenate(out)


# ---------------------------------------------------------------- lattices


def _hex_lattice(lo, hi, spacing):
    j0, j1 = int(np.floor(lo[1] / (spacing * np.sqrt(3) / 2))), int(np.ceil(hi[1] / (spacing * np.sqrt(3) / 2)))
    j = np.arange(j0, j1 + 1)
    y = j * spacing * np.sqrt(3) / 2
    shift = 0.5 * spacing * (j % 2)
    i0, i1 = int(np.floor(lo[0] / spacing)) - 1, int(np.ceil(hi[0] / spacing)) + 1
    i = np.arange(i0, i1 + 1)
    X = i[None, :] * spacing + shift[:, None]
    Y = np.broadcast_to(y[:, None], X.shape)
    return np.stack([X.ravel(), Y.ravel()], axis=1)


def graded_interior(radius, size, keep_away, fixed):
    """Interior lattice nodes of the disk |x| < radius selected by the size field."""
    levels = size.layers()
    chunks = []
    for lev in range(levels + 1):
        hl = size.h * 0.5**lev
        boxes = []
        if lev == 0:
            boxes.append((-radius * np.ones(2), radius * np.ones(2)))
        else:
            for p, s in zip(size.sources, size.sizes):
                reach = (2 * hl - s) / size.grade
                if reach > 0:
                    boxes.append((p - reach, p + reach))
        if not boxes:
            continue
        pts = np.unique(np.round(np.concatenate([_hex_lattice(a, b, hl) for a, b in boxes]), 12), axis=0)
        s = size(pts)
        level = np.clip(np.floor(np.log2(size.h / s)), 0, levels)
        pts = pts[(level == lev) & (np.linalg.norm(pts, axis=1) < radius)]
        chunks.append(pts)
    pts = np.concatenate(chunks) if chunks else np.zeros((0, 2))
    s = size(pts)
    pts = pts[keep_away(pts) > 0.5 * s]
    if len(fixed) and len(pts):
        d, _ = cKDTree(fixed).query(pts)
        pts = pts[d > 0.5 * size(pts)]
    return pts


def _triangulate(points):
    tri = Delaunay(points, qhull_options="Qbb Qc Qz Q12").simplices.copy()
    p = points[tri]
    d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    area = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
    flip = area < 0
    tri[flip] = tri[flip][:, [0, 2, 1]]
    scale = np.ptp(points, axis=0).max() ** 2
    keep = np.abs(area) > 1e-14 * scale
    return tri[keep]


def _check(mesh):
    if len(mesh.triangles) == 0:
        raise MeshFailure("empty triangulation")
    if np.any(mesh.areas <= 0):
        raise MeshFailure("inverted or degenerate elements")
    return mesh


def disk_mesh(radius, size, breaks, label_fn, cracks=()):
    """Mesh of the disk |x| < radius.

    ``breaks`` are boundary angles that must be nodes; ``label_fn`` maps
    edge-midpoint angles to labels.  Each crack is a dict with the curve
    ``curve(t)`` on ``interval``, its unit ``normal(t)``, a distance function
    ``dist(x)``, a ``label`` and ``two_sided``; two-sided cracks get
    duplicated interior nodes and faces labeled ``label+`` (on the +normal
    side) and ``label-``.
    """
    th = circle_nodes(radius, size, breaks)
    bnd = radius * np.stack([np.cos(th), np.sin(th)], axis=1)
    n_b = len(bnd)
    fixed, params, offset = [bnd], [], n_b
    for c in cracks:
        tc = _equidistribute(c["curve"], *c["interval"], size)
        fixed.append(c["curve"](tc))
        params.append((tc, offset + np.arange(len(tc))))
        offset += len(tc)
    fixed = np.concatenate(fixed)

    def keep_away(x):
        d = radius - np.linalg.norm(x, axis=1)
        for c in cracks:
            d = np.minimum(d, c["dist"](x))
        return d

    inner = graded_interior(radius, size, keep_away, fixed)
    points = np.concatenate([fixed, inner])
    tri = _triangulate(points)

    b_edges = np.stack([np.arange(n_b), (np.arange(n_b) + 1) % n_b], axis=1)
    mid = 0.5 * (th + np.where(np.arange(n_b) + 1 < n_b, np.roll(th, -1), th[0] + 2 * np.pi))
    labels = list(label_fn(mid))
    edges = [b_edges]
    _require_edges(tri, b_edges)
    for c, (tc, idx) in zip(cracks, params):
        c_edges = np.stack([idx[:-1], idx[1:]], axis=1)
        _require_edges(tri, c_edges)
        if c.get("two_sided"):
            points, tri, lower = _split_crack(points, tri, idx, c["normal"](tc))
            edges += [c_edges, np.stack([lower[:-1], lower[1:]], axis=1)]
            labels += [c["label"] + "+"] * len(c_edges) + [c["label"] + "-"] * len(c_edges)
        else:
            edges.append(c_edges)
            labels += [c["label"]] * len(c_edges)
    grading = {"h": size.h, "s_min": size.s_min, "grade": size.grade, "layers": size.layers(),
               "ratio": 0.5, "sources": size.sources.tolist()}
    mesh = Mesh(points, tri, np.concatenate(edges), np.array(labels, dtype=object), grading)
    return _check(mesh)


def _require_edges(tri, edges):
    have = set(map(tuple, np.sort(tri[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1).tolist()))
    missing = [e for e in np.sort(edges, axis=1).tolist() if tuple(e) not in have]
    if missing:
        raise MeshFailure(f"{len(missing)} constrained edges missing from the triangulation")


def _split_crack(points, tri, idx, normals):
    """Duplicate the interior crack nodes; triangles on the -normal side use the copies."""
    interior = idx[1:-1]
    copies = len(points) + np.arange(len(interior))
    points = np.concatenate([points, points[interior]])
    where = {int(n): k for k, n in enumerate(interior)}
    cent = points[tri].mean(axis=1)
    tri = tri.copy()
    for t in np.nonzero(np.isin(tri, interior).any(axis=1))[0]:
        for c in range(3):
            k = where.get(int(tri[t, c]))
            if k is None:
                continue
            if np.dot(cent[t] - points[interior[k]], normals[k + 1]) < 0:
                tri[t, c] = copies[k]
    lower = np.concatenate([[idx[0]], copies, [idx[-1]]])
    return points, tri, lower


# ---------------------------------------------------------------------- io


def dump_mesh(mesh, path):
    """Plain-text mesh: node, triangle and labeled boundary-edge tables, each under a header line."""
    try:
        with open(path, "w") as fh:
            fh.write(f"# nodes {mesh.n_nodes}: index x y\n")
            for i, (x, y) in enumerate(mesh.nodes):
                fh.write(f"{i} {float(x)!r} {float(y)!r}\n")
            fh.write(f"# triangles {len(mesh.triangles)}: index n0 n1 n2\n")
            for i, t in enumerate(mesh.triangles):
                fh.write(f"{i} {t[0]} {t[1]} {t[2]}\n")
            fh.write(f"# edges {len(mesh.boundary_edges)}: index n0 n1 label\n")
            for i, (e, lab) in enumerate(zip(mesh.boundary_edges, mesh.edge_labels)):
                fh.write(f"{i} {e[0]} {e[1]} {lab}\n")
    except OSError as exc:
        raise IoFailure(str(exc)) from exc


def read_mesh(path):
    tables, current = {}, None
    with open(path) as fh:
        for line in fh:
            if line.startswith("#"):
                current = line[1:].split()[0]
                tables[current] = []
            elif line.strip():
                tables[current].append(line.split()[1:])
    nodes = np.array(tables["nodes"], dtype=float).reshape(-1, 2)
    tri = np.array(tables["triangles"], dtype=int).reshape(-1, 3)
    edges = np.array([r[:2] for r in tables["edges"]], dtype=int).reshape(-1, 2)
    labels = np.array([r[2] for r in tables["edges"]], dtype=object)
    return Mesh(nodes, tri, edges, labels)
