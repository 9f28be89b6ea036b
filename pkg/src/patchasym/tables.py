"""Plain-text tables for matrices, densities and other arrays.

Format: comment lines start with '#'; the first comment holds the column
names; data rows are whitespace-separated floats written with repr.
"""

import numpy as np

from .errors import IoFailure


def dump_table(path, columns, comment=""):
    """Write a dict of equal-length 1D arrays as named columns."""
    names = list(columns)
    data = np.column_stack([np.asarray(columns[k], dtype=float) for k in names]) if names else np.zeros((0, 0))
    try:
        with open(path, "w") as fh:
            fh.write("# " + " ".join(names) + "\n")
            if comment:
                for line in comment.splitlines():
                    fh.write(f"# {line}\n")
            for row in data:
                fh.write(" ".join(repr(float(v)) for v in row) + "\n")
    except OSError as exc:
        raise IoFailure(str(exc)) from exc


def read_table(path):
    names, rows = None, []
    with open(path) as fh:
        for line in fh:
            if line.startswith("#"):
                if names is None:
                    names = line[1:].split()
                continue
            if line.strip():
                rows.append([float(v) for v in line.split()])
    data = np.array(rows).reshape(-1, len(names))
    return {k: data[:, i] for i, k in enumerate(names)}


def dump_matrix(path, matrix, comment=""):
    """Dense matrix as a table with columns c0, c1, ..."""
    M = np.asarray(matrix, dtype=float)
    dump_table(path, {f"c{j}": M[:, j] for j in range(M.shape[1])}, comment)


def read_matrix(path):
    t = read_table(path)
    return np.column_stack([t[k] for k in t])


def dump_kernel_matrix(path, km):
    """Kernel matrix with its quadrature rule: node coordinates, weights, then the matrix columns."""
    nodes = np.asarray(km.nodes, dtype=float).reshape(km.n, -1)
    cols = {f"x{i}": nodes[:, i] for i in range(nodes.shape[1])}
    cols["w"] = km.weights
    M = km.matrix
    cols.update({f"c{j}": M[:, j] for j in range(M.shape[1])})
    dump_table(path, cols, f"tag {km.tag} geometry {km.geometry} weight_class {km.weight_class}")


def dump_density(path, density):
    nodes = np.asarray(density.nodes, dtype=float).reshape(len(density.values), -1)
    cols = {f"x{i}": nodes[:, i] for i in range(nodes.shape[1])}
    cols["w"] = density.weights
    cols["psi"] = density.values
    dump_table(path, cols, f"geometry {density.geometry} weight_class {density.weight_class}")
