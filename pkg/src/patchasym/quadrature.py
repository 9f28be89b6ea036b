"""Quadrature rules and interpolation matrices shared by the integral operators."""

import numpy as np
from scipy import special
from scipy.interpolate import BarycentricInterpolator


def chebyshev_nodes(n):
    """First-kind Chebyshev points cos((2j-1)pi/2n), j = 1..n, in decreasing order."""
    j = np.arange(1, n + 1)
    return np.cos((2 * j - 1) * np.pi / (2 * n))


def chebyshev_vandermonde(x, n):
    """Matrix of T_k(x_i) for k = 0..n-1."""
    t = np.arccos(np.clip(x, -1.0, 1.0))
    return np.cos(np.outer(t, np.arange(n)))


def chebyshev_u_vandermonde(x, n):
    """Matrix of U_k(x_i) for k = 0..n-1 (second kind), valid for |x| < 1."""
    t = np.arccos(np.clip(x, -1.0, 1.0))
    k = np.arange(1, n + 1)
    return np.sin(np.outer(t, k)) / np.sin(t)[:, None]


def gauss_jacobi_unit(n, a, b):
    """Gauss-Jacobi rule on [0, 1] for the weight (1-s)^a s^b."""
    x, w = special.roots_jacobi(n, a, b)
    s = 0.5 * (x + 1.0)
    return s, w * 0.5 ** (a + b + 1.0)


def gauss_legendre(n, lo=-1.0, hi=1.0):
    x, w = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (hi - lo)
    return lo + half * (x + 1.0), w * half


def barycentric_weights(x):
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    w = 1.0 / np.prod(diff, axis=1)
    return w / np.abs(w).max()


def barycentric_matrix(nodes, weights, x):
    """Lagrange cardinal functions at `x` by the second barycentric formula."""
    x = np.asarray(x, dtype=float)
    diff = x[:, None] - nodes[None, :]
    exact = diff == 0
    diff[exact] = 1.0
    c = weights[None, :] / diff
    out = c / c.sum(axis=1, keepdims=True)
    rows = exact.any(axis=1)
    out[rows] = exact[rows].astype(float)
    return out


def lagrange_matrix(nodes, x):
    """Values of the Lagrange cardinal functions of `nodes` at points `x`."""
    interp = BarycentricInterpolator(nodes, np.eye(len(nodes)))
    return np.atleast_2d(interp(np.asarray(x, dtype=float)))


def differentiation_matrix(x):
    """Spectral differentiation matrix for polynomial interpolation at `x`."""
    w = barycentric_weights(x)
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    d = (w[None, :] / w[:, None]) / diff
    np.fill_diagonal(d, 0.0)
    np.fill_diagonal(d, -d.sum(axis=1))
    return d


def trig_interp_matrix(n, theta):
    """Cardinal functions of the n-point equispaced periodic grid (n even) at `theta`."""
    nodes = 2 * np.pi * np.arange(n) / n
    d = np.asarray(theta, dtype=float)[:, None] - nodes[None, :]
    half = 0.5 * d
    s = np.sin(half)
    small = np.abs(s) < 1e-14
    s_safe = np.where(small, 1.0, s)
    val = np.sin(n * half) * np.cos(half) / (n * s_safe)
    return np.where(small, 1.0, val)


def periodic_panels(breaks, order):
    """Composite Gauss-Legendre rule on the sorted breakpoints of a periodic interval."""
    xs, ws = [], []
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        x, w = gauss_legendre(order, lo, hi)
        xs.append(x)
        ws.append(w)
    return np.concatenate(xs), np.concatenate(ws)
