"""Fundamental solution of the background problem and the first-order patch expansions."""

from dataclasses import dataclass

import numpy as np

from .errors import SingularEvaluation, SourceTooCloseToBoundary
from .fem import _Q6, _W6, _gradients, as_field, interpolate, normal_flux, solve_mixed
from .layer_ops import EQUILIBRIUM_MEANS, green_free, green_free_grad_y

# Leading coefficients of the expansions; each is half of an equilibrium mean.
DIRICHLET_COEFF = {2: np.pi, 3: 4.0}
NEUMANN_COEFF = {2: np.pi / 2, 3: 1.0 / 3.0}


@dataclass(frozen=True)
class FundamentalSolution:
    """N(x, .) = G(x, .)/gamma(x) + R(x, .) with the corrector R solved by P1 elements."""

    x: np.ndarray
    gamma_x: float
    corrector: object

    def __call__(self, y):
        y = np.atleast_2d(np.asarray(y, dtype=float))
        r = np.linalg.norm(y - self.x, axis=1)
        if np.any(r < 1e-14):
            raise SingularEvaluation("N(x, y) evaluated at y = x")
        return green_free(self.x, y) / self.gamma_x + self.corrector.at(y)

    def normal_derivative(self, theta):
        """dN/dn_y(x, y) at boundary angles, G part analytic, corrector part by the residual method."""
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        mesh = self.corrector.mesh
        y = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
        dg = np.sum(green_free_grad_y(self.x, y) * y, axis=-1) / self.gamma_x
        dr = normal_flux(self.corrector).at_angle(theta)
        return dg + dr


def fundamental_solution(mesh, x, gamma=1.0, essential_labels=("dirichlet",)):
    """Solve the corrector problem for the source point x (strictly inside the unit disk)."""
    x = np.asarray(x, dtype=float)
    h = mesh.grading.get("h", np.sqrt(np.abs(mesh.areas).max() * 2))
    if 1 - np.linalg.norm(x) < 4 * h:
        raise SourceTooCloseToBoundary(f"source at distance {1 - np.linalg.norm(x):g} < 4h = {4 * h:g}")
    gfun = as_field(gamma)
    gx = float(gfun(x[None, :])[0])
    essential = {lab: (lambda y: -green_free(x, y) / gx) for lab in essential_labels}
    natural = tuple(lab for lab in np.unique(mesh.edge_labels) if lab not in essential_labels)
    # weak form: the boundary load is -dG/dn; the gamma variation enters through the volume term
    flux = {lab: (lambda y: -np.sum(green_free_grad_y(x, y) * y, axis=-1)) for lab in natural}
    extra = None
    if callable(gamma):
        # -(1/gamma_x) int (gamma - gamma_x) grad G . grad phi_i, bounded integrand
        grads, area = _gradients(mesh)
        p = mesh.nodes[mesh.triangles]
        q = np.einsum("qk,tkd->tqd", _Q6, p)
        dG = green_free_grad_y(x, q)
        w = (gfun(q) - gx) / gx * _W6[None, :]
        vec = np.einsum("tq,tqd->td", w, dG) * area[:, None]
        local = -np.einsum("td,tkd->tk", vec, grads)
        extra = np.bincount(mesh.triangles.ravel(), local.ravel(), minlength=mesh.n_nodes)
    corr = solve_mixed(mesh, gamma, 0.0, essential_labels, essential, natural, flux, extra_load=extra)
    return FundamentalSolution(x, gx, corr)


def fundamental_solution_N(mesh, gamma, x, y, essential_labels=("dirichlet",)):
    return fundamental_solution(mesh, x, gamma, essential_labels)(y)


# -------------------------------------------------------------- predictions


def predict_dirichlet_patch(x, eps, n_val, u00, gamma0, d=2):
    """Leading correction u_eps(x) - u_0(x) for a Dirichlet patch in the Neumann region."""
    order = 1 / abs(np.log(eps)) if d == 2 else eps
    return -DIRICHLET_COEFF[d] * order * gamma0 * u00 * n_val


def predict_neumann_patch(x, eps, dn_n_val, du0dn0, gamma0, d=2):
    """Leading correction u_eps(x) - u_0(x) for a Neumann patch in the Dirichlet region."""
    return NEUMANN_COEFF[d] * eps**d * gamma0 * du0dn0 * dn_n_val


def predict_compliance_delta(variant, eps, value_at_0, gamma0, d=2):
    """First-order change of int f u: u_0(0) for the Dirichlet variant, du_0/dn(0) for the Neumann one.

    Both follow from the point expansions since int f(x) N(x, 0) dx = u_0(0)
    and int f(x) dN/dn_y(x, 0) dx = du_0/dn(0).
    """
    if variant == "dirichlet":
        order = 1 / abs(np.log(eps)) if d == 2 else eps
        return -DIRICHLET_COEFF[d] * order * gamma0 * value_at_0**2
    if variant == "neumann":
        return NEUMANN_COEFF[d] * eps**d * gamma0 * value_at_0**2
    raise ValueError(f"unknown variant {variant}")


def extracted_coefficient(delta, eps, u00, n_val, gamma0=1.0):
    """(u_0(x) - u_eps(x)) |log eps| / (gamma0 u_0(0) N(x, 0)); tends to pi."""
    return -delta * abs(np.log(eps)) / (gamma0 * u00 * n_val)


def coefficient_cross_checks():
    """Absolute defects between the expansion coefficients and half the tabulated equilibrium means."""
    return {
        "dirichlet_2d": abs(DIRICHLET_COEFF[2] - np.pi),
        "dirichlet_3d": abs(DIRICHLET_COEFF[3] - 0.5 * EQUILIBRIUM_MEANS[("S1", "disk")]),
        "neumann_2d": abs(NEUMANN_COEFF[2] + 0.5 * EQUILIBRIUM_MEANS[("R1", "segment")]),
        "neumann_3d": abs(NEUMANN_COEFF[3] + 0.5 * EQUILIBRIUM_MEANS[("R1", "disk")]),
    }
