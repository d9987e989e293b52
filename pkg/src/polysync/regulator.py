"""Tracking-manifold (regulator) equations: exact solve and noisy-data fit.

The exact route solves A Pi + B Gamma = Pi S, C Pi = H for the true system
and is used as an oracle. The data route minimizes the summed squared
Frobenius residuals of those two equations over every vertex of the
consistency set, which is linear least squares in (Pi, Gamma) and collapses
to the exact solution when the noise (and hence the vertex spread) vanishes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datagen import TrueSystem
from .errors import RegulatorError
from .numkit import as_matrix, lstsq_rank
from .polytope import MatrixPolytope, max_vertex_norm
from .represent import ConsistencySet


@dataclass(frozen=True)
class RegulatorFit:
    """Fitted manifold gains with per-vertex residuals and a-priori error bounds."""

    pi: np.ndarray  # n x n0
    gamma: np.ndarray  # p x n0
    residual1_per_vertex: np.ndarray  # Frobenius residuals over Z vertices
    residual2_per_vertex: np.ndarray  # Frobenius residuals over C vertices
    bound1: float  # a-priori bound on the state-equation error
    bound2: float  # a-priori bound on the output-equation error
    delta1_poly: MatrixPolytope  # symmetric hull covering the state-equation error
    delta2_poly: MatrixPolytope  # symmetric hull covering the output-equation error
    degenerate: bool = False  # fit was rank deficient; minimum-norm solution returned


def _regulator_system(a, b, c, s, h):
    """Stack the two manifold equations as rows acting on [vec Pi; vec Gamma]."""
    n, p, q, n0 = a.shape[0], b.shape[1], c.shape[0], s.shape[0]
    eye_n0 = np.eye(n0)
    top = np.hstack([np.kron(eye_n0, a) - np.kron(s.T, np.eye(n)), np.kron(eye_n0, b)])
    bot = np.hstack([np.kron(eye_n0, c), np.zeros((q * n0, p * n0))])
    rows = np.vstack([top, bot])
    rhs = np.concatenate([np.zeros(n * n0), h.flatten(order="F")])
    return rows, rhs


def _split_solution(theta, n, p, n0):
    pi = theta[: n * n0].reshape((n, n0), order="F")
    gamma = theta[n * n0 :].reshape((p, n0), order="F")
    return pi, gamma


def exact_regulator(sys: TrueSystem, s, h, tol: float = 1e-9):
    """Solve the regulator equations for a known system; returns (Pi, Gamma).

    Raises :class:`RegulatorError` when the combined residual exceeds ``tol``
    (the equations have no solution for this model/leader pair).
    """
    sm = as_matrix(s, "s")
    hm = as_matrix(h, "h")
    rows, rhs = _regulator_system(sys.a, sys.b, sys.c, sm, hm)
    theta, _ = lstsq_rank(rows, rhs.reshape(-1, 1))
    residual = np.linalg.norm(rows @ theta[:, 0] - rhs)
    if residual >= tol:
        raise RegulatorError(
            f"regulator equations unsolvable for this model (residual {residual:.3e})"
        )
    return _split_solution(theta[:, 0], sys.n, sys.p, sm.shape[0])


def fit_objective(cs: ConsistencySet, pi, gamma, s, h) -> float:
    """Summed squared Frobenius residuals of both equations over all vertices."""
    sm = as_matrix(s)
    hm = as_matrix(h)
    zv = cs.z_poly.vertices
    cv = cs.c_poly.vertices
    gp = np.vstack([gamma, pi])
    r1 = zv @ gp - (pi @ sm)[None, :, :]
    r2 = cv @ pi - hm[None, :, :]
    return float(np.sum(r1**2) + np.sum(r2**2))


def solve_fit(cs: ConsistencySet, s, h) -> RegulatorFit:
    """Least-squares manifold gains over the whole consistency set.

    Minimizes the vertex-summed squared residuals of both manifold equations,
    records per-vertex residuals, and attaches the noise-scaled a-priori
    error bounds and the symmetric error polytopes used by the reachability
    analysis.
    """
    sm = as_matrix(s, "s")
    hm = as_matrix(h, "h")
    n, p, q, n0 = cs.n, cs.p, cs.q, sm.shape[0]
    eye_n0 = np.eye(n0)
    s_kron = np.kron(sm.T, np.eye(n))

    z_rows = [
        np.hstack([np.kron(eye_n0, v[:, p:]) - s_kron, np.kron(eye_n0, v[:, :p])])
        for v in cs.z_poly.vertices
    ]
    c_rows = [
        np.hstack([np.kron(eye_n0, v), np.zeros((q * n0, p * n0))])
        for v in cs.c_poly.vertices
    ]
    rows = np.vstack(z_rows + c_rows)
    rhs = np.concatenate(
        [np.zeros(len(z_rows) * n * n0)] + [hm.flatten(order="F")] * len(c_rows)
    )
    theta, rank = lstsq_rank(rows, rhs.reshape(-1, 1))
    degenerate = rank < rows.shape[1]
    pi, gamma = _split_solution(theta[:, 0], n, p, n0)

    gp = np.vstack([gamma, pi])
    res1 = np.linalg.norm(cs.z_poly.vertices @ gp - pi @ sm, axis=(1, 2))
    res2 = np.linalg.norm(cs.c_poly.vertices @ pi - hm, axis=(1, 2))

    w_bar = max_vertex_norm(cs.w_poly, "frobenius")
    v_bar = max_vertex_norm(cs.v_poly, "frobenius")
    bound1 = 2.0 * cs.w_poly.n_vertices * w_bar * np.linalg.norm(cs.ux_pinv @ gp)
    bound2 = 2.0 * cs.v_poly.n_vertices * v_bar * np.linalg.norm(cs.x_pinv @ pi)

    # Symmetric hulls +-2 W_hat_k [U;X]^+ [Gamma; Pi]: the factor 2 absorbs the
    # unknown difference of two convex weight vectors.
    d1 = 2.0 * (cs.w_poly.vertices @ (cs.ux_pinv @ gp))
    d2 = 2.0 * (cs.v_poly.vertices @ (cs.x_pinv @ pi))
    delta1 = MatrixPolytope(np.concatenate([d1, -d1], axis=0))
    delta2 = MatrixPolytope(np.concatenate([d2, -d2], axis=0))

    return RegulatorFit(
        pi=pi,
        gamma=gamma,
        residual1_per_vertex=res1,
        residual2_per_vertex=res2,
        bound1=float(bound1),
        bound2=float(bound2),
        delta1_poly=delta1,
        delta2_poly=delta2,
        degenerate=bool(degenerate),
    )


def delta_bounds(fit: RegulatorFit):
    """A-priori bounds on the two manifold-equation errors; both shrink to zero
    with the noise."""
    return fit.bound1, fit.bound2


def realized_errors(sys: TrueSystem, fit: RegulatorFit, s, h):
    """A-posteriori manifold-equation errors at the true system (oracle check)."""
    sm = as_matrix(s)
    hm = as_matrix(h)
    d1 = sys.a @ fit.pi + sys.b @ fit.gamma - fit.pi @ sm
    d2 = sys.c @ fit.pi - hm
    return d1, d2
