"""Reachable-set bounds on the virtual tracking error and the output error.

The virtual tracking error obeys xi(t+1) = Q xi(t) + dtilde(t) with Q ranging
over the closed-loop polytope and dtilde over a per-step disturbance set
built from the manifold-equation error polytopes, the leader orbit box and
the observer transient. Propagating vertex sets through that recursion with
cap-and-box pruning gives, for every step, an over-approximation of where
xi can be, and from it a scalar bound r(t) on the output error magnitude.

All pruning only enlarges sets, so the containment direction is preserved.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .graphnet import Topology
from .numkit import as_matrix, as_vector, spectral_radius
from .polytope import (
    DEFAULT_VERTEX_CAP,
    MatrixPolytope,
    VPolytope,
    minkowski_sum,
    add_point,
    prune_vertices,
    singleton,
)
from .regulator import RegulatorFit
from .simulate import LeaderModel


@dataclass
class BoundSeries:
    """Scalar per-step bound on |e(t)| for one agent, plus the asymptotic level."""

    r: np.ndarray  # (T+1,)
    asymptotic: float
    contraction: float  # certified one-step contraction factor of the xi recursion
    xi_sets: list | None = None  # optional VPolytope series


def leader_state_polytope(leader: LeaderModel, x0) -> VPolytope:
    """Box containing the whole leader orbit from x0.

    Unit-modulus simple poles make the orbit bounded by the eigenbasis
    condition number times the initial norm; the box uses that radius in
    every coordinate.
    """
    x0v = as_vector(x0, "x0")
    if x0v.size != leader.n0:
        raise ShapeError(f"x0 has dim {x0v.size}, expected {leader.n0}")
    norm0 = float(np.linalg.norm(x0v))
    if norm0 == 0.0:
        return singleton(np.zeros(leader.n0))
    _, vecs = np.linalg.eig(leader.s)
    kappa = float(np.linalg.cond(vecs))
    radius = kappa * norm0
    from .polytope import box_polytope

    return box_polytope(np.full(leader.n0, radius))


def disturbance_polytope(
    fit: RegulatorFit,
    px0: VPolytope,
    pi,
    f,
    t: Topology,
    agent: int,
    delta_t,
    z_t,
    cap: int = DEFAULT_VERTEX_CAP,
) -> VPolytope:
    """Per-step disturbance set feeding the xi recursion.

    Minkowski sum of the manifold-error image of the leader box, the
    manifold-error sweep over the current observer error, and the
    deterministic observer-coupling point Pi (1+d+g)^{-1} F z(t).
    """
    pim = as_matrix(pi, "pi")
    fm = as_matrix(f, "f")
    dv = as_vector(delta_t, "delta_t")
    zv = as_vector(z_t, "z_t")
    d1 = fit.delta1_poly.vertices  # (K, n, n0)
    orbit = np.einsum("kab,vb->kva", d1, px0.vertices).reshape(-1, d1.shape[1])
    orbit_p = prune_vertices(VPolytope(orbit), cap)
    drift = prune_vertices(VPolytope(d1 @ dv), cap)
    scale = 1.0 / (1.0 + t.in_degrees()[agent] + t.pinning[agent])
    point = pim @ (scale * (fm @ zv))
    return prune_vertices(add_point(minkowski_sum(orbit_p, drift), point), cap)


def xi_bound_recursion(
    mzk: MatrixPolytope,
    p0: VPolytope,
    disturbances,
    horizon: int,
    cap: int = DEFAULT_VERTEX_CAP,
) -> list:
    """Propagate {Q v + d} vertex sets for ``horizon`` steps (returns T+1 sets).

    Warns when some closed-loop vertex is not Schur, in which case the
    recursion grows without bound.
    """
    worst = max(spectral_radius(q) for q in mzk.vertices)
    if worst >= 1.0:
        warnings.warn(
            f"closed-loop polytope has a vertex with spectral radius {worst:.4f} >= 1; "
            "the bound recursion will diverge",
            stacklevel=2,
        )
    if len(disturbances) < horizon:
        raise ShapeError(f"need {horizon} disturbance sets, got {len(disturbances)}")
    sets = [prune_vertices(p0, cap)]
    qv = mzk.vertices
    for step in range(horizon):
        prev = sets[-1].vertices
        mapped = np.einsum("qab,vb->qva", qv, prev).reshape(-1, qv.shape[1])
        mapped_p = prune_vertices(VPolytope(mapped), cap)
        nxt = minkowski_sum(mapped_p, prune_vertices(disturbances[step], cap))
        sets.append(prune_vertices(nxt, cap))
    return sets


def contraction_factor(mzk: MatrixPolytope, lyapunov_p=None) -> float:
    """One-step contraction factor valid for every vertex map.

    With a common Lyapunov matrix P this is the P-weighted operator norm
    max_v ||P^{1/2} Q_v P^{-1/2}||, which certifies products of arbitrary
    vertex sequences; without P it falls back to the max vertex spectral
    radius.
    """
    if lyapunov_p is None:
        return max(spectral_radius(q) for q in mzk.vertices)
    pm = as_matrix(lyapunov_p)
    evals, evecs = np.linalg.eigh(0.5 * (pm + pm.T))
    if np.any(evals <= 0):
        raise ValueError("lyapunov_p must be positive definite")
    root = evecs @ np.diag(np.sqrt(evals)) @ evecs.T
    root_inv = evecs @ np.diag(1.0 / np.sqrt(evals)) @ evecs.T
    return max(float(np.linalg.norm(root @ q @ root_inv, ord=2)) for q in mzk.vertices)


def error_bound_series(
    c_poly: MatrixPolytope,
    xi_series,
    fit: RegulatorFit,
    px0: VPolytope,
    delta_series=None,
    pi=None,
    mzk: MatrixPolytope | None = None,
    lyapunov_p=None,
) -> BoundSeries:
    """Scalar bound r(t) >= |e(t)|_inf along the xi over-approximation.

    r(t) sums the output image of the xi set, the output-equation error times
    the leader orbit radius, and (when the observer series is supplied) the
    transient term max_C |C Pi delta(t)|. The asymptotic level uses the
    certified contraction factor of the closed-loop polytope.
    """
    cv = c_poly.vertices  # (Kc, q, n)
    x0_max = float(np.max(np.linalg.norm(px0.vertices, axis=1)))
    r = np.empty(len(xi_series))
    for step, xs in enumerate(xi_series):
        imgs = np.einsum("kab,vb->kva", cv, xs.vertices)
        r[step] = float(np.max(np.abs(imgs)))
    r = r + fit.bound2 * x0_max
    if delta_series is not None:
        if pi is None:
            raise ValueError("pi is required with delta_series")
        pim = as_matrix(pi)
        trans = np.einsum("kab,tb->kta", cv, np.asarray(delta_series) @ pim.T)
        r = r + np.max(np.abs(trans), axis=(0, 2))

    if mzk is not None:
        beta = contraction_factor(mzk, lyapunov_p)
        if lyapunov_p is not None:
            evals = np.linalg.eigvalsh(as_matrix(lyapunov_p))
            mu = float(np.sqrt(evals[-1] / evals[0]))
        else:
            mu = 1.0
        c_max = max(float(np.linalg.norm(v, ord=2)) for v in cv)
        if beta < 1.0:
            asymptotic = mu * c_max * fit.bound1 * x0_max / (1.0 - beta) + fit.bound2 * x0_max
        else:
            asymptotic = float("inf")
    else:
        beta = float("nan")
        asymptotic = float("nan")
    return BoundSeries(r=r, asymptotic=asymptotic, contraction=beta, xi_sets=list(xi_series))
