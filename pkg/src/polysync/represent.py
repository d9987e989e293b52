"""Data-consistency sets: all systems compatible with the data and noise bounds.

Right-multiplying the columnwise data identity by the pseudoinverse of the
stacked input-state matrix turns the noise matrix polytope into a polytope of
``[B A]`` blocks (and likewise ``C`` from the output rows). The true system is
always a hull member, witnessed by the convex weights of its realized noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datagen import AgentDataset, NoiseModel, TrueSystem, rank_ok
from .errors import RichnessError, ShapeError
from .numkit import as_matrix, pinv
from .polytope import MatrixPolytope, map_matrix_polytope, noise_matrix_polytope


@dataclass(frozen=True)
class ConsistencySet:
    """Vertex polytopes of admissible [B A] and C blocks, with cached pinvs."""

    z_poly: MatrixPolytope  # vertices of [B A], shape n x (p + n)
    c_poly: MatrixPolytope  # vertices of C, shape q x n
    ux_pinv: np.ndarray  # pinv of [U; X], rho x (p + n)
    x_pinv: np.ndarray  # pinv of X, rho x n
    w_poly: MatrixPolytope  # process-noise matrix polytope (for bounds)
    v_poly: MatrixPolytope  # measurement-noise matrix polytope

    @property
    def n(self) -> int:
        return self.z_poly.rows

    @property
    def p(self) -> int:
        return self.z_poly.cols - self.z_poly.rows

    @property
    def q(self) -> int:
        return self.c_poly.rows


def build_consistency_set(
    d: AgentDataset, noise: NoiseModel, rank_tol: float = 1e-8
) -> ConsistencySet:
    """Map the noise matrix polytopes through the data into system polytopes.

    Requires the stacked input-state matrix to have full row rank (data
    richness); raises :class:`RichnessError` otherwise.
    """
    if not rank_ok(d, rank_tol):
        raise RichnessError(
            "stacked input-state matrix [U; X] is rank deficient; the data is not "
            "persistently exciting enough to identify the consistency set"
        )
    ux_pinv = pinv(d.stacked_input_state())
    x_pinv = pinv(d.x)
    w_poly = noise_matrix_polytope(noise.process, d.rho)
    v_poly = noise_matrix_polytope(noise.measurement, d.rho)
    # Vertex k of the Z polytope is (X+ - W_hat_k) [U; X]^+.
    z_poly = map_matrix_polytope(
        map_matrix_polytope(w_poly, left=-np.eye(d.n), shift=d.x_plus), right=ux_pinv
    )
    c_poly = map_matrix_polytope(
        map_matrix_polytope(v_poly, left=-np.eye(d.q), shift=d.y), right=x_pinv
    )
    return ConsistencySet(
        z_poly=z_poly, c_poly=c_poly, ux_pinv=ux_pinv, x_pinv=x_pinv,
        w_poly=w_poly, v_poly=v_poly,
    )


def verify_true_membership(
    cs: ConsistencySet, sys: TrueSystem, d: AgentDataset, tol: float = 1e-9
) -> bool:
    """Check the exact reconstruction identity at the realized noise.

    With full row rank, (X+ - W) [U; X]^+ equals [B A] of the generating
    system exactly, and (Y - V) X^+ equals C. Needs the retained noise.
    """
    w, v = d.require_noise()
    ba = np.hstack([sys.b, sys.a])
    z_rec = (d.x_plus - w) @ cs.ux_pinv
    c_rec = (d.y - v) @ cs.x_pinv
    return bool(
        np.linalg.norm(z_rec - ba) < tol and np.linalg.norm(c_rec - sys.c) < tol
    )


def closed_loop_polytope(cs: ConsistencySet, k) -> MatrixPolytope:
    """Polytope of closed-loop matrices {Z [K; I] : Z in the Z polytope}."""
    km = as_matrix(k, "k")
    if km.shape != (cs.p, cs.n):
        raise ShapeError(f"gain must be {cs.p}x{cs.n}, got {km.shape}")
    selector = np.vstack([km, np.eye(cs.n)])
    return map_matrix_polytope(cs.z_poly, right=selector)
