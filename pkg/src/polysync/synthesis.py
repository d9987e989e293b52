"""Robust feedback-gain synthesis and observer-gain design.

The feedback gain is found from data alone: for every vertex of the
consistency set the 2n x 2n block

    [[X M,          Omega_v M],
     [(Omega_v M)^T, X M     ]]

must share a positive margin, with X M symmetric. A Schur complement turns
that into a common Lyapunov certificate P = (X M)^{-1} for every admissible
closed loop. The decision matrix is parameterized on the row space of the
stacked input-state matrix (M = [U; X]^+ N), which keeps the variable count
at (p+n)*n and makes the certificate transfer exactly to the closed-loop
polytope vertices. A unit cap block I - X M bounds the otherwise conic
max-margin objective; feasibility is unaffected because the constraints are
homogeneous in M.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datagen import AgentDataset, NoiseModel
from .errors import ObserverDesignError, ShapeError, SynthesisError, TopologyError
from .graphnet import Topology, has_spanning_tree, observer_composite
from .numkit import as_matrix, spectral_radius
from .polytope import MatrixPolytope
from .represent import ConsistencySet, build_consistency_set, closed_loop_polytope
from .sdpcore import LmiProblem, LmiSolution, solve_max_margin


@dataclass(frozen=True)
class SynthesisResult:
    k: np.ndarray  # feedback gain, p x n
    m_decision: np.ndarray  # decision matrix, rho x n
    lyapunov_p: np.ndarray  # (X M)^{-1}, symmetric positive definite
    worst_vertex_radius: float  # max spectral radius over closed-loop vertices
    margin: float  # achieved LMI margin
    reduced_decision: np.ndarray  # N with M = [U; X]^+ N (for re-verification)
    consistency: ConsistencySet
    closed_loop: MatrixPolytope


@dataclass(frozen=True)
class ObserverDesign:
    f: np.ndarray  # observer gain, n0 x n0
    composite_radius: float
    alpha: float | None = None  # set when F = alpha * S parameterization was used


def _synthesis_problem(cs: ConsistencySet) -> LmiProblem:
    """Vertex LMI in the reduced variable N ((p+n) x n, column-major vec)."""
    n, p = cs.n, cs.p
    m = (p + n) * n
    prob = LmiProblem(m)

    def var_index(row, col):
        return col * (p + n) + row

    def n2_coeff(row, col):
        # d(N2)/dN[p+row, col], symmetrized; valid on the symmetric subspace.
        e = np.zeros((n, n))
        e[row, col] += 0.5
        e[col, row] += 0.5
        return e

    zero_n = np.zeros((n, n))
    for zv in cs.z_poly.vertices:
        coeffs = []
        for j in range(m):
            col, row = divmod(j, p + n)
            w = np.zeros((n, n))
            w[:, col] = zv[:, row]  # d(Z_v N)/dN[row, col]
            d2 = n2_coeff(row - p, col) if row >= p else zero_n
            coeffs.append(np.block([[d2, w], [w.T, d2]]))
        prob.add_block(np.zeros((2 * n, 2 * n)), coeffs)
    # Cap block I - N2 bounds the margin; any feasible M scales into it.
    cap_coeffs = []
    for j in range(m):
        col, row = divmod(j, p + n)
        cap_coeffs.append(-n2_coeff(row - p, col) if row >= p else zero_n)
    prob.add_block(np.eye(n), cap_coeffs)
    # Symmetry equalities on N2.
    for r in range(n):
        for c in range(r + 1, n):
            a = np.zeros(m)
            a[var_index(p + r, c)] = 1.0
            a[var_index(p + c, r)] = -1.0
            prob.add_equality(a, 0.0)
    return prob


def synthesize_k(
    d: AgentDataset,
    noise: NoiseModel,
    margin: float = 1e-3,
    rank_tol: float = 1e-8,
    iter_cap: int = 500,
    consistency: ConsistencySet | None = None,
) -> SynthesisResult:
    """Data-driven gain stabilizing every system in the consistency set.

    Solves the vertex LMI by max-margin SDP, recovers K = U M (X M)^{-1},
    and re-verifies a posteriori that every closed-loop polytope vertex has
    spectral radius below 1 - margin.
    """
    cs = consistency if consistency is not None else build_consistency_set(d, noise, rank_tol)
    prob = _synthesis_problem(cs)
    sol: LmiSolution = solve_max_margin(prob, iter_cap=iter_cap)
    if sol.status != "feasible":
        raise SynthesisError(
            f"gain synthesis SDP {sol.status}: {sol.message} (best margin {sol.margin:.3e})"
        )
    n, p = cs.n, cs.p
    n_red = sol.y.reshape((p + n, n), order="F")
    m_dec = cs.ux_pinv @ n_red
    xm = d.x @ m_dec
    sym_err = np.max(np.abs(xm - xm.T))
    if sym_err > 1e-7 * max(1.0, np.max(np.abs(xm))):
        raise SynthesisError(f"X M not symmetric at the solution (error {sym_err:.3e})")
    xm = 0.5 * (xm + xm.T)
    eig_min = float(np.min(np.linalg.eigvalsh(xm)))
    if eig_min <= 0.0:
        raise SynthesisError(f"X M not positive definite (min eigenvalue {eig_min:.3e})")
    k = (d.u @ m_dec) @ np.linalg.inv(xm)
    p_lyap = np.linalg.inv(xm)
    p_lyap = 0.5 * (p_lyap + p_lyap.T)

    clp = closed_loop_polytope(cs, k)
    radii = np.array([spectral_radius(q) for q in clp.vertices])
    worst = float(np.max(radii))
    if worst >= 1.0 - margin:
        raise SynthesisError(
            f"certificate mismatch: a closed-loop vertex has spectral radius {worst:.6f} "
            f">= {1.0 - margin:.6f}; tighten the solver target margin"
        )
    return SynthesisResult(
        k=k,
        m_decision=m_dec,
        lyapunov_p=p_lyap,
        worst_vertex_radius=worst,
        margin=sol.margin,
        reduced_decision=n_red,
        consistency=cs,
        closed_loop=clp,
    )


def _composite_radius(t: Topology, s: np.ndarray, f: np.ndarray) -> float:
    return spectral_radius(observer_composite(t, s, f))


def design_f(
    t: Topology,
    s,
    margin: float = 1e-3,
    f=None,
    grid_size: int = 61,
) -> ObserverDesign:
    """Observer gain making the estimation-error dynamics contract.

    With ``f`` supplied the gain is only verified. Otherwise F = alpha * S is
    searched over a log-spaced alpha grid refined by golden section on the
    composite spectral radius.
    """
    sm = as_matrix(s, "s")
    if sm.shape[0] != sm.shape[1]:
        raise ShapeError(f"leader dynamics must be square, got {sm.shape}")
    if not has_spanning_tree(t):
        raise TopologyError("graph has no directed spanning tree rooted at the leader")
    if f is not None:
        fm = as_matrix(f, "f")
        radius = _composite_radius(t, sm, fm)
        if radius >= 1.0 - margin:
            raise ObserverDesignError(
                f"supplied observer gain gives composite radius {radius:.6f} >= {1.0 - margin:.6f}"
            )
        return ObserverDesign(f=fm, composite_radius=radius, alpha=None)

    alphas = np.logspace(-3.0, 3.0, grid_size)
    radii = np.array([_composite_radius(t, sm, a * sm) for a in alphas])
    best = int(np.argmin(radii))
    lo = np.log(alphas[max(best - 1, 0)])
    hi = np.log(alphas[min(best + 1, grid_size - 1)])
    # Golden-section refinement in log space.
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    e = a + invphi * (b - a)
    fc = _composite_radius(t, sm, np.exp(c) * sm)
    fe = _composite_radius(t, sm, np.exp(e) * sm)
    for _ in range(60):
        if fc < fe:
            b, e, fe = e, c, fc
            c = b - invphi * (b - a)
            fc = _composite_radius(t, sm, np.exp(c) * sm)
        else:
            a, c, fc = c, e, fe
            e = a + invphi * (b - a)
            fe = _composite_radius(t, sm, np.exp(e) * sm)
    alpha = float(np.exp(0.5 * (a + b)))
    radius = _composite_radius(t, sm, alpha * sm)
    if radius >= 1.0 - margin:
        coupling_spectrum = np.linalg.eigvals(observer_composite(t, sm, 0.0 * sm))
        raise ObserverDesignError(
            f"no scaled-leader gain reached composite radius below {1.0 - margin:.6f} "
            f"(best {radius:.6f}); composite spectrum at F=0: {coupling_spectrum}"
        )
    return ObserverDesign(f=alpha * sm, composite_radius=radius, alpha=alpha)


def verify_lemma_conditions(t: Topology, s, f, closed_loops) -> bool:
    """Joint stability test: observer composite Schur and every closed-loop
    polytope vertex Schur."""
    sm = as_matrix(s, "s")
    fm = as_matrix(f, "f")
    if _composite_radius(t, sm, fm) >= 1.0:
        return False
    for mp in closed_loops:
        for q in mp.vertices:
            if spectral_radius(q) >= 1.0:
                return False
    return True
