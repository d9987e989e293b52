"""Small dense LMI feasibility / max-margin solver.

Solves

    maximize t   s.t.   F0_k + sum_j y_j Fj_k >= t I   for every block k,
                        A y = b,

by eliminating the equalities onto an orthonormal null-space basis and then
following the log-det barrier central path with damped Newton steps. The
problems this package generates are tiny (a dozen variables, a few hundred
blocks of size <= 8), so robustness and determinism are preferred over
large-scale tricks. An internal scalar cap t <= t_cap keeps the objective
bounded when the constraint set is a cone.

"Infeasible" here means the optimal margin is negative (no y makes every
block positive semidefinite), certified through the barrier duality gap;
inconsistent equalities are certified by their least-squares residual.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError

MAX_BLOCK_SIZE = 64
MAX_VARIABLES = 512
SYMMETRY_TOL = 1e-12


def _check_symmetric(m: np.ndarray, what: str) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ShapeError(f"{what} must be square, got {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{what} contains non-finite entries")
    scale = max(1.0, float(np.max(np.abs(m))))
    if np.max(np.abs(m - m.T)) > SYMMETRY_TOL * scale:
        raise ValueError(f"{what} is not symmetric within {SYMMETRY_TOL}")
    return 0.5 * (m + m.T)


@dataclass
class LmiProblem:
    """Affine symmetric blocks F0 + sum_j y_j F_j plus linear equalities on y."""

    dim: int
    blocks: list = field(default_factory=list)  # (F0, coeffs (m, s, s))
    eq_rows: list = field(default_factory=list)  # (a (m,), b scalar)

    def __post_init__(self):
        if not 0 <= self.dim <= MAX_VARIABLES:
            raise ValueError(f"decision dimension must be in [0, {MAX_VARIABLES}]")

    def add_block(self, f0, coeffs=()):
        f0 = _check_symmetric(f0, "block constant")
        if f0.shape[0] > MAX_BLOCK_SIZE:
            raise ShapeError(f"block size {f0.shape[0]} exceeds {MAX_BLOCK_SIZE}")
        cs = np.zeros((self.dim, f0.shape[0], f0.shape[0]))
        coeffs = list(coeffs)
        if len(coeffs) not in (0, self.dim):
            raise ShapeError(f"expected {self.dim} coefficient matrices, got {len(coeffs)}")
        for j, cj in enumerate(coeffs):
            cj = _check_symmetric(cj, f"block coefficient {j}")
            if cj.shape != f0.shape:
                raise ShapeError(f"coefficient {j} shape {cj.shape} != block shape {f0.shape}")
            cs[j] = cj
        self.blocks.append((f0, cs))
        return self

    def add_equality(self, a, b):
        av = np.asarray(a, dtype=float).reshape(-1)
        if av.size != self.dim:
            raise ShapeError(f"equality row length {av.size} != dim {self.dim}")
        self.eq_rows.append((av, float(b)))
        return self

    def block_values(self, y: np.ndarray):
        """Evaluate every block at y."""
        out = []
        for f0, cs in self.blocks:
            out.append(f0 + np.tensordot(y, cs, axes=(0, 0)) if self.dim else f0.copy())
        return out

    def scale(self) -> float:
        """Largest block-data Frobenius norm; used for scale-aware defaults."""
        s = 0.0
        for f0, cs in self.blocks:
            s = max(s, float(np.linalg.norm(f0)))
            if cs.size:
                s = max(s, float(np.max(np.linalg.norm(cs, axis=(1, 2)))))
        return max(s, 1.0e-300)


@dataclass
class LmiSolution:
    y: np.ndarray
    margin: float
    status: str  # "feasible" | "infeasible" | "inconclusive"
    achieved_t: float = float("nan")
    certificate_gap: float = float("inf")
    newton_iterations: int = 0
    message: str = ""


def check_solution(p: LmiProblem, y) -> tuple[float, float]:
    """Recompute the margin (min block eigenvalue) and max equality residual.

    Pure verification by symmetric eigendecomposition; no solving.
    """
    yv = np.asarray(y, dtype=float).reshape(-1)
    if yv.size != p.dim:
        raise ShapeError(f"y has length {yv.size}, expected {p.dim}")
    margin = min(
        float(np.linalg.eigvalsh(0.5 * (m + m.T))[0]) for m in p.block_values(yv)
    )
    eq_residual = 0.0
    for a, b in p.eq_rows:
        eq_residual = max(eq_residual, abs(float(a @ yv) - b))
    return margin, eq_residual


def _null_space_basis(a: np.ndarray, tol: float = 1e-12):
    if a.size == 0:
        return np.eye(a.shape[1])
    _, sv, vt = np.linalg.svd(a)
    rank = int(np.sum(sv > tol * max(1.0, sv[0] if sv.size else 0.0)))
    return vt[rank:].T


class _BlockGroup:
    """Blocks of one size stacked for vectorized barrier derivatives."""

    def __init__(self, g0: np.ndarray, coeffs: np.ndarray):
        self.g0 = g0  # (K, s, s) constants at the particular solution
        self.coeffs = coeffs  # (K, R, s, s) reduced coefficient matrices
        self.size = g0.shape[1]
        self.count = g0.shape[0]

    def shifted(self, z: np.ndarray, t: float) -> np.ndarray:
        m = self.g0 - t * np.eye(self.size)[None, :, :]
        if self.coeffs.shape[1]:
            m = m + np.einsum("r,krab->kab", z, self.coeffs)
        return m


def _group_blocks(p: LmiProblem, y_p: np.ndarray, basis: np.ndarray):
    groups: dict[int, list] = {}
    for f0, cs in p.blocks:
        g0 = f0 + (np.tensordot(y_p, cs, axes=(0, 0)) if p.dim else 0.0)
        red = np.tensordot(basis.T, cs, axes=(1, 0)) if p.dim else np.zeros((0, *f0.shape))
        groups.setdefault(f0.shape[0], []).append((g0, red))
    out = []
    for size in sorted(groups):
        g0s = np.stack([g for g, _ in groups[size]])
        reds = np.stack([r for _, r in groups[size]])
        out.append(_BlockGroup(g0s, reds))
    return out


def _barrier_state(groups, z, t, t_cap):
    """Inverses, value, gradient and Hessian of the barrier at (z, t).

    Returns None when (z, t) is not strictly interior.
    """
    r = z.size
    val = 0.0
    grad = np.zeros(r + 1)
    hess = np.zeros((r + 1, r + 1))
    cap_slack = t_cap - t
    if cap_slack <= 0.0:
        return None
    val -= np.log(cap_slack)
    grad[r] += 1.0 / cap_slack
    hess[r, r] += 1.0 / cap_slack**2
    for grp in groups:
        m = grp.shifted(z, t)
        try:
            chol = np.linalg.cholesky(m)
        except np.linalg.LinAlgError:
            return None
        diag = np.diagonal(chol, axis1=1, axis2=2)
        if np.any(diag <= 0.0):
            return None
        val -= 2.0 * float(np.sum(np.log(diag)))
        minv = np.linalg.inv(m)
        minv = 0.5 * (minv + np.transpose(minv, (0, 2, 1)))
        tr_minv = float(np.einsum("kaa->", minv))
        grad[r] += tr_minv
        hess[r, r] += float(np.einsum("kab,kba->", minv, minv))
        if r:
            d = np.einsum("kab,krbc->krac", minv, grp.coeffs)
            grad[:r] -= np.einsum("kraa->r", d)
            hess[:r, :r] += np.einsum("krab,klba->rl", d, d)
            cross = -np.einsum("krab,kba->r", d, minv)
            hess[:r, r] += cross
            hess[r, :r] += cross
    return val, grad, hess


def solve_max_margin(
    p: LmiProblem, target_margin: float | None = None, iter_cap: int = 500
) -> LmiSolution:
    """Maximize the common block margin subject to the equalities.

    Status is "feasible" when the achieved margin reaches ``target_margin``
    (default: 1e-6 times the problem scale), "infeasible" only with a
    certificate that the optimal margin is negative (barrier duality gap, or
    inconsistent equalities), and "inconclusive" otherwise.
    """
    if not p.blocks:
        raise ValueError("problem has no blocks")
    s0 = p.scale()
    if target_margin is None:
        target_margin = 1e-6 * s0

    # Equality elimination: particular solution + orthonormal null basis.
    if p.eq_rows:
        a_eq = np.stack([a for a, _ in p.eq_rows])
        b_eq = np.array([b for _, b in p.eq_rows])
        y_p, *_ = np.linalg.lstsq(a_eq, b_eq, rcond=None)
        eq_res = float(np.max(np.abs(a_eq @ y_p - b_eq)))
        if eq_res > 1e-8 * max(1.0, float(np.max(np.abs(b_eq)))):
            return LmiSolution(
                y=y_p, margin=float("-inf"), status="infeasible",
                message=f"equalities inconsistent (least-squares residual {eq_res:.3e})",
            )
        basis = _null_space_basis(a_eq)
    else:
        y_p = np.zeros(p.dim)
        basis = np.eye(p.dim)

    # Work on blocks divided by the problem scale; margins transform linearly.
    scaled = LmiProblem(p.dim)
    scaled.blocks = [(f0 / s0, cs / s0) for f0, cs in p.blocks]
    groups = _group_blocks(scaled, y_p, basis)
    nu = sum(g.size * g.count for g in groups) + 1.0
    t_cap = 1.0e6

    z = np.zeros(basis.shape[1])
    min_eig0 = min(
        float(np.min(np.linalg.eigvalsh(g.shifted(z, 0.0)))) for g in groups
    )
    t = min_eig0 - max(1.0, 0.1 * abs(min_eig0))

    mu = 1.0
    gap_tol = 1e-7
    iters = 0
    stalled = False
    # Certificates are only trusted at barrier weights where the Newton
    # decrement confirmed approximate centering (lambda <= 1/4).
    mu_certified = 0.0
    t_certified = t
    while True:
        last_lambda = np.inf
        for _ in range(60):
            if iters >= iter_cap:
                break
            state = _barrier_state(groups, z, t, t_cap)
            assert state is not None, "iterate left the interior"
            val, bgrad, bhess = state
            grad = bgrad.copy()
            grad[-1] -= mu
            ridge = 0.0
            for _attempt in range(12):
                try:
                    h = bhess + ridge * np.eye(bhess.shape[0])
                    np.linalg.cholesky(h)
                    break
                except np.linalg.LinAlgError:
                    ridge = max(ridge * 10.0, 1e-12 * (1.0 + np.trace(bhess)))
            else:  # pragma: no cover - extremely ill-conditioned
                stalled = True
                break
            step = -np.linalg.solve(h, grad)
            decrement = -float(grad @ step)
            if not np.isfinite(decrement) or decrement <= 0.0:
                stalled = True
                break
            last_lambda = np.sqrt(decrement)
            iters += 1
            if decrement / 2.0 < 1e-11:
                break
            # Backtracking line search keeping strict interiority.
            alpha = 1.0
            f_cur = -mu * t + val
            accepted = False
            for _bt in range(60):
                z_new = z + alpha * step[:-1]
                t_new = t + alpha * step[-1]
                state_new = _barrier_state(groups, z_new, t_new, t_cap)
                if state_new is not None:
                    f_new = -mu * t_new + state_new[0]
                    if f_new <= f_cur - 1e-4 * alpha * decrement:
                        z, t = z_new, t_new
                        accepted = True
                        break
                alpha *= 0.5
            if not accepted:
                stalled = True
                break
        if last_lambda <= 0.25:
            mu_certified = mu
            t_certified = t
        if nu / mu <= gap_tol or iters >= iter_cap or stalled:
            break
        mu *= 8.0

    # Upper bound on the optimal (scaled) margin from approximate centering.
    gap = (nu + np.sqrt(nu) + 1.0) / mu_certified if mu_certified > 0.0 else np.inf
    upper_bound = (t_certified + gap) * s0
    y = y_p + basis @ z
    margin, eq_residual = check_solution(p, y)

    if margin >= target_margin and margin > 0.0 and eq_residual <= 1e-8:
        status = "feasible"
        message = "target margin reached"
    elif upper_bound < 0.0:
        status = "infeasible"
        message = f"optimal margin certified below zero (upper bound {upper_bound:.3e})"
    else:
        status = "inconclusive"
        message = (
            f"best margin {margin:.3e} below target {target_margin:.3e} "
            f"(achieved t {t * s0:.3e}, certificate gap {gap * s0:.3e}, "
            f"iterations {iters}{', stalled' if stalled else ''})"
        )
    return LmiSolution(
        y=y,
        margin=margin,
        status=status,
        achieved_t=t * s0,
        certificate_gap=gap * s0,
        newton_iterations=iters,
        message=message,
    )
