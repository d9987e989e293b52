"""Offline open-loop experiments producing per-agent datasets.

Each dataset stores the state/input/output snapshot matrices of a noisy
open-loop run, column per timestep. The realized noise can be retained for
oracle-style checks; identification and synthesis code never reads it.

Several of the benchmark followers are strongly unstable in open loop, so a
single long trajectory overflows double precision headroom within a few
steps. ``collect`` therefore supports bounded restarts: when the state
magnitude passes ``state_cap`` the state is redrawn from the initial-state
box. Every recorded column still satisfies the one-step dynamics exactly,
which is all the downstream set-membership arguments need.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DivergenceError, OracleUnavailableError, ShapeError
from .numkit import as_matrix, as_vector
from .polytope import VPolytope

OVERFLOW_GUARD = 1e12


@dataclass(frozen=True)
class TrueSystem:
    """Ground-truth matrices, used only for data generation and oracles."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        a = as_matrix(self.a, "a")
        b = as_matrix(self.b, "b")
        c = as_matrix(self.c, "c")
        if a.shape[0] != a.shape[1]:
            raise ShapeError(f"a must be square, got {a.shape}")
        if b.shape[0] != a.shape[0]:
            raise ShapeError(f"b has {b.shape[0]} rows, expected {a.shape[0]}")
        if c.shape[1] != a.shape[0]:
            raise ShapeError(f"c has {c.shape[1]} cols, expected {a.shape[0]}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)

    @property
    def n(self) -> int:
        return self.a.shape[0]

    @property
    def p(self) -> int:
        return self.b.shape[1]

    @property
    def q(self) -> int:
        return self.c.shape[0]


@dataclass(frozen=True)
class NoiseModel:
    """Per-step process and measurement noise polytopes."""

    process: VPolytope
    measurement: VPolytope


@dataclass(frozen=True)
class AgentDataset:
    """Snapshot matrices X, X+, U, Y of length rho (optionally with noise W, V)."""

    x: np.ndarray
    x_plus: np.ndarray
    u: np.ndarray
    y: np.ndarray
    w: np.ndarray | None = None
    v: np.ndarray | None = None

    def __post_init__(self):
        x = as_matrix(self.x, "x")
        xp = as_matrix(self.x_plus, "x_plus")
        u = as_matrix(self.u, "u")
        y = as_matrix(self.y, "y")
        rho = x.shape[1]
        for name, m in (("x_plus", xp), ("u", u), ("y", y)):
            if m.shape[1] != rho:
                raise ShapeError(f"{name} has {m.shape[1]} columns, expected rho={rho}")
        if xp.shape[0] != x.shape[0]:
            raise ShapeError("x and x_plus row counts differ")
        if rho < x.shape[0] + u.shape[0]:
            raise ValueError(
                f"rho={rho} is below n+p={x.shape[0] + u.shape[0]}; "
                "the stacked input-state matrix cannot have full row rank"
            )
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "x_plus", xp)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "y", y)
        for name in ("w", "v"):
            val = getattr(self, name)
            if val is not None:
                m = as_matrix(val, name)
                if m.shape[1] != rho:
                    raise ShapeError(f"{name} has {m.shape[1]} columns, expected rho={rho}")
                object.__setattr__(self, name, m)

    @property
    def rho(self) -> int:
        return self.x.shape[1]

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.u.shape[0]

    @property
    def q(self) -> int:
        return self.y.shape[0]

    def stacked_input_state(self) -> np.ndarray:
        return np.vstack([self.u, self.x])

    def require_noise(self) -> tuple[np.ndarray, np.ndarray]:
        if self.w is None or self.v is None:
            raise OracleUnavailableError("dataset was collected without retained noise")
        return self.w, self.v


def simplex_weights(rng: np.random.Generator, k: int) -> np.ndarray:
    """Uniform sample from the probability simplex (normalized exponentials)."""
    e = rng.exponential(size=k)
    return e / e.sum()


def sample_polytope(p: VPolytope, rng: np.random.Generator) -> np.ndarray:
    """Random hull point with uniform-on-simplex convex weights."""
    beta = simplex_weights(rng, p.n_vertices)
    return p.vertices.T @ beta


def sample_noise(p: VPolytope, rng_seed: int) -> np.ndarray:
    """Single seeded draw from the hull of ``p``."""
    return sample_polytope(p, np.random.default_rng(rng_seed))


def collect(
    sys: TrueSystem,
    noise: NoiseModel,
    rho: int,
    input_poly: VPolytope,
    x0,
    seed: int,
    state_cap: float | None = None,
    restart_half_width: float = 1.0,
) -> AgentDataset:
    """Simulate the perturbed open loop for ``rho`` steps and record snapshots.

    Inputs and both noises are drawn per step from their polytopes with
    uniform simplex weights; everything is a deterministic function of
    ``seed``. With ``state_cap`` set, the state is redrawn uniformly from
    ``[-restart_half_width, restart_half_width]^n`` whenever its magnitude
    exceeds the cap (bounded restarts). Without a cap, exceeding the
    overflow guard raises :class:`DivergenceError`.
    """
    if rho < 1:
        raise ValueError(f"rho must be >= 1, got {rho}")
    if noise.process.dim != sys.n:
        raise ShapeError(f"process noise dim {noise.process.dim} != state dim {sys.n}")
    if noise.measurement.dim != sys.q:
        raise ShapeError(f"measurement noise dim {noise.measurement.dim} != output dim {sys.q}")
    if input_poly.dim != sys.p:
        raise ShapeError(f"input polytope dim {input_poly.dim} != input dim {sys.p}")
    x = as_vector(x0, "x0").copy()
    if x.size != sys.n:
        raise ShapeError(f"x0 has dim {x.size}, expected {sys.n}")

    rng = np.random.default_rng(seed)
    xs = np.empty((sys.n, rho))
    xps = np.empty((sys.n, rho))
    us = np.empty((sys.p, rho))
    ys = np.empty((sys.q, rho))
    ws = np.empty((sys.n, rho))
    vs = np.empty((sys.q, rho))
    for t in range(rho):
        if state_cap is not None and np.max(np.abs(x)) > state_cap:
            x = rng.uniform(-restart_half_width, restart_half_width, size=sys.n)
        elif np.max(np.abs(x)) > OVERFLOW_GUARD or not np.all(np.isfinite(x)):
            raise DivergenceError(
                f"open-loop state exceeded {OVERFLOW_GUARD:g} at step {t}; "
                "use a shorter rho or bounded restarts (state_cap)"
            )
        u = sample_polytope(input_poly, rng)
        w = sample_polytope(noise.process, rng)
        v = sample_polytope(noise.measurement, rng)
        xs[:, t] = x
        us[:, t] = u
        ws[:, t] = w
        vs[:, t] = v
        ys[:, t] = sys.c @ x + v
        x = sys.a @ x + sys.b @ u + w
        xps[:, t] = x
    if not np.all(np.isfinite(xps)):
        raise DivergenceError("open-loop state became non-finite during collection")
    return AgentDataset(x=xs, x_plus=xps, u=us, y=ys, w=ws, v=vs)


def rank_ok(d: AgentDataset, tol: float = 1e-8) -> bool:
    """True iff every singular value of [U; X] exceeds ``tol``."""
    sv = np.linalg.svd(d.stacked_input_state(), compute_uv=False)
    return bool(sv.size == d.n + d.p and np.min(sv) > tol)


# -- dataset persistence ------------------------------------------------------

_MATRIX_FILES = {"x": "x", "x_plus": "xplus", "u": "u", "y": "y", "w": "w", "v": "v"}


def save_dataset(d: AgentDataset, out_dir, label: str, seed: int | None = None) -> None:
    """Write each snapshot matrix as CSV (column per timestep) plus a manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    present = []
    for attr, stem in _MATRIX_FILES.items():
        m = getattr(d, attr)
        if m is None:
            continue
        np.savetxt(out / f"{label}_{stem}.csv", m, delimiter=",")
        present.append(attr)
    manifest = {
        "label": label,
        "rho": d.rho,
        "seed": seed,
        "dims": {"n": d.n, "p": d.p, "q": d.q},
        "matrices": present,
    }
    (out / f"{label}_manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))


def load_dataset(in_dir, label: str) -> AgentDataset:
    """Inverse of :func:`save_dataset`."""
    src = Path(in_dir)
    manifest = json.loads((src / f"{label}_manifest.json").read_text())
    loaded = {}
    for attr in manifest["matrices"]:
        raw = np.loadtxt(src / f"{label}_{_MATRIX_FILES[attr]}.csv", delimiter=",", ndmin=2)
        loaded[attr] = raw
    return AgentDataset(**loaded)
