"""Closed-loop execution of the distributed synchronization protocol.

Synchronous lock-step: at every step each agent reads the previous-step
observer states of its in-neighbors (and the leader state when pinned),
updates its observer, applies the tracking controller and advances its own
dynamics; the leader advances autonomously. Online dynamics are noise-free;
noise only ever enters the offline data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DivergenceError, ShapeError
from .graphnet import Topology
from .numkit import as_matrix, as_vector, eigenvalues
from .regulator import RegulatorFit

UNIT_CIRCLE_TOL = 1e-9


@dataclass(frozen=True)
class LeaderModel:
    """Autonomous leader with observable output and unit-circle simple poles."""

    s: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        s = as_matrix(self.s, "s")
        h = as_matrix(self.h, "h")
        if s.shape[0] != s.shape[1]:
            raise ShapeError(f"leader dynamics must be square, got {s.shape}")
        if h.shape[1] != s.shape[0]:
            raise ShapeError(f"leader output has {h.shape[1]} cols, expected {s.shape[0]}")
        n0 = s.shape[0]
        obs = np.vstack([h @ np.linalg.matrix_power(s, k) for k in range(n0)])
        if np.linalg.matrix_rank(obs) < n0:
            raise ValueError("leader pair (S, H) is not observable")
        eigs = eigenvalues(s)
        if np.any(np.abs(np.abs(eigs) - 1.0) > UNIT_CIRCLE_TOL):
            raise ValueError("leader poles must lie on the unit circle")
        for i in range(n0):
            for j in range(i + 1, n0):
                if abs(eigs[i] - eigs[j]) <= UNIT_CIRCLE_TOL:
                    raise ValueError("leader poles must be non-repeated")
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "h", h)

    @property
    def n0(self) -> int:
        return self.s.shape[0]


@dataclass(frozen=True)
class AgentController:
    """Tracking controller u = K (x - Pi eta) + Gamma eta."""

    k: np.ndarray
    pi: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        k = as_matrix(self.k, "k")
        pi = as_matrix(self.pi, "pi")
        gamma = as_matrix(self.gamma, "gamma")
        if k.shape[1] != pi.shape[0]:
            raise ShapeError("gain and manifold matrix disagree on the state dimension")
        if gamma.shape != (k.shape[0], pi.shape[1]):
            raise ShapeError("feedforward gain shape mismatch")
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "pi", pi)
        object.__setattr__(self, "gamma", gamma)


@dataclass
class SimResult:
    """Per-agent time series of a closed-loop run (states at 0..T, inputs at 0..T-1)."""

    horizon: int
    x0: np.ndarray  # (T+1, n0) leader states
    y0: np.ndarray  # (T+1, q) leader outputs
    x: list  # agent states, (T+1, n_i)
    u: list  # agent inputs, (T, p_i)
    y: list  # agent outputs, (T+1, q)
    eta: list  # observer states, (T+1, n0)
    delta: list  # eta - x0, (T+1, n0)
    xi: list  # x - Pi eta, (T+1, n_i)
    e: list  # y - y0, (T+1, q)

    @property
    def n_agents(self) -> int:
        return len(self.x)


def observer_input(t: Topology, i: int, etas, x0_state) -> np.ndarray:
    """Consensus correction for agent i's observer, pinned agents also see the leader.

    Reads neighbor observer states only for in-neighbors (positive adjacency
    weight) and the leader state only when the pinning gain is positive, so a
    recording test double can audit protocol locality.
    """
    a_row = t.adjacency[i]
    corr = np.zeros_like(np.asarray(etas[i], dtype=float))
    for j in np.flatnonzero(a_row > 0):
        corr = corr + a_row[j] * (np.asarray(etas[j]) - np.asarray(etas[i]))
    if t.pinning[i] > 0:
        corr = corr + t.pinning[i] * (np.asarray(x0_state) - np.asarray(etas[i]))
    return corr


def run_closed_loop(
    leader: LeaderModel,
    systems,
    ctrls,
    f,
    t: Topology,
    x0_leader,
    x0_agents,
    eta0,
    horizon: int,
) -> SimResult:
    """Simulate leader, observers and followers for ``horizon`` steps."""
    n_agents = len(systems)
    if not (len(ctrls) == n_agents == t.n_followers and len(x0_agents) == len(eta0) == n_agents):
        raise ShapeError("systems, controllers, topology and initial states disagree")
    fm = as_matrix(f, "f")
    x0l = as_vector(x0_leader, "x0_leader")
    if x0l.size != leader.n0:
        raise ShapeError(f"leader initial state has dim {x0l.size}, expected {leader.n0}")
    scaling = 1.0 / (1.0 + t.in_degrees() + t.pinning)

    x0s = np.empty((horizon + 1, leader.n0))
    x0s[0] = x0l
    xs = [np.empty((horizon + 1, s.n)) for s in systems]
    us = [np.empty((horizon, s.p)) for s in systems]
    etas = [np.empty((horizon + 1, leader.n0)) for _ in systems]
    for i, s in enumerate(systems):
        xi0 = as_vector(x0_agents[i], f"x0_agents[{i}]")
        eta_i0 = as_vector(eta0[i], f"eta0[{i}]")
        if xi0.size != s.n or eta_i0.size != leader.n0:
            raise ShapeError(f"initial state dims wrong for agent {i}")
        xs[i][0] = xi0
        etas[i][0] = eta_i0

    for step in range(horizon):
        eta_now = [etas[i][step] for i in range(n_agents)]
        for i, (s, c) in enumerate(zip(systems, ctrls)):
            corr = observer_input(t, i, eta_now, x0s[step])
            etas[i][step + 1] = leader.s @ eta_now[i] + scaling[i] * (fm @ corr)
            u = c.k @ (xs[i][step] - c.pi @ eta_now[i]) + c.gamma @ eta_now[i]
            us[i][step] = u
            xs[i][step + 1] = s.a @ xs[i][step] + s.b @ u
            if not np.all(np.isfinite(xs[i][step + 1])):
                raise DivergenceError(f"agent {i} state became non-finite at step {step + 1}")
        x0s[step + 1] = leader.s @ x0s[step]

    y0s = x0s @ leader.h.T
    ys = [xs[i] @ systems[i].c.T for i in range(n_agents)]
    deltas = [etas[i] - x0s for i in range(n_agents)]
    xis = [xs[i] - etas[i] @ ctrls[i].pi.T for i in range(n_agents)]
    es = [ys[i] - y0s for i in range(n_agents)]
    return SimResult(
        horizon=horizon, x0=x0s, y0=y0s, x=xs, u=us, y=ys,
        eta=etas, delta=deltas, xi=xis, e=es,
    )


def consensus_load_series(r: SimResult, t: Topology) -> list:
    """Per-agent series z_i(t) = sum_j a_ij (delta_i - delta_j) + g_i delta_i.

    This is the signal the observer correction injects into the tracking-error
    dynamics; the reachability bounds consume it step by step.
    """
    out = []
    for i in range(r.n_agents):
        z = (t.in_degrees()[i] + t.pinning[i]) * r.delta[i]
        for j in np.flatnonzero(t.adjacency[i] > 0):
            z = z - t.adjacency[i, j] * r.delta[j]
        out.append(z)
    return out


def observer_error_series(r: SimResult) -> np.ndarray:
    """(N, T+1) array of two-norms of the observer errors."""
    return np.stack([np.linalg.norm(d, axis=1) for d in r.delta])


def log_linear_slope(series, floor: float = 1e-14) -> float:
    """Slope of log(series) against time, ignoring values below ``floor``.

    Returns nan when fewer than two usable points remain.
    """
    s = np.asarray(series, dtype=float)
    tt = np.arange(s.size)
    mask = s > floor
    if np.count_nonzero(mask) < 2:
        return float("nan")
    coef = np.polyfit(tt[mask], np.log(s[mask]), 1)
    return float(coef[0])


def export_trajectories(r: SimResult, out_dir) -> None:
    """One CSV per agent (t, x, u, y, eta, delta, xi, e) plus a leader CSV."""
    from pathlib import Path

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tcol = np.arange(r.horizon + 1)[:, None]
    np.savetxt(
        out / "leader.csv",
        np.hstack([tcol, r.x0, r.y0]),
        delimiter=",",
        header="t,x0...,y0",
        comments="",
    )
    for i in range(r.n_agents):
        u_pad = np.vstack([r.u[i], np.full((1, r.u[i].shape[1]), np.nan)])
        data = np.hstack([tcol, r.x[i], u_pad, r.y[i], r.eta[i], r.delta[i], r.xi[i], r.e[i]])
        np.savetxt(
            out / f"agent{i + 1}.csv",
            data,
            delimiter=",",
            header="t,x...,u...,y...,eta...,delta...,xi...,e",
            comments="",
        )


def phi_metrics(fits, oracles) -> tuple[float, float]:
    """Worst-case spectral-norm gaps between fitted and oracle manifold gains."""
    if len(fits) != len(oracles):
        raise ShapeError("fits and oracles must have equal length")
    phi1 = 0.0
    phi2 = 0.0
    for fit, (pi_s, gamma_s) in zip(fits, oracles):
        pi = fit.pi if isinstance(fit, RegulatorFit) else fit[0]
        gamma = fit.gamma if isinstance(fit, RegulatorFit) else fit[1]
        phi1 = max(phi1, float(np.linalg.norm(pi - pi_s, ord=2)))
        phi2 = max(phi2, float(np.linalg.norm(gamma - gamma_s, ord=2)))
    return phi1, phi2
