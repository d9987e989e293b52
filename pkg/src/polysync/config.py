"""Experiment configuration: load, validate, save, and the bundled benchmark.

Configurations are plain JSON with nested sections; matrices are row-major
nested lists so files stay hand-editable. Loading validates dimensional
consistency and the structural assumptions (leader-rooted spanning tree,
leader pole locations, data length vs. agent dimensions) with messages that
name the offending section.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .datagen import NoiseModel, TrueSystem
from .errors import TopologyError
from .graphnet import Topology, has_spanning_tree
from .polytope import VPolytope, box_polytope, singleton
from .simulate import LeaderModel


@dataclass
class ExperimentConfig:
    leader: dict
    agents: list
    topology: dict
    noise: dict
    data: dict
    synthesis: dict = field(default_factory=dict)
    observer: dict = field(default_factory=dict)
    simulation: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)

    # -- constructors ---------------------------------------------------------

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        required = ("leader", "agents", "topology", "noise", "data")
        for key in required:
            if key not in raw:
                raise ValueError(f"config is missing required section {key!r}")
        return cls(
            leader=raw["leader"],
            agents=raw["agents"],
            topology=raw["topology"],
            noise=raw["noise"],
            data=raw["data"],
            synthesis=raw.get("synthesis", {}),
            observer=raw.get("observer", {}),
            simulation=raw.get("simulation", {}),
            sweep=raw.get("sweep", {}),
        )

    def to_dict(self) -> dict:
        return {
            "leader": self.leader,
            "agents": self.agents,
            "topology": self.topology,
            "noise": self.noise,
            "data": self.data,
            "synthesis": self.synthesis,
            "observer": self.observer,
            "simulation": self.simulation,
            "sweep": self.sweep,
        }

    # -- derived objects ------------------------------------------------------

    @property
    def n_agents(self) -> int:
        return len(self.agents)

    def leader_model(self) -> LeaderModel:
        try:
            return LeaderModel(np.array(self.leader["s"]), np.array(self.leader["h"]))
        except (KeyError, ValueError) as exc:
            raise ValueError(f"config section 'leader': {exc}") from exc

    def systems(self) -> list:
        out = []
        for idx, a in enumerate(self.agents):
            try:
                out.append(TrueSystem(np.array(a["a"]), np.array(a["b"]), np.array(a["c"])))
            except (KeyError, ValueError) as exc:
                raise ValueError(f"config section 'agents[{idx}]': {exc}") from exc
        return out

    def build_topology(self) -> Topology:
        n = self.topology.get("n_followers", self.n_agents)
        if n != self.n_agents:
            raise ValueError(
                f"config section 'topology': n_followers={n} but {self.n_agents} agents defined"
            )
        adjacency = np.zeros((n, n))
        pinning = np.zeros(n)
        for e_idx, (src, dst, w) in enumerate(self.topology.get("edges", [])):
            src, dst = int(src), int(dst)
            if not 0 <= src <= n or not 1 <= dst <= n:
                raise ValueError(
                    f"config section 'topology.edges[{e_idx}]': node ids must be in 0..{n} "
                    "(0 is the leader) with destination a follower"
                )
            if src == 0:
                pinning[dst - 1] += float(w)
            else:
                adjacency[dst - 1, src - 1] += float(w)
        return Topology(adjacency, pinning)

    def noise_level(self, level: float | None = None) -> float:
        return float(self.noise.get("level", 0.0)) if level is None else float(level)

    def noise_model(self, agent_idx: int, level: float | None = None) -> NoiseModel:
        lvl = self.noise_level(level)
        sys = self.systems()[agent_idx]
        if lvl == 0.0:
            return NoiseModel(singleton(np.zeros(sys.n)), singleton(np.zeros(sys.q)))
        return NoiseModel(
            box_polytope(np.full(sys.n, lvl)), box_polytope(np.full(sys.q, lvl))
        )

    def input_polytope(self, agent_idx: int) -> VPolytope:
        agent = self.agents[agent_idx]
        sys = self.systems()[agent_idx]
        verts = agent.get("input_vertices")
        if verts is None:
            return box_polytope(np.ones(sys.p))
        return VPolytope(np.array(verts, dtype=float))

    # -- validation -----------------------------------------------------------

    def validate(self) -> dict:
        """Dimension and assumption checks; raises on hard errors, returns a report."""
        leader = self.leader_model()
        systems = self.systems()
        topo = self.build_topology()
        rho = int(self.data.get("rho", 0))
        if rho < 1:
            raise ValueError("config section 'data': rho must be a positive integer")
        for idx, sys in enumerate(systems):
            if sys.q != leader.h.shape[0]:
                raise ValueError(
                    f"config section 'agents[{idx}]': output dim {sys.q} != leader output "
                    f"dim {leader.h.shape[0]}"
                )
            if rho < sys.n + sys.p:
                raise ValueError(
                    f"config section 'data': rho={rho} below n+p={sys.n + sys.p} "
                    f"for agents[{idx}]; the richness condition cannot hold"
                )
        if not has_spanning_tree(topo):
            raise TopologyError(
                "config section 'topology': no directed spanning tree rooted at the leader"
            )
        return {
            "n_agents": self.n_agents,
            "rho": rho,
            "spanning_tree": True,
            "leader_poles_unit_circle": True,
            "noise_level": self.noise_level(),
        }


def load_config(path) -> ExperimentConfig:
    raw = json.loads(Path(path).read_text())
    return ExperimentConfig.from_dict(raw)


def save_config(cfg: ExperimentConfig, path) -> None:
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")


def paper_example() -> ExperimentConfig:
    """The bundled six-follower benchmark configuration."""
    raw = json.loads(
        resources.files("polysync").joinpath("data/paper_example.json").read_text()
    )
    return ExperimentConfig.from_dict(raw)
