"""Synchronous-round simulation of the safe-kernel consensus protocol.

Each round, every benign agent collects the values its neighbours send,
intersects the hulls of all F-removed sub-multisets of them, and moves to a
convex combination of its own state and the kernel's vertices. Faulty agents
send whatever their strategy dictates, possibly a different value to each
neighbour.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .adversary import AdversaryStrategy, ConfigurationError
from .geometry import TOL_GEOM, TOL_VERTEX, as_points, safe_kernel
from .graph import (
    F_LOCAL,
    F_TOTAL,
    FaultSet,
    GraphError,
    Network,
    check_degree_assumption,
    neighbors,
    validate_fault_set,
)

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
CONVERGED = "converged"
ROUND_LIMIT = "round-limit"


class ScenarioError(ValueError):
    """Scenario file is malformed or violates a protocol assumption."""


class ScenarioParseError(ScenarioError):
    """Scenario text is not valid JSON or a field is missing or mistyped."""


class PreconditionError(ValueError):
    pass


class DegenerateKernelError(RuntimeError):
    """The kernel came out empty even though enough neighbours reported."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


@dataclass
class WeightPolicy:
    """Weights for the self state and each kernel vertex.

    ``uniform`` gives every term ``1/(V+1)``. ``custom`` fixes the self
    weight and splits the rest evenly over the vertices.
    """

    kind: str = "uniform"
    alpha: float | None = None
    self_weight: float | None = None

    def __post_init__(self):
        if self.kind not in ("uniform", "custom"):
            raise ConfigurationError(f"unknown weight policy {self.kind!r}")
        if self.kind == "custom":
            if self.self_weight is None or not 0.0 < self.self_weight < 1.0:
                raise ConfigurationError("custom weights need 0 < self_weight < 1")
        if self.alpha is not None and not self.alpha > 0:
            raise ConfigurationError("alpha must be positive")

    def weights(self, n_vertices: int) -> np.ndarray:
        """Self weight first, then one weight per vertex; sums to 1."""
        if self.kind == "uniform":
            w = np.full(n_vertices + 1, 1.0 / (n_vertices + 1))
        else:
            w = np.empty(n_vertices + 1)
            w[0] = self.self_weight
            w[1:] = (1.0 - self.self_weight) / n_vertices
        w /= w.sum()
        if self.alpha is not None and w.min() < self.alpha:
            raise ConfigurationError(
                f"weight {w.min():.3g} below alpha={self.alpha} with {n_vertices} kernel vertices"
            )
        return w

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        if self.self_weight is not None:
            out["self_weight"] = self.self_weight
        return out


def diameter(states) -> float:
    """Largest pairwise Euclidean distance; 0 for a single point."""
    pts = np.atleast_2d(np.asarray(states, dtype=float))
    if len(pts) == 0:
        raise ValueError("diameter of an empty set")
    if len(pts) == 1:
        return 0.0
    best = 0.0
    for i in range(len(pts) - 1):
        best = max(best, float(np.max(np.linalg.norm(pts[i + 1 :] - pts[i], axis=1))))
    return best


def kernel_step(own, neighbor_values, F: int, policy: WeightPolicy,
                tol: float = TOL_GEOM, tol_vertex: float = TOL_VERTEX):
    """One benign update; returns the new state and the kernel vertex count."""
    own = np.asarray(own, dtype=float).reshape(-1)
    vals = as_points(neighbor_values, dim=len(own))
    d = len(own)
    need = (d + 1) * F + 1
    if len(vals) < need:
        raise PreconditionError(f"{len(vals)} neighbour values, need at least {need}")
    kernel = safe_kernel(vals, F, tol, tol_vertex, prune=False)
    if kernel.empty:
        raise DegenerateKernelError(
            "safe kernel is numerically empty",
            {"neighbor_values": vals.tolist(), "F": F, "tol": tol, "tol_vertex": tol_vertex},
        )
    w = policy.weights(len(kernel.vertices))
    new = w[0] * own + w[1:] @ kernel.vertices
    return new, len(kernel.vertices)


def benign_update(own, neighbor_values, F: int, policy: WeightPolicy | None = None,
                  tol: float = TOL_GEOM, tol_vertex: float = TOL_VERTEX) -> np.ndarray:
    return kernel_step(own, neighbor_values, F, policy or WeightPolicy(), tol, tol_vertex)[0]


@dataclass
class Scenario:
    network: Network
    dim: int
    fault_set: FaultSet
    strategies: dict[int, AdversaryStrategy]
    initial_states: dict[int, np.ndarray]
    weight_policy: WeightPolicy = field(default_factory=WeightPolicy)
    epsilon: float = 1e-6
    max_rounds: int = 10000
    seed: int = 0
    tol_geom: float = TOL_GEOM
    tol_vertex: float = TOL_VERTEX

    def __post_init__(self):
        self.validate()

    @property
    def F(self) -> int:
        return self.fault_set.bound

    @property
    def faulty(self) -> frozenset[int]:
        return self.fault_set.members

    @property
    def benign(self) -> list[int]:
        return [i for i in self.network.nodes if i not in self.faulty]

    def validate(self) -> None:
        G, d = self.network, self.dim
        if d < 1:
            raise ScenarioError("dim must be >= 1")
        if not validate_fault_set(G, self.fault_set):
            raise ScenarioError(
                f"faulty set {sorted(self.faulty)} violates the F-{self.fault_set.model} bound F={self.F}"
            )
        if set(self.strategies) != set(self.faulty):
            raise ScenarioError("every faulty node needs exactly one strategy")
        for node, st in self.strategies.items():
            if st.dim != d:
                raise ScenarioError(f"strategy for node {node} has dimension {st.dim}, expected {d}")
            # surface script problems now rather than mid-run
            for j in neighbors(G, node):
                v = st.emit(0, j, self.seed, node)
                if v.shape != (d,):
                    raise ScenarioError(f"strategy for node {node} emits {v.shape}, expected ({d},)")
        for node in G.nodes:
            if node not in self.initial_states:
                if node in self.strategies:
                    self.initial_states[node] = canonical_emission(self, node, 0)
                else:
                    raise ScenarioError(f"missing initial state for node {node}")
            x = np.asarray(self.initial_states[node], dtype=float).reshape(-1)
            if x.shape != (d,) or not np.all(np.isfinite(x)):
                raise ScenarioError(f"initial state of node {node} must be {d} finite numbers")
            self.initial_states[node] = x
        ok = check_degree_assumption(G, d, self.F)
        for i in self.benign:
            if not ok[i]:
                raise ScenarioError(
                    f"node {i} has {G.degree(i)} neighbours, needs at least {(d + 1) * self.F + 1}"
                )
        if self.epsilon <= 0 or self.max_rounds < 0:
            raise ScenarioError("epsilon must be positive and max_rounds non-negative")

    @classmethod
    def from_dict(cls, data: dict, **overrides) -> "Scenario":
        try:
            n = int(data["nodes"])
            dim = int(data["dim"])
            network = Network.from_edges(n, data.get("edges", []))
            F = int(data.get("F", 0))
            model = data.get("model", F_TOTAL)
            if model not in (F_TOTAL, F_LOCAL):
                raise ScenarioError(f"field 'model': expected 'total' or 'local', got {model!r}")
            faulty = {int(k): v for k, v in data.get("faulty", {}).items()}
            strategies = {k: AdversaryStrategy.from_spec(v, dim) for k, v in faulty.items()}
            initial = {int(k): np.asarray(v, dtype=float) for k, v in data.get("initial", {}).items()}
            w = data.get("weights", {"kind": "uniform"})
            policy = WeightPolicy(
                kind=w.get("kind", "uniform"),
                alpha=data.get("alpha"),
                self_weight=w.get("self_weight"),
            )
            tols = data.get("tolerances", {})
            kwargs = dict(
                epsilon=float(data.get("epsilon", 1e-6)),
                max_rounds=int(data.get("max_rounds", 10000)),
                seed=int(data.get("seed", 0)),
                tol_geom=float(tols.get("geom", TOL_GEOM)),
                tol_vertex=float(tols.get("vertex", TOL_VERTEX)),
            )
        except KeyError as exc:
            raise ScenarioParseError(f"missing field {exc.args[0]!r}") from exc
        except (ScenarioError, ConfigurationError, GraphError):
            raise
        except (TypeError, ValueError, AttributeError) as exc:
            raise ScenarioParseError(f"mistyped field: {exc}") from exc
        kwargs.update({k: v for k, v in overrides.items() if v is not None})
        return cls(
            network=network,
            dim=dim,
            fault_set=FaultSet(frozenset(faulty), F, model),
            strategies=strategies,
            initial_states=initial,
            weight_policy=policy,
            **kwargs,
        )

    def to_dict(self) -> dict:
        out = self.network.to_dict()
        out.update(
            dim=self.dim,
            F=self.F,
            model=self.fault_set.model,
            faulty={str(k): self.strategies[k].to_spec() for k in sorted(self.strategies)},
            initial={str(k): self.initial_states[k].tolist() for k in self.network.nodes},
            weights=self.weight_policy.to_dict(),
            alpha=self.weight_policy.alpha,
            epsilon=self.epsilon,
            max_rounds=self.max_rounds,
            seed=self.seed,
            tolerances={"geom": self.tol_geom, "vertex": self.tol_vertex},
        )
        return out


def load_scenario(path, **overrides) -> Scenario:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioParseError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    return Scenario.from_dict(data, **overrides)


def canonical_emission(scenario: Scenario, node: int, k: int) -> np.ndarray:
    """Logged state of a faulty node: mean of what it sends in round k."""
    st = scenario.strategies[node]
    recips = sorted(neighbors(scenario.network, node)) or [node]
    if not st.per_recipient:
        return st.emit(k, recips[0], scenario.seed, node)
    return np.mean([st.emit(k, j, scenario.seed, node) for j in recips], axis=0)


def run_round(scenario: Scenario, states: dict[int, np.ndarray], k: int):
    """Advance every node from round k to k+1.

    All messages are built from the round-k states before any update is
    applied. Returns the next states and each benign node's kernel vertex count.
    """
    G = scenario.network
    nxt: dict[int, np.ndarray] = {}
    counts: dict[int, int] = {}
    for i in scenario.benign:
        msgs = []
        for j in sorted(neighbors(G, i)):
            if j in scenario.faulty:
                msgs.append(scenario.strategies[j].emit(k, i, scenario.seed, j))
            else:
                msgs.append(states[j])
        try:
            nxt[i], counts[i] = kernel_step(
                states[i], np.array(msgs), scenario.F, scenario.weight_policy,
                scenario.tol_geom, scenario.tol_vertex,
            )
        except DegenerateKernelError as exc:
            raise DegenerateKernelError(
                f"node {i}, round {k}: {exc}", {**exc.diagnostics, "node": i, "round": k}
            ) from exc
        except PreconditionError as exc:
            raise PreconditionError(f"node {i}, round {k}: {exc}") from exc
    for j in scenario.faulty:
        nxt[j] = canonical_emission(scenario, j, k + 1)
    return nxt, counts


@dataclass
class RoundRecord:
    k: int
    states: dict[int, np.ndarray]
    kernel_vertices: dict[int, int]
    diameter: float


@dataclass
class Trajectory:
    rounds: list[RoundRecord]
    terminal: str
    benign: list[int]
    faulty: list[int]

    @property
    def final(self) -> RoundRecord:
        return self.rounds[-1]

    def final_point(self) -> np.ndarray:
        return np.mean([self.final.states[i] for i in self.benign], axis=0)

    def state_history(self) -> list[dict[int, np.ndarray]]:
        return [r.states for r in self.rounds]


def _benign_diameter(scenario: Scenario, states) -> float:
    return diameter([states[i] for i in scenario.benign])


def simulate(scenario: Scenario, progress: bool = False) -> Trajectory:
    states = {i: scenario.initial_states[i].copy() for i in scenario.network.nodes}
    rounds = [RoundRecord(0, states, {}, _benign_diameter(scenario, states))]
    terminal = CONVERGED if rounds[0].diameter < scenario.epsilon else ROUND_LIMIT
    k = 0
    while terminal != CONVERGED and k < scenario.max_rounds:
        states, counts = run_round(scenario, states, k)
        k += 1
        rec = RoundRecord(k, states, counts, _benign_diameter(scenario, states))
        rounds.append(rec)
        if progress and k % 50 == 0:
            log.info("round %d: benign diameter %.3e", k, rec.diameter)
        if rec.diameter < scenario.epsilon:
            terminal = CONVERGED
    return Trajectory(rounds, terminal, scenario.benign, sorted(scenario.faulty))


def trajectory_csv(traj: Trajectory, dim: int) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k", "agent", "role"] + [f"x_{p}" for p in range(dim)])
    faulty = set(traj.faulty)
    for rec in traj.rounds:
        for node in sorted(rec.states):
            role = "faulty" if node in faulty else "benign"
            w.writerow([rec.k, node, role] + [repr(float(v)) for v in rec.states[node]])
    return buf.getvalue()


def read_trajectory_csv(path) -> tuple[list[dict[int, np.ndarray]], list[int], list[int]]:
    """Parse a trajectory CSV into per-round state maps plus benign/faulty ids."""
    rounds: dict[int, dict[int, np.ndarray]] = {}
    roles: dict[int, str] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:3] != ["k", "agent", "role"]:
            raise ValueError(f"{path}: unexpected header {header[:3]}")
        for lineno, row in enumerate(reader, start=2):
            try:
                k, node = int(row[0]), int(row[1])
                rounds.setdefault(k, {})[node] = np.array([float(v) for v in row[3:]])
                roles[node] = row[2]
            except (ValueError, IndexError) as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from exc
    ordered = [rounds[k] for k in sorted(rounds)]
    if sorted(rounds) != list(range(len(rounds))):
        raise ValueError(f"{path}: rounds are not contiguous from 0")
    benign = sorted(n for n, r in roles.items() if r == "benign")
    faulty = sorted(n for n, r in roles.items() if r == "faulty")
    return ordered, benign, faulty


def summary(traj: Trajectory, scenario: Scenario) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "terminal": traj.terminal,
        "rounds": traj.final.k,
        "final_diameter": traj.final.diameter,
        "final_point": [float(v) for v in traj.final_point()],
        "config": scenario.to_dict(),
    }


def plot_data(traj: Trajectory, scenario: Scenario) -> dict:
    """Per-agent polylines plus the outline of the benign initial hull."""
    from .geometry import boundary_order, convex_hull

    omega0 = convex_hull([scenario.initial_states[i] for i in scenario.benign])
    return {
        "format_version": FORMAT_VERSION,
        "agents": {
            str(node): {
                "role": "faulty" if node in scenario.faulty else "benign",
                "points": [[float(v) for v in r.states[node]] for r in traj.rounds],
            }
            for node in scenario.network.nodes
        },
        "omega0": [[float(v) for v in p] for p in boundary_order(omega0.vertices)],
        "config": scenario.to_dict(),
    }
