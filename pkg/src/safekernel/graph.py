"""Communication network, fault sets and robustness checks.

Robustness is decided exhaustively. Node subsets are bitmasks; for every
mask we count the members with at least ``r`` neighbours outside it, then a
subset-DP over complements finds a violating disjoint pair without walking
all 3^N assignments explicitly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

DEFAULT_CAP = 12

F_TOTAL = "total"
F_LOCAL = "local"


class GraphError(ValueError):
    pass


class UnsupportedSizeError(GraphError):
    """Exhaustive check requested on a graph above the size cap."""


@dataclass(frozen=True)
class Network:
    node_count: int
    edges: frozenset[tuple[int, int]] = field(default_factory=frozenset)

    def __post_init__(self):
        norm = set()
        for i, j in self.edges:
            i, j = int(i), int(j)
            if i == j:
                raise GraphError(f"self-loop on node {i}")
            for v in (i, j):
                if not 0 <= v < self.node_count:
                    raise GraphError(f"node {v} outside [0, {self.node_count})")
            norm.add((min(i, j), max(i, j)))
        object.__setattr__(self, "edges", frozenset(norm))

    @classmethod
    def from_edges(cls, n: int, edges: Iterable) -> "Network":
        return cls(n, frozenset(tuple(e) for e in edges))

    @classmethod
    def complete(cls, n: int) -> "Network":
        return cls(n, frozenset((i, j) for i in range(n) for j in range(i + 1, n)))

    @classmethod
    def path(cls, n: int) -> "Network":
        return cls(n, frozenset((i, i + 1) for i in range(n - 1)))

    @classmethod
    def star(cls, n: int) -> "Network":
        return cls(n, frozenset((0, i) for i in range(1, n)))

    @property
    def nodes(self) -> range:
        return range(self.node_count)

    def adjacency(self) -> list[set[int]]:
        adj: list[set[int]] = [set() for _ in self.nodes]
        for i, j in self.edges:
            adj[i].add(j)
            adj[j].add(i)
        return adj

    def degree(self, i: int) -> int:
        return len(neighbors(self, i))

    def is_connected(self) -> bool:
        if self.node_count == 0:
            return True
        adj = self.adjacency()
        seen, stack = {0}, [0]
        while stack:
            for j in adj[stack.pop()]:
                if j not in seen:
                    seen.add(j)
                    stack.append(j)
        return len(seen) == self.node_count

    def to_dict(self) -> dict:
        return {"nodes": self.node_count, "edges": sorted([list(e) for e in self.edges])}


def neighbors(G: Network, i: int) -> set[int]:
    if not 0 <= i < G.node_count:
        raise GraphError(f"unknown node {i}")
    return {b if a == i else a for a, b in G.edges if i in (a, b)}


def load_network(path) -> Network:
    data = json.loads(Path(path).read_text())
    try:
        return Network.from_edges(int(data["nodes"]), data.get("edges", []))
    except (KeyError, TypeError) as exc:
        raise GraphError(f"{path}: malformed graph file ({exc})") from exc


@dataclass(frozen=True)
class FaultSet:
    members: frozenset[int]
    bound: int
    model: str = F_TOTAL

    def __post_init__(self):
        object.__setattr__(self, "members", frozenset(int(m) for m in self.members))
        if self.model not in (F_TOTAL, F_LOCAL):
            raise GraphError(f"unknown attack model {self.model!r}")
        if self.bound < 0:
            raise GraphError("fault bound must be non-negative")


def validate_fault_set(G: Network, fs: FaultSet) -> bool:
    if not all(0 <= m < G.node_count for m in fs.members):
        return False
    if fs.model == F_TOTAL:
        return len(fs.members) <= fs.bound
    return all(
        len(fs.members & neighbors(G, i)) <= fs.bound
        for i in G.nodes
        if i not in fs.members
    )


def check_degree_assumption(G: Network, d: int, F: int) -> dict[int, bool]:
    need = (d + 1) * F + 1
    return {i: G.degree(i) >= need for i in G.nodes}


@dataclass
class RobustnessReport:
    r: int
    s: int | None
    verdict: bool
    witness: tuple[frozenset[int], frozenset[int]] | None = None
    strict: bool = False

    def to_dict(self) -> dict:
        return {
            "r": self.r,
            "s": self.s,
            "strict": self.strict,
            "verdict": self.verdict,
            "witness": None
            if self.witness is None
            else [sorted(self.witness[0]), sorted(self.witness[1])],
        }


def _masks(G: Network, cap: int):
    n = G.node_count
    if n < 2:
        raise GraphError("robustness needs at least two nodes")
    if n > cap:
        raise UnsupportedSizeError(
            f"exhaustive robustness check capped at {cap} nodes, graph has {n}"
        )
    adj = [0] * n
    for i, j in G.edges:
        adj[i] |= 1 << j
        adj[j] |= 1 << i
    return n, adj


def _reach_counts(n: int, adj: list[int], r: int) -> list[int]:
    """For every mask S: how many members have >= r neighbours outside S."""
    full = (1 << n) - 1
    out = [0] * (1 << n)
    for S in range(1, 1 << n):
        outside = full & ~S
        c = 0
        T = S
        while T:
            low = T & -T
            i = low.bit_length() - 1
            if bin(adj[i] & outside).count("1") >= r:
                c += 1
            T ^= low
        out[S] = c
    return out


def _to_set(mask: int) -> frozenset[int]:
    return frozenset(i for i in range(mask.bit_length()) if mask >> i & 1)


def _find_submask(M: int, pred) -> int | None:
    """Smallest nonempty submask of ``M`` satisfying ``pred``."""
    T = (0 - M) & M
    while T:
        if pred(T):
            return T
        T = (T - M) & M
    return None


def is_rs_robust(
    G: Network, r: int, s: int, strict: bool = False, cap: int = DEFAULT_CAP
) -> RobustnessReport:
    """Exhaustive (r, s)-robustness with a violating pair when it fails.

    A pair (V1, V2) violates the property when neither set has all of its
    members reaching ``r`` outside neighbours and, across both sets, fewer
    than ``s`` members do. ``strict`` is accepted for symmetry with
    :func:`is_r_robust` and has no effect here.
    """
    if s < 1:
        raise GraphError("s must be >= 1")
    n, adj = _masks(G, cap)
    full = (1 << n) - 1
    reach = _reach_counts(n, adj, r)
    size = [bin(S).count("1") for S in range(1 << n)]
    inf = float("inf")
    # best[M] = min reach over incomplete nonempty submasks of M
    best = [inf] * (1 << n)
    for S in range(1, 1 << n):
        if reach[S] < size[S]:
            best[S] = reach[S]
    for bit in range(n):
        b = 1 << bit
        for M in range(1 << n):
            if M & b and best[M ^ b] < best[M]:
                best[M] = best[M ^ b]
    for S in range(1, 1 << n):
        if reach[S] >= size[S]:
            continue
        comp = full & ~S
        if best[comp] + reach[S] < s:
            need = s - reach[S]
            T = _find_submask(comp, lambda t: reach[t] < size[t] and reach[t] < need)
            return RobustnessReport(r, s, False, (_to_set(S), _to_set(T)), strict)
    return RobustnessReport(r, s, True, None, strict)


def is_r_robust(
    G: Network, r: int, strict: bool = False, cap: int = DEFAULT_CAP
) -> RobustnessReport:
    """Exhaustive r-robustness.

    Default reading: for every disjoint nonempty pair, at least one member of
    V1 or V2 has ``r`` neighbours outside its own set. ``strict=True`` asks
    for more than one such member in V1 or more than one in V2.
    """
    n, adj = _masks(G, cap)
    full = (1 << n) - 1
    reach = _reach_counts(n, adj, r)
    need = 2 if strict else 1
    bad = [S != 0 and reach[S] < need for S in range(1 << n)]
    has_bad = bad[:]
    for bit in range(n):
        b = 1 << bit
        for M in range(1 << n):
            if M & b and has_bad[M ^ b]:
                has_bad[M] = True
    for S in range(1, 1 << n):
        if bad[S] and has_bad[full & ~S]:
            T = _find_submask(full & ~S, lambda t: bad[t])
            return RobustnessReport(r, None, False, (_to_set(S), _to_set(T)), strict)
    return RobustnessReport(r, None, True, None, strict)


def outside_count(G: Network, i: int, members: frozenset[int]) -> int:
    return len(neighbors(G, i) - set(members))


def witness_violates(G: Network, report: RobustnessReport) -> bool:
    """Re-check a negative verdict's witness straight from the definitions."""
    if report.witness is None:
        return False
    V1, V2 = report.witness
    if not V1 or not V2 or V1 & V2:
        return False
    r = report.r
    hit1 = [i for i in V1 if outside_count(G, i, V1) >= r]
    hit2 = [i for i in V2 if outside_count(G, i, V2) >= r]
    if report.s is None:
        need = 2 if report.strict else 1
        return len(hit1) < need and len(hit2) < need
    return len(hit1) < len(V1) and len(hit2) < len(V2) and len(hit1) + len(hit2) < report.s
