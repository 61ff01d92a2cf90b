"""Random scenario generator shared by the engine and acceptance tests."""

import numpy as np

from safekernel.adversary import AdversaryStrategy
from safekernel.engine import Scenario
from safekernel.graph import (
    F_LOCAL,
    F_TOTAL,
    FaultSet,
    Network,
    is_r_robust,
    is_rs_robust,
    validate_fault_set,
)

MAGNITUDE = 1e6


def agreement_condition(G, d, F, model):
    if model == F_LOCAL:
        return is_r_robust(G, (d + 1) * F + 1).verdict
    return is_rs_robust(G, d * F + 1, F + 1).verdict


def _strategy(rng, d, other):
    if rng.random() < 0.5:
        spec = {"kind": "random-box", "low": [-MAGNITUDE] * d, "high": [MAGNITUDE] * d}
    else:
        spec = {
            "kind": "per-recipient-scripted",
            "default": [f"{MAGNITUDE:g}*sin(k+j+{p})" for p in range(d)],
            "scripts": {str(other): [f"-{MAGNITUDE:g}*cos(k*j+{p})" for p in range(d)]},
        }
    return AdversaryStrategy.from_spec(spec, d)


def random_scenario(seed, robust=False, max_nodes=9, max_rounds=300):
    """A connected scenario with N <= ``max_nodes``, d in {1,2,3}, F in {0,1}.

    Edges are dropped at random while every node keeps degree >= (d+1)F+1.
    With ``robust=True`` a drop is also undone if it breaks the agreement
    condition for the chosen attack model. Faulty nodes send per-recipient
    values of magnitude up to 1e6.
    """
    rng = np.random.default_rng(seed)
    d = int(rng.integers(1, 4))
    F = int(rng.integers(0, 2))
    model = F_TOTAL if rng.random() < 0.5 else F_LOCAL
    need = (d + 1) * F + 1
    lo = max(need + 1, 3)
    N = int(rng.integers(lo, max_nodes + 1))
    if robust:
        while N < max_nodes and not agreement_condition(Network.complete(N), d, F, model):
            N += 1
        while not agreement_condition(Network.complete(N), d, F, model):
            d -= 1
            need = (d + 1) * F + 1
    edges = {(i, j) for i in range(N) for j in range(i + 1, N)}
    for e in sorted(edges):
        if rng.random() >= 0.3:
            continue
        G = Network(N, frozenset(edges - {e}))
        if not G.is_connected() or any(G.degree(i) < need for i in G.nodes):
            continue
        if robust and not agreement_condition(G, d, F, model):
            continue
        edges.discard(e)
    G = Network(N, frozenset(edges))

    chosen = []
    if F:
        for c in rng.permutation(N):
            trial = FaultSet(frozenset(chosen + [int(c)]), F, model)
            if len(chosen) < 2 and validate_fault_set(G, trial):
                chosen.append(int(c))
    strategies = {c: _strategy(rng, d, chosen[0]) for c in chosen}
    initial = {i: rng.uniform(-5, 5, size=d) for i in range(N)}
    return Scenario(
        network=G,
        dim=d,
        fault_set=FaultSet(frozenset(chosen), F, model),
        strategies=strategies,
        initial_states=initial,
        epsilon=1e-6,
        max_rounds=max_rounds,
        seed=seed,
    )
