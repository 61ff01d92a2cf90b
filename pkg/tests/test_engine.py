import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from safekernel import bundled_scenario
from safekernel.adversary import AdversaryStrategy, ConfigurationError, Expression, adversary_emit
from safekernel.engine import (
    CONVERGED,
    ROUND_LIMIT,
    PreconditionError,
    Scenario,
    ScenarioError,
    WeightPolicy,
    benign_update,
    diameter,
    load_scenario,
    read_trajectory_csv,
    run_round,
    simulate,
    summary,
    trajectory_csv,
)
from safekernel.graph import F_LOCAL, FaultSet, Network
from safekernel.oracle import audit_trajectory, hull_membership_many

from .gen import random_scenario

GOLDEN = str(bundled_scenario("k5_golden"))


def brute_diameter(points):
    pts = [np.asarray(p, dtype=float) for p in points]
    return max(math.dist(a, b) for a in pts for b in pts)


def plain_scenario(n=4, dim=2, initial=None, **kw):
    rng = np.random.default_rng(0)
    initial = initial or {i: rng.uniform(-1, 1, dim) for i in range(n)}
    return Scenario(
        network=Network.complete(n),
        dim=dim,
        fault_set=FaultSet(frozenset(), 0),
        strategies={},
        initial_states={i: np.asarray(v, dtype=float) for i, v in initial.items()},
        **kw,
    )


# benign_update


def test_update_keeps_common_value():
    c = np.array([0.3, -1.2])
    out = benign_update(c, [c] * 4, F=1)
    np.testing.assert_array_equal(out, c)


def test_update_without_faults_averages_hull_vertices():
    out = benign_update([0, 0], [(0, 0), (2, 0), (0, 2)], F=0)
    np.testing.assert_allclose(out, [0.5, 0.5])


def test_scalar_update_uses_trimmed_interval():
    # kernel of {0..4} with one removal is [1, 3]
    out = benign_update([2.0], [[0], [1], [2], [3], [4]], F=1)
    np.testing.assert_allclose(out, [2.0])
    out = benign_update([0.0], [[0], [1], [2], [3], [4]], F=1)
    np.testing.assert_allclose(out, [4.0 / 3.0])


def test_update_needs_enough_neighbours():
    with pytest.raises(PreconditionError):
        benign_update([0, 0], [(0, 0), (1, 0), (0, 1)], F=1)


def test_update_ignores_single_outlier():
    vals = [(0, 0), (2, 0), (0, 2), (2, 2), (1e6, -1e6)]
    out = benign_update([1, 1], vals, F=1)
    assert np.all(np.abs(out) <= 2 + 1e-9)


# weight policies


def test_uniform_weights():
    np.testing.assert_allclose(WeightPolicy().weights(3), [0.25] * 4)


def test_custom_self_weight():
    w = WeightPolicy("custom", self_weight=0.5).weights(2)
    np.testing.assert_allclose(w, [0.5, 0.25, 0.25])


def test_alpha_floor_enforced():
    with pytest.raises(ConfigurationError):
        WeightPolicy(alpha=0.3).weights(4)
    WeightPolicy(alpha=0.2).weights(4)


def test_bad_policy_rejected():
    with pytest.raises(ConfigurationError):
        WeightPolicy("geometric")
    with pytest.raises(ConfigurationError):
        WeightPolicy("custom", self_weight=1.0)


# adversaries


def test_golden_script_at_round_zero():
    st_ = AdversaryStrategy.from_spec(
        {"kind": "scripted", "expr": ["1.5*sin(k/5)", "k/25+1"]}, 2
    )
    np.testing.assert_allclose(adversary_emit(st_, 0, 1), [0.0, 1.0])
    np.testing.assert_allclose(adversary_emit(st_, 10, 3), [1.5 * math.sin(2), 1.4])


def test_constant_adversary():
    st_ = AdversaryStrategy.from_spec({"kind": "constant", "value": [7, -7]}, 2)
    assert adversary_emit(st_, 3, 0).tolist() == [7, -7]


def test_per_recipient_values_differ():
    spec = {"kind": "per-recipient-scripted", "default": ["k+j"], "scripts": {"2": ["-100"]}}
    st_ = AdversaryStrategy.from_spec(spec, 1)
    assert st_.per_recipient
    assert adversary_emit(st_, 1, 1)[0] == 2
    assert adversary_emit(st_, 1, 2)[0] == -100


def test_random_box_is_seeded():
    spec = {"kind": "random-box", "low": [-1, -1], "high": [1, 1]}
    st_ = AdversaryStrategy.from_spec(spec, 2)
    a = adversary_emit(st_, 4, 1, seed=9, node=0)
    assert np.array_equal(a, adversary_emit(st_, 4, 1, seed=9, node=0))
    assert not np.array_equal(a, adversary_emit(st_, 4, 2, seed=9, node=0))
    assert np.all(np.abs(a) <= 1)


@pytest.mark.parametrize(
    "spec",
    [
        {"kind": "scripted", "expr": ["__import__('os')"]},
        {"kind": "scripted", "expr": ["exp(k)"]},
        {"kind": "scripted", "expr": ["k"]},
        {"kind": "teleport"},
        {"kind": "constant", "value": [1, 2, 3]},
    ],
)
def test_bad_adversary_specs(spec):
    with pytest.raises(ConfigurationError):
        AdversaryStrategy.from_spec(spec, 2)


def test_expression_arithmetic():
    assert Expression("-2*k + 3/j")(4, 3) == pytest.approx(-7.0)


# run_round


def test_identical_states_are_a_fixed_point():
    sc = plain_scenario(initial={i: (1.0, 2.0) for i in range(4)})
    states = {i: np.array([1.0, 2.0]) for i in range(4)}
    nxt, _ = run_round(sc, states, 0)
    for v in nxt.values():
        np.testing.assert_array_equal(v, [1.0, 2.0])


def test_golden_first_round_stays_in_initial_hull():
    sc = load_scenario(GOLDEN)
    nxt, counts = run_round(sc, dict(sc.initial_states), 0)
    omega0 = [sc.initial_states[i] for i in sc.benign]
    assert hull_membership_many(omega0, [nxt[i] for i in sc.benign], 1e-9).all()
    assert set(counts) == set(sc.benign)


def test_too_many_faulty_neighbours_rejected():
    spec = {"kind": "constant", "value": [9.0]}
    G = Network.complete(6)
    faulty = {j: AdversaryStrategy.from_spec(spec, 1) for j in (1, 2, 3, 4)}
    with pytest.raises(ScenarioError, match="F-local"):
        Scenario(
            network=G,
            dim=1,
            fault_set=FaultSet(frozenset(faulty), 1, F_LOCAL),
            strategies=faulty,
            initial_states={i: np.zeros(1) for i in range(6)},
        )


def test_degree_assumption_enforced():
    data = {"nodes": 3, "edges": [[0, 1], [1, 2]], "dim": 2, "F": 1,
            "initial": {str(i): [0, 0] for i in range(3)}}
    with pytest.raises(ScenarioError):
        Scenario.from_dict(data)


# simulate


def test_golden_run_converges_inside_initial_hull():
    sc = load_scenario(GOLDEN)
    traj = simulate(sc)
    assert traj.terminal == CONVERGED
    assert traj.final.k <= 500
    rep = audit_trajectory(traj, sc)
    assert rep.passed and rep.agreement == "pass"


def test_fault_free_complete_graph_converges():
    sc = plain_scenario(n=5, dim=3)
    traj = simulate(sc)
    assert traj.terminal == CONVERGED
    assert audit_trajectory(traj, sc).passed


def test_huge_adversary_cannot_move_agreed_nodes():
    c = (0.25, -0.5)
    spec = {"kind": "per-recipient-scripted", "default": ["1e6*sin(k+j)", "-1e6"]}
    strat = AdversaryStrategy.from_spec(spec, 2)
    sc = Scenario(
        network=Network.complete(5),
        dim=2,
        fault_set=FaultSet(frozenset({0}), 1),
        strategies={0: strat},
        initial_states={i: np.array(c) for i in range(5)},
    )
    # simulate() would stop at round 0 since the diameter is already zero
    states = dict(sc.initial_states)
    for k in range(5):
        states, _ = run_round(sc, states, k)
        for i in sc.benign:
            np.testing.assert_array_equal(states[i], c)


def test_round_limit_reported():
    sc = load_scenario(GOLDEN, max_rounds=1)
    traj = simulate(sc)
    assert traj.terminal == ROUND_LIMIT
    assert len(traj.rounds) == 2


def test_faulty_initial_filled_from_strategy():
    data = json.loads(bundled_scenario("k5_golden").read_text())
    del data["initial"]["0"]
    sc = Scenario.from_dict(data)
    np.testing.assert_allclose(sc.initial_states[0], [0.0, 1.0])


def test_scenario_dict_round_trip():
    sc = load_scenario(GOLDEN)
    again = Scenario.from_dict(json.loads(json.dumps(sc.to_dict())))
    assert again.to_dict() == sc.to_dict()


def test_malformed_json_reports_position(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{"nodes": 5,\n "dim": }')
    with pytest.raises(ScenarioError, match=r"bad.json:2:"):
        load_scenario(p)


def test_missing_field_named(tmp_path):
    with pytest.raises(ScenarioError, match="dim"):
        Scenario.from_dict({"nodes": 3})


# diameter


@pytest.mark.parametrize(
    "points,expected",
    [([(0, 0), (3, 4)], 5.0), ([(2, 2)], 0.0), ([(1, 2), (2, 0), (1, 3), (2, 4)], None)],
)
def test_diameter_examples(points, expected):
    want = brute_diameter(points) if expected is None else expected
    assert diameter(points) == pytest.approx(want)


def test_diameter_of_golden_initial_set():
    assert diameter([(1, 2), (2, 0), (1, 3), (2, 4)]) == 4.0


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 10), st.integers(1, 4))
def test_diameter_matches_brute_force(seed, m, d):
    pts = np.random.default_rng(seed).normal(size=(m, d))
    assert diameter(pts) == pytest.approx(brute_diameter(pts), rel=1e-12, abs=1e-15)


# export and determinism


def test_trajectory_is_byte_identical_across_runs():
    a = simulate(load_scenario(GOLDEN))
    b = simulate(load_scenario(GOLDEN))
    sc = load_scenario(GOLDEN)
    assert trajectory_csv(a, 2) == trajectory_csv(b, 2)
    assert json.dumps(summary(a, sc)) == json.dumps(summary(b, sc))


def test_csv_round_trip_is_exact(tmp_path):
    sc = load_scenario(GOLDEN)
    traj = simulate(sc)
    p = tmp_path / "t.csv"
    p.write_text(trajectory_csv(traj, 2))
    rounds, benign, faulty = read_trajectory_csv(p)
    assert benign == sc.benign and faulty == [0]
    for rec, got in zip(traj.rounds, rounds):
        for node, v in rec.states.items():
            np.testing.assert_array_equal(got[node], v)


def test_random_scenarios_keep_validity():
    for seed in range(3):
        sc = random_scenario(seed, max_rounds=60)
        traj = simulate(sc)
        rep = audit_trajectory(traj, sc)
        assert not rep.validity_failures and not rep.nesting_failures
