import io

import numpy as np
import pytest

from imitation_dynamics.dynamics import RunConfig, drift
from imitation_dynamics.equilibrium import (
    VERDICT_INDETERMINATE,
    VERDICT_NEUTRAL,
    EquilibriumKind,
    classify,
    imitation_graph,
    jacobian_type1,
    perturb_and_run,
    perturbation_study,
)
from imitation_dynamics.game import PayoffMatrix, StrategyState, pairwise_payoff
from imitation_dynamics.graph import Graph, complete_graph, random_graph

PD = PayoffMatrix(3, -7, 5, 2)

# Two disjoint triangles.
TWO_CLIQUES = Graph.from_edges(6, [(0, 1), (0, 2), (1, 2), (3, 4), (3, 5), (4, 5)])


def test_uniform_state_is_type1():
    g = random_graph(10, 0.4, seed=17)
    cls = classify(g, PD, np.full(10, 0.795))
    assert cls.kind is EquilibriumKind.TYPE1


def test_two_cliques_at_distinct_values_is_type3():
    x = np.array([0.3, 0.3, 0.3, 0.7, 0.7, 0.7])
    assert np.all(drift(TWO_CLIQUES, PD, x) == 0.0)
    cls = classify(TWO_CLIQUES, PD, x)
    assert cls.kind is EquilibriumKind.TYPE3


def test_regular_graph_uniform_state_is_degenerate_type1():
    # Equal degrees force equal payoffs, so the type 2 condition holds too.
    cycle = Graph.from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)])
    cls = classify(cycle, PD, np.full(5, 0.6))
    assert cls.kind is EquilibriumKind.TYPE1
    assert cls.degenerate


def test_irregular_graph_uniform_state_not_degenerate():
    star = Graph.from_edges(4, [(0, 1), (0, 2), (0, 3)])
    cls = classify(star, PD, np.full(4, 0.795))
    assert cls.kind is EquilibriumKind.TYPE1
    assert not cls.degenerate


def test_active_drift_is_not_equilibrium():
    cls = classify(complete_graph(2), PD, np.array([0.8, 0.2]))
    assert cls.kind is EquilibriumKind.NOT_EQUILIBRIUM
    assert cls.witness["max_drift"] == pytest.approx(0.6)


def test_isolated_nodes_with_distinct_strategies_are_type2():
    g = Graph(3, ((), (), ()))
    cls = classify(g, PD, np.array([0.2, 0.9, 0.4]))
    assert cls.kind is EquilibriumKind.TYPE2
    i, j = cls.witness["unequal_pair"]
    assert i != j


def test_paired_edges_with_matched_payoffs_are_type2():
    # Two disjoint edges, each at a uniform value; v1 != v2 chosen so the
    # per-edge payoffs coincide: p(v) = 7 v^2 - 6 v + 2 is symmetric about 3/7.
    v1, v2 = 3 / 7 - 0.2, 3 / 7 + 0.2
    g = Graph.from_edges(4, [(0, 1), (2, 3)])
    x = np.array([v1, v1, v2, v2])
    assert pairwise_payoff(PD, v1, v1) == pytest.approx(pairwise_payoff(PD, v2, v2), abs=1e-12)
    cls = classify(g, PD, x, tol_p=1e-9)
    assert cls.kind is EquilibriumKind.TYPE2


def test_classify_invariant_under_relabeling():
    rng = np.random.default_rng(21)
    g = random_graph(9, 0.45, seed=20)
    for x in (np.full(9, 0.5), rng.random(9), np.repeat([0.3, 0.7], [4, 5])):
        perm = rng.permutation(9)
        adj = [[] for _ in range(9)]
        for i, j in g.edges():
            adj[perm[i]].append(perm[j])
            adj[perm[j]].append(perm[i])
        g_perm = Graph(9, tuple(tuple(sorted(a)) for a in adj))
        x_perm = np.empty(9)
        x_perm[perm] = x
        assert classify(g, PD, x).kind is classify(g_perm, PD, x_perm).kind


def test_imitation_graph_k2():
    ig = imitation_graph(complete_graph(2), PD, np.array([0.8, 0.2]))
    assert ig.edges == ((0, 1, 1.0),)
    assert ig.zero_out_nodes() == (1,)


def test_imitation_graph_empty_when_payoffs_equal():
    cycle = Graph.from_edges(4, [(0, 1), (1, 2), (2, 3), (3, 0)])
    ig = imitation_graph(cycle, PD, np.full(4, 0.5))
    assert ig.edges == ()
    assert ig.zero_out_nodes() == (0, 1, 2, 3)


def test_imitation_graph_points_up_the_degree_gradient():
    # At a uniform state with positive per-edge payoff, payoff is
    # proportional to degree, so edges point from low to high degree.
    g = Graph.from_edges(5, [(0, 1), (0, 2), (0, 3), (3, 4)])
    assert pairwise_payoff(PD, 0.795, 0.795) > 0
    ig = imitation_graph(g, PD, np.full(5, 0.795))
    deg = g.degrees
    assert ig.edges
    for i, j, w in ig.edges:
        assert deg[j] > deg[i]
        assert w > 0
    sums = ig.out_weight_sums()
    for i in range(5):
        assert sums[i] == pytest.approx(1.0, abs=1e-12) or sums[i] == 0.0


def test_jacobian_star_structure():
    star = Graph.from_edges(4, [(0, 1), (0, 2), (0, 3)])
    report = jacobian_type1(star, PD, np.full(4, 0.795))
    J = report.jacobian
    assert report.zero_rows == (0,)  # center has maximal payoff
    assert np.all(J[0] == 0.0)
    for leaf in (1, 2, 3):
        assert J[leaf, leaf] == -1.0
        assert J[leaf, 0] == 1.0
        assert report.gershgorin_center[leaf] == -1
    assert report.verdict == VERDICT_NEUTRAL


def test_jacobian_equals_negative_imitation_laplacian():
    rng = np.random.default_rng(30)
    for _ in range(20):
        n = int(rng.integers(2, 15))
        g = random_graph(n, float(rng.uniform(0.2, 0.9)), seed=int(rng.integers(0, 2**31)))
        x = np.full(n, float(rng.uniform(0.05, 0.95)))
        report = jacobian_type1(g, PD, x)
        ig = imitation_graph(g, PD, x)
        assert report.jacobian == pytest.approx(ig.negative_laplacian(), abs=1e-12)
        # constant vector in the null space
        assert report.jacobian @ np.ones(n) == pytest.approx(np.zeros(n), abs=1e-12)
        # zero_rows is exactly the set of all-zero Jacobian rows
        all_zero = {i for i in range(n) if not report.jacobian[i].any()}
        assert set(report.zero_rows) == all_zero == set(ig.zero_out_nodes())


def test_degenerate_type1_gives_zero_jacobian():
    cycle = Graph.from_edges(4, [(0, 1), (1, 2), (2, 3), (3, 0)])
    report = jacobian_type1(cycle, PD, np.full(4, 0.5))
    assert np.all(report.jacobian == 0.0)
    assert report.verdict == VERDICT_INDETERMINATE
    assert report.zero_rows == (0, 1, 2, 3)


def test_jacobian_requires_type1():
    with pytest.raises(ValueError):
        jacobian_type1(complete_graph(2), PD, np.array([0.8, 0.2]))


def test_stability_report_serialization_and_csv():
    star = Graph.from_edges(4, [(0, 1), (0, 2), (0, 3)])
    report = jacobian_type1(star, PD, np.full(4, 0.795))
    d = report.to_dict()
    assert d["verdict"] == VERDICT_NEUTRAL
    assert d["zero_rows"] == [0]
    assert d["gershgorin"][1] == {"row": 1, "center": -1, "radius": pytest.approx(1.0)}
    buf = io.StringIO()
    imitation_graph(star, PD, np.full(4, 0.795)).to_csv(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "from,to,kappa"
    assert len(lines) == 4  # three leaves imitate the center


def test_perturb_and_run_zero_delta_stays_put():
    g = random_graph(10, 0.4, seed=17)
    s_star = StrategyState(np.full(10, 0.795))
    traj, cls, dist = perturb_and_run(g, PD, s_star, np.zeros(10), RunConfig())
    assert len(traj) == 1
    assert cls.kind is EquilibriumKind.TYPE1
    assert dist == 0.0


def test_perturb_and_run_rejects_out_of_bounds():
    g = complete_graph(3)
    s_star = StrategyState(np.full(3, 0.99))
    with pytest.raises(ValueError):
        perturb_and_run(g, PD, s_star, np.array([0.05, 0.0, 0.0]), RunConfig())


def test_perturbation_study_demo_graph():
    # Seeded demo instance: displacing followers relaxes back to the uniform
    # point; displacing a locally best node moves the system elsewhere.
    g = random_graph(10, 0.4, seed=17)
    study = perturbation_study(g, PD, 0.795, RunConfig())
    assert study.anchors and study.followers
    traj_f, cls_f, dist_f = study.follower_result
    assert traj_f.converged
    assert cls_f.kind is EquilibriumKind.TYPE1
    assert dist_f <= 1e-3
    traj_a, cls_a, dist_a = study.anchor_result
    assert traj_a.converged
    assert cls_a.kind is EquilibriumKind.TYPE3
    assert dist_a > 1e-3
