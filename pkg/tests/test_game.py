import numpy as np
import pytest

from imitation_dynamics.game import (
    PayoffMatrix,
    StrategyState,
    kappa_matrix,
    kappa_row,
    pairwise_payoff,
    payoffs,
    validate_pd,
)
from imitation_dynamics.graph import Graph, complete_graph, random_graph

PD = PayoffMatrix(3, -7, 5, 2)


def test_validate_pd():
    assert validate_pd(PD)
    assert validate_pd([[0.1985, -0.6989], [0.4927, 0.0001]])
    assert not validate_pd([[1, 0], [0, 1]])
    assert not validate_pd([[3, -7], [2.5, 2]])  # c <= a


def test_strict_constructor_rejects_non_pd():
    with pytest.raises(ValueError):
        PayoffMatrix(1, 0, 0, 1)
    m = PayoffMatrix(1, 0, 0, 1, strict=False)
    assert not validate_pd(m)


def test_pairwise_payoff_pure_strategies():
    assert pairwise_payoff(PD, 1, 1) == 3  # cooperate vs cooperate
    assert pairwise_payoff(PD, 0, 1) == 5  # defect vs cooperate
    assert pairwise_payoff(PD, 1, 0) == -7
    assert pairwise_payoff(PD, 0, 0) == 2


def test_pairwise_payoff_mixed():
    # Oracle: direct 2x2 matrix-vector evaluation of the bilinear form.
    xi, xj = 0.8, 0.2
    oracle = float(np.array([xi, 1 - xi]) @ PD.values @ np.array([xj, 1 - xj]))
    got = pairwise_payoff(PD, xi, xj)
    assert got == pytest.approx(oracle, abs=1e-14)
    assert got == pytest.approx(-3.48, abs=1e-12)


def test_pairwise_payoff_domain():
    with pytest.raises(ValueError):
        pairwise_payoff(PD, -0.1, 0.5)
    with pytest.raises(ValueError):
        pairwise_payoff(PD, 0.5, 1.1)


def test_payoffs_k2():
    g = complete_graph(2)
    P = payoffs(g, PD, np.array([0.8, 0.2]))
    assert P == pytest.approx([-3.48, 3.72], abs=1e-12)


def test_payoffs_uniform_state_scales_with_degree():
    g = random_graph(12, 0.5, seed=3)
    x = np.full(12, 0.6)
    P = payoffs(g, PD, x)
    per_edge = pairwise_payoff(PD, 0.6, 0.6)
    assert P == pytest.approx(g.degrees * per_edge, abs=1e-12)


def test_payoffs_empty_graph():
    g = Graph(4, ((), (), (), ()))
    assert np.all(payoffs(g, PD, np.full(4, 0.5)) == 0.0)


def test_payoffs_matches_pairwise_sum():
    rng = np.random.default_rng(11)
    g = random_graph(9, 0.6, seed=9)
    x = rng.random(9)
    P = payoffs(g, PD, x)
    for i in range(9):
        oracle = sum(pairwise_payoff(PD, x[i], x[j]) for j in g.neighbors[i])
        assert P[i] == pytest.approx(oracle, abs=1e-12)


def test_payoffs_length_mismatch():
    with pytest.raises(ValueError):
        payoffs(complete_graph(3), PD, np.array([0.5, 0.5]))


def test_kappa_row_k2():
    g = complete_graph(2)
    P = np.array([-3.48, 3.72])
    assert kappa_row(g, P, 0) == pytest.approx({1: 1.0})
    assert kappa_row(g, P, 1) == {}


def test_kappa_all_equal_payoffs():
    g = complete_graph(4)
    P = np.full(4, 2.5)
    for i in range(4):
        assert kappa_row(g, P, i) == {}


def test_kappa_star_normalization():
    # Star with center 0 and leaves 1..3; payoff gaps 5, 3, 1.
    g = Graph.from_edges(4, [(0, 1), (0, 2), (0, 3)])
    P = np.array([0.0, 5.0, 3.0, 1.0])
    row = kappa_row(g, P, 0)
    assert row == pytest.approx({1: 5 / 9, 2: 3 / 9, 3: 1 / 9})
    for leaf in (1, 2, 3):
        assert kappa_row(g, P, leaf) == {}


def test_kappa_normalization_property():
    rng = np.random.default_rng(42)
    for _ in range(200):
        n = int(rng.integers(1, 20))
        g = random_graph(n, float(rng.random()), seed=int(rng.integers(0, 2**31)))
        P = rng.normal(size=n) * 10
        K = kappa_matrix(g, P)
        assert np.all(K >= 0)
        sums = K.sum(axis=1)
        for i in range(n):
            assert sums[i] == pytest.approx(1.0, abs=1e-12) or sums[i] == 0.0
            # weights only toward strictly better neighbors
            for j in np.flatnonzero(K[i]):
                assert j in g.neighbors[i] and P[j] > P[i]


def test_pd_monotonicity_in_own_strategy():
    # For strict PD matrices the pairwise payoff strictly decreases in the
    # own cooperate probability, for any fixed opponent. Finite differences.
    for m in (PD, PayoffMatrix(0.1985, -0.6989, 0.4927, 0.0001)):
        for y in np.linspace(0, 1, 11):
            vals = [pairwise_payoff(m, x, y) for x in np.linspace(0, 1, 21)]
            assert all(b < a for a, b in zip(vals, vals[1:]))


def test_pairwise_antisymmetry_identity():
    rng = np.random.default_rng(5)
    for _ in range(100):
        x, y = rng.random(2)
        lhs = pairwise_payoff(PD, x, y) - pairwise_payoff(PD, y, x)
        assert lhs == pytest.approx((PD.b - PD.c) * (x - y), abs=1e-12)


def test_strategy_state_validation():
    s = StrategyState(np.array([0.0, 0.5, 1.0]), t=2.0)
    assert s.n == 3 and s.t == 2.0
    with pytest.raises(ValueError):
        StrategyState(np.array([0.5, 1.2]))
    with pytest.raises(ValueError):
        StrategyState(np.array([[0.5]]))


def test_payoff_matrix_serialization():
    m = PayoffMatrix.from_dict(PD.to_dict())
    assert m.as_tuple() == PD.as_tuple()
