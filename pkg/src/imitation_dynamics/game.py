"""Payoff kernel: 2x2 payoff matrices, per-node payoffs, imitation weights."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .graph import Graph


@dataclass(frozen=True)
class PayoffMatrix:
    """Payoff matrix [[a, b], [c, d]]: row = own pure strategy, column = opponent's.

    Strategy 1 is cooperate, strategy 2 is defect. With ``strict=True`` the
    prisoner's-dilemma ordering c > a > d > 0 > b is enforced at construction;
    ``strict=False`` admits arbitrary real entries (fitting mode).
    """

    a: float
    b: float
    c: float
    d: float
    strict: bool = True

    def __post_init__(self):
        for name in ("a", "b", "c", "d"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if self.strict and not validate_pd(self):
            raise ValueError(
                f"payoffs violate the strict PD ordering c > a > d > 0 > b: "
                f"a={self.a}, b={self.b}, c={self.c}, d={self.d}"
            )

    @property
    def values(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]])

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.a, self.b, self.c, self.d)

    def to_dict(self) -> dict[str, float]:
        return {"a": self.a, "b": self.b, "c": self.c, "d": self.d}

    @classmethod
    def from_dict(cls, record: Mapping[str, float], strict: bool = True) -> "PayoffMatrix":
        return cls(record["a"], record["b"], record["c"], record["d"], strict=strict)


@dataclass(frozen=True)
class StrategyState:
    """Per-node cooperation probabilities x in [0,1]^n at time t."""

    x: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64)
        if x.ndim != 1:
            raise ValueError("strategy state must be a 1-d vector")
        if x.size and (x.min() < 0.0 or x.max() > 1.0):
            raise ValueError("strategy components must lie in [0, 1]")
        x = x.copy()
        x.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "t", float(self.t))

    @property
    def n(self) -> int:
        return self.x.size


def validate_pd(m) -> bool:
    """True iff the strict prisoner's-dilemma ordering c > a > d > 0 > b holds.

    Accepts a PayoffMatrix or any 2x2 array-like [[a, b], [c, d]].
    """
    if isinstance(m, PayoffMatrix):
        a, b, c, d = m.as_tuple()
    else:
        (a, b), (c, d) = ((float(v) for v in row) for row in m)
    return c > a > d > 0.0 > b


def state_vector(s, n: int | None = None) -> np.ndarray:
    """Coerce a StrategyState or array-like into a validated float vector."""
    x = s.x if isinstance(s, StrategyState) else np.asarray(s, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("strategy state must be a 1-d vector")
    if n is not None and x.size != n:
        raise ValueError(f"state length {x.size} does not match node count {n}")
    if x.size and (x.min() < 0.0 or x.max() > 1.0):
        raise ValueError("strategy components must lie in [0, 1]")
    return x


def pairwise_payoff(m: PayoffMatrix, xi: float, xj: float) -> float:
    """Bilinear payoff [xi, 1-xi] . A . [xj, 1-xj]^T of one pairwise interaction."""
    if not (0.0 <= xi <= 1.0 and 0.0 <= xj <= 1.0):
        raise ValueError("mixed strategies must lie in [0, 1]")
    return (
        m.a * xi * xj
        + m.b * xi * (1.0 - xj)
        + m.c * (1.0 - xi) * xj
        + m.d * (1.0 - xi) * (1.0 - xj)
    )


def payoffs(g: Graph, m: PayoffMatrix, s) -> np.ndarray:
    """Total payoff per node: sum of pairwise payoffs against each neighbor.

    Isolated nodes get payoff 0.
    """
    x = state_vector(s, g.n)
    P = np.zeros(g.n)
    for i, nbrs in enumerate(g.neighbors):
        if not nbrs:
            continue
        xi = x[i]
        xj = x[list(nbrs)]
        P[i] = np.sum(
            xi * (m.a * xj + m.b * (1.0 - xj))
            + (1.0 - xi) * (m.c * xj + m.d * (1.0 - xj))
        )
    return P


def kappa_row(g: Graph, P: np.ndarray, i: int) -> dict[int, float]:
    """Imitation weights of node i toward strictly better-performing neighbors.

    kappa_ij = (P_j - P_i)+ / sum_k (P_k - P_i)+ over neighbors k. Returns a
    sparse mapping holding only strictly positive weights; when no neighbor is
    strictly better the row is all zero and the mapping is empty (the Heaviside
    factor is 0 at 0, so the 0/0 case collapses to this convention).
    """
    P = np.asarray(P, dtype=np.float64)
    if P.size != g.n:
        raise ValueError(f"payoff vector length {P.size} does not match node count {g.n}")
    gains = {j: P[j] - P[i] for j in g.neighbors[i] if P[j] > P[i]}
    den = sum(gains.values())
    if den <= 0.0:
        return {}
    return {j: gain / den for j, gain in gains.items()}


def kappa_matrix(g: Graph, P: np.ndarray) -> np.ndarray:
    """Dense n x n matrix of imitation weights; row i is kappa_row(g, P, i)."""
    K = np.zeros((g.n, g.n))
    for i in range(g.n):
        for j, w in kappa_row(g, P, i).items():
            K[i, j] = w
    return K
