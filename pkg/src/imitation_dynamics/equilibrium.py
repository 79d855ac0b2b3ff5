"""Equilibrium classification, imitation graph, Jacobian structure, perturbations.

Fixed points come in three kinds: all strategies equal (type 1), all payoffs
equal while some strategies differ (type 2), and anything else (type 3). At a
type 1 point the dynamics' Jacobian is the negative Laplacian of the weighted
directed imitation graph, so every Gershgorin disk is centered at -1 with
radius at most 1 or is the single point 0: such points are at worst neutrally
stable, and never asymptotically stable because locally best nodes contribute
all-zero rows.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field
from typing import TextIO

import numpy as np

from .dynamics import RunConfig, Trajectory, drift, integrate
from .game import PayoffMatrix, StrategyState, kappa_row, payoffs, state_vector
from .graph import Graph


class EquilibriumKind(enum.Enum):
    TYPE1 = "type1"
    TYPE2 = "type2"
    TYPE3 = "type3"
    NOT_EQUILIBRIUM = "not-equilibrium"


VERDICT_NEUTRAL = "neutrally-stable-at-worst"
VERDICT_INDETERMINATE = "indeterminate"


@dataclass(frozen=True)
class EquilibriumClass:
    """Classification outcome plus a witness explaining it.

    degenerate marks type 1 points that also satisfy the type 2 payoff
    condition (their Jacobian is all zeros).
    """

    kind: EquilibriumKind
    degenerate: bool = False
    witness: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "degenerate": self.degenerate,
            "witness": self.witness,
        }


@dataclass(frozen=True)
class ImitationGraph:
    """Weighted directed graph of imitation weights: edge i->j means i imitates j.

    Only strictly positive weights are stored, so nodes of locally maximal
    payoff have no out-edges and every out-weight sum is 1 or 0.
    """

    n: int
    edges: tuple[tuple[int, int, float], ...]

    def out_weight_sums(self) -> np.ndarray:
        sums = np.zeros(self.n)
        for i, _, w in self.edges:
            sums[i] += w
        return sums

    def zero_out_nodes(self) -> tuple[int, ...]:
        """Nodes with no out-edges (locally best payoff)."""
        has_out = [False] * self.n
        for i, _, _ in self.edges:
            has_out[i] = True
        return tuple(i for i, out in enumerate(has_out) if not out)

    def weight_matrix(self) -> np.ndarray:
        W = np.zeros((self.n, self.n))
        for i, j, w in self.edges:
            W[i, j] = w
        return W

    def negative_laplacian(self) -> np.ndarray:
        """-(D_out - W) for the weighted directed Laplacian; equals the Jacobian."""
        W = self.weight_matrix()
        return W - np.diag(W.sum(axis=1))

    def to_csv(self, fileobj: TextIO) -> None:
        writer = csv.writer(fileobj, lineterminator="\n")
        writer.writerow(["from", "to", "kappa"])
        for i, j, w in self.edges:
            writer.writerow([i, j, format(w, ".17g")])


@dataclass(frozen=True)
class StabilityReport:
    """Jacobian at a type 1 point with its Gershgorin structure."""

    jacobian: np.ndarray
    gershgorin_center: tuple[int, ...]
    zero_rows: tuple[int, ...]
    verdict: str

    def disk_radius(self, i: int) -> float:
        return float(np.sum(np.abs(self.jacobian[i])) - np.abs(self.jacobian[i, i]))

    def to_dict(self) -> dict:
        return {
            "zero_rows": list(self.zero_rows),
            "gershgorin": [
                {"row": i, "center": c, "radius": self.disk_radius(i)}
                for i, c in enumerate(self.gershgorin_center)
            ],
            "verdict": self.verdict,
            "jacobian": [[float(v) for v in row] for row in self.jacobian],
        }


def classify(g: Graph, m: PayoffMatrix, s, tol_x: float = 1e-9, tol_p: float = 1e-9) -> EquilibriumClass:
    """Classify a state as type 1/2/3 equilibrium or not an equilibrium.

    tol_x is the strategy-equality tolerance (also applied to the drift when
    deciding whether the state is at rest); tol_p is the payoff-equality
    tolerance. A point meeting both the type 1 and type 2 conditions reports
    type 1 with the degenerate flag set.
    """
    if tol_x <= 0.0 or tol_p <= 0.0:
        raise ValueError("tolerances must be positive")
    x = state_vector(s, g.n)
    f = drift(g, m, x)
    max_drift = float(np.max(np.abs(f), initial=0.0))
    if max_drift > tol_x:
        node = int(np.argmax(np.abs(f)))
        return EquilibriumClass(
            EquilibriumKind.NOT_EQUILIBRIUM,
            witness={"max_drift": max_drift, "node": node},
        )

    P = payoffs(g, m, x)
    x_spread = float(np.ptp(x)) if x.size else 0.0
    p_spread = float(np.ptp(P)) if P.size else 0.0
    strategies_equal = x_spread <= tol_x
    payoffs_equal = p_spread <= tol_p
    witness = {"max_drift": max_drift, "x_spread": x_spread, "payoff_spread": p_spread}

    if strategies_equal:
        return EquilibriumClass(EquilibriumKind.TYPE1, degenerate=payoffs_equal, witness=witness)
    lo, hi = int(np.argmin(x)), int(np.argmax(x))
    witness["unequal_pair"] = (lo, hi)
    if payoffs_equal:
        return EquilibriumClass(EquilibriumKind.TYPE2, witness=witness)
    return EquilibriumClass(EquilibriumKind.TYPE3, witness=witness)


def imitation_graph(g: Graph, m: PayoffMatrix, s) -> ImitationGraph:
    """Build the weighted directed imitation graph at a state."""
    x = state_vector(s, g.n)
    P = payoffs(g, m, x)
    edges = []
    for i in range(g.n):
        for j, w in sorted(kappa_row(g, P, i).items()):
            edges.append((i, j, w))
    return ImitationGraph(g.n, tuple(edges))


def jacobian_type1(
    g: Graph, m: PayoffMatrix, s, tol_x: float = 1e-9, tol_p: float = 1e-9
) -> StabilityReport:
    """Assemble the Jacobian at a type 1 point and report its stability structure.

    Row i is -1 on the diagonal with the imitation weights off-diagonal when
    node i has a strictly better neighbor, and all zeros otherwise. The
    verdict is neutral stability at worst when at least one row is nonzero;
    an all-zero Jacobian (type 1 point that is also type 2) is indeterminate.
    """
    cls = classify(g, m, s, tol_x=tol_x, tol_p=tol_p)
    if cls.kind is not EquilibriumKind.TYPE1:
        raise ValueError(f"state is not a type 1 equilibrium (got {cls.kind.value})")
    x = state_vector(s, g.n)
    P = payoffs(g, m, x)
    J = np.zeros((g.n, g.n))
    zero_rows = []
    centers = []
    for i in range(g.n):
        row = kappa_row(g, P, i)
        if row:
            J[i, i] = -1.0
            for j, w in row.items():
                J[i, j] = w
            centers.append(-1)
        else:
            zero_rows.append(i)
            centers.append(0)
    verdict = VERDICT_NEUTRAL if len(zero_rows) < g.n else VERDICT_INDETERMINATE
    return StabilityReport(J, tuple(centers), tuple(zero_rows), verdict)


def perturb_and_run(
    g: Graph,
    m: PayoffMatrix,
    s_star,
    delta: np.ndarray,
    cfg: RunConfig,
    tol_x: float = 1e-9,
    tol_p: float = 1e-9,
    engine: str = "auto",
) -> tuple[Trajectory, EquilibriumClass, float]:
    """Integrate from s_star + delta; classify where it lands.

    Returns the trajectory, the final state's classification, and the
    max-norm distance of the final state from s_star.
    """
    x_star = state_vector(s_star, g.n)
    x0 = x_star + np.asarray(delta, dtype=np.float64)
    if x0.size != g.n:
        raise ValueError("perturbation length does not match node count")
    if x0.size and (x0.min() < 0.0 or x0.max() > 1.0):
        raise ValueError("perturbed state leaves [0, 1]")
    t0 = s_star.t if isinstance(s_star, StrategyState) else 0.0
    traj = integrate(g, m, StrategyState(x0, t0), cfg, engine=engine)
    final = traj.states[-1]
    cls = classify(g, m, final, tol_x=tol_x, tol_p=tol_p)
    distance = float(np.max(np.abs(final - x_star), initial=0.0))
    return traj, cls, distance


@dataclass(frozen=True)
class PerturbationStudy:
    """Outcome of the two canned perturbation scenarios around a type 1 point."""

    followers: tuple[int, ...]
    anchors: tuple[int, ...]
    follower_result: tuple[Trajectory, EquilibriumClass, float]
    anchor_result: tuple[Trajectory, EquilibriumClass, float]


def perturbation_study(
    g: Graph,
    m: PayoffMatrix,
    common_value: float,
    cfg: RunConfig | None = None,
    follower_delta: float = 0.005,
    anchor_delta: float = -0.095,
    tol_x: float = 1e-4,
    tol_p: float = 1e-4,
) -> PerturbationStudy:
    """Probe the basin of attraction of the uniform state at common_value.

    Scenario one displaces only nodes that have out-edges in the imitation
    graph (followers), alternating the sign of follower_delta; the system is
    expected to relax back. Scenario two displaces the first locally best
    node (an anchor, zero out-degree) by anchor_delta, which generally moves
    the system to a different, non-uniform equilibrium.
    """
    cfg = cfg or RunConfig()
    s_star = StrategyState(np.full(g.n, common_value))
    ig = imitation_graph(g, m, s_star)
    anchors = ig.zero_out_nodes()
    followers = tuple(i for i in range(g.n) if i not in anchors)
    if not anchors or not followers:
        raise ValueError("study needs both anchor and follower nodes; pick another graph")

    delta_f = np.zeros(g.n)
    for rank, i in enumerate(followers):
        delta_f[i] = follower_delta if rank % 2 == 0 else -follower_delta
    delta_a = np.zeros(g.n)
    delta_a[anchors[0]] = anchor_delta

    follower_result = perturb_and_run(g, m, s_star, delta_f, cfg, tol_x=tol_x, tol_p=tol_p)
    anchor_result = perturb_and_run(g, m, s_star, delta_a, cfg, tol_x=tol_x, tol_p=tol_p)
    return PerturbationStudy(followers, anchors, follower_result, anchor_result)
