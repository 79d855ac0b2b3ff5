"""Score binning, confusion matrices, and payoff-matrix fitting.

Deviance scores live in [0, 1] with 1 fully deviant; the dynamics' strategy
is the cooperate probability, so scores map to strategies by x = 1 - d (and
back the same way). A panel holds early scores y0 and late scores y1; the
model predicts late scores by integrating from x0 = 1 - y0 to rest. Late
scores are compared in bins of width S, the population standard deviation of
y0: bin 0 within one S of the early score, then signed bins out to +-2 with
everything farther away clamped into the outermost bin (five bins total);
points exactly on a band edge belong to the inner band. The fit searches
payoff matrices minimizing the summed squared bin error.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from typing import Callable, TextIO

import numpy as np
from scipy.optimize import minimize
from scipy.stats import qmc

from .dynamics import RunConfig, integrate
from .game import PayoffMatrix, StrategyState, validate_pd
from .graph import Graph

BIN_LABELS = (-2, -1, 0, 1, 2)

# Canonical strict-PD start for the optimizer, scaled into the unit search box.
_CANONICAL_START = (0.3, -0.7, 0.5, 0.2)


@dataclass(frozen=True)
class ScorePanel:
    """Per-node early (y0) and late (y1) deviance scores in [0, 1]."""

    ids: tuple[str, ...]
    y0: np.ndarray
    y1: np.ndarray

    def __post_init__(self):
        y0 = np.asarray(self.y0, dtype=np.float64).copy()
        y1 = np.asarray(self.y1, dtype=np.float64).copy()
        if y0.ndim != 1 or y1.ndim != 1 or len(self.ids) != y0.size or y0.size != y1.size:
            raise ValueError("panel needs one (id, y0, y1) triple per node")
        if len(set(self.ids)) != len(self.ids):
            raise ValueError("panel node ids must be unique")
        for name, y in (("y0", y0), ("y1", y1)):
            if y.size and (y.min() < 0.0 or y.max() > 1.0):
                raise ValueError(f"{name} scores must lie in [0, 1]")
        y0.setflags(write=False)
        y1.setflags(write=False)
        object.__setattr__(self, "ids", tuple(str(i) for i in self.ids))
        object.__setattr__(self, "y0", y0)
        object.__setattr__(self, "y1", y1)

    @property
    def n(self) -> int:
        return self.y0.size


def read_panel_csv(fileobj: TextIO) -> ScorePanel:
    reader = csv.reader(fileobj)
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != ["node", "y0", "y1"]:
        raise ValueError("panel CSV must start with header 'node,y0,y1'")
    ids, y0, y1 = [], [], []
    for row in reader:
        if not row:
            continue
        if len(row) != 3:
            raise ValueError(f"panel row needs 3 fields, got {len(row)}: {row!r}")
        ids.append(row[0].strip())
        y0.append(float(row[1]))
        y1.append(float(row[2]))
    return ScorePanel(tuple(ids), np.array(y0), np.array(y1))


def write_panel_csv(panel: ScorePanel, fileobj: TextIO) -> None:
    writer = csv.writer(fileobj, lineterminator="\n")
    writer.writerow(["node", "y0", "y1"])
    for i in range(panel.n):
        writer.writerow(
            [panel.ids[i], format(panel.y0[i], ".17g"), format(panel.y1[i], ".17g")]
        )


def score_to_strategy(y):
    """Deviance score -> cooperate probability (1 = fully deviant = defect)."""
    return 1.0 - np.asarray(y, dtype=np.float64)


def strategy_to_score(x):
    return 1.0 - np.asarray(x, dtype=np.float64)


def population_std(y0) -> float:
    """Bin width S: population standard deviation (divisor n) of early scores."""
    return float(np.std(np.asarray(y0, dtype=np.float64)))


def assign_bin(y0_i: float, y_i: float, s: float) -> int:
    """Signed band index of y_i relative to y0_i in units of s, clamped to +-2.

    Bin 0 is the closed band within one s; bin +-k covers distances in
    (k*s, (k+1)*s], so edge points fall in the inner band. Distances beyond
    the +-2 band clamp to +-2, keeping five bins total.
    """
    if s <= 0.0:
        raise ValueError("standard deviation must be positive")
    dist = abs(y_i - y0_i)
    if dist <= s:
        return 0
    mag = 1 if dist <= 2.0 * s else 2
    return mag if y_i > y0_i else -mag


def assign_bins(y0, y, s: float) -> np.ndarray:
    """Vectorized assign_bin over aligned score arrays."""
    if s <= 0.0:
        raise ValueError("standard deviation must be positive")
    y0 = np.asarray(y0, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    dist = np.abs(y - y0)
    mag = np.where(dist <= s, 0, np.where(dist <= 2.0 * s, 1, 2))
    return (mag * np.sign(y - y0)).astype(np.int64)


def confusion_counts(bins_true, bins_pred) -> np.ndarray:
    """5x5 count matrix; rows = true bins -2..2, columns = predicted bins."""
    bt = np.asarray(bins_true, dtype=np.int64)
    bp = np.asarray(bins_pred, dtype=np.int64)
    if bt.shape != bp.shape:
        raise ValueError("bin vectors must have equal length")
    if bt.size and (min(bt.min(), bp.min()) < -2 or max(bt.max(), bp.max()) > 2):
        raise ValueError("bins must lie in -2..2")
    C = np.zeros((5, 5), dtype=np.int64)
    np.add.at(C, (bt + 2, bp + 2), 1)
    return C


def row_normalize(C) -> np.ndarray:
    """Row-stochastic version of a count matrix; empty rows stay all zero."""
    C = np.asarray(C, dtype=np.float64)
    sums = C.sum(axis=1, keepdims=True)
    return np.divide(C, sums, out=np.zeros_like(C), where=sums > 0)


@dataclass(frozen=True)
class BinReport:
    """Bin assignments and confusion matrices for one model evaluation."""

    s: float
    bins_true: np.ndarray
    bins_pred: np.ndarray
    confusion: np.ndarray
    prob: np.ndarray

    @classmethod
    def from_scores(cls, y0, y_true, y_pred, s: float | None = None) -> "BinReport":
        s = population_std(y0) if s is None else float(s)
        bt = assign_bins(y0, y_true, s)
        bp = assign_bins(y0, y_pred, s)
        C = confusion_counts(bt, bp)
        return cls(s, bt, bp, C, row_normalize(C))

    def to_dict(self) -> dict:
        return {
            "s": self.s,
            "bin_labels": list(BIN_LABELS),
            "confusion": self.confusion.tolist(),
            "prob": self.prob.tolist(),
        }


@dataclass(frozen=True)
class PredictedScores:
    yhat: np.ndarray
    converged: bool
    steps_taken: int


def predict_late(
    g: Graph, m: PayoffMatrix, panel: ScorePanel, cfg: RunConfig, engine: str = "auto"
) -> PredictedScores:
    """Model-predicted late scores: integrate from x0 = 1 - y0, map back.

    A run that hits max_steps is still returned, flagged and with a warning.
    """
    if panel.n != g.n:
        raise ValueError(f"panel size {panel.n} does not match node count {g.n}")
    traj = integrate(g, m, StrategyState(score_to_strategy(panel.y0)), cfg, engine=engine)
    if not traj.converged:
        warnings.warn(
            f"dynamics did not converge within {cfg.max_steps} steps; "
            "predicted scores are the final iterate",
            RuntimeWarning,
            stacklevel=2,
        )
    return PredictedScores(strategy_to_score(traj.states[-1]), traj.converged, traj.steps_taken)


def objective(
    g: Graph, m: PayoffMatrix, panel: ScorePanel, cfg: RunConfig, engine: str = "auto"
) -> float:
    """Sum of squared bin errors between observed and predicted late scores.

    The bin width s comes from y0 once and is used for both bin vectors.
    """
    s = population_std(panel.y0)
    if s <= 0.0:
        raise ValueError("early scores have zero spread; bins are undefined")
    pred = predict_late(g, m, panel, cfg, engine=engine)
    bt = assign_bins(panel.y0, panel.y1, s)
    bp = assign_bins(panel.y0, pred.yhat, s)
    return float(np.sum((bt - bp) ** 2))


@dataclass(frozen=True)
class FitSettings:
    """Search settings for the derivative-free payoff fit.

    The search runs Nelder-Mead from n_starts points (a canonical strict-PD
    matrix plus a scrambled Sobol sequence), then restarts around the best
    point with a shrinking simplex; the bin objective is piecewise constant,
    so restarts matter more than tight per-run tolerances. With strict_pd,
    candidates violating the PD ordering score a rejection penalty that grows
    with the violation.
    """

    n_starts: int = 16
    bounds: tuple = ((0.0, 1.0), (-1.0, 0.0), (0.0, 1.0), (0.0, 1.0))
    strict_pd: bool = True
    penalty: float = 1e6
    restarts: int = 2
    restart_scale: float = 0.05
    nm_maxiter: int = 120
    nm_maxfev: int = 200
    xatol: float = 1e-3
    fatol: float = 0.25
    max_evals: int = 4000
    seed: int = 0


@dataclass(frozen=True)
class FitResult:
    matrix: PayoffMatrix
    report: BinReport
    objective: float
    yhat: np.ndarray
    evaluations: int
    exhausted: bool


def _pd_violation(v) -> float:
    a, b, c, d = v
    return max(0.0, a - c) + max(0.0, d - a) + max(0.0, -d) + max(0.0, b)


def _start_points(settings: FitSettings) -> list[np.ndarray]:
    lo = np.array([b[0] for b in settings.bounds])
    hi = np.array([b[1] for b in settings.bounds])
    starts = [np.clip(np.array(_CANONICAL_START), lo, hi)]
    extra = max(settings.n_starts - 1, 0)
    if extra:
        # Sobol balance wants a power-of-2 sample count; draw up and slice.
        u = qmc.Sobol(d=4, scramble=True, seed=settings.seed).random_base2(
            max(int(np.ceil(np.log2(extra))), 0)
        )[:extra]
        for row in u:
            if settings.strict_pd:
                # Sort three unit draws into d < a < c so every start is feasible.
                d_, a_, c_ = np.sort(row[:3])
                b_ = lo[1] + row[3] * (hi[1] - lo[1])
                v = np.array([a_, min(b_, 0.0), c_, max(d_, 1e-6)])
            else:
                v = lo + row * (hi - lo)
            starts.append(np.clip(v, lo, hi))
    return starts


def fit_payoff(
    g: Graph,
    panel: ScorePanel,
    cfg: RunConfig,
    settings: FitSettings | None = None,
    engine: str = "auto",
) -> FitResult:
    """Search payoff matrices minimizing the squared bin error.

    Returns the best matrix found, its bin report, and the final objective;
    stops early once a bin-exact fit (objective 0) appears. Exhausting the
    evaluation budget returns the best-so-far with a warning.
    """
    settings = settings or FitSettings()
    if population_std(panel.y0) <= 0.0:
        raise ValueError("early scores have zero spread; bins are undefined")
    lo = np.array([b[0] for b in settings.bounds])
    hi = np.array([b[1] for b in settings.bounds])

    evals = 0
    cache: dict[tuple, float] = {}

    def fobj(v) -> float:
        nonlocal evals
        v = np.clip(v, lo, hi)
        if settings.strict_pd:
            viol = _pd_violation(v)
            if viol > 0.0:
                return settings.penalty * (1.0 + viol)
        key = tuple(np.round(v, 12))
        if key in cache:
            return cache[key]
        if evals >= settings.max_evals:
            return float("inf")
        evals += 1
        m = PayoffMatrix(*v, strict=False)
        val = objective(g, m, panel, cfg, engine=engine)
        cache[key] = val
        return val

    best_v: np.ndarray | None = None
    best_f = float("inf")

    def run_nm(x0, initial_simplex=None):
        nonlocal best_v, best_f
        remaining = settings.max_evals - evals
        if remaining <= 0:
            return
        options = {
            "maxiter": settings.nm_maxiter,
            "maxfev": min(settings.nm_maxfev, remaining),
            "xatol": settings.xatol,
            "fatol": settings.fatol,
        }
        if initial_simplex is not None:
            options["initial_simplex"] = initial_simplex
        res = minimize(fobj, x0, method="Nelder-Mead", bounds=settings.bounds, options=options)
        if res.fun < best_f:
            best_f = float(res.fun)
            best_v = np.clip(res.x, lo, hi)

    for v0 in _start_points(settings):
        run_nm(v0)
        if best_f == 0.0:
            break

    scale = settings.restart_scale
    for _ in range(settings.restarts):
        if best_f == 0.0 or best_v is None or evals >= settings.max_evals:
            break
        simplex = np.repeat(best_v[None, :], 5, axis=0)
        for k in range(4):
            span = scale * (hi[k] - lo[k])
            simplex[k + 1, k] = np.clip(
                best_v[k] + (span if best_v[k] + span <= hi[k] else -span), lo[k], hi[k]
            )
        run_nm(best_v, initial_simplex=simplex)
        scale *= 0.5

    if best_v is None:
        raise RuntimeError("optimizer made no successful evaluation")
    exhausted = best_f > 0.0 and evals >= settings.max_evals
    if exhausted:
        warnings.warn(
            f"fit budget exhausted after {evals} objective evaluations; "
            f"returning best-so-far (objective {best_f})",
            RuntimeWarning,
            stacklevel=2,
        )

    matrix = PayoffMatrix(*best_v, strict=settings.strict_pd and validate_pd(best_v.reshape(2, 2)))
    pred = predict_late(g, matrix, panel, cfg, engine=engine)
    report = BinReport.from_scores(panel.y0, panel.y1, pred.yhat)
    final_obj = float(np.sum((report.bins_true - report.bins_pred) ** 2))
    return FitResult(matrix, report, final_obj, pred.yhat, evals, exhausted)


def generate_synthetic_panel(
    g: Graph,
    m: PayoffMatrix,
    dist: str | Callable[[np.random.Generator, int], np.ndarray] = "uniform",
    noise: float = 0.0,
    seed: int = 0,
    cfg: RunConfig | None = None,
    engine: str = "auto",
) -> ScorePanel:
    """Draw early scores, run the model forward, add truncated noise.

    Stands in for real score data: y1 is the model's predicted late score
    plus additive Gaussian noise of the given level, clamped back to [0, 1].
    Reproducible for a fixed seed.
    """
    if noise < 0.0:
        raise ValueError("noise level must be non-negative")
    cfg = cfg or RunConfig()
    rng = np.random.default_rng(seed)
    if callable(dist):
        y0 = np.asarray(dist(rng, g.n), dtype=np.float64)
    elif dist == "uniform":
        y0 = rng.random(g.n)
    else:
        raise ValueError(f"unknown score distribution {dist!r}")
    ids = tuple(str(i) for i in range(g.n))
    base = ScorePanel(ids, y0, y0)
    pred = predict_late(g, m, base, cfg, engine=engine)
    y1 = pred.yhat
    if noise > 0.0:
        y1 = np.clip(y1 + noise * rng.standard_normal(g.n), 0.0, 1.0)
    return ScorePanel(ids, y0, y1)
