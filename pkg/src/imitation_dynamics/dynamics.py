"""Time evolution of strategy states under the imitation rule.

The discrete rule advances x_i by epsilon times the drift f_i, where f_i pulls
node i toward strictly better-performing neighbors. The continuous-time
counterpart (same right-hand side) can be integrated with RK4; the drift's
Heaviside switches can degrade RK4's order, so the discrete Euler rule is the
reference integrator.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import TextIO

import numpy as np

from . import _engine
from .game import PayoffMatrix, StrategyState, kappa_row, payoffs, state_vector, validate_pd
from .graph import Graph, complete_graph

_INTEGRATORS = ("euler", "rk4")


@dataclass(frozen=True)
class RunConfig:
    """Integration parameters for a run.

    tol is the stopping threshold on max_i |f_i(x)|; record_every is the
    trajectory sampling stride in steps.
    """

    epsilon: float = 0.01
    tol: float = 1e-8
    max_steps: int = 10**6
    record_every: int = 100
    integrator: str = "euler"

    def __post_init__(self):
        if self.epsilon <= 0.0:
            raise ValueError("epsilon must be positive")
        if self.tol <= 0.0:
            raise ValueError("tol must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be at least 1")
        if self.record_every < 1:
            raise ValueError("record_every must be at least 1")
        name = {"discrete-euler": "euler"}.get(self.integrator, self.integrator)
        if name not in _INTEGRATORS:
            raise ValueError(f"unknown integrator {self.integrator!r}")
        object.__setattr__(self, "integrator", name)

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "tol": self.tol,
            "max_steps": self.max_steps,
            "record_every": self.record_every,
            "integrator": self.integrator,
        }


@dataclass(frozen=True)
class Trajectory:
    """Sampled run: snapshot times, states, and the convergence outcome."""

    times: np.ndarray
    states: np.ndarray
    converged: bool
    steps_taken: int

    def __post_init__(self):
        times = np.asarray(self.times, dtype=np.float64)
        states = np.asarray(self.states, dtype=np.float64)
        if states.ndim != 2 or times.ndim != 1 or states.shape[0] != times.size:
            raise ValueError("trajectory needs one state row per sample time")
        if times.size and np.any(np.diff(times) <= 0.0):
            raise ValueError("sample times must be strictly increasing")
        if states.size and (states.min() < 0.0 or states.max() > 1.0):
            raise ValueError("trajectory states must lie in [0, 1]")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)

    def __len__(self) -> int:
        return self.times.size

    @property
    def final_state(self) -> StrategyState:
        return StrategyState(self.states[-1], self.times[-1])


def drift(g: Graph, m: PayoffMatrix, s) -> np.ndarray:
    """Drift vector f(x): per-node weighted pull toward better neighbors.

    Nodes whose imitation-weight row is all zero (no strictly better
    neighbor, including isolated nodes) have f_i = 0.
    """
    x = state_vector(s, g.n)
    P = payoffs(g, m, x)
    f = np.zeros(g.n)
    for i in range(g.n):
        row = kappa_row(g, P, i)
        if row:
            f[i] = sum(w * (x[j] - x[i]) for j, w in row.items())
    return f


def step(g: Graph, m: PayoffMatrix, s, epsilon: float) -> StrategyState:
    """One synchronous Euler update x' = x + epsilon * f(x)."""
    if epsilon <= 0.0:
        raise ValueError("epsilon must be positive")
    x = state_vector(s, g.n)
    t = s.t if isinstance(s, StrategyState) else 0.0
    return StrategyState(x + epsilon * drift(g, m, x), t + epsilon)


def complete_graph_step(s, m: PayoffMatrix, epsilon: float) -> StrategyState:
    """Specialized complete-graph update.

    Each node moves toward the nodes holding strictly smaller strategies,
    weighted by their payoff advantage; the minimal-strategy node is
    unchanged. Requires a strict PD matrix (which makes every such advantage
    positive). On complete graphs this reproduces the generic rule.
    """
    if epsilon <= 0.0:
        raise ValueError("epsilon must be positive")
    if not validate_pd(m):
        raise ValueError("the complete-graph rule requires a strict PD payoff matrix")
    x = state_vector(s)
    if x.size < 2:
        raise ValueError("complete graph needs at least 2 nodes")
    P = payoffs(complete_graph(x.size), m, x)
    xn = x.copy()
    for i in range(x.size):
        below = np.flatnonzero(x < x[i])
        if below.size == 0:
            continue
        gains = P[below] - P[i]
        xn[i] = x[i] + epsilon * float(np.dot(gains, x[below] - x[i]) / np.sum(gains))
    t = s.t if isinstance(s, StrategyState) else 0.0
    return StrategyState(xn, t + epsilon)


def _check_bounds(x: np.ndarray) -> None:
    # Guard, not a clamp: leaving [0,1] means an integration bug.
    if x.size and (x.min() < 0.0 or x.max() > 1.0):
        raise AssertionError("state left [0, 1]; integration is inconsistent")


def integrate(g: Graph, m: PayoffMatrix, s0, cfg: RunConfig, engine: str = "auto") -> Trajectory:
    """Iterate the update rule until max_i |f_i| <= cfg.tol or max_steps.

    Convergence is checked before each update, so a state that is already at
    rest yields a length-1 trajectory. Non-convergence is reported via the
    flag, not an error. engine selects the stepping path: "fast" (JIT
    kernels), "reference" (pure-Python operations), or "auto".
    """
    if engine not in ("auto", "fast", "reference"):
        raise ValueError(f"unknown engine {engine!r}")
    if engine == "fast" and not _engine.HAVE_NUMBA:
        raise RuntimeError("fast engine requested but numba is unavailable")
    fast = engine == "fast" or (engine == "auto" and _engine.HAVE_NUMBA)

    x = state_vector(s0, g.n).copy()
    t0 = s0.t if isinstance(s0, StrategyState) else 0.0
    times = [t0]
    states = [x.copy()]
    recorded_step = 0
    steps = 0

    def record():
        nonlocal recorded_step
        if steps > recorded_step:
            times.append(t0 + steps * cfg.epsilon)
            states.append(x.copy())
            recorded_step = steps

    if cfg.integrator == "euler" and fast:
        indptr, indices = g.csr()
        a, b, c, d = m.as_tuple()
        converged = False
        while True:
            budget = cfg.max_steps - steps
            if budget <= 0:
                _, maxf = _engine.drift_eval(indptr, indices, x, a, b, c, d)
                converged = bool(maxf <= cfg.tol)
                break
            block = min(cfg.record_every, budget)
            done, conv = _engine.euler_block(
                indptr, indices, x, a, b, c, d, cfg.epsilon, cfg.tol, block
            )
            steps += int(done)
            _check_bounds(x)
            if conv:
                converged = True
                break
            record()
    elif cfg.integrator == "euler":
        converged = False
        while True:
            f = drift(g, m, x)
            if np.max(np.abs(f), initial=0.0) <= cfg.tol:
                converged = True
                break
            if steps >= cfg.max_steps:
                break
            x += cfg.epsilon * f
            steps += 1
            _check_bounds(x)
            if steps % cfg.record_every == 0:
                record()
    else:  # rk4
        h = cfg.epsilon
        if fast:
            indptr, indices = g.csr()
            a, b, c, d = m.as_tuple()

            def fval(v):
                return _engine.drift_eval(indptr, indices, v, a, b, c, d)
        else:

            def fval(v):
                f = drift(g, m, v)
                return f, float(np.max(np.abs(f), initial=0.0))

        converged = False
        while True:
            k1, maxf = fval(x)
            if maxf <= cfg.tol:
                converged = True
                break
            if steps >= cfg.max_steps:
                break
            k2, _ = fval(x + 0.5 * h * k1)
            k3, _ = fval(x + 0.5 * h * k2)
            k4, _ = fval(x + h * k3)
            x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            steps += 1
            _check_bounds(x)
            if steps % cfg.record_every == 0:
                record()

    record()
    return Trajectory(np.array(times), np.array(states), converged, steps)


def write_trajectory_csv(traj: Trajectory, fileobj: TextIO) -> None:
    """Wide-format trajectory CSV: header t,node_0,...,node_{n-1}.

    Floats carry 17 significant digits so values round-trip exactly.
    """
    n = traj.states.shape[1]
    writer = csv.writer(fileobj, lineterminator="\n")
    writer.writerow(["t"] + [f"node_{i}" for i in range(n)])
    for t, row in zip(traj.times, traj.states):
        writer.writerow([format(t, ".17g")] + [format(v, ".17g") for v in row])
