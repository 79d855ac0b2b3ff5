"""Command-line front-end tying ingestion, simulation, analysis, and fitting together.

Exit codes: 0 success, 1 unexpected runtime failure, 2 usage errors, 3 input
parse errors, 4 configuration errors, 5 completed with a non-convergence
warning.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
import warnings
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .dynamics import RunConfig, integrate, write_trajectory_csv
from .equilibrium import EquilibriumKind, classify, imitation_graph, jacobian_type1
from .fitting import (
    BinReport,
    FitSettings,
    ScorePanel,
    fit_payoff,
    objective,
    predict_late,
    read_panel_csv,
)
from .game import PayoffMatrix, StrategyState
from .graph import EdgeListParseError, Graph, load_edge_list

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_CONFIG = 4
EXIT_NONCONVERGED = 5


class ParseFailure(Exception):
    """Input file exists but cannot be parsed."""


class ConfigFailure(Exception):
    """Flags, config file, or input contents are inconsistent."""


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as e:
        raise ConfigFailure(f"cannot read {path}: {e}") from e


def _sha256(path: str) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _load_graph(path: str) -> tuple[Graph, tuple[str, ...]]:
    text = _read_text(path)
    try:
        return load_edge_list(text)
    except EdgeListParseError as e:
        raise ParseFailure(f"{path}: {e}") from e


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    text = _read_text(path)
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseFailure(f"{path}: invalid JSON: {e}") from e
    if not isinstance(cfg, dict):
        raise ParseFailure(f"{path}: config must be a JSON object")
    return cfg


def _merge(file_cfg: dict, key: str, flag_value, default):
    """Flags override config-file values, which override defaults."""
    if flag_value is not None:
        return flag_value
    if key in file_cfg:
        return file_cfg[key]
    return default


def _parse_payoff(spec) -> tuple[float, float, float, float]:
    if spec is None:
        raise ConfigFailure("a payoff matrix is required (--payoff a,b,c,d or config file)")
    if isinstance(spec, str):
        parts = spec.split(",")
        if len(parts) != 4:
            raise ConfigFailure(f"--payoff needs 4 comma-separated values, got {len(parts)}")
        try:
            return tuple(float(p) for p in parts)  # type: ignore[return-value]
        except ValueError as e:
            raise ConfigFailure(f"bad payoff value: {e}") from e
    if isinstance(spec, dict):
        try:
            return (float(spec["a"]), float(spec["b"]), float(spec["c"]), float(spec["d"]))
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigFailure(f"payoff record needs numeric fields a, b, c, d: {e}") from e
    if isinstance(spec, (list, tuple)) and len(spec) == 4:
        return tuple(float(v) for v in spec)  # type: ignore[return-value]
    raise ConfigFailure(f"unrecognized payoff spec: {spec!r}")


def _build_matrix(values, strict: bool) -> PayoffMatrix:
    try:
        return PayoffMatrix(*values, strict=strict)
    except ValueError as e:
        raise ConfigFailure(str(e)) from e


def _parse_bool(value, name: str) -> bool:
    if isinstance(value, bool):
        return value
    if isinstance(value, str) and value.lower() in ("on", "true", "yes", "1"):
        return True
    if isinstance(value, str) and value.lower() in ("off", "false", "no", "0"):
        return False
    raise ConfigFailure(f"{name} must be on or off, got {value!r}")


def _read_state_csv(path: str, labels: tuple[str, ...]) -> np.ndarray:
    """Read a node,x CSV and align values to graph node order."""
    text = _read_text(path)
    reader = csv.reader(text.splitlines())
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != ["node", "x"]:
        raise ParseFailure(f"{path}: state CSV must start with header 'node,x'")
    values: dict[str, float] = {}
    for row_no, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 2:
            raise ParseFailure(f"{path}: line {row_no}: expected 2 fields, got {len(row)}")
        try:
            values[row[0].strip()] = float(row[1])
        except ValueError as e:
            raise ParseFailure(f"{path}: line {row_no}: {e}") from e
    missing = [lab for lab in labels if lab not in values]
    extra = [k for k in values if k not in set(labels)]
    if missing or extra:
        raise ConfigFailure(
            f"{path}: node mismatch with graph"
            + (f"; missing: {missing}" if missing else "")
            + (f"; not in graph: {extra}" if extra else "")
        )
    return np.array([values[lab] for lab in labels])


def _resolve_init(spec: str, labels: tuple[str, ...], fallback_seed: int) -> np.ndarray:
    """Initial strategies from 'constant:<v>', 'uniform[:<seed>]', or a CSV path."""
    n = len(labels)
    if spec.startswith("constant:"):
        try:
            v = float(spec.split(":", 1)[1])
        except ValueError as e:
            raise ConfigFailure(f"bad constant init {spec!r}: {e}") from e
        if not 0.0 <= v <= 1.0:
            raise ConfigFailure(f"constant init must lie in [0, 1], got {v}")
        return np.full(n, v)
    if spec == "uniform" or spec.startswith("uniform:"):
        seed = fallback_seed
        if spec.startswith("uniform:"):
            try:
                seed = int(spec.split(":", 1)[1])
            except ValueError as e:
                raise ConfigFailure(f"bad uniform init seed in {spec!r}: {e}") from e
        return np.random.default_rng(seed).random(n)
    return _read_state_csv(spec, labels)


def _write_id_map(path: Path, labels: tuple[str, ...]) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["identifier", "index"])
        for i, lab in enumerate(labels):
            writer.writerow([lab, i])


def _write_state_csv(path: Path, labels: tuple[str, ...], x: np.ndarray) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["node", "x"])
        for lab, v in zip(labels, x):
            writer.writerow([lab, format(v, ".17g")])


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _write_manifest(
    out: Path,
    command: str,
    config: dict,
    inputs: dict[str, str],
    started: str,
    seed: int | None = None,
) -> None:
    outputs = {
        p.name: _sha256(str(p))
        for p in sorted(out.iterdir())
        if p.is_file() and p.name != "manifest.json"
    }
    manifest = {
        "command": command,
        "tool": {"name": "imitation-dynamics", "version": __version__},
        "config": config,
        "seed": seed,
        "inputs": {name: {"path": path, "sha256": _sha256(path)} for name, path in inputs.items()},
        "outputs": outputs,
        "started_utc": started,
        "finished_utc": datetime.now(timezone.utc).isoformat(),
    }
    _write_json(out / "manifest.json", manifest)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def cmd_simulate(args) -> int:
    started = _now()
    file_cfg = _load_config_file(args.config)
    g, labels = _load_graph(args.graph)
    strict = _parse_bool(_merge(file_cfg, "strict_pd", args.strict_pd, "on"), "--strict-pd")
    m = _build_matrix(_parse_payoff(_merge(file_cfg, "payoff", args.payoff, None)), strict)
    seed = int(_merge(file_cfg, "seed", args.seed, 0))
    init_spec = str(_merge(file_cfg, "init", args.init, "uniform"))
    try:
        run_cfg = RunConfig(
            epsilon=float(_merge(file_cfg, "epsilon", args.epsilon, 0.01)),
            tol=float(_merge(file_cfg, "tol", args.tol, 1e-8)),
            max_steps=int(_merge(file_cfg, "max_steps", args.max_steps, 10**6)),
            record_every=int(_merge(file_cfg, "record_every", args.record_every, 100)),
            integrator=str(_merge(file_cfg, "integrator", args.integrator, "euler")),
        )
    except ValueError as e:
        raise ConfigFailure(str(e)) from e
    x0 = _resolve_init(init_spec, labels, seed)
    try:
        s0 = StrategyState(x0)
    except ValueError as e:
        raise ConfigFailure(f"initial strategies: {e}") from e

    traj = integrate(g, m, s0, run_cfg)

    out = _out_dir(args)
    with (out / "trajectory.csv").open("w", newline="") as fh:
        write_trajectory_csv(traj, fh)
    _write_state_csv(out / "final_state.csv", labels, traj.states[-1])
    _write_id_map(out / "id_map.csv", labels)
    _write_json(
        out / "run.json",
        {
            "converged": traj.converged,
            "steps_taken": traj.steps_taken,
            "samples": len(traj),
            "stopping_rule": "max_i |f_i(x)| <= tol",
            "config": run_cfg.to_dict(),
        },
    )
    config = {
        "payoff": m.to_dict(),
        "strict_pd": strict,
        "init": init_spec,
        "seed": seed,
        **run_cfg.to_dict(),
    }
    inputs = {"graph": args.graph}
    if init_spec not in ("uniform",) and not init_spec.startswith(("constant:", "uniform:")):
        inputs["init"] = init_spec
    _write_manifest(out, "simulate", config, inputs, started, seed=seed)

    if not traj.converged:
        print(
            f"warning: not converged after {traj.steps_taken} steps "
            f"(tol={run_cfg.tol})",
            file=sys.stderr,
        )
        return EXIT_NONCONVERGED
    print(f"converged in {traj.steps_taken} steps; outputs in {out}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    started = _now()
    file_cfg = _load_config_file(args.config)
    g, labels = _load_graph(args.graph)
    strict = _parse_bool(_merge(file_cfg, "strict_pd", args.strict_pd, "on"), "--strict-pd")
    m = _build_matrix(_parse_payoff(_merge(file_cfg, "payoff", args.payoff, None)), strict)
    x = _read_state_csv(args.state, labels)
    try:
        s = StrategyState(x)
    except ValueError as e:
        raise ConfigFailure(f"state file: {e}") from e
    tol_x = float(_merge(file_cfg, "tol_x", args.tol_x, 1e-9))
    tol_p = float(_merge(file_cfg, "tol_p", args.tol_p, 1e-9))

    cls = classify(g, m, s, tol_x=tol_x, tol_p=tol_p)
    ig = imitation_graph(g, m, s)

    out = _out_dir(args)
    payload = cls.to_dict()
    payload["tolerances"] = {"tol_x": tol_x, "tol_p": tol_p}
    _write_json(out / "classification.json", payload)
    with (out / "imitation_graph.csv").open("w", newline="") as fh:
        ig.to_csv(fh)
    if cls.kind is EquilibriumKind.TYPE1:
        report = jacobian_type1(g, m, s, tol_x=tol_x, tol_p=tol_p)
        _write_json(out / "stability.json", report.to_dict())
    _write_id_map(out / "id_map.csv", labels)

    config = {
        "payoff": m.to_dict(),
        "strict_pd": strict,
        "tol_x": tol_x,
        "tol_p": tol_p,
    }
    _write_manifest(out, "analyze", config, {"graph": args.graph, "state": args.state}, started)
    print(f"classification: {cls.kind.value}; outputs in {out}")
    return EXIT_OK


def _align_panel(panel: ScorePanel, labels: tuple[str, ...]) -> ScorePanel:
    """Reorder panel rows to graph node order; ids must match exactly."""
    if panel.n == 0:
        raise ConfigFailure("panel is empty")
    panel_ids = set(panel.ids)
    label_set = set(labels)
    missing = sorted(label_set - panel_ids)
    extra = sorted(panel_ids - label_set)
    if missing or extra:
        raise ConfigFailure(
            "panel nodes do not match graph nodes"
            + (f"; missing from panel: {missing}" if missing else "")
            + (f"; not in graph: {extra}" if extra else "")
        )
    row = {pid: k for k, pid in enumerate(panel.ids)}
    order = [row[lab] for lab in labels]
    return ScorePanel(labels, panel.y0[order], panel.y1[order])


def _print_confusion(report: BinReport) -> None:
    labels = [-2, -1, 0, 1, 2]
    print("confusion matrix (rows = true bin, columns = predicted bin):")
    print("      " + "".join(f"{c:>7}" for c in labels))
    for r, row in zip(labels, report.confusion):
        print(f"  {r:>3} " + "".join(f"{int(v):>7}" for v in row))


def cmd_fit(args) -> int:
    started = _now()
    file_cfg = _load_config_file(args.config)
    g, labels = _load_graph(args.graph)
    try:
        panel = read_panel_csv(io.StringIO(_read_text(args.panel)))
    except ValueError as e:
        raise ParseFailure(f"{args.panel}: {e}") from e
    panel = _align_panel(panel, labels)
    strict = _parse_bool(_merge(file_cfg, "strict_pd", args.strict_pd, "on"), "--strict-pd")
    seed = int(_merge(file_cfg, "seed", args.seed, 0))
    try:
        run_cfg = RunConfig(
            epsilon=float(_merge(file_cfg, "epsilon", args.epsilon, 0.01)),
            tol=float(_merge(file_cfg, "tol", args.tol, 1e-8)),
            max_steps=int(_merge(file_cfg, "max_steps", args.max_steps, 10**6)),
        )
    except ValueError as e:
        raise ConfigFailure(str(e)) from e

    warned = False
    if args.freeze_matrix:
        m = _build_matrix(_parse_payoff(_merge(file_cfg, "payoff", args.payoff, None)), strict)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            pred = predict_late(g, m, panel, run_cfg)
            obj = objective(g, m, panel, run_cfg)
        warned = any(issubclass(w.category, RuntimeWarning) for w in caught)
        report = BinReport.from_scores(panel.y0, panel.y1, pred.yhat)
        yhat = pred.yhat
        fit_meta = {"frozen": True, "evaluations": 0, "exhausted": False}
    else:
        settings = FitSettings(
            n_starts=int(_merge(file_cfg, "starts", args.starts, 16)),
            strict_pd=strict,
            seed=seed,
        )
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            result = fit_payoff(g, panel, run_cfg, settings)
        warned = result.exhausted
        m = result.matrix
        obj = result.objective
        report = result.report
        yhat = result.yhat
        fit_meta = {
            "frozen": False,
            "evaluations": result.evaluations,
            "exhausted": result.exhausted,
        }

    out = _out_dir(args)
    _write_json(
        out / "fit.json",
        {
            "matrix": m.to_dict(),
            "strict_pd": strict,
            "objective": obj,
            "bin_report": report.to_dict(),
            "seed": seed,
            "dynamics": run_cfg.to_dict(),
            **fit_meta,
        },
    )
    with (out / "bins.csv").open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["node", "y0", "y1", "yhat", "bin_true", "bin_pred"])
        for k, lab in enumerate(labels):
            writer.writerow(
                [
                    lab,
                    format(panel.y0[k], ".17g"),
                    format(panel.y1[k], ".17g"),
                    format(yhat[k], ".17g"),
                    int(report.bins_true[k]),
                    int(report.bins_pred[k]),
                ]
            )
    _write_id_map(out / "id_map.csv", labels)
    config = {
        "strict_pd": strict,
        "seed": seed,
        "freeze_matrix": bool(args.freeze_matrix),
        **run_cfg.to_dict(),
    }
    if args.freeze_matrix:
        config["payoff"] = m.to_dict()
    _write_manifest(out, "fit", config, {"graph": args.graph, "panel": args.panel}, started, seed=seed)

    print(f"objective (sum of squared bin errors): {obj:g}")
    _print_confusion(report)
    print(f"fitted matrix: a={m.a:.6g} b={m.b:.6g} c={m.c:.6g} d={m.d:.6g}")
    if warned:
        print("warning: fit or prediction did not fully converge", file=sys.stderr)
        return EXIT_NONCONVERGED
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="imidyn",
        description="Imitation dynamics on graphs under a prisoner's-dilemma payoff scheme.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--graph", required=True, help="edge-list file")
        p.add_argument("--payoff", help="payoff matrix as a,b,c,d")
        p.add_argument("--config", help="JSON config file; flags override its values")
        p.add_argument("--strict-pd", choices=["on", "off"], dest="strict_pd", default=None)
        p.add_argument("--out", required=True, help="output directory")

    sim = sub.add_parser("simulate", help="integrate the imitation dynamics")
    common(sim)
    sim.add_argument("--init", default=None, help="CSV path, constant:<v>, or uniform[:<seed>]")
    sim.add_argument("--epsilon", type=float, default=None)
    sim.add_argument("--tol", type=float, default=None)
    sim.add_argument("--max-steps", type=int, dest="max_steps", default=None)
    sim.add_argument("--record-every", type=int, dest="record_every", default=None)
    sim.add_argument("--integrator", choices=["euler", "rk4"], default=None)
    sim.add_argument("--seed", type=int, default=None)
    sim.set_defaults(func=cmd_simulate)

    ana = sub.add_parser("analyze", help="classify a state and report stability")
    common(ana)
    ana.add_argument("--state", required=True, help="node,x CSV of the state to analyze")
    ana.add_argument("--tol-x", type=float, dest="tol_x", default=None)
    ana.add_argument("--tol-p", type=float, dest="tol_p", default=None)
    ana.set_defaults(func=cmd_analyze)

    fit = sub.add_parser("fit", help="fit a payoff matrix to a score panel")
    common(fit)
    fit.add_argument("--panel", required=True, help="node,y0,y1 CSV of deviance scores")
    fit.add_argument("--epsilon", type=float, default=None)
    fit.add_argument("--tol", type=float, default=None)
    fit.add_argument("--max-steps", type=int, dest="max_steps", default=None)
    fit.add_argument("--seed", type=int, default=None)
    fit.add_argument("--starts", type=int, default=None, help="number of optimizer starts")
    fit.add_argument(
        "--freeze-matrix",
        action="store_true",
        help="evaluate the given --payoff matrix instead of optimizing",
    )
    fit.set_defaults(func=cmd_fit)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ParseFailure as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_PARSE
    except ConfigFailure as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as e:  # pragma: no cover - last-resort diagnostics
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
