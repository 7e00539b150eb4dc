"""Command-line entry point: config-driven experiments with persistent results.

Commands: eigen | yamabe | classify | prescribe | compactify | sweep.
Exit codes: 0 success, 1 configuration error, 2 solver did not converge,
3 solve/verdict inconsistency (the equivalence-theorem violation).

Outputs are deterministic for a fixed config and seed: CSV bodies are
byte-identical across runs and JSON keys are sorted.  The seed feeds a
counter-based generator and is recorded in every header.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .config import ExperimentConfig, load_config_file, serialize_config
from .compactify import kelvin_compactify, regularity_check
from .errors import InconsistentOutcome, InvalidConfig, NoConvergence, YamabeLabError
from .metrics import catalog, target_catalog
from .prescribe import PipelineOptions, prescribe_curvature
from .serialize import write_csv, write_field, write_json, write_metric
from .spectral import DescentOptions, classify_sign, lambda_delta, yamabe_invariant

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NO_CONVERGENCE = 2
EXIT_INCONSISTENT = 3


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="yamabelab",
                                     description="conformal set-invariant laboratory")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("eigen", "yamabe", "classify", "prescribe", "compactify", "sweep"):
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", required=True, help="path to the JSON config")
        cmd.add_argument("--out", default="out", help="output directory")
        cmd.add_argument("--seed", type=int, default=None, help="override config seed")
        cmd.add_argument("--threads", type=int, default=1, help="sweep worker count")
        cmd.add_argument("--quiet", action="store_true", help="suppress progress output")
    return parser


def _header(cfg: ExperimentConfig, seed: int) -> dict:
    return {"version": __version__, "config": serialize_config(cfg), "seed": seed,
            "rng": "philox"}


def _say(args, message: str) -> None:
    if not args.quiet:
        print(message)


def _deltas(cfg: ExperimentConfig, n: int) -> tuple:
    if cfg.deltas:
        return cfg.deltas
    dstar = (2.0 - n) / 2.0
    return (dstar + 0.25, dstar + 0.5, dstar + 1.0)


def _finite_or_str(x: float):
    if x is None or (isinstance(x, float) and math.isfinite(x)):
        return x
    return "+inf" if x > 0 else "-inf"


def cmd_eigen(cfg: ExperimentConfig, args, seed: int) -> int:
    grid = cfg.build_grid()
    metric = cfg.build_metric(grid)
    region = cfg.build_region(grid)
    delta = cfg.delta if cfg.delta is not None else _deltas(cfg, grid.dim)[1]
    tol = float(cfg.tolerances.get("solver_tol", 1e-9))
    result = lambda_delta(metric, region, delta, tol=tol)
    payload = _header(cfg, seed)
    payload.update({"lambda": _finite_or_str(result.lam), "delta": delta,
                    "iterations": result.iterations, "residual": result.residual,
                    "converged": result.converged})
    os.makedirs(args.out, exist_ok=True)
    write_json(os.path.join(args.out, "eigen_result.json"), payload)
    if result.eigenfunction is not None:
        write_field(os.path.join(args.out, "eigenfunction"), grid, result.eigenfunction,
                    name="u", extra_header={"seed": seed})
    _say(args, f"lambda_delta = {result.lam!r} (residual {result.residual:.2e})")
    return EXIT_OK if result.converged or result.is_infinite else EXIT_NO_CONVERGENCE


def cmd_yamabe(cfg: ExperimentConfig, args, seed: int) -> int:
    grid = cfg.build_grid()
    metric = cfg.build_metric(grid)
    region = cfg.build_region(grid)
    n = grid.dim
    big_n = 2.0 * n / (n - 2.0)
    stages = int(cfg.q_schedule.get("stages", 8))
    q0 = float(cfg.q_schedule.get("q0", 2.5))
    anneal = tuple(big_n - (big_n - q0) * 0.5 ** j for j in range(stages))
    est = yamabe_invariant(metric, region,
                           DescentOptions(q_schedule=anneal, max_iter=600))
    payload = _header(cfg, seed)
    payload.update({"y_value": _finite_or_str(est.y_value),
                    "stationarity": est.stationarity, "converged": est.converged,
                    "trace": [list(t) for t in est.trace]})
    os.makedirs(args.out, exist_ok=True)
    write_json(os.path.join(args.out, "yamabe_result.json"), payload)
    if est.minimizer is not None:
        write_field(os.path.join(args.out, "minimizer"), grid, est.minimizer, name="u",
                    extra_header={"seed": seed})
    _say(args, f"y estimate = {est.y_value!r}")
    return EXIT_OK if est.converged or est.is_infinite else EXIT_NO_CONVERGENCE


def cmd_classify(cfg: ExperimentConfig, args, seed: int) -> int:
    grid = cfg.build_grid()
    metric = cfg.build_metric(grid)
    region = cfg.build_region(grid)
    verdict = classify_sign(metric, region, _deltas(cfg, grid.dim),
                            null_band=cfg.tolerances.get("null_band"))
    payload = _header(cfg, seed)
    payload.update({"verdict": verdict.verdict,
                    "lambdas": {str(k): _finite_or_str(v) for k, v in verdict.lambdas.items()},
                    "y_estimate": _finite_or_str(verdict.y_estimate),
                    "null_band": verdict.null_band})
    os.makedirs(args.out, exist_ok=True)
    write_json(os.path.join(args.out, "classify_result.json"), payload)
    _say(args, f"verdict: {verdict.verdict}")
    return EXIT_OK


def _pipeline_options(cfg: ExperimentConfig) -> PipelineOptions:
    tol = cfg.tolerances
    return PipelineOptions(
        solver_tol=float(tol.get("solver_tol", 1e-9)),
        stage_tol=float(tol.get("stage_tol", 1e-6)),
        newton_tol=float(tol.get("newton_tol", 1e-7)),
        blowup_threshold=float(tol.get("blowup_threshold", 1e3)),
        null_band=tol.get("null_band"),
        accept_tol=float(tol.get("accept_tol", 1e-6)))


def _prescribe_case(grid, metric, target, cfg: ExperimentConfig):
    return prescribe_curvature(metric, target, schedule=cfg.schedule(grid.dim),
                               opts=_pipeline_options(cfg))


def cmd_prescribe(cfg: ExperimentConfig, args, seed: int) -> int:
    grid = cfg.build_grid()
    metric = cfg.build_metric(grid)
    target = cfg.build_target(grid)
    try:
        result = _prescribe_case(grid, metric, target, cfg)
    except InconsistentOutcome as exc:
        print(f"inconsistent outcome: {exc}", file=sys.stderr)
        return EXIT_INCONSISTENT
    payload = _header(cfg, seed)
    payload.update({"status": result.status, "reason": result.reason,
                    "residual": _finite_or_str(result.residual),
                    "residual_fd": _finite_or_str(result.residual_fd),
                    "verdict": result.verdict.verdict if result.verdict else None})
    os.makedirs(args.out, exist_ok=True)
    write_json(os.path.join(args.out, "prescribe_result.json"), payload)
    stage_rows = [(str(row[1]), float(row[2]), float(row[3]), float(row[4]), int(row[5]))
                  for row in result.trace if row[0] == "stage"]
    write_csv(os.path.join(args.out, "prescribe_trace.csv"),
              ["q", "f_value", "sup_norm", "el_residual", "iterations"], stage_rows)
    if result.phi is not None:
        write_field(os.path.join(args.out, "phi"), grid, result.phi, name="phi",
                    extra_header={"seed": seed})
    _say(args, f"status: {result.status} ({result.reason or 'ok'})")
    return EXIT_OK


def cmd_compactify(cfg: ExperimentConfig, args, seed: int) -> int:
    grid = cfg.build_grid()
    metric = cfg.build_metric(grid)
    chart = kelvin_compactify(metric, float(cfg.compactify.get("inner_radius", 0.5)))
    p_exp = float(cfg.compactify.get("p", 2.5))
    report = regularity_check(chart, p_exp,
                              ball_radius=cfg.compactify.get("ball_radius"))
    payload = _header(cfg, seed)
    payload.update({"inner_radius": chart.inner_radius,
                    "chart_nodes": chart.s_grid.node_count,
                    "regularity": report.as_dict()})
    os.makedirs(args.out, exist_ok=True)
    write_json(os.path.join(args.out, "compactify_result.json"), payload)
    rows = ((i, float(chart.s_grid.r[i]), float(chart.psi_bar[i]), float(chart.kbar[i]),
             float(chart.base_curv_bar[i])) for i in range(chart.s_grid.node_count))
    write_csv(os.path.join(args.out, "chart.csv"),
              ["index", "s", "psi_bar", "kbar", "base_curvature"], rows)
    write_metric(os.path.join(args.out, "metric"), metric, extra_header={"seed": seed})
    _say(args, f"chart with {chart.s_grid.node_count} nodes; "
               f"hardy ratio {report.hardy_ratio:.3g}")
    return EXIT_OK


def _sweep_cases(cfg: ExperimentConfig):
    metrics = cfg.sweep.get("metrics") or [cfg.metric]
    targets = cfg.sweep.get("targets") or [cfg.target]
    return [(m, t) for m in metrics for t in targets]


def cmd_sweep(cfg: ExperimentConfig, args, seed: int) -> int:
    grid = cfg.build_grid()
    cases = _sweep_cases(cfg)

    def run(case):
        mspec, tspec = case
        metric = cfg.build_metric(grid, mspec)
        target = cfg.build_target(grid, tspec)
        try:
            res = _prescribe_case(grid, metric, target, cfg)
            sups = [float(row[3]) for row in res.trace if row[0] == "stage"]
            return {"metric": mspec["name"], "target": tspec["name"],
                    "verdict": res.verdict.verdict if res.verdict else "n/a",
                    "status": res.status,
                    "residual": res.residual, "sup_first": sups[0] if sups else math.nan,
                    "sup_last": sups[-1] if sups else math.nan, "error": ""}
        except InconsistentOutcome as exc:
            return {"metric": mspec["name"], "target": tspec["name"], "verdict": "n/a",
                    "status": "Inconsistent", "residual": math.nan,
                    "sup_first": math.nan, "sup_last": math.nan, "error": str(exc)[:120]}

    if args.threads > 1:
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            rows = list(pool.map(run, cases))
    else:
        rows = [run(c) for c in cases]

    inconsistent = [r for r in rows
                    if r["status"] == "Inconsistent"
                    or (r["status"] == "Solved") != (r["verdict"] == "Positive")]
    os.makedirs(args.out, exist_ok=True)
    write_csv(os.path.join(args.out, "sweep.csv"),
              ["metric", "target", "verdict", "status", "residual", "sup_first", "sup_last"],
              ((r["metric"], r["target"], r["verdict"], r["status"],
                float(r["residual"]) if r["residual"] is not None else math.nan,
                float(r["sup_first"]), float(r["sup_last"])) for r in rows))
    payload = _header(cfg, seed)
    payload.update({"cases": len(rows), "inconsistent": len(inconsistent),
                    "rows": rows})
    write_json(os.path.join(args.out, "sweep_result.json"), payload)
    for r in rows:
        _say(args, f"{r['metric']:16s} {r['target']:18s} {r['verdict']:9s} {r['status']}")
    if inconsistent:
        print(f"{len(inconsistent)} inconsistent case(s)", file=sys.stderr)
        return EXIT_INCONSISTENT
    return EXIT_OK


_COMMANDS = {"eigen": cmd_eigen, "yamabe": cmd_yamabe, "classify": cmd_classify,
             "prescribe": cmd_prescribe, "compactify": cmd_compactify, "sweep": cmd_sweep}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = load_config_file(args.config)
    except InvalidConfig as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    seed = args.seed if args.seed is not None else cfg.seed
    np.random.default_rng(np.random.Philox(seed))  # seed recorded; suites derive from it
    try:
        return _COMMANDS[args.command](cfg, args, seed)
    except NoConvergence as exc:
        print(f"no convergence: {exc}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    except InvalidConfig as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except YamabeLabError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
