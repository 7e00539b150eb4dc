"""Experiment configuration: strict schema, round-trip parse/serialize.

The config is one JSON document.  Unknown keys anywhere are hard errors so
typos cannot silently change an experiment.  parse(serialize(cfg)) is the
identity on the normalized form.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import InvalidConfig
from .grid import Grid, Region, build_grid
from .metrics import CurvatureTarget, catalog, target_catalog

__all__ = ["ExperimentConfig", "parse_config", "load_config_file", "serialize_config"]

_GRID_KEYS = {
    "radial": {"mode", "dimension", "r_max", "node_count", "stretch"},
    "periodic": {"mode", "dimension", "box_length", "nodes_per_axis"},
}
_REGION_KINDS = {"whole", "empty", "ball", "annulus", "exterior", "intervals"}
_TOL_KEYS = {"solver_tol", "null_band", "blowup_threshold", "stage_tol", "newton_tol",
             "accept_tol"}
_TOP_KEYS = {"grid", "metric", "region", "target", "deltas", "delta", "q_schedule",
             "tolerances", "compactify", "sweep", "seed"}


def _require_keys(section: dict, allowed: set, where: str) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise InvalidConfig(f"unknown key(s) {sorted(unknown)} in {where}; "
                            f"allowed: {sorted(allowed)}")


@dataclass(frozen=True)
class ExperimentConfig:
    grid: dict
    metric: dict = field(default_factory=lambda: {"name": "euclidean", "params": {}})
    region: dict = field(default_factory=lambda: {"kind": "whole"})
    target: dict = field(default_factory=lambda: {"name": "zero", "params": {}})
    deltas: tuple = ()
    delta: float | None = None
    q_schedule: dict = field(default_factory=lambda: {"stages": 8, "q0": 2.5})
    tolerances: dict = field(default_factory=dict)
    compactify: dict = field(default_factory=lambda: {"inner_radius": 0.5, "p": 2.5})
    sweep: dict = field(default_factory=dict)
    seed: int = 0

    def build_grid(self) -> Grid:
        return build_grid(dict(self.grid))

    def build_metric(self, grid: Grid, spec: dict | None = None):
        spec = spec if spec is not None else self.metric
        return catalog(spec["name"], grid, spec.get("params", {}))

    def build_region(self, grid: Grid) -> Region:
        kind = self.region["kind"]
        if kind == "whole":
            return grid.whole()
        if kind == "empty":
            return grid.empty()
        if kind == "ball":
            return grid.ball(self.region["radius"])
        if kind == "annulus":
            return grid.annulus(self.region["r_inner"], self.region["r_outer"])
        if kind == "exterior":
            return grid.exterior(self.region["radius"])
        return Region(grid, intervals=tuple(tuple(iv) for iv in self.region["intervals"]))

    def build_target(self, grid: Grid, spec: dict | None = None) -> CurvatureTarget:
        spec = spec if spec is not None else self.target
        return target_catalog(spec["name"], grid, spec.get("params", {}))

    def schedule(self, n: int) -> tuple:
        from .prescribe import default_q_schedule
        return default_q_schedule(n, stages=int(self.q_schedule.get("stages", 8)),
                                  q0=float(self.q_schedule.get("q0", 2.5)))


def parse_config(doc: dict) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise InvalidConfig("config root must be a JSON object")
    _require_keys(doc, _TOP_KEYS, "config root")
    if "grid" not in doc:
        raise InvalidConfig("config requires a 'grid' section")

    grid_sec = dict(doc["grid"])
    mode = grid_sec.get("mode")
    if mode not in _GRID_KEYS:
        raise InvalidConfig(f"grid.mode must be 'radial' or 'periodic', got {mode!r}")
    _require_keys(grid_sec, _GRID_KEYS[mode], "grid")

    metric_sec = dict(doc.get("metric", {"name": "euclidean"}))
    _require_keys(metric_sec, {"name", "params"}, "metric")
    metric_sec.setdefault("params", {})

    region_sec = dict(doc.get("region", {"kind": "whole"}))
    kind = region_sec.get("kind")
    if kind not in _REGION_KINDS:
        raise InvalidConfig(f"region.kind must be one of {sorted(_REGION_KINDS)}, got {kind!r}")
    allowed = {"whole": {"kind"}, "empty": {"kind"}, "ball": {"kind", "radius"},
               "annulus": {"kind", "r_inner", "r_outer"}, "exterior": {"kind", "radius"},
               "intervals": {"kind", "intervals"}}[kind]
    _require_keys(region_sec, allowed, "region")

    target_sec = dict(doc.get("target", {"name": "zero"}))
    _require_keys(target_sec, {"name", "params"}, "target")
    target_sec.setdefault("params", {})

    deltas = tuple(float(d) for d in doc.get("deltas", ()))
    delta = doc.get("delta")
    delta = None if delta is None else float(delta)

    qsec = dict(doc.get("q_schedule", {"stages": 8, "q0": 2.5}))
    _require_keys(qsec, {"stages", "q0"}, "q_schedule")
    qsec = {"stages": int(qsec.get("stages", 8)), "q0": float(qsec.get("q0", 2.5))}

    tol = dict(doc.get("tolerances", {}))
    _require_keys(tol, _TOL_KEYS, "tolerances")
    for key, val in tol.items():
        if val is not None and float(val) <= 0.0:
            raise InvalidConfig(f"tolerances.{key} must be positive, got {val}")

    comp = dict(doc.get("compactify", {"inner_radius": 0.5, "p": 2.5}))
    _require_keys(comp, {"inner_radius", "p", "ball_radius"}, "compactify")
    comp.setdefault("inner_radius", 0.5)
    comp.setdefault("p", 2.5)

    sweep = dict(doc.get("sweep", {}))
    _require_keys(sweep, {"metrics", "targets"}, "sweep")
    for entry in sweep.get("metrics", []) + sweep.get("targets", []):
        _require_keys(dict(entry), {"name", "params"}, "sweep entry")

    return ExperimentConfig(grid=grid_sec, metric=metric_sec, region=region_sec,
                            target=target_sec, deltas=deltas, delta=delta,
                            q_schedule=qsec, tolerances=tol, compactify=comp,
                            sweep=sweep, seed=int(doc.get("seed", 0)))


def serialize_config(cfg: ExperimentConfig) -> dict:
    out = {"grid": dict(cfg.grid), "metric": dict(cfg.metric),
           "region": dict(cfg.region), "target": dict(cfg.target),
           "deltas": list(cfg.deltas), "q_schedule": dict(cfg.q_schedule),
           "tolerances": dict(cfg.tolerances), "compactify": dict(cfg.compactify),
           "sweep": dict(cfg.sweep), "seed": cfg.seed}
    if cfg.delta is not None:
        out["delta"] = cfg.delta
    return out


def load_config_file(path: str) -> ExperimentConfig:
    try:
        with open(path) as handle:
            doc = json.load(handle)
    except OSError as exc:
        raise InvalidConfig(f"cannot read config {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise InvalidConfig(f"config {path} is not valid JSON: {exc}")
    return parse_config(doc)
