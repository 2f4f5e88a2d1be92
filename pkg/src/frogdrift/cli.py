"""Command-line front end.

Exit codes: 0 ok, 1 configuration error, 2 inconclusive criterion,
3 simulation error, 4 law check above the TV threshold.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field

import numpy as np

from . import frogsim
from .bdsim import exact_law_Y
from .chainsim import exact_law_N
from .criteria import (
    INCONCLUSIVE,
    STANDARD,
    REMARK6,
    Continuous,
    Discrete,
    Schedule,
    criterion_report,
)
from .intensity import IntensityFn, ParameterError, from_spec, rescale_to_half_drift
from .rng import default_seed
from .stats import (
    SimulationError,
    SimulatorSpec,
    DegenerateSupportError,
    chi_square_gof,
    fan_out,
    histogram,
    mean_estimate,
    proportion_estimate,
    run_simulation,
    tv_distance,
)

COMMANDS = ("criterion", "simulate", "verify-law", "frogs", "sweep")
REPLICA_HEADER = ["replica", "final", "absorbed", "stop", "count"]
SWEEP_HEADER = ["param", "classification", "survival", "ci_lo", "ci_hi", "partial_value"]
CRITERION_HEADER = ["horizon", "partial_value", "increment"]

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_INCONCLUSIVE = 2
EXIT_SIMULATION = 3
EXIT_GATE = 4

_TOP_KEYS = {
    "command", "model", "intensity", "horizon", "replicas", "masterSeed", "checkpoints",
    "schedule", "output", "variant", "twoSided", "tvThreshold", "grid", "threads",
}
_SCHEDULE_KEYS = {"T0": "T0", "doublings": "doublings", "delta": "delta", "ratio": "ratio"}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    command: str
    model: Continuous | Discrete
    intensity: IntensityFn | None = None
    intensity_spec: dict | None = None
    horizon: float | None = None
    replicas: int = 10_000
    master_seed: int = 0
    checkpoints: list = field(default_factory=list)
    schedule: Schedule = field(default_factory=Schedule)
    output_path: str | None = None
    output_format: str = "csv"
    variant: str = STANDARD
    two_sided: IntensityFn | None = None
    tv_threshold: float = 0.02
    grid: dict | None = None
    threads: int = 1


# ---------------------------------------------------------------------------
# config parsing


def _require(cond: bool, where: str, msg: str) -> None:
    if not cond:
        raise ConfigError(f"field '{where}': {msg}")


def _number(d: dict, key: str, where: str, integer: bool = False):
    v = d[key]
    ok = isinstance(v, int) if integer else isinstance(v, (int, float))
    _require(ok and not isinstance(v, bool), f"{where}{key}", "must be an integer" if integer else "must be a number")
    return v


def _parse_model(raw) -> Continuous | Discrete:
    _require(isinstance(raw, dict), "model", "must be an object")
    kind = raw.get("type")
    try:
        if kind == "continuous":
            _require(set(raw) <= {"type", "lambda"}, "model", f"unknown keys {sorted(set(raw) - {'type', 'lambda'})}")
            _require("lambda" in raw, "model.lambda", "required")
            return Continuous(float(_number(raw, "lambda", "model.")))
        if kind == "discrete":
            _require(set(raw) <= {"type", "p"}, "model", f"unknown keys {sorted(set(raw) - {'type', 'p'})}")
            _require("p" in raw, "model.p", "required")
            return Discrete(float(_number(raw, "p", "model.")))
    except ParameterError as exc:
        raise ConfigError(f"field 'model': {exc}") from None
    raise ConfigError("field 'model.type': must be 'continuous' or 'discrete'")


def _parse_intensity(raw, where: str) -> IntensityFn:
    try:
        return from_spec(raw)
    except (ParameterError, ValueError) as exc:
        raise ConfigError(f"field '{where}': {exc}") from None


def _parse_schedule(raw) -> Schedule:
    _require(isinstance(raw, dict), "schedule", "must be an object")
    extra = set(raw) - set(_SCHEDULE_KEYS)
    _require(not extra, "schedule", f"unknown keys {sorted(extra)}")
    kw = {}
    for k in raw:
        kw[_SCHEDULE_KEYS[k]] = _number(raw, k, "schedule.", integer=(k == "doublings"))
    try:
        return Schedule(**kw)
    except ParameterError as exc:
        raise ConfigError(f"field 'schedule': {exc}") from None


def parse_config(text: str, command: str) -> ExperimentConfig:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    _require(isinstance(raw, dict), "<root>", "config must be a JSON object")
    extra = set(raw) - _TOP_KEYS
    _require(not extra, "<root>", f"unknown keys {sorted(extra)}")
    if "command" in raw:
        _require(raw["command"] == command, "command", f"config is for {raw['command']!r}, not {command!r}")
    _require("model" in raw, "model", "required")
    cfg = ExperimentConfig(command=command, model=_parse_model(raw["model"]))
    if "intensity" in raw:
        cfg.intensity_spec = raw["intensity"]
        cfg.intensity = _parse_intensity(raw["intensity"], "intensity")
    elif command != "frogs" or "twoSided" not in raw:
        raise ConfigError("field 'intensity': required")
    if "horizon" in raw:
        cfg.horizon = float(_number(raw, "horizon", ""))
        _require(cfg.horizon > 0 and math.isfinite(cfg.horizon), "horizon", "must be positive")
        if isinstance(cfg.model, Discrete):
            _require(cfg.horizon.is_integer(), "horizon", "must be an integer for the discrete model")
    if "replicas" in raw:
        cfg.replicas = _number(raw, "replicas", "", integer=True)
    if "masterSeed" in raw:
        cfg.master_seed = _number(raw, "masterSeed", "", integer=True)
    else:
        cfg.master_seed = default_seed()
    if "checkpoints" in raw:
        cps = raw["checkpoints"]
        _require(isinstance(cps, list) and all(isinstance(c, (int, float)) and not isinstance(c, bool) for c in cps),
                 "checkpoints", "must be a list of numbers")
        cfg.checkpoints = list(cps)
    if "schedule" in raw:
        cfg.schedule = _parse_schedule(raw["schedule"])
    if "output" in raw:
        out = raw["output"]
        _require(isinstance(out, dict) and set(out) <= {"path", "format"}, "output",
                 "must be an object with 'path' and/or 'format'")
        cfg.output_path = out.get("path")
        cfg.output_format = out.get("format", "csv")
    if "variant" in raw:
        _require(raw["variant"] in (STANDARD, REMARK6), "variant", "must be 'standard' or 'remark6'")
        cfg.variant = raw["variant"]
    if "twoSided" in raw:
        cfg.two_sided = _parse_intensity(raw["twoSided"], "twoSided")
    if "tvThreshold" in raw:
        cfg.tv_threshold = float(_number(raw, "tvThreshold", ""))
        _require(cfg.tv_threshold >= 0, "tvThreshold", "must be >= 0")
    if "grid" in raw:
        cfg.grid = raw["grid"]
    if "threads" in raw:
        cfg.threads = _number(raw, "threads", "", integer=True)
    return cfg


def _apply_flags(cfg: ExperimentConfig, args) -> None:
    if args.seed is not None:
        cfg.master_seed = args.seed
    if args.replicas is not None:
        cfg.replicas = args.replicas
    if args.threads is not None:
        cfg.threads = args.threads
    if args.output is not None:
        cfg.output_path = args.output
    if args.format is not None:
        cfg.output_format = args.format


def _validate(cfg: ExperimentConfig) -> None:
    _require(0 <= cfg.master_seed < 2**64, "masterSeed", "must fit in 64 unsigned bits")
    _require(cfg.replicas >= 1, "replicas", "must be >= 1")
    _require(cfg.threads >= 1, "threads", "must be >= 1")
    _require(cfg.output_format in ("csv", "json"), "output.format", "must be 'csv' or 'json'")
    if cfg.command in ("simulate", "frogs", "sweep"):
        _require(cfg.horizon is not None, "horizon", "required")
    if cfg.command == "sweep":
        _require(cfg.replicas >= 100, "replicas", "sweep survival estimates need at least 100")
    if cfg.command == "verify-law":
        _require(len(cfg.checkpoints) == 1 or cfg.horizon is not None, "checkpoints",
                 "give exactly one checkpoint (or a horizon)")
    h = cfg.horizon
    if h is not None:
        bad = [c for c in cfg.checkpoints if not 0 <= c <= h]
        _require(not bad, "checkpoints", f"must lie in [0, horizon]; got {bad}")
    if isinstance(cfg.model, Discrete):
        bad = [c for c in cfg.checkpoints if not (float(c).is_integer() and c >= 1)]
        _require(not bad, "checkpoints", f"discrete checkpoints must be integers >= 1; got {bad}")


# ---------------------------------------------------------------------------
# output


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def _json_safe(obj):
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _dump(obj) -> str:
    return json.dumps(_json_safe(obj), indent=2, sort_keys=True)


def _emit(cfg: ExperimentConfig, summary: dict, header=None, rows=None, out=None) -> None:
    """Summary JSON to stdout; the table (if any) to the output path.

    For ``simulate`` the summary is also written next to the table as
    ``<path>.summary.json``.
    """
    (out or sys.stdout).write(_dump(summary) + "\n")
    if cfg.output_path is None or header is None:
        return
    if cfg.output_format == "csv":
        text = _csv_text(header, rows)
    else:
        records = [dict(zip(header, (_json_safe(v.item() if hasattr(v, "item") else v) for v in r)))
                   for r in rows]
        text = _dump({"summary": summary, "rows": records}) + "\n"
    with open(cfg.output_path, "w", newline="") as fh:
        fh.write(text)
    if cfg.command == "simulate":
        with open(cfg.output_path + ".summary.json", "w") as fh:
            fh.write(_dump(summary) + "\n")


def _model_dict(model) -> dict:
    if isinstance(model, Continuous):
        return {"type": "continuous", "lambda": model.lam}
    return {"type": "discrete", "p": model.p}


# ---------------------------------------------------------------------------
# commands


def run_criterion(cfg: ExperimentConfig, out=None) -> int:
    rep = criterion_report(cfg.intensity, cfg.model, cfg.schedule, cfg.variant)
    rows = []
    prev = None
    for h, v in rep.checkpoints:
        rows.append((h, v, math.nan if prev is None else v - prev))
        prev = v
    summary = rep.as_dict()
    summary["model"] = _model_dict(cfg.model)
    summary["notes"] = rep.notes
    del summary["checkpoints"], summary["increments"]
    summary["finalHorizon"] = rep.checkpoints[-1][0]
    summary["finalValue"] = rep.final_value
    _emit(cfg, summary, CRITERION_HEADER, rows, out)
    return EXIT_INCONCLUSIVE if rep.classification == INCONCLUSIVE else EXIT_OK


def run_simulate(cfg: ExperimentConfig, out=None) -> int:
    spec = SimulatorSpec(cfg.intensity, cfg.model)
    res = run_simulation(spec, cfg.horizon, cfg.replicas, cfg.master_seed, cfg.threads, cfg.checkpoints)
    alive = int(np.count_nonzero(res.final > 0))
    summary = {
        "command": "simulate",
        "model": _model_dict(cfg.model),
        "horizon": cfg.horizon,
        "survival": proportion_estimate(alive, cfg.replicas, cfg.master_seed).as_dict(),
        "meanCount": mean_estimate(res.count.astype(float), cfg.master_seed).as_dict(),
        "counter": "V" if isinstance(cfg.model, Continuous) else "K",
        "checkpoints": [
            {"at": float(c), "meanValue": float(res.checkpoint_values[:, i].mean()),
             "survival": float(np.mean(res.checkpoint_values[:, i] > 0))}
            for i, c in enumerate(res.checkpoints)
        ],
    }
    rows = zip(range(cfg.replicas), res.final, res.absorbed, res.stop, res.count)
    _emit(cfg, summary, REPLICA_HEADER, rows, out)
    return EXIT_OK


def run_verify_law(cfg: ExperimentConfig, out=None) -> int:
    at = cfg.checkpoints[0] if cfg.checkpoints else cfg.horizon
    spec = SimulatorSpec(cfg.intensity, cfg.model)
    if isinstance(cfg.model, Continuous):
        _require(at > 0, "checkpoints", "must be positive")
        g = rescale_to_half_drift(cfg.intensity, cfg.model.lam)
        law = exact_law_Y(g, 2.0 * cfg.model.lam * at)
    else:
        at = int(at)
        law = exact_law_N(cfg.intensity, cfg.model, at)
    res = run_simulation(spec, at, cfg.replicas, cfg.master_seed, cfg.threads, [at])
    counts = histogram(res.free_values[:, 0])
    try:
        gof = chi_square_gof(counts, law).as_dict()
    except DegenerateSupportError:
        gof = {"tvDistance": tv_distance(counts, law), "chiSquareStat": None, "dof": 0,
               "pValue": None, "sampleSize": cfg.replicas}
    passed = gof["tvDistance"] < cfg.tv_threshold
    summary = {
        "command": "verify-law",
        "model": _model_dict(cfg.model),
        "checkpoint": at,
        "law": {"bernoulliQ": law.bernoulli_q, "poissonMean": law.poisson_mean},
        "tvThreshold": cfg.tv_threshold,
        "passed": passed,
        **gof,
    }
    rows = [(k, int(c), float(law.pmf(k))) for k, c in enumerate(counts)]
    _emit(cfg, summary, ["value", "observed", "expected_probability"], rows, out)
    return EXIT_OK if passed else EXIT_GATE


def run_frogs(cfg: ExperimentConfig, out=None) -> int:
    model = cfg.model
    horizon = cfg.horizon if isinstance(model, Continuous) else int(cfg.horizon)
    summary = {"command": "frogs", "model": _model_dict(model), "horizon": horizon}
    rows = []
    if cfg.intensity is not None:
        cps = sorted(set(cfg.checkpoints) | {horizon})
        parts = fan_out(lambda a, b: frogsim.run_ensemble(cfg.intensity, model, horizon, cfg.master_seed, a, b, cps),
                        cfg.replicas, cfg.threads)
        act = np.concatenate([p.activated for p in parts])
        front = np.concatenate([p.frontier for p in parts])
        sec = np.concatenate([p.section_counts for p in parts])
        final = sec[:, -1]
        stopped = front < horizon
        summary["survival"] = proportion_estimate(int(np.count_nonzero(final > 0)), cfg.replicas,
                                                  cfg.master_seed).as_dict()
        summary["returnsToOrigin"] = mean_estimate(act.astype(float), cfg.master_seed).as_dict()
        summary["frontierBelowHorizon"] = float(np.mean(stopped))
        summary["checkpoints"] = [{"at": float(c), "meanSectionCount": float(sec[:, i].mean())}
                                  for i, c in enumerate(cps)]
        rows = zip(range(cfg.replicas), final, stopped, front, act)
    if cfg.two_sided is not None:
        hits = np.concatenate(fan_out(
            lambda a, b: frogsim.left_hitters_ensemble(cfg.two_sided, model, cfg.master_seed, a, b),
            cfg.replicas, cfg.threads))
        summary["leftHitters"] = mean_estimate(hits.astype(float), cfg.master_seed).as_dict()
        if cfg.intensity is None:
            rows = zip(range(cfg.replicas), hits, np.zeros(hits.size, bool), np.full(hits.size, math.nan), hits)
    _emit(cfg, summary, REPLICA_HEADER, rows, out)
    return EXIT_OK


def _grid_intensities(cfg: ExperimentConfig):
    """(grid value, model, intensity) triples.

    With ``relative`` a C value is in units of the critical constant: 2 lam
    (log, continuous), 4 lam (loglog C2, continuous) or 1/kappa (discrete).
    """
    grid = cfg.grid
    _require(isinstance(grid, dict), "grid", "required for sweep")
    extra = set(grid) - {"param", "values", "relative"}
    _require(not extra, "grid", f"unknown keys {sorted(extra)}")
    _require(grid.get("param") in ("C", "p"), "grid.param", "must be 'C' or 'p'")
    values = grid.get("values")
    _require(isinstance(values, list) and len(values) > 0, "grid.values", "must be a non-empty list")
    _require(all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in values),
             "grid.values", "must be numbers")
    relative = bool(grid.get("relative", False))
    spec = dict(cfg.intensity_spec)
    out = []
    if grid["param"] == "C":
        key = {"log": "C", "loglog": "C2"}.get(spec["kind"])
        _require(key is not None, "grid.param", "C sweeps need a 'log' or 'loglog' intensity")
        if isinstance(cfg.model, Continuous):
            unit = 2.0 * cfg.model.lam
        else:
            unit = 1.0 / cfg.model.kappa
        if spec["kind"] == "loglog" and isinstance(cfg.model, Continuous):
            unit = 2.0 * unit
        for v in values:
            spec[key] = v * unit if relative else v
            out.append((v, cfg.model, _parse_intensity(dict(spec), "intensity")))
    else:
        _require(isinstance(cfg.model, Discrete), "grid.param", "p sweeps need the discrete model")
        for v in values:
            try:
                out.append((v, Discrete(float(v)), cfg.intensity))
            except ParameterError as exc:
                raise ConfigError(f"field 'grid.values': {exc}") from None
    return out


def run_sweep(cfg: ExperimentConfig, out=None) -> int:
    rows = []
    points = []
    for v, model, f in _grid_intensities(cfg):
        rep = criterion_report(f, model, cfg.schedule, cfg.variant)
        spec = SimulatorSpec(f, model)
        absorbing = isinstance(model, Continuous)
        res = run_simulation(spec, cfg.horizon, cfg.replicas, cfg.master_seed, cfg.threads, absorbing=absorbing)
        est = proportion_estimate(int(np.count_nonzero(res.final > 0)), cfg.replicas, cfg.master_seed)
        rows.append((float(v), rep.classification, est.mean, est.ci95[0], est.ci95[1], rep.final_value))
        points.append({"param": float(v), "classification": rep.classification, "survival": est.as_dict(),
                       "tailExponent": rep.tail_exponent})
    summary = {"command": "sweep", "model": _model_dict(cfg.model), "param": cfg.grid["param"],
               "horizon": cfg.horizon, "points": points}
    _emit(cfg, summary, SWEEP_HEADER, rows, out)
    return EXIT_OK


_RUNNERS = {
    "criterion": run_criterion,
    "simulate": run_simulate,
    "verify-law": run_verify_law,
    "frogs": run_frogs,
    "sweep": run_sweep,
}


# ---------------------------------------------------------------------------
# entry point


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: config error: {message}\n")
        sys.exit(EXIT_CONFIG)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="frogdrift", description="Frog model with drift: criteria and simulation.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, help="JSON experiment config")
        s.add_argument("--seed", type=int, help="master seed (overrides config and FROGDRIFT_SEED)")
        s.add_argument("--replicas", type=int)
        s.add_argument("--threads", type=int)
        s.add_argument("--output", help="table output path")
        s.add_argument("--format", choices=("csv", "json"))
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with open(args.config) as fh:
            text = fh.read()
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = parse_config(text, args.command)
        _apply_flags(cfg, args)
        _validate(cfg)
        return _RUNNERS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SimulationError, RuntimeError) as exc:
        print(f"simulation error: {exc}", file=sys.stderr)
        return EXIT_SIMULATION
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
