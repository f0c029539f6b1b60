"""Experiment runner: JSON config in, CSV/JSON reports out.

    heatwalk run --config exp.json --out results/ [--jobs 2] [--seed 7]
    heatwalk validate --config exp.json
    heatwalk schema
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import os
import sys
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Optional

import jsonschema
import numpy as np

from .distributions import DistributionError, make_step_distribution, moment_abs
from .heatref import DEFAULT_QUAD_ORDER, DEFAULT_TOL, HeatReference
from .lattice_scheme import DEFAULT_DELTA, DEFAULT_TAIL_TOL, build_field
from .testfn import TestFunctionError, make_test_function
from .verifier import (
    BOUND_SLACK, SIGMA_TOL, InfiniteMoment, _clean, cor22_audit, doubling_explore, epsilon_n,
    fit_rate, lemma21_check, sup_gap, theorem12_check,
)

log = logging.getLogger("heatwalk")

OPS = ("sup_gap", "epsilon_n", "doubling", "theorem12", "audits")
CSV_COLUMNS = ("experiment_id", "n", "gap_sup", "sigma_n", "sigma_tilde_n", "epsilon_n", "c_n",
               "C_n", "k0_over_n_minus_s0", "slope", "r2", "status")
OK_STATUSES = ("pass", "degenerate", "vacuous")
EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2

DEFAULT_TOLERANCES = {
    "sigma_tol": SIGMA_TOL,
    "bound_slack": BOUND_SLACK,
    "tail_tol": DEFAULT_TAIL_TOL,
    "quad_tol": DEFAULT_TOL,
    "quad_order": DEFAULT_QUAD_ORDER,
}
# slope thresholds for a "pass" on rate experiments
DEFAULT_EXPECT = {
    "sup_gap": {"slope_max": -0.35},
    "epsilon_n": {"slope_max": -0.4},
    "doubling": {"slope_max": -0.4},
}

_law = {
    "type": "object",
    "required": ["name"],
    "properties": {"name": {"type": "string"}, "params": {"type": "object"}},
    "additionalProperties": False,
}

CONFIG_SCHEMA: dict = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "heatwalk experiment config",
    "type": "object",
    "required": ["experiments"],
    "additionalProperties": False,
    "properties": {
        "output_dir": {"type": "string"},
        "tolerances": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "sigma_tol": {"type": "number", "exclusiveMinimum": 0},
                "bound_slack": {"type": "number", "minimum": 0},
                "tail_tol": {"type": "number", "exclusiveMinimum": 0},
                "quad_tol": {"type": "number", "exclusiveMinimum": 0},
                "quad_order": {"type": "integer", "minimum": 4},
            },
        },
        "experiments": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["id", "op", "distribution", "test_function", "n_schedule"],
                "additionalProperties": False,
                "properties": {
                    "id": {"type": "string", "pattern": "^[A-Za-z0-9_.-]+$"},
                    "op": {"enum": list(OPS)},
                    "distribution": _law,
                    "test_function": _law,
                    "n_schedule": {
                        "type": "object",
                        "required": ["start", "factor", "count"],
                        "additionalProperties": False,
                        "properties": {
                            "start": {"type": "integer", "minimum": 1},
                            "factor": {"type": "number"},
                            "count": {"type": "integer", "minimum": 1},
                        },
                    },
                    "gamma": {"type": "number"},
                    "box": {
                        "type": "object",
                        "additionalProperties": False,
                        "properties": {
                            "L": {"type": "number", "exclusiveMinimum": 0},
                            "delta": {"type": "number", "exclusiveMinimum": 0},
                        },
                    },
                    "seed": {"type": "integer", "minimum": 0},
                    "mc_samples": {"type": "integer", "minimum": 100},
                    "expect": {
                        "type": "object",
                        "additionalProperties": False,
                        "properties": {
                            "slope_max": {"type": "number"},
                            "slope_min": {"type": "number"},
                            "r2_min": {"type": "number"},
                        },
                    },
                },
            },
        },
    },
}


class ConfigError(ValueError):
    """Invalid config; ``violations`` lists every problem found."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


@dataclass
class ExperimentSpec:
    id: str
    op: str
    distribution: dict
    test_function: dict
    ns: list
    gamma: float = 1.0
    box: dict = field(default_factory=dict)
    seed: int = 0
    mc_samples: int = 10**5
    expect: dict = field(default_factory=dict)


@dataclass
class ExperimentConfig:
    experiments: list
    output_dir: Optional[str] = None
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    config_hash: str = ""

    def with_seed(self, seed: int) -> "ExperimentConfig":
        exps = [ExperimentSpec(**{**asdict(e), "seed": seed}) for e in self.experiments]
        h = hashlib.sha256(f"{self.config_hash}:seed={seed}".encode()).hexdigest()
        return ExperimentConfig(exps, self.output_dir, dict(self.tolerances), h)


@dataclass
class RunReport:
    statuses: dict
    artifacts: dict
    wall_clock: dict
    config_hash: str
    started: str = ""
    finished: str = ""

    @property
    def exit_code(self) -> int:
        ok = all(s in OK_STATUSES for s in self.statuses.values())
        return EXIT_OK if ok else EXIT_FAIL


def schedule(start: int, factor: float, count: int) -> list:
    return [int(round(start * factor**i)) for i in range(count)]


def _where(path) -> str:
    out = ""
    for p in path:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else p)
    return out or "<root>"


def parse_config(raw: Any, source: str = "<config>") -> ExperimentConfig:
    """Validate a decoded config; raises ConfigError with every violation."""
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(raw), key=lambda e: (list(map(str, e.path)), e.message))
    problems = [f"{_where(e.path)}: {e.message}" for e in errors]
    if problems or not isinstance(raw, dict):
        raise ConfigError(problems or ["config must be a JSON object"])

    seen: dict[str, int] = {}
    exps = []
    for i, e in enumerate(raw["experiments"]):
        where = f"experiments[{i}]"
        if e["id"] in seen:
            problems.append(f"{where}.id: duplicate id {e['id']!r} "
                            f"(experiments[{seen[e['id']]}] and experiments[{i}])")
        else:
            seen[e["id"]] = i
        sch = e["n_schedule"]
        ns = schedule(sch["start"], sch["factor"], sch["count"])
        if any(b <= a for a, b in zip(ns, ns[1:])):
            problems.append(f"{where}.n_schedule: n-schedule must be strictly increasing, got {ns}")
        gamma = e.get("gamma", 1.0)
        if not 0 < gamma <= 1:
            problems.append(f"{where}.gamma: γ ∈ (0,1] required, got {gamma}")
        dist = None
        try:
            dist = make_step_distribution(e["distribution"])
        except (DistributionError, ValueError, TypeError) as exc:
            problems.append(f"{where}.distribution: {exc}")
        try:
            make_test_function(e["test_function"], dist.dim if dist else None)
        except (TestFunctionError, ValueError, TypeError) as exc:
            problems.append(f"{where}.test_function: {exc}")
        exps.append(ExperimentSpec(
            id=e["id"], op=e["op"], distribution=e["distribution"],
            test_function=e["test_function"], ns=ns, gamma=float(gamma), box=e.get("box", {}),
            seed=e.get("seed", 0), mc_samples=e.get("mc_samples", 10**5),
            expect=e.get("expect", {}),
        ))
    if problems:
        raise ConfigError(problems)
    tol = {**DEFAULT_TOLERANCES, **raw.get("tolerances", {})}
    digest = hashlib.sha256(json.dumps(raw, sort_keys=True, separators=(",", ":")).encode())
    return ExperimentConfig(exps, raw.get("output_dir"), tol, digest.hexdigest())


def validate_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError([f"{path}: no such file"])
    text = path.read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"{path}: parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}"])
    return parse_config(raw, str(path))


# ---------------------------------------------------------------------------
# execution


def _num(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    v = float(v)
    return repr(v) if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")


def _row(eid, n, **kw) -> dict:
    row = {c: "" for c in CSV_COLUMNS}
    row.update(experiment_id=eid, n=str(n))
    for k, v in kw.items():
        row[k] = _num(v)
    return row


def _csv_text(rows) -> str:
    lines = [",".join(CSV_COLUMNS)]
    for r in rows:
        lines.append(",".join(_csv_field(r[c]) for c in CSV_COLUMNS))
    return "\n".join(lines) + "\n"


def _csv_field(s: str) -> str:
    return f'"{s}"' if ("," in s or '"' in s) else s


def atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _dump(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def _rate_status(fit, expect: dict) -> str:
    lo, hi, r2 = expect.get("slope_min"), expect.get("slope_max"), expect.get("r2_min")
    bad = []
    if hi is not None and fit.slope > hi:
        bad.append(f"slope {fit.slope:.3f} > {hi}")
    if lo is not None and fit.slope < lo:
        bad.append(f"slope {fit.slope:.3f} < {lo}")
    if r2 is not None and fit.r2 < r2:
        bad.append(f"r2 {fit.r2:.3f} < {r2}")
    return "pass" if not bad else "fail: " + ", ".join(bad)


def _try_fit(points):
    try:
        return fit_rate(points)
    except ValueError:
        return None


def execute(exp: ExperimentSpec, tol: dict) -> tuple[str, list, dict]:
    """Run one experiment; returns (status, csv rows, JSON record)."""
    dist = make_step_distribution(exp.distribution)
    f = make_test_function(exp.test_function, dist.dim)
    L, delta = exp.box.get("L"), exp.box.get("delta", DEFAULT_DELTA)
    expect = {**DEFAULT_EXPECT.get(exp.op, {}), **exp.expect}

    def ref():
        return HeatReference(f, dist.cov, quad_order=tol["quad_order"], tol=tol["quad_tol"])

    def field_for(n, derivs):
        return build_field(f, dist, n, L=L, delta=delta, derivs=derivs, tail_tol=tol["tail_tol"])

    rows, record = [], {"id": exp.id, "op": exp.op, "ns": exp.ns}
    if exp.op == "sup_gap":
        R = ref()
        reps = [sup_gap(f, dist, n, R, L=L, delta=delta, mc_samples=exp.mc_samples,
                        seed=exp.seed + 1000 * i,
                        fld=field_for(n, 0) if dist.is_lattice else None)
                for i, n in enumerate(exp.ns)]
        record["reports"] = [r.as_dict() for r in reps]
        fit = _try_fit([(r.n, r.gap_sup, r.max_stderr) for r in reps])
        if dist.is_lattice:
            status = _rate_status(fit, expect) if fit else "pass"
        elif all(r.gap_sup <= 3 * r.max_stderr for r in reps):
            status = "pass"
        else:
            status = (_rate_status(fit, expect) if fit
                      else "fail: gap exceeds Monte Carlo error and too few points resolve a rate")
        record["moment3"] = moment_abs(dist, 3.0)
        for r in reps:
            rows.append(_row(exp.id, r.n, gap_sup=r.gap_sup, sigma_n=r.sigma_n,
                             sigma_tilde_n=r.sigma_tilde_n))
    elif exp.op == "epsilon_n":
        reps = [epsilon_n(f, dist, n, fld=field_for(n, 2)) for n in exp.ns]
        record["reports"] = [r.as_dict() for r in reps]
        if all(r.epsilon <= 1e-12 for r in reps):
            fit, status = None, "pass"
        else:
            fit = _try_fit([(r.n, r.epsilon) for r in reps])
            status = _rate_status(fit, expect) if fit else "pass"
        for r in reps:
            rows.append(_row(exp.id, r.n, epsilon_n=r.epsilon))
    elif exp.op == "doubling":
        R = ref()
        reps = [doubling_explore(f, dist, n, R, fld=field_for(n, 2) if dist.is_lattice else None,
                                 L=L, delta=delta, sigma_tol=tol["sigma_tol"])
                for n in exp.ns]
        record["reports"] = [r.as_dict() for r in reps]
        live = [r for r in reps if not r.degenerate]
        fit = _try_fit([(r.n, r.time_gap) for r in live if r.time_gap > 0])
        if not live:
            status = "degenerate"
        elif not all(r.claim_sup_phi for r in live):
            status = "fail: sup phi <= sigma_n/2"
        else:
            status = _rate_status(fit, expect) if fit else "pass"
        for r in reps:
            rows.append(_row(exp.id, r.n, sigma_n=r.sigma_n, epsilon_n=r.epsilon_n, c_n=r.c_n,
                             C_n=r.C_n, k0_over_n_minus_s0=None if r.degenerate
                             else r.k0 / r.n - r.s0))
    elif exp.op == "theorem12":
        rec = theorem12_check(f, dist, ref(), exp.ns, exp.gamma, N=exp.mc_samples, seed=exp.seed)
        record["report"] = rec.as_dict()
        fit = _try_fit([(n, g, s) for n, g, s in zip(rec.ns, rec.gaps, rec.stderrs)])
        status = "pass" if rec.bounded else "fail: constant sequence unbounded"
        for n, g in zip(rec.ns, rec.gaps):
            rows.append(_row(exp.id, n, gap_sup=g))
    elif exp.op == "audits":
        R = ref() if dist.is_lattice else None
        audits, vac_all, ok = [], True, True
        for n in exp.ns:
            lem = lemma21_check(f, dist, scale=1 / math.sqrt(n))
            entry = {"n": n, "lemma21": lem.as_dict()}
            ok &= lem.passed
            vac = lem.vacuous
            if dist.is_lattice:
                aud = cor22_audit(field_for(n, 2), R, slack=tol["bound_slack"])
                entry["cor22"] = aud.as_dict()
                ok &= aud.passed
                vac = vac and len(aud.vacuous) == 3 - (aud.ratio_trace_step is None)
            vac_all &= vac
            audits.append(entry)
            rows.append(_row(exp.id, n))
        record["reports"] = audits
        fit = None
        status = "vacuous" if vac_all else ("pass" if ok else "fail: bound exceeded")
    else:  # pragma: no cover - schema rejects unknown ops
        raise ValueError(exp.op)

    if fit is not None:
        record["fit"] = fit.as_dict()
        for r in rows:
            r["slope"], r["r2"] = _num(fit.slope), _num(fit.r2)
    for r in rows:
        r["status"] = status
    return status, rows, record


def _run_one(exp: ExperimentSpec, tol: dict, out: str) -> tuple:
    t0 = time.perf_counter()
    try:
        status, rows, record = execute(exp, tol)
    except InfiniteMoment as exc:
        status, rows, record = "fail: infinite moment", [], {"id": exp.id, "error": str(exc)}
    except Exception as exc:  # isolate per-experiment failures
        log.exception("experiment %s failed", exp.id)
        status, rows, record = f"fail: {type(exc).__name__}: {exc}", [], {
            "id": exp.id, "error": f"{type(exc).__name__}: {exc}"}
    if not rows:
        rows = [_row(exp.id, n) for n in exp.ns]
        for r in rows:
            r["status"] = status
    record["status"] = status
    outdir = Path(out)
    paths = {"json": str(outdir / f"{exp.id}.json")}
    atomic_write(outdir / f"{exp.id}.json", _dump(record))
    fit = record.get("fit")
    if fit:
        plot = "log_n,log_value\n" + "".join(
            f"{_num(math.log(n))},{_num(math.log(v))}\n" for n, v in fit["points"])
        paths["plot"] = str(outdir / f"{exp.id}_rate.csv")
        atomic_write(outdir / f"{exp.id}_rate.csv", plot)
    return exp.id, status, rows, paths, time.perf_counter() - t0


def run_experiment(config: ExperimentConfig, out=None, jobs: int = 1) -> RunReport:
    """Run every experiment and write results.csv, per-experiment JSON and run_report.json."""
    out = Path(out or config.output_dir or "heatwalk-out")
    out.mkdir(parents=True, exist_ok=True)
    started = datetime.now(timezone.utc).isoformat()
    args = [(e, config.tolerances, str(out)) for e in config.experiments]
    if jobs > 1 and len(args) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_one, *zip(*args)))
    else:
        results = [_run_one(*a) for a in args]
    rows, statuses, artifacts, clock = [], {}, {}, {}
    for eid, status, r, paths, dt in results:  # config order, independent of scheduling
        rows.extend(r)
        statuses[eid] = status
        artifacts[eid] = paths
        clock[eid] = dt
    atomic_write(out / "results.csv", _csv_text(rows))
    report = RunReport(statuses=statuses, artifacts=artifacts, wall_clock=clock,
                       config_hash=config.config_hash, started=started,
                       finished=datetime.now(timezone.utc).isoformat())
    atomic_write(out / "run_report.json", _dump({**asdict(report), "exit_code": report.exit_code}))
    return report


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="heatwalk", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run all experiments in a config")
    run.add_argument("--config", required=True)
    run.add_argument("--out", default=None, help="output directory (overrides output_dir)")
    run.add_argument("--jobs", type=int, default=1)
    run.add_argument("--seed", type=int, default=None, help="override every experiment seed")
    val = sub.add_parser("validate", help="check a config and list all violations")
    val.add_argument("--config", required=True)
    sub.add_parser("schema", help="print the config JSON schema")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "schema":
        print(json.dumps(CONFIG_SCHEMA, indent=2))
        return EXIT_OK
    try:
        cfg = validate_config(args.config)
    except ConfigError as exc:
        for v in exc.violations:
            print(f"config error: {v}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "validate":
        print(f"ok: {len(cfg.experiments)} experiment(s)")
        return EXIT_OK
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    if args.jobs < 1:
        print("config error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    report = run_experiment(cfg, args.out, args.jobs)
    for eid, status in report.statuses.items():
        print(f"{eid}: {status}")
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
