"""Command-line front end: ``lattice-ids TASK [flags]`` or ``lattice-ids --config FILE``.

Exit codes: 0 all checks pass, 1 a check failed, 2 usage or config error,
3 a near-singular shift could not be resolved.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from . import campaigns
from .estimators import Interval, default_jobs
from .model import ModelParams
from .spectral import NearSingularShift

TASKS = ("sample", "simulate", "verify-th1", "verify-th2", "verify-cor3", "gamma", "diverge", "sweep")
SWEEP_QUANTITIES = ("mean-count", "interior", "pointwise")
MODEL_TASKS = tuple(t for t in TASKS if t != "sample")

log = logging.getLogger("lattice_ids")


class ConfigError(ValueError):
    pass


@dataclass
class CampaignConfig:
    task: str
    d: int | None = None
    L: int | None = None
    alpha: float | None = None
    delta: float | None = None
    E: list | None = None
    M1: float | None = None
    M2: float | None = None
    trials: int = 200
    seed: int = 0
    L_ladder: list | None = None
    intervals: list | None = None
    x: float = 0.0
    eps: float = 1.0
    factor: float = 2.0
    count: int = 100000
    realization: int = 0
    quantity: str = "mean-count"
    force: bool = False
    jobs: int | None = None
    out: str | None = None
    format: str = "text"

    def __post_init__(self):
        self.validate()

    @property
    def params(self) -> ModelParams:
        L = self.L if self.L is not None else (self.L_ladder[0] if self.L_ladder else 0)
        return ModelParams(self.d, L, self.alpha, self.delta)

    def validate(self):
        if self.task not in TASKS:
            raise ConfigError(f"key 'task': must be one of {', '.join(TASKS)}, got {self.task!r}")
        if self.task == "sample":
            if self.delta is None:
                raise ConfigError("key 'delta': required for task 'sample'")
            if not self.delta > 1:
                raise ConfigError(f"key 'delta': must be > 1, got {self.delta!r}")
        else:
            for k in ("d", "alpha", "delta"):
                if getattr(self, k) is None:
                    raise ConfigError(f"key '{k}': required for task {self.task!r}")
            if self.L is None and not self.L_ladder:
                raise ConfigError("key 'L': required (or give 'L_ladder')")
            try:
                self.params
            except ValueError as exc:
                raise ConfigError(f"model keys: {exc}") from None
        if self.L_ladder is not None:
            if not self.L_ladder or any(int(v) != v or v < 0 for v in self.L_ladder):
                raise ConfigError("key 'L_ladder': must be a non-empty list of non-negative integers")
            if any(b <= a for a, b in zip(self.L_ladder, self.L_ladder[1:])):
                raise ConfigError("key 'L_ladder': must be strictly increasing")
        if self.task in ("verify-th2", "diverge") and not self.L_ladder:
            raise ConfigError(f"key 'L_ladder': required for task {self.task!r}")
        if self.task in ("simulate", "verify-th1") and not self.E:
            raise ConfigError(f"key 'E': required for task {self.task!r}")
        if self.task == "verify-th1" and len(self.E) != 1:
            raise ConfigError("key 'E': verify-th1 takes a single energy")
        if self.task == "verify-th2" and not self.E:
            raise ConfigError("key 'E': required for task 'verify-th2'")
        if self.task in ("verify-cor3", "gamma"):
            for k in ("M1", "M2"):
                if getattr(self, k) is None:
                    raise ConfigError(f"key '{k}': required for task {self.task!r}")
        if self.task == "sweep":
            if self.quantity not in SWEEP_QUANTITIES:
                raise ConfigError(f"key 'quantity': must be one of {', '.join(SWEEP_QUANTITIES)}")
            if not self.L_ladder:
                raise ConfigError("key 'L_ladder': required for task 'sweep'")
        if not (0 <= int(self.seed) < 2**64) or int(self.seed) != self.seed:
            raise ConfigError("key 'seed': must be a 64-bit unsigned integer")
        if self.trials < 2:
            raise ConfigError("key 'trials': must be >= 2")
        if self.format not in ("text", "csv", "json"):
            raise ConfigError("key 'format': must be text, csv or json")
        if self.jobs is not None and self.jobs < 1:
            raise ConfigError("key 'jobs': must be >= 1")
        if self.intervals is not None:
            try:
                [Interval.parse(iv) for iv in self.intervals]
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"key 'intervals': {exc}") from None

    def to_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "CampaignConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown key(s): {', '.join(unknown)}")
        if "task" not in data:
            raise ConfigError("key 'task': required")
        data = dict(data)
        if "E" in data and not isinstance(data["E"], list):
            data["E"] = [data["E"]]
        return cls(**data)

    @classmethod
    def from_json(cls, text: str) -> "CampaignConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(data)


def fmt(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{v:.15g}"
    return str(v)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else str(obj)
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "item"):
        return _jsonable(obj.item())
    return obj


def report_json(report) -> str:
    return json.dumps(_jsonable(report.to_dict()), indent=2, sort_keys=True) + "\n"


def report_text(report, header, rows, max_rows: int = 40) -> str:
    lines = [f"claim: {report.claim}", f"runtime: {report.runtime:.2f}s"]
    for b in report.bounds:
        lines.append(f"  bound {b.name:<32} {b.value:>22.15g}   [{b.formula}]")
    for c in report.checks:
        lines.append(f"  {'PASS' if c.passed else 'FAIL'}  {c.name:<34} {c.detail}")
    if rows and len(rows) <= max_rows:
        cells = [[str(h) for h in header]] + [[fmt(v) for v in r] for r in rows]
        widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
        for r in cells:
            lines.append("  " + "  ".join(c.rjust(w) for c, w in zip(r, widths)))
    lines.append("PASS" if report.passed else "FAIL")
    return "\n".join(lines) + "\n"


def execute(cfg: CampaignConfig):
    jobs = cfg.jobs or default_jobs()
    t = cfg.task
    if t == "sample":
        return campaigns.sample_campaign(cfg.delta, cfg.count, cfg.seed)
    p = cfg.params
    if t == "simulate":
        return campaigns.simulate_campaign(p, cfg.E, cfg.trials, cfg.seed, jobs)
    if t == "verify-th1":
        return campaigns.mean_count_campaign(p, cfg.E[0], cfg.trials, cfg.seed, jobs)
    if t == "verify-th2":
        return campaigns.pointwise_campaign(p, cfg.L_ladder, cfg.E[0], cfg.seed, cfg.realization, cfg.force)
    if t == "verify-cor3":
        return campaigns.interior_campaign(p, cfg.L_ladder or [p.L], cfg.M1, cfg.M2, cfg.trials, cfg.seed, jobs)
    if t == "gamma":
        ivs = [Interval.parse(iv) for iv in cfg.intervals] if cfg.intervals else None
        return campaigns.gamma_campaign(p, cfg.M1, cfg.M2, cfg.trials, cfg.seed, ivs, jobs)
    if t == "diverge":
        return campaigns.divergence_campaign(p, cfg.x, cfg.eps, cfg.L_ladder, cfg.factor)
    e = cfg.E[0] if cfg.E else None
    return campaigns.sweep_campaign(p, cfg.L_ladder, cfg.quantity, cfg.trials, cfg.seed, e,
                                    cfg.M1, cfg.M2, cfg.realization, cfg.force, jobs)


def run(cfg: CampaignConfig, stdout=None) -> int:
    """Execute a campaign, write artifacts, return the exit status."""
    stdout = stdout or sys.stdout
    try:
        report, header, rows = execute(cfg)
    except NearSingularShift as exc:
        log.error("%s", exc)
        return 3
    data = csv_text(header, rows)
    if cfg.out:
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        stem = cfg.task if cfg.task != "sweep" else f"sweep-{cfg.quantity}"
        (out / f"{stem}.csv").write_text(data, newline="")
        (out / f"{stem}.json").write_text(report_json(report))
        (out / "config.json").write_text(cfg.to_json())
    if cfg.format == "csv":
        stdout.write(data)
    elif cfg.format == "json":
        stdout.write(report_json(report))
    else:
        stdout.write(report_text(report, header, rows))
    return 0 if report.passed else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lattice-ids", description=__doc__.splitlines()[0])
    ap.add_argument("task", nargs="?", choices=TASKS)
    ap.add_argument("--config", type=Path, help="JSON config; flags given on the command line override it")
    ap.add_argument("--d", type=int)
    ap.add_argument("--L", type=int)
    ap.add_argument("--alpha", type=float)
    ap.add_argument("--delta", type=float)
    ap.add_argument("--E", type=float, action="append", help="energy (repeatable)")
    ap.add_argument("--M1", type=float)
    ap.add_argument("--M2", type=float)
    ap.add_argument("--trials", type=int)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--L-ladder", dest="L_ladder", type=lambda s: [int(v) for v in s.split(",")],
                    help="comma-separated box radii, e.g. 5,10,20,40")
    ap.add_argument("--interval", dest="intervals", action="append", help="interval such as '[-10,-5]'")
    ap.add_argument("--x", type=float)
    ap.add_argument("--eps", type=float)
    ap.add_argument("--factor", type=float)
    ap.add_argument("--count", type=int)
    ap.add_argument("--realization", type=int)
    ap.add_argument("--quantity", choices=SWEEP_QUANTITIES)
    ap.add_argument("--force", action="store_true", default=None)
    ap.add_argument("--jobs", type=int)
    ap.add_argument("--out", type=str)
    ap.add_argument("--format", choices=("text", "csv", "json"))
    return ap


def config_from_args(ns: argparse.Namespace) -> CampaignConfig:
    data = {}
    if ns.config:
        try:
            text = ns.config.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        data = CampaignConfig.from_json(text).to_dict()
    for f in fields(CampaignConfig):
        v = getattr(ns, f.name, None)
        if v is not None:
            data[f.name] = v
    if "task" not in data:
        raise ConfigError("no task given (positional TASK or 'task' in --config)")
    return CampaignConfig.from_dict(data)


def main(argv=None) -> int:
    level = os.environ.get("LATTICE_IDS_LOG", "warn").upper()
    logging.basicConfig(level={"WARN": "WARNING"}.get(level, level), format="%(levelname)s %(name)s: %(message)s")
    ap = build_parser()
    ns = ap.parse_args(argv)
    try:
        cfg = config_from_args(ns)
    except (ConfigError, TypeError) as exc:
        print(f"lattice-ids: config error: {exc}", file=sys.stderr)
        return 2
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
