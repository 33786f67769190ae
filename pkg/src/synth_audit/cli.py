"""Command-line entry point: ``synth-audit {audit,sweep,shift}``."""
from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np

from . import pipeline
from .config import RunConfig, load_config
from .errors import AuditError, ConfigError
from .report import AtomicWriter, build_report, dumps, metadata

log = logging.getLogger("synth_audit")


def _map(fn, tasks, jobs):
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks))


def _audit_one(args):
    cfg, seed = args
    return pipeline.run_audit(cfg, seed)


def cmd_audit(cfg: RunConfig, out_dir) -> dict:
    results = _map(_audit_one, [(cfg, s) for s in cfg.seeds], cfg.jobs)
    report = build_report(cfg, results, "audit")
    writer = AtomicWriter(out_dir)
    try:
        text = dumps(report)
        for res in results:
            suffix = "" if len(results) == 1 else f"_seed{res.seed}"
            for name, scores in res.scores.items():
                rows = [(i, float(s)) for i, s in enumerate(scores.scores)]
                writer.write_rows(f"scores_{name}{suffix}.csv", ["row_id", "score"], rows)
        writer.write_text("report.json", text)
        writer.commit()
    except BaseException:
        writer.abort()
        raise
    return report


def _sweep_rows(cfg: RunConfig, knob: str, records):
    names = list(cfg.attackers)
    header = ["knob", "value", "seed", "utility"] + [f"auc_{n}" for n in names]
    rows = []
    for r in records:
        rows.append([knob, float(r["value"]), r["seed"], float(r["utility"])] + [float(r["auc"][n]) for n in names])
    values = list(dict.fromkeys(r["value"] for r in records))
    for v in values:
        group = [r for r in records if r["value"] == v]
        util = np.array([r["utility"] for r in group])
        aucs = {n: np.array([r["auc"][n] for r in group]) for n in names}
        rows.append([knob, float(v), "mean", float(util.mean())] + [float(aucs[n].mean()) for n in names])
        rows.append([knob, float(v), "std", float(util.std())] + [float(aucs[n].std()) for n in names])
    return header, rows


def _write_sweep(cfg, out_dir, knob, records, command):
    header, rows = _sweep_rows(cfg, knob, records)
    writer = AtomicWriter(out_dir)
    try:
        writer.write_rows("sweep.csv", header, rows)
        meta = {"schema_version": 1, "command": command, "records": records, "metadata": metadata(cfg, command)}
        writer.write_text("report.json", dumps(meta))
        writer.commit()
    except BaseException:
        writer.abort()
        raise
    return header, rows


def cmd_sweep(cfg: RunConfig, out_dir):
    knob = cfg.sweep.knob
    if knob is None:
        raise ConfigError("sweep needs [sweep] knob and values")
    tasks = [(cfg, knob, v, s) for v in cfg.sweep.values for s in cfg.seeds]
    records = _map(pipeline.sweep_task, tasks, cfg.jobs)
    return _write_sweep(cfg, out_dir, knob, records, "sweep")


def cmd_shift(cfg: RunConfig, out_dir):
    if cfg.shift.group0 is None or not cfg.shift.levels:
        raise ConfigError("shift needs [shift] group0 and levels")
    tasks = [(cfg, p, s) for p in cfg.shift.levels for s in cfg.seeds]
    records = _map(pipeline.shift_task, tasks, cfg.jobs)
    return _write_sweep(cfg, out_dir, "p_group0", records, "shift")


COMMANDS = {"audit": cmd_audit, "sweep": cmd_sweep, "shift": cmd_shift}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="synth-audit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="INI run configuration")
        p.add_argument("--seed", help="comma-separated seeds; overrides [run] seeds")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--jobs", type=int, help="parallel worker processes; overrides [run] jobs")
    return parser


def _configure_logging():
    level = os.environ.get("SYNTH_AUDIT_LOG", "error").lower()
    if level not in ("error", "info", "debug"):
        level = "error"
    logging.basicConfig(level=getattr(logging, level.upper()), format="%(levelname)s %(name)s: %(message)s")


def resolve_config(args) -> RunConfig:
    cfg = load_config(args.config)
    if args.seed:
        try:
            cfg = replace(cfg, seeds=tuple(int(s) for s in args.seed.split(",") if s.strip()))
        except ValueError:
            raise ConfigError(f"invalid --seed {args.seed!r}") from None
    if args.jobs is not None:
        cfg = replace(cfg, jobs=args.jobs)
    cfg.validate()
    if args.command == "sweep" and cfg.sweep.knob is None:
        raise ConfigError("sweep needs [sweep] knob and values")
    if args.command == "shift" and (cfg.shift.group0 is None or not cfg.shift.levels):
        raise ConfigError("shift needs [shift] group0 and levels")
    return cfg


def main(argv=None) -> int:
    _configure_logging()
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        log.info("running %s with seeds %s", args.command, cfg.seeds)
        COMMANDS[args.command](cfg, args.out)
    except AuditError as exc:
        print(f"synth-audit: {exc}", file=sys.stderr)
        return exc.exit_code
    except (FloatingPointError, OverflowError) as exc:
        print(f"synth-audit: numeric error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
