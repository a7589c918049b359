"""Command line entry point ``brwstable``.

Exit status: 0 when every check passes, 1 when a check fails or lacks data,
2 for configuration errors (including violated assumptions without
``--override-conditions``).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .. import models
from .config import ConfigError, ExperimentConfig, build_count, build_displacement
from .runner import export_cf_tables, run_scenario, simulate_table, write_table
from .scenarios import get_scenario, list_scenarios

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _load(args) -> ExperimentConfig:
    if args.config is None:
        raise ConfigError("--config is required (a YAML path or a builtin scenario name)")
    path = Path(args.config)
    cfg = ExperimentConfig.load(path) if path.exists() else get_scenario(args.config)
    changes = {}
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if getattr(args, "replicates", None) is not None:
        changes["replicates"] = args.replicates
    if getattr(args, "threads", None) is not None:
        changes["threads"] = args.threads
    return cfg.replace(**changes) if changes else cfg


def _out_dir(args, cfg) -> Path:
    return Path(args.out) if args.out else Path(cfg.output.get("dir", "runs"))


def cmd_scenarios(args) -> int:
    catalog = list_scenarios()
    for name, desc in catalog.items():
        print(f"{name:20s} {desc}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        for name in catalog:
            get_scenario(name).save(out / f"{name}.yaml")
    return EXIT_PASS


def cmd_simulate(args) -> int:
    cfg = _load(args)
    from .runner import law_summary
    _, rep = law_summary(cfg)
    if not (rep.conditions.get("kappa_lt_1") and rep.conditions.get("supercritical", True)) \
            and not args.override_conditions:
        raise ConfigError(f"standing assumptions fail: {', '.join(rep.failed())}")
    out = _out_dir(args, cfg)
    out.mkdir(parents=True, exist_ok=True)
    table = simulate_table(cfg, args.threads)
    path = out / f"{cfg.scenario}.csv"
    write_table(path, table, cfg.digest)
    cfg.save(out / f"{cfg.scenario}.yaml")
    print(f"wrote {len(table['replicate'])} replicates to {path}")
    return EXIT_PASS


def cmd_verify(args) -> int:
    cfg = _load(args)
    report = run_scenario(cfg, threads=args.threads, out_dir=_out_dir(args, cfg),
                          override_conditions=args.override_conditions,
                          samples_path=args.samples)
    for name, v in report.verdicts.items():
        print(f"{v['status']:>20s}  {name}  {v.get('details', '')}")
    for w in report.warnings:
        print(f"warning: {w}")
    print("PASS" if report.passed else "FAIL")
    return EXIT_PASS if report.passed else EXIT_FAIL


def cmd_calibrate(args) -> int:
    if args.config:
        cfg = _load(args)
        law = cfg.build_law()
        if not isinstance(law, models.InfinitePoints):
            raise ConfigError("calibrate needs an infinite-points law")
        k_law, y_law, a = law.k_law, law.y_law, law.a
    else:
        k_law = build_count({"kind": "pareto", "tail_index": args.k_tail, "mean": args.k_mean,
                             "min_count": 1})
        y_law = build_displacement({"kind": "exponential", "rate": args.y_rate})
        a = args.a
    theta, a = models.calibrate_infinite_example(k_law, y_law, args.target, a)
    law = models.InfinitePoints(k_law, y_law, a)
    m = models.laplace_m(law, theta)
    result = {"theta": theta, "a": a, "m_theta": m, "residual": abs(m - args.target),
              "kappa": models.kappa(law, theta, args.alpha)}
    print(json.dumps(result, indent=2))
    return EXIT_PASS


def cmd_cf_table(args) -> int:
    cfg = _load(args)
    weights = np.loadtxt(args.weights) if args.weights else None
    for p in export_cf_tables(cfg, _out_dir(args, cfg), weights, args.threads):
        print(p)
    return EXIT_PASS


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="brwstable", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_runs=True):
        p.add_argument("--config", help="YAML config path or builtin scenario name")
        p.add_argument("--out", help="output directory")
        if with_runs:
            p.add_argument("--seed", type=int)
            p.add_argument("--replicates", type=int)
            p.add_argument("--threads", type=int)
            p.add_argument("--override-conditions", action="store_true")

    p = sub.add_parser("scenarios", help="list builtin scenarios")
    p.add_argument("--out", help="also write each scenario config as YAML here")
    p.set_defaults(fn=cmd_scenarios)

    p = sub.add_parser("simulate", help="write the per-replicate CSV")
    common(p)
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("verify", help="run the configured checks")
    common(p)
    p.add_argument("--samples", help="reuse a stored per-replicate CSV")
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("calibrate", help="solve m(theta) = target for the lattice law")
    common(p)
    p.add_argument("--k-mean", type=float, default=2.0)
    p.add_argument("--k-tail", type=float, default=1.5)
    p.add_argument("--y-rate", type=float, default=1.0)
    p.add_argument("--a", type=float, default=1.0)
    p.add_argument("--alpha", type=float, default=1.5)
    p.add_argument("--target", type=float, default=1.0)
    p.set_defaults(fn=cmd_calibrate)

    p = sub.add_parser("cf-table", help="export theoretical CF tables")
    common(p)
    p.add_argument("--weights", help="text file of mixing weights (default: simulate)")
    p.set_defaults(fn=cmd_cf_table)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.fn(args)
    except (ConfigError, KeyError, models.LawError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
