"""Command line entry point: ``madp {gen,run,metrics,nonlinear}``."""
import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import harness
from .errors import ConfigError, MadpError, ParseError
from .metrics import desiderata_report

log = logging.getLogger("madp")

EXIT_OK, EXIT_FAILED, EXIT_CONFIG = 0, 1, 2


def _load_config(args) -> harness.ExperimentConfig:
    cfg = harness.ExperimentConfig.from_json(args.config) if args.config else harness.ExperimentConfig()
    over = {}
    if args.seed is not None:
        over["seed"] = args.seed
    if args.eps is not None:
        over["epsilon"] = args.eps
    if args.tau is not None:
        over["tau"] = args.tau
    if args.mechanisms:
        over["mechanisms"] = [m.strip() for m in args.mechanisms.split(",") if m.strip()]
    if args.out:
        over["output"] = args.out
    if getattr(args, "histogram", None):
        over["histogram"] = args.histogram
    if getattr(args, "scenario", None):
        over["scenario"] = args.scenario
    try:
        return replace(cfg, **over).validate()
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def _report(records):
    for mech, row in desiderata_report(records).items():
        log.info("%-20s SI-viol %.3f  NI-viol %.3f  mean total %.6g", mech,
                 row["sharing_incentive_violation_rate"], row["non_interference_violation_rate"],
                 row["mean_total_error"])
    failed = [r for r in records if r.status != "ok"]
    for r in failed:
        log.warning("instance %d %s: %s", r.instance_id, r.mechanism, r.status)
    return EXIT_FAILED if failed else EXIT_OK


def cmd_gen(args) -> int:
    cfg = _load_config(args)
    insts = harness.generate(cfg)
    out = Path(cfg.output if args.out else "instances.json")
    out.write_text(json.dumps(harness.instances_to_json(cfg, insts)), encoding="utf-8")
    log.info("wrote %d instances to %s", len(insts), out)
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _load_config(args)
    insts = None
    if args.instances:
        doc = json.loads(Path(args.instances).read_text(encoding="utf-8"))
        insts = harness.instances_from_json(doc)
    plan_dir = None
    if args.plans:
        plan_dir = Path(args.plans)
        plan_dir.mkdir(parents=True, exist_ok=True)
    records = harness.run_experiment(cfg, insts, plan_dir)
    harness.write_csv(records, cfg.output)
    log.info("wrote %d records to %s", len(records), cfg.output)
    return _report(records)


def cmd_metrics(args) -> int:
    cfg = _load_config(args)
    records = harness.recompute_from_plans(args.plans, cfg)
    if not records:
        raise ConfigError(f"no plans found in {args.plans}")
    harness.write_csv(records, cfg.output)
    log.info("recomputed %d records into %s", len(records), cfg.output)
    return _report(records)


def cmd_nonlinear(args) -> int:
    args.scenario = "nonlinear"
    return cmd_run(args)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="madp", description="Multi-analyst DP linear query experiments")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON file with ExperimentConfig fields")
        p.add_argument("--seed", type=int)
        p.add_argument("--eps", type=float)
        p.add_argument("--tau", type=float)
        p.add_argument("--mechanisms", help="comma separated mechanism names")
        p.add_argument("--out", help="output path")

    p = sub.add_parser("gen", help="generate instances to JSON")
    common(p)
    p.add_argument("--scenario", choices=harness.SCENARIOS)
    p.add_argument("--histogram")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("run", help="evaluate mechanisms and write a results CSV")
    common(p)
    p.add_argument("--scenario", choices=harness.SCENARIOS)
    p.add_argument("--instances", help="instances JSON from 'gen'")
    p.add_argument("--plans", help="directory for saved plans")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("metrics", help="recompute metrics from saved plans")
    common(p)
    p.add_argument("--plans", required=True)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("nonlinear", help="empirical MSE of mean and quantile queries")
    common(p)
    p.add_argument("--histogram", required=True, help="CSV with header value,count")
    p.add_argument("--instances")
    p.add_argument("--plans")
    p.set_defaults(func=cmd_nonlinear)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ParseError) as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except MadpError as exc:
        log.error("%s", exc)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
