"""Command-line entry point: ``stspbo {run,synth,check,report}``.

Exit codes: 0 success, 1 failed identity check, 2 bad configuration or
arguments, 3 numerical failure during a run.
"""
import argparse
import json
import os
import sys

from . import theory
from .config import ConfigError, ExperimentConfig, load_config, parse_axis, parse_lines
from .errors import DomainError, FormatError
from .experiment import RunFailed, report, run_experiment
from .grid import build_grid
from .objective import SynthParams, synth_battery, write_csv


def _err(msg):
    print(f"error: {msg}", file=sys.stderr)


def cmd_run(args):
    try:
        if args.config:
            cfg = load_config(args.config, args.set)
        else:
            cfg = parse_lines([], args.set)
    except (ConfigError, FormatError, DomainError) as exc:
        _err(exc)
        return 2
    except OSError as exc:
        _err(f"config: {exc}")
        return 2
    out = args.out or cfg.output_dir

    def progress(row):
        if not args.quiet:
            print(f"{row['label']} seed={row['seed']} evals={row['eval_count']} "
                  f"mean_regret={row['final_mean_regret']:.4g} "
                  f"({row['wall_time_s']:.2f}s)", file=sys.stderr)

    try:
        summary = run_experiment(cfg, out, jobs=args.jobs, dump_ba=args.dump_ba,
                                 progress=progress)
    except RunFailed as exc:
        _err(exc)
        return 3
    except (FormatError, DomainError) as exc:
        _err(exc)
        return 2
    if not args.quiet:
        print(f"wrote {summary['n_runs']} runs to {out} in {summary['wall_time_s']:.1f}s",
              file=sys.stderr)
    return 0


def cmd_synth(args):
    try:
        grid = build_grid([parse_axis("i1", args.i1), parse_axis("i2", args.i2)])
        params = {}
        for item in args.set:
            key, sep, value = item.partition("=")
            if not sep:
                raise ConfigError(item, "expected key=value")
            params[key.strip()] = float(value)
        objective = synth_battery(grid, SynthParams.from_mapping(params))
    except (ConfigError, DomainError, ValueError) as exc:
        _err(exc)
        return 2
    try:
        write_csv(objective, args.out)
    except OSError as exc:
        _err(f"cannot write {args.out}: {exc.strerror}")
        return 2
    return 0


def cmd_check(args):
    rep = theory.run_suite(n_envs=args.envs, seed=args.seed, perturb=args.perturb)
    print(theory.report_json(rep))
    return 0 if rep["passed"] else 1


def cmd_report(args):
    cfg_path = os.path.join(args.dir, "config.txt")
    try:
        cfg = load_config(cfg_path)
        summary = report(cfg, args.dir)
    except (ConfigError, FormatError, DomainError) as exc:
        _err(exc)
        return 2
    except OSError as exc:
        _err(exc)
        return 2
    print(json.dumps({k: {"final_mean_regret_mean": v["final_mean_regret_mean"],
                          "final_mean_regret_std": v["final_mean_regret_std"]}
                      for k, v in summary["labels"].items()}, indent=2, sort_keys=True))
    return 0


def build_parser():
    defaults = ExperimentConfig()
    p = argparse.ArgumentParser(prog="stspbo", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a method sweep")
    r.add_argument("config", nargs="?", help="key = value config file (defaults if omitted)")
    r.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config setting; repeatable")
    r.add_argument("--out", help="output directory (default: config output_dir, "
                                 "or $STSPBO_OUTPUT_DIR)")
    r.add_argument("--jobs", type=int, default=1, help="concurrent runs")
    r.add_argument("--dump-ba", type=int, default=0, metavar="N",
                   help="dump Blahut-Arimoto inputs and outputs for the first N selections")
    r.add_argument("-q", "--quiet", action="store_true")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("synth", help="write the synthetic objective table")
    s.add_argument("--out", required=True)
    s.add_argument("--i1", default=defaults.grid_i1, help="axis as start:stop:step or a,b,c")
    s.add_argument("--i2", default=defaults.grid_i2)
    s.add_argument("--set", action="append", default=[], metavar="PARAM=VALUE",
                   help="landscape parameter, e.g. amp1=900")
    s.set_defaults(func=cmd_synth)

    c = sub.add_parser("check", help="verify the exact finite-environment identities")
    c.add_argument("--envs", type=int, default=50)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--perturb", action="store_const", const=1e-3, default=0.0,
                   help="negative control: add 1e-3 to one conditional")
    c.set_defaults(func=cmd_check)

    rep = sub.add_parser("report", help="re-aggregate traces in an output directory")
    rep.add_argument("dir")
    rep.set_defaults(func=cmd_report)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "jobs", 1) < 1:
        parser.error("--jobs must be >= 1")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
