"""Command-line interface.

    picardmc run CONFIG            execute a config file
    picardmc verify [...]          oracle-equivalence + full-window-commit
                                   verification + worker determinism
    picardmc bench --preset NAME   run a named preset with defaults

The PICARDMC_WORKERS environment variable overrides the worker count from
any source.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
from pathlib import Path
from typing import List, Optional

from .presets import PRESETS, ExperimentConfig, parse_config, run_experiment


def _apply_worker_override(cfg: ExperimentConfig) -> ExperimentConfig:
    override = os.environ.get("PICARDMC_WORKERS")
    if override:
        cfg = dataclasses.replace(cfg, workers=int(override))
    return cfg


def _execute(cfg: ExperimentConfig) -> int:
    cfg = _apply_worker_override(cfg)
    rows, problems = run_experiment(cfg)
    print(f"{cfg.experiment}: {len(rows)} rows -> {Path(cfg.out) / 'report.csv'}")
    for problem in problems:
        print(f"FAIL {problem}", file=sys.stderr)
    return 1 if problems else 0


def _cmd_run(args: argparse.Namespace) -> int:
    text = Path(args.config).read_text()
    cfg = parse_config(text)
    if args.out:
        cfg = dataclasses.replace(cfg, out=args.out)
    return _execute(cfg)


def _cmd_bench(args: argparse.Namespace) -> int:
    seeds = tuple(args.seeds) if args.seeds else ExperimentConfig("x").seeds
    cfg = ExperimentConfig(
        experiment=args.preset,
        seeds=seeds,
        workers=args.workers,
        out=args.out,
    )
    if args.n is not None:
        cfg = dataclasses.replace(cfg, N=args.n)
    return _execute(cfg)


def _cmd_verify(args: argparse.Namespace) -> int:
    failures = 0
    out = Path(args.out)
    for name, n_configs in (("oracle_equivalence", args.cases), ("verify_prop5", 0)):
        cfg = ExperimentConfig(
            experiment=name,
            seeds=(args.seed, args.seed + 1, args.seed + 2),
            workers=args.workers,
            out=str(out / name),
        )
        if n_configs:
            cfg = dataclasses.replace(cfg, n_configs=n_configs)
        cfg = _apply_worker_override(cfg)
        rows, problems = run_experiment(cfg)
        status = "PASS" if not problems else "FAIL"
        print(f"{status} {name} ({len(rows)} rows, {len(problems)} problems)")
        for problem in problems:
            print(f"  {problem}", file=sys.stderr)
        failures += len(problems)

    # determinism across worker counts: byte-identical reports
    reference: Optional[bytes] = None
    for workers in (1, 4, 8):
        cfg = ExperimentConfig(
            experiment="oracle_equivalence",
            seeds=(args.seed,),
            n_configs=min(args.cases, 25),
            workers=workers,
            out=str(out / f"workers{workers}"),
        )
        run_experiment(cfg)
        content = (Path(cfg.out) / "report.csv").read_bytes()
        if reference is None:
            reference = content
        elif content != reference:
            print(f"FAIL worker determinism at workers={workers}", file=sys.stderr)
            failures += 1
    if reference is not None and failures == 0:
        print("PASS worker_determinism (workers 1/4/8 byte-identical)")
    return 1 if failures else 0


def main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="picardmc", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a config file")
    p_run.add_argument("config")
    p_run.add_argument("--out", default=None, help="override the output directory")
    p_run.set_defaults(func=_cmd_run)

    p_bench = sub.add_parser("bench", help="run a preset with defaults")
    p_bench.add_argument("--preset", required=True, choices=sorted(PRESETS))
    p_bench.add_argument("--seeds", type=int, nargs="*", default=None)
    p_bench.add_argument("--workers", type=int, default=1)
    p_bench.add_argument("--out", default="picardmc-out")
    p_bench.add_argument("--n", type=int, default=None, help="override chain length N")
    p_bench.set_defaults(func=_cmd_bench)

    p_verify = sub.add_parser("verify", help="exactness and determinism checks")
    p_verify.add_argument("--seed", type=int, default=1)
    p_verify.add_argument("--cases", type=int, default=100)
    p_verify.add_argument("--workers", type=int, default=1)
    p_verify.add_argument("--out", default="picardmc-verify")
    p_verify.set_defaults(func=_cmd_verify)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
