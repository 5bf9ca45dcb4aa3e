"""Command-line front end.

Subcommands:
  train   run the score-climbing trainer; writes the learning-curve CSV, a
          rendered figure next to it, and a final policy checkpoint
  eval    roll out a checkpointed policy and print a JSON cost summary
  verify  run the oracle-backed correctness checks
  report  render figures from previously written learning-curve CSVs

Exit codes: 0 success, 1 configuration error, 2 numerical failure,
3 verification failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import resolve_config
from .environments import build_problem, make_env
from .errors import ConfigurationError, NumericalError
from .policies import TanhGaussianPolicy
from .rngtools import substream
from .training import evaluate_policy, train

log = logging.getLogger("scoreclimb")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2
EXIT_VERIFY = 3


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, default=None,
                        help="config file (key = value with [sections])")
    parser.add_argument("--env", default=None,
                        help="environment preset: pendulum, cartpole, "
                             "double_pendulum")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--output-dir", type=Path, default=None)
    parser.add_argument("--workers", type=int, default=None)
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VAL",
                        help="override any config key, e.g. "
                             "--set training.eta=0.1")


def _collect_overrides(args) -> dict[str, str]:
    overrides: dict[str, str] = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigurationError(f"--set expects section.key=value, got {item!r}")
        dotted, _, value = item.partition("=")
        overrides[dotted.strip()] = value.strip()
    if args.env is not None:
        overrides["environment.name"] = args.env
    if args.seed is not None:
        overrides["run.seed"] = str(args.seed)
    if getattr(args, "output_dir", None) is not None:
        overrides["run.output_dir"] = str(args.output_dir)
    if args.workers is not None:
        overrides["run.workers"] = str(args.workers)
    return overrides


def cmd_train(args) -> int:
    run = resolve_config(args.config, _collect_overrides(args))
    if run.seed is None:
        raise ConfigurationError(
            "training requires an explicit seed (run.seed or --seed); "
            "wall-clock defaults would make runs irreproducible")
    out = run.output_dir
    out.mkdir(parents=True, exist_ok=True)
    curve_path = out / "learning_curve.csv"
    checkpoint_path = out / "policy.bin"
    log.info("training %s for %d iterations (seed %d)",
             run.train.env, run.train.iterations, run.train.seed)
    train(run.train, curve_path=curve_path, checkpoint_path=checkpoint_path)
    from .report import render_curves
    figure_path = out / "learning_curve.png"
    render_curves([curve_path], figure_path,
                  title=f"{run.train.env} ({run.train.estimator})")
    print(json.dumps({
        "curve": str(curve_path),
        "checkpoint": str(checkpoint_path),
        "figure": str(figure_path),
    }))
    return EXIT_OK


def cmd_eval(args) -> int:
    run = resolve_config(args.config, _collect_overrides(args))
    policy = TanhGaussianPolicy.load(args.checkpoint)
    env = make_env(run.train.env, **run.train.env_overrides)
    problem = build_problem(env, run.train.eta, run.train.horizon)
    seed = run.seed if run.seed is not None else 0
    mean, std = evaluate_policy(
        problem, policy, args.rollouts, substream(seed, 3), run.workers)
    summary = {"mean_cost": mean, "std_cost": std,
               "n_rollouts": args.rollouts, "seed": seed}
    text = json.dumps(summary)
    print(text)
    if args.output is not None:
        Path(args.output).write_text(text + "\n")
    return EXIT_OK


def cmd_verify(args) -> int:
    from .verification import run_all
    seed = args.seed if args.seed is not None else 0
    results = run_all(seed)
    failed = False
    for res in results:
        status = "PASS" if res.passed else "FAIL"
        print(f"[{status}] {res.name}: {res.detail}")
        failed = failed or not res.passed
    return EXIT_VERIFY if failed else EXIT_OK


def cmd_report(args) -> int:
    from .report import render_curves
    path = render_curves(args.curves, args.output, x_axis=args.x_axis,
                         title=args.title)
    print(json.dumps({"figure": str(path)}))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scoreclimb",
        description="Risk-sensitive policy search by score climbing on "
                    "conditional particle-filter samples.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run the trainer")
    _add_common(p_train)
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a policy checkpoint")
    _add_common(p_eval)
    p_eval.add_argument("--checkpoint", type=Path, required=True)
    p_eval.add_argument("--rollouts", type=int, default=30)
    p_eval.add_argument("--output", type=Path, default=None,
                        help="also write the JSON summary here")
    p_eval.set_defaults(func=cmd_eval)

    p_verify = sub.add_parser("verify", help="run correctness checks")
    p_verify.add_argument("--seed", type=int, default=None)
    p_verify.set_defaults(func=cmd_verify)

    p_report = sub.add_parser("report", help="render learning-curve figures")
    p_report.add_argument("curves", nargs="+", type=Path,
                          help="learning-curve CSV files")
    p_report.add_argument("--output", type=Path, required=True)
    p_report.add_argument("--x-axis", choices=("iteration", "interactions"),
                          default="iteration")
    p_report.add_argument("--title", default=None)
    p_report.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
