"""Command-line entry point.

Exit status: 0 success, 1 configuration/usage error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .errors import AkpError, ConfigError

log = logging.getLogger("akplab")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _default_out() -> str:
    return os.environ.get("AKP_OUT_DIR", "out")


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="akplab", description="Perturbed-training experiments and representation similarity.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("train", help="run a single trial")
    t.add_argument("--config", required=True)
    t.add_argument("--out", default=None, help="output root (default $AKP_OUT_DIR or ./out)")
    t.add_argument("--trial", type=int, default=0)
    t.add_argument("--seed", type=int, default=None, help="override the trial seed")

    g = sub.add_parser("group", help="run every trial of an experiment group and aggregate")
    g.add_argument("--config", required=True)
    g.add_argument("--out", default=None)
    g.add_argument("--parallel", type=int, default=1)

    lv = sub.add_parser("lv-sim", help="integrate the two-population Lotka-Volterra system")
    for name in ("a", "b", "c", "d"):
        lv.add_argument(f"--{name}", type=float, required=True)
    lv.add_argument("--w1", type=float, required=True)
    lv.add_argument("--w2", type=float, required=True)
    lv.add_argument("--dt", type=float, default=1e-3)
    lv.add_argument("--t-end", type=float, required=True)
    lv.add_argument("--decoupled", action="store_true", help="use the exponential closed form instead of RK4")
    lv.add_argument("--feature-map", type=_floats, default=[1.0, 0.0, 0.0, 1.0], metavar="T11,T12,T21,T22")
    lv.add_argument("--plot", action="store_true", help="also write a PNG next to the CSV")
    lv.add_argument("--out", default=None)

    s = sub.add_parser("similarity", help="similarity matrix, ordination and happy/unhappy report")
    s.add_argument("--snapshots", required=True)
    s.add_argument("--threshold", type=float, default=0.75)
    s.add_argument("--layer", type=int, choices=(1, 2), default=2)
    s.add_argument("--out", default=None)

    r = sub.add_parser("report", help="per-class precision/recall/F1 summary over run directories")
    r.add_argument("--runs", required=True)
    r.add_argument("--out", default=None)
    return p


def _cmd_train(args) -> int:
    from .harness import ExperimentConfig, train_one, trial_dir, write_trial

    cfg = ExperimentConfig.load(args.config)
    if not 0 <= args.trial < cfg.trials:
        raise ConfigError(f"trial {args.trial} outside 0..{cfg.trials - 1}")
    result = train_one(cfg, args.trial, args.seed)
    d = write_trial(result, trial_dir(args.out or _default_out(), cfg, args.trial))
    rec = result.record
    print(f"{d}: status={rec.status} test_accuracy={rec.test_accuracy} seed={rec.seed}")
    return 0 if rec.status == "ok" else 2


def _cmd_group(args) -> int:
    from .harness import ExperimentConfig, run_group

    cfg = ExperimentConfig.load(args.config)
    if args.parallel < 1:
        raise ConfigError("--parallel must be >= 1")
    out = args.out or _default_out()
    res = run_group(cfg, out, parallel=args.parallel)
    s = res.summary
    print(f"{Path(out) / cfg.label}: trials={cfg.trials} failed={len(s['failed_trials'])} "
          f"accuracy={s.get('accuracy')}")
    return 0


def _cmd_lv(args) -> int:
    from .lvdyn import (LvParams, decoupled_trajectory, feature_trajectory, first_integral_series, rk4_integrate,
                        write_trajectory_csv)
    from .errors import ParameterError

    if len(args.feature_map) != 4:
        raise ConfigError("--feature-map needs four numbers")
    try:
        p = LvParams(args.a, args.b, args.c, args.d)
    except ParameterError as exc:
        raise ConfigError(str(exc)) from None
    T = [args.feature_map[:2], args.feature_map[2:]]
    s0 = (args.w1, args.w2)
    traj = (decoupled_trajectory if args.decoupled else rk4_integrate)(p, s0, args.dt, args.t_end)
    out = Path(args.out or Path(_default_out()) / "lv.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    write_trajectory_csv(out, p, traj, T)
    if args.plot:
        from . import plots

        v = first_integral_series(p, traj.states)
        plots.plot_lv(traj.times, traj.states, feature_trajectory(T, traj), v, out.with_suffix(".png"))
    print(out)
    return 0


def _cmd_similarity(args) -> int:
    from .harness import load_snapshots
    from .report import write_similarity

    out = args.out or str(Path(_default_out()) / "similarity")
    rep = write_similarity(load_snapshots(args.snapshots), out, args.threshold, args.layer)
    print(json.dumps({k: rep.get(k) for k in ("happy_mean_r", "unhappy_mean_r", "gap")}))
    return 0


def _cmd_report(args) -> int:
    from .harness import load_runs
    from .report import write_report

    records = load_runs(args.runs)
    if not records:
        raise ConfigError(f"no run.json found under {args.runs}")
    out = args.out or str(Path(_default_out()) / "report.json")
    summary = write_report(records, out)
    print(f"{out}: {len(summary['experiments'])} experiment block(s)")
    return 0


COMMANDS = {"train": _cmd_train, "group": _cmd_group, "lv-sim": _cmd_lv, "similarity": _cmd_similarity,
            "report": _cmd_report}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (AkpError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
