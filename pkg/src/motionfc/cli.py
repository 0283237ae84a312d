"""Command-line entry point: ``motionfc <subcommand> ...``.

Exit codes: 0 success, 1 usage or configuration error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import dataio
from .config import ModelConfig, load_config
from .dataio import Prediction, SynthConfig
from .errors import ConfigError, MotionFCError
from .evaluation import CandidateSet, ensemble_merge, evaluate_predictions, format_report
from .model import predict_dataset
from .train import TrainConfig, format_log_line, load_checkpoint, train

log = logging.getLogger("motionfc")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _write_text(path, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8")


def run_generate(args) -> int:
    cfg = load_config(SynthConfig, args.config)
    n = dataio.write_scenarios(dataio.generate_synthetic(cfg), args.out)
    print(f"wrote {n} scenarios to {args.out}")
    return 0


def run_train(args) -> int:
    model_cfg = load_config(ModelConfig, args.model_config) if args.model_config else ModelConfig()
    train_cfg = load_config(TrainConfig, args.train_config) if args.train_config else TrainConfig()
    data = dataio.read_scenarios(args.data)
    log_path = args.log or f"{args.out}.log"
    result = train(data, model_cfg, train_cfg, out_path=args.out, log_path=log_path,
                   on_epoch=lambda e, b: log.info(format_log_line(e, b)))
    if not args.no_figure:
        from .plotting import plot_training_curves

        plot_training_curves(result.history, f"{args.out}.loss.png")
    print(f"trained {result.steps} steps; checkpoint {args.out}; log {log_path}")
    return 0


def run_predict(args) -> int:
    store, cfg = load_checkpoint(args.ckpt)
    data = dataio.read_scenarios(args.data)
    preds = [Prediction(sid, np.asarray(p, dtype=np.float32), np.asarray(t, dtype=np.float32))
             for sid, t, p in predict_dataset(data, cfg, store, args.batch_size)]
    n = dataio.write_predictions(preds, args.out)
    print(f"wrote {n} predictions to {args.out}")
    return 0


def _load_prediction_sets(paths) -> list[dict[str, Prediction]]:
    sets = []
    for path in paths:
        preds = {}
        for p in dataio.read_predictions(path):
            if p.scenario_id in preds:
                raise MotionFCError(f"{path}: duplicate prediction for {p.scenario_id!r}")
            preds[p.scenario_id] = p
        sets.append(preds)
    return sets


def merge_prediction_sets(sets: list[dict[str, Prediction]], k: int | None = None, seed: int = 0) -> dict:
    """Per-scenario ensemble of M prediction sets; a single set passes through."""
    if len(sets) == 1:
        return {sid: (p.trajectories, p.probabilities) for sid, p in sets[0].items()}
    merged = {}
    for sid in sets[0]:
        members = []
        for i, s in enumerate(sets):
            if sid not in s:
                raise MotionFCError(f"prediction file {i + 1} lacks scenario {sid!r}")
            members.append(s[sid])
        cand = CandidateSet.from_models([m.trajectories for m in members], [m.probabilities for m in members])
        cand.validate()
        merged[sid] = ensemble_merge(cand, k or len(members[0].probabilities), seed=seed)
    return merged


def run_evaluate(args) -> int:
    data = dataio.read_scenarios(args.data)
    merged = merge_prediction_sets(_load_prediction_sets(args.pred), seed=args.seed)
    report = evaluate_predictions(data, merged, tuple(args.k))
    _write_text(args.report, format_report(report))
    if not args.no_figure:
        from .plotting import plot_report

        plot_report(report, figure_path(args.report))
    print(format_report(report).split("\n\n")[0])
    return 0


def figure_path(report_path) -> Path:
    p = Path(report_path)
    return p.with_name(p.stem + ".png") if p.suffix else p.with_name(p.name + ".png")


def run_ensemble(args) -> int:
    merged = merge_prediction_sets(_load_prediction_sets(args.pred), k=args.k, seed=args.seed)
    preds = [Prediction(sid, np.asarray(p, dtype=np.float32), np.asarray(t, dtype=np.float32))
             for sid, (t, p) in merged.items()]
    n = dataio.write_predictions(preds, args.out)
    print(f"wrote {n} merged predictions to {args.out}")
    return 0


def run_render(args) -> int:
    from .render import render_svg

    data = {s.scenario_id: s for s in dataio.read_scenarios(args.data)}
    if args.scenario not in data:
        raise MotionFCError(f"unknown scenario id {args.scenario!r}")
    traj = None
    if args.pred:
        preds = {p.scenario_id: p for p in dataio.read_predictions(args.pred)}
        if args.scenario not in preds:
            raise MotionFCError(f"no prediction for scenario {args.scenario!r} in {args.pred}")
        traj = preds[args.scenario].trajectories
    _write_text(args.out, render_svg(data[args.scenario], traj, scale=args.scale))
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="motionfc", description="Multi-modal trajectory forecasting pipeline.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", help="write synthetic scenarios")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=run_generate)

    p = sub.add_parser("train", help="train a model and write a checkpoint")
    p.add_argument("--data", required=True)
    p.add_argument("--model-config")
    p.add_argument("--train-config")
    p.add_argument("--out", required=True)
    p.add_argument("--log", help="epoch log path (default: <out>.log)")
    p.add_argument("--no-figure", action="store_true")
    p.set_defaults(func=run_train)

    p = sub.add_parser("predict", help="forecast every scenario with a checkpoint")
    p.add_argument("--data", required=True)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--batch-size", type=int, default=12)
    p.set_defaults(func=run_predict)

    p = sub.add_parser("evaluate", help="score predictions (ensembling multiple --pred files)")
    p.add_argument("--data", required=True)
    p.add_argument("--pred", required=True, action="append")
    p.add_argument("--report", required=True)
    p.add_argument("--k", type=int, nargs="+", default=[1, 6])
    p.add_argument("--seed", type=int, default=0, help="k-means seed for ensembling")
    p.add_argument("--no-figure", action="store_true")
    p.set_defaults(func=run_evaluate)

    p = sub.add_parser("ensemble", help="merge prediction files with endpoint k-means")
    p.add_argument("--pred", required=True, action="append")
    p.add_argument("--out", required=True)
    p.add_argument("--k", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=run_ensemble)

    p = sub.add_parser("render", help="draw one scenario as SVG")
    p.add_argument("--data", required=True)
    p.add_argument("--pred")
    p.add_argument("--scenario", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--scale", type=float, default=8.0, help="pixels per meter")
    p.set_defaults(func=run_render)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (MotionFCError, OSError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
