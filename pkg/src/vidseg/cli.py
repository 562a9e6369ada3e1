"""Command-line interface: one binary, seven subcommands.

    generate   render a synthetic dataset to disk
    density    annotation density statistics (CSV + figure)
    subn       ground-truth subsampling control experiment (CSV + figure)
    train      train the priming stage or the joint approx+ensemble stage
    run        segment a dataset with trained nets (predictions, metrics,
               cost trace, run manifest)
    budget     relative-runtime curve over priming periods (CSV + figure)
    eval       score a prediction directory against ground truth

Global flags (every subcommand): --seed, --threads, --config, --no-plot.
Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import math
import sys
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
import yaml

from . import __version__
from .core import ClassTable, LabelMap, VideoSequence
from .dataio import (
    LoadedDataset,
    load_dataset,
    load_label_image,
    save_dataset,
    save_label_image,
    split_by_distribution,
)
from .errors import DataError, NumericError
from .metrics import (
    ConfusionMatrix,
    DensityReport,
    accumulate,
    compute_report,
    spatial_density,
    temporal_density,
    write_density_csv,
    write_metrics_csv,
)
from .nn import (
    Network,
    TrainConfig,
    approx_spec,
    ensemble_spec,
    load_checkpoint,
    priming_spec,
    save_checkpoint,
)
from .pipeline import (
    CostModel,
    PipelineNets,
    ScheduleConfig,
    amortized_relative_runtime,
    budget_curve,
    calibrate_cost_model,
    segment_sequence,
    train_joint,
    train_priming,
    write_budget_csv,
    write_cost_trace_csv,
)
from .subn import DEFAULT_STRIDES, run_subn, write_subn_csv
from .synthgen import SceneConfig, class_table, generate_many


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _parse_period(text: str) -> float:
    if text.lower() in ("inf", "infinity"):
        return math.inf
    k = int(text)
    if k < 1:
        raise ValueError(f"priming period must be >= 1, got {k}")
    return float(k)


def _parse_periods(text: str) -> List[float]:
    return [_parse_period(tok) for tok in text.split(",") if tok]


def _parse_strides(text: str) -> List[int]:
    return [int(tok) for tok in text.split(",") if tok]


def _load_config_file(path: Optional[Path]) -> dict:
    if path is None:
        return {}
    if not path.is_file():
        raise DataError(f"config file not found: {path}")
    doc = yaml.safe_load(path.read_text()) or {}
    if not isinstance(doc, dict):
        raise DataError(f"config file {path} must hold a mapping")
    return doc


def _train_config(args, cfg: dict) -> TrainConfig:
    def pick(flag, key, default):
        return flag if flag is not None else cfg.get(key, default)

    return TrainConfig(
        learning_rate=float(pick(args.lr, "learning_rate", 0.01)),
        momentum=float(pick(args.momentum, "momentum", 0.9)),
        epochs=int(pick(args.epochs, "epochs", 4)),
        batch_size=int(pick(args.batch_size, "batch_size", 8)),
        seed=int(args.seed if args.seed is not None else cfg.get("seed", 0)),
    )


DEFAULT_COST_MODEL = CostModel(1.0, 0.1, 0.05)


def load_cost_model(path: Path) -> CostModel:
    if not path.is_file():
        raise DataError(f"cost model file not found: {path}")
    doc = yaml.safe_load(path.read_text())
    try:
        return CostModel(
            cost_prime=float(doc["cost_prime"]),
            cost_approx=float(doc["cost_approx"]),
            cost_ensemble=float(doc["cost_ensemble"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed cost model {path}: {exc}") from exc


def save_cost_model(costs: CostModel, provenance: str, path: Path) -> None:
    doc = {
        "cost_prime": float(costs.cost_prime),
        "cost_approx": float(costs.cost_approx),
        "cost_ensemble": float(costs.cost_ensemble),
        "provenance": provenance,
    }
    path.write_text(yaml.safe_dump(doc, sort_keys=False))


def _figure_path(csv_path: Path) -> str:
    return str(csv_path.with_suffix(".png"))


def cmd_generate(args) -> int:
    cfg = SceneConfig(
        width=args.width,
        height=args.height,
        num_frames=args.frames,
        frame_rate=args.frame_rate,
        seed=args.seed or 0,
    )
    seqs = generate_many(cfg, args.sequences)
    table = class_table()
    split = None
    if args.train_fraction is not None:
        split = split_by_distribution(seqs, table, args.train_fraction, seed=args.seed or 0)
    manifest = save_dataset(seqs, table, Path(args.out), split=split)
    print(f"wrote {args.sequences} sequences ({cfg.height}x{cfg.width}, "
          f"{cfg.num_frames} frames @ {cfg.frame_rate} Hz) to {manifest}")
    if split:
        print(f"split: train={split['train']} test={split['test']}")
    return 0


def _density_rows(ds: LoadedDataset) -> List:
    rows = []
    pooled: List[LabelMap] = []
    temporal: List[float] = []
    for name, seq in zip(ds.names, ds.sequences):
        labels = [fr.label for fr in seq.frames if fr.label is not None]
        sd = spatial_density(labels, ds.table) if labels else 0.0
        td = temporal_density(seq) if len(seq) >= 2 else 0.0
        rows.append((name, DensityReport(sd, td)))
        pooled.extend(labels)
        temporal.append(td)
    overall_sd = spatial_density(pooled, ds.table) if pooled else 0.0
    overall_td = float(np.mean(temporal)) if temporal else 0.0
    rows.append(("overall", DensityReport(overall_sd, overall_td)))
    return rows


def cmd_density(args) -> int:
    ds = load_dataset(Path(args.dataset))
    rows = _density_rows(ds)
    out = Path(args.out)
    write_density_csv(rows, str(out))
    if not args.no_plot:
        from .figures import save_density_figure

        save_density_figure(rows, _figure_path(out))
    for name, rep in rows:
        print(f"{name}: spatial {rep.spatial_density:.4f}  temporal {rep.temporal_density:g} Hz")
    return 0


def cmd_subn(args) -> int:
    ds = load_dataset(Path(args.dataset))
    seqs = ds.select(args.split)
    labels = [fr.label for seq in seqs for fr in seq.frames if fr.label is not None]
    if not labels:
        raise DataError("dataset has no labeled frames")
    reports = run_subn(labels, args.strides, ds.table, threads=args.threads)
    out = Path(args.out)
    write_subn_csv(reports, ds.table, str(out))
    if not args.no_plot:
        from .figures import save_subn_figure

        save_subn_figure(reports, ds.table, _figure_path(out))
    for rep in reports:
        print(f"stride {rep.stride}: mIoU {rep.metrics.miou:.4f}")
    return 0


def cmd_train(args) -> int:
    cfg_doc = _load_config_file(args.config)
    ds = load_dataset(Path(args.dataset))
    seqs = ds.select(args.split)
    if not seqs:
        raise DataError("selected split contains no sequences")
    config = _train_config(args, cfg_doc)
    c = ds.table.num_scored
    log = (lambda e, loss: print(f"epoch {e}: loss {loss:.4f}")) if not args.quiet else None

    if args.stage == "priming":
        spec = priming_spec(c)
        params = train_priming(seqs, spec, config, ds.table, log_fn=log)
        save_checkpoint(args.out, {"priming": Network(spec, params)})
    else:
        if args.priming is None:
            raise DataError("--priming checkpoint is required for the joint stage")
        priming = load_checkpoint(args.priming)["priming"]
        sched = ScheduleConfig(
            priming_period=args.period if args.period is not None
            else cfg_doc.get("priming_period", math.inf),
            downsample_factor=args.downsample if args.downsample is not None
            else int(cfg_doc.get("downsample_factor", 4)),
        )
        a_spec, e_spec = approx_spec(c), ensemble_spec(c)
        a_params, e_params = train_joint(
            seqs, priming, a_spec, e_spec, sched, config, ds.table,
            unroll_len=args.unroll if args.unroll is not None
            else int(cfg_doc.get("unroll_len", 1)),
            ensemble_init=args.ensemble_init or cfg_doc.get("ensemble_init", "passthrough_noise"),
            log_fn=log,
        )
        save_checkpoint(args.out, {
            "approx": Network(a_spec, a_params),
            "ensemble": Network(e_spec, e_params),
        })
    print(f"wrote checkpoint {args.out}")
    return 0


def _load_nets(priming_path: str, joint_path: str) -> PipelineNets:
    prime = load_checkpoint(priming_path)
    if "priming" not in prime:
        raise DataError(f"{priming_path} does not contain a 'priming' net")
    joint = load_checkpoint(joint_path)
    for name in ("approx", "ensemble"):
        if name not in joint:
            raise DataError(f"{joint_path} does not contain an {name!r} net")
    return PipelineNets(
        priming=prime["priming"], approx=joint["approx"], ensemble=joint["ensemble"]
    )


def cmd_run(args) -> int:
    ds = load_dataset(Path(args.dataset))
    seqs = ds.select(args.split)
    names = ds.names if args.split is None else [
        n for n in ds.names if n in set(ds.split[args.split])
    ]
    if not seqs:
        raise DataError("selected split contains no sequences")
    nets = _load_nets(args.priming, args.joint)
    sched = ScheduleConfig(priming_period=args.period, downsample_factor=args.downsample)
    if args.cost_model:
        costs = load_cost_model(Path(args.cost_model))
        provenance = f"file:{args.cost_model}"
    else:
        costs = DEFAULT_COST_MODEL
        provenance = "builtin-default"

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    cm = ConfusionMatrix.empty(ds.table.num_scored)
    labeled = 0
    traces = []
    total_cost = 0.0
    total_frames = 0
    for name, seq in zip(names, seqs):
        result = segment_sequence(seq, nets, sched, ds.table, costs=costs)
        seq_dir = out_dir / name
        seq_dir.mkdir(exist_ok=True)
        for i, pred in enumerate(result.labels):
            save_label_image(pred, seq_dir / f"label_{i:04d}.png")
        for frame, pred in zip(seq.frames, result.labels):
            if frame.label is not None:
                cm = accumulate(cm, frame.label, pred, ds.table)
                labeled += 1
        traces.append((name, result.costs))
        total_cost += sum(fc.cost for fc in result.costs)
        total_frames += len(seq)

    write_cost_trace_csv(traces, str(out_dir / "cost_trace.csv"))
    relative = total_cost / (total_frames * costs.cost_prime)
    manifest = {
        "dataset": str(args.dataset),
        "split": args.split,
        "priming_checkpoint": str(args.priming),
        "joint_checkpoint": str(args.joint),
        "priming_period": "inf" if math.isinf(sched.priming_period) else int(sched.priming_period),
        "downsample_factor": sched.downsample_factor,
        "cost_model": dataclasses.asdict(costs),
        "cost_model_provenance": provenance,
        "seed": args.seed,
        "version": __version__,
    }
    (out_dir / "run_manifest.yaml").write_text(yaml.safe_dump(manifest, sort_keys=False))

    if labeled:
        report = compute_report(cm, ds.table)
        write_metrics_csv(report, ds.table, str(out_dir / "metrics.csv"),
                          relative_runtime=relative)
        if not args.no_plot:
            from .figures import save_cost_trace_figure, save_metrics_figure

            save_metrics_figure(report, ds.table, str(out_dir / "metrics.png"),
                                relative_runtime=relative)
            save_cost_trace_figure(traces, str(out_dir / "cost_trace_fig.png"))
        print(f"mIoU {report.miou:.4f}  relative runtime {relative:.4f} "
              f"({labeled} labeled frames)")
    else:
        print(f"no labeled frames; wrote predictions and cost trace only "
              f"(relative runtime {relative:.4f})")
    return 0


def cmd_budget(args) -> int:
    if args.calibrate:
        if not (args.priming and args.joint):
            raise DataError("--calibrate needs --priming and --joint checkpoints")
        nets = _load_nets(args.priming, args.joint)
        costs = calibrate_cost_model(
            nets, args.height, args.width, args.downsample,
            repeats=args.repeats, seed=args.seed or 0,
        )
        provenance = (f"calibrated: {args.height}x{args.width}, "
                      f"median of {args.repeats} runs")
    elif args.cost_model:
        costs = load_cost_model(Path(args.cost_model))
        provenance = f"file:{args.cost_model}"
    else:
        raise DataError("budget needs --cost-model FILE or --calibrate")
    if args.save_cost_model:
        save_cost_model(costs, provenance, Path(args.save_cost_model))

    curve = budget_curve(costs, args.periods, args.length)
    out = Path(args.out)
    write_budget_csv(curve, str(out))
    if not args.no_plot:
        from .figures import save_budget_figure

        save_budget_figure(curve, _figure_path(out))
    for k, rel in curve:
        kk = "inf" if math.isinf(k) else int(k)
        print(f"k={kk}: relative runtime {rel:.4f}")
    return 0


def cmd_eval(args) -> int:
    ds = load_dataset(Path(args.dataset))
    names = ds.names if args.split is None else [
        n for n in ds.names if n in set(ds.split[args.split])
    ]
    seqs = ds.select(args.split)
    pred_root = Path(args.pred)
    cm = ConfusionMatrix.empty(ds.table.num_scored)
    labeled = 0
    for name, seq in zip(names, seqs):
        for i, frame in enumerate(seq.frames):
            if frame.label is None:
                continue
            pred_path = pred_root / name / f"label_{i:04d}.png"
            pred = load_label_image(pred_path, ds.table)
            cm = accumulate(cm, frame.label, pred, ds.table)
            labeled += 1
    if not labeled:
        raise DataError("no labeled frames to evaluate")
    report = compute_report(cm, ds.table)
    out = Path(args.out)
    write_metrics_csv(report, ds.table, str(out))
    if not args.no_plot:
        from .figures import save_metrics_figure

        save_metrics_figure(report, ds.table, _figure_path(out))
    print(f"mIoU {report.miou:.4f}  class-avg accuracy {report.class_avg_accuracy:.4f} "
          f"({labeled} frames)")
    return 0


def build_parser() -> _Parser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="deterministic seed")
    common.add_argument("--threads", type=int, default=1, help="worker-thread cap")
    common.add_argument("--config", type=Path, default=None, help="YAML config file")
    common.add_argument("--no-plot", action="store_true", help="skip figure rendering")

    p = _Parser(prog="vidseg", description=__doc__,
                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", parents=[common], help="render a synthetic dataset")
    g.add_argument("--out", required=True, help="output dataset directory")
    g.add_argument("--sequences", type=int, default=2)
    g.add_argument("--frames", type=int, default=30)
    g.add_argument("--width", type=int, default=384)
    g.add_argument("--height", type=int, default=256)
    g.add_argument("--frame-rate", type=float, default=30.0)
    g.add_argument("--train-fraction", type=float, default=None,
                   help="write a distribution-balanced train/test split")
    g.set_defaults(func=cmd_generate)

    d = sub.add_parser("density", parents=[common], help="annotation density statistics")
    d.add_argument("dataset")
    d.add_argument("--out", default="density.csv")
    d.set_defaults(func=cmd_density)

    s = sub.add_parser("subn", parents=[common], help="sub-N control experiment")
    s.add_argument("dataset")
    s.add_argument("--strides", type=_parse_strides, default=list(DEFAULT_STRIDES))
    s.add_argument("--split", default=None)
    s.add_argument("--out", default="subn.csv")
    s.set_defaults(func=cmd_subn)

    t = sub.add_parser("train", parents=[common], help="train networks")
    t.add_argument("dataset")
    t.add_argument("--stage", choices=["priming", "joint"], required=True)
    t.add_argument("--out", required=True, help="checkpoint file to write")
    t.add_argument("--split", default=None)
    t.add_argument("--priming", default=None, help="priming checkpoint (joint stage)")
    t.add_argument("--period", type=_parse_period, default=None)
    t.add_argument("--downsample", type=int, default=None)
    t.add_argument("--unroll", type=int, default=None)
    t.add_argument("--ensemble-init", default=None,
                   choices=["passthrough_noise", "passthrough", "random"])
    t.add_argument("--epochs", type=int, default=None)
    t.add_argument("--lr", type=float, default=None)
    t.add_argument("--momentum", type=float, default=None)
    t.add_argument("--batch-size", type=int, default=None)
    t.add_argument("--quiet", action="store_true")
    t.set_defaults(func=cmd_train)

    r = sub.add_parser("run", parents=[common], help="segment a dataset")
    r.add_argument("dataset")
    r.add_argument("--priming", required=True)
    r.add_argument("--joint", required=True)
    r.add_argument("--out", required=True, help="output directory")
    r.add_argument("--period", type=_parse_period, default=math.inf)
    r.add_argument("--downsample", type=int, default=4)
    r.add_argument("--split", default=None)
    r.add_argument("--cost-model", default=None, help="cost model YAML")
    r.set_defaults(func=cmd_run)

    b = sub.add_parser("budget", parents=[common], help="runtime budget curve")
    b.add_argument("--cost-model", default=None)
    b.add_argument("--calibrate", action="store_true")
    b.add_argument("--priming", default=None)
    b.add_argument("--joint", default=None)
    b.add_argument("--height", type=int, default=256)
    b.add_argument("--width", type=int, default=384)
    b.add_argument("--downsample", type=int, default=4)
    b.add_argument("--repeats", type=int, default=30)
    b.add_argument("--periods", type=_parse_periods, default=[1.0, 2.0, 5.0, math.inf])
    b.add_argument("--length", "-L", type=int, default=60)
    b.add_argument("--save-cost-model", default=None)
    b.add_argument("--out", default="budget.csv")
    b.set_defaults(func=cmd_budget)

    e = sub.add_parser("eval", parents=[common], help="score predictions against gt")
    e.add_argument("dataset")
    e.add_argument("--pred", required=True, help="prediction directory")
    e.add_argument("--split", default=None)
    e.add_argument("--out", default="metrics.csv")
    e.set_defaults(func=cmd_eval)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (DataError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NumericError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
