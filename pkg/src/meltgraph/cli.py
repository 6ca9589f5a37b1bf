"""Command-line surface tying the pipeline together.

Subcommands: gen-plans, gen-data, train, transfer, tune, evaluate, rollout,
export-plot, table3. Every run writes a manifest (config hash, seeds,
version) into the output directory so artifacts are reproducible.

Exit codes: 0 success, 2 config/validation error, 3 numeric failure,
4 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, load_config
from .gnn import init_params
from .gpbo import (
    GpNumericError,
    HyperBounds,
    TuneTrace,
    format_table3,
    tune,
    write_trace_csv as write_tune_csv,
)
from .meshgraph import (
    ConcatSamples,
    FeatureVariant,
    grid_to_graph,
    propagation_matrix,
    samples_from_history,
)
from .rollout import RolloutDivergenceError, error_curve, rollout
from .scanpath import (
    GridSpec,
    compile_schedule,
    enumerate_island_sequences,
    hilbert_plan,
    island_plan,
    multi_laser_doe,
    plan_from_text,
    plan_to_text,
    spiral_plan,
)
from .storage import (
    CheckpointMeta,
    FormatError,
    TruncationError,
    load_checkpoint,
    load_history,
    persist_checkpoint,
    persist_history,
)
from .svgplot import export_curve_svg, export_field_svg
from .thermal import ThermalBlowupError, simulate
from .training import (
    evaluate_metrics,
    ml_candidate_rmse,
    train_sequential,
    transfer_retrain,
    write_eval_csv,
    write_trace_csv,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_IO = 4


def _out_dir(config: RunConfig, arg: str | None) -> Path:
    out = Path(arg) if arg else Path(os.environ.get("MELTGRAPH_OUT", config.output_dir))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(out: Path, config: RunConfig, argv: list[str]) -> None:
    manifest = {
        "version": __version__,
        "config_sha256": config.config_hash(),
        "seed": config.seed,
        "command": argv,
    }
    (out / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _variant_from_args(args) -> FeatureVariant:
    if args.variant == "SL":
        return FeatureVariant.single_laser()
    return FeatureVariant.multi_laser(args.dup_a, args.amp_b)


def cmd_gen_plans(args, config: RunConfig, argv) -> int:
    out = _out_dir(config, args.out)
    grid = config.grids[args.domain]
    plans = []
    if args.kind == "islands":
        sequences = enumerate_island_sequences(
            grid, args.island_size, args.limit, config.seed
        )
        for seq in sequences:
            plans.append(island_plan(grid, args.island_size, seq))
    elif args.kind == "doe":
        plans = multi_laser_doe(grid, args.lasers)
        if args.limit and args.limit < len(plans):
            plans = plans[: args.limit]
    elif args.kind == "spiral":
        plans = [spiral_plan(grid, args.lasers)]
    elif args.kind == "hilbert":
        plans = [hilbert_plan(grid)]
    for i, plan in enumerate(plans):
        (out / f"plan_{i:04d}.txt").write_text(plan_to_text(plan), encoding="utf-8")
    _write_manifest(out, config, argv)
    print(f"wrote {len(plans)} plan(s) to {out}")
    return EXIT_OK


def cmd_gen_data(args, config: RunConfig, argv) -> int:
    out = _out_dir(config, args.out)
    for plan_path in args.plans:
        plan = plan_from_text(Path(plan_path).read_text(encoding="utf-8"))
        history = simulate(plan, config.material, config.process)
        name = Path(plan_path).stem + ".mgth"
        persist_history(history, out / name)
        print(f"{plan_path} -> {out / name} ({history.n_frames} frames)")
    _write_manifest(out, config, argv)
    return EXIT_OK


def _load_cases(history_paths, variant: FeatureVariant, aggregation: str):
    cases = []
    graph = None
    prop = None
    grid = None
    for path in history_paths:
        history = load_history(path)
        if grid is None or history.grid.node_counts != grid.node_counts:
            grid = history.grid
            graph = grid_to_graph(grid)
            prop = propagation_matrix(graph, aggregation)
        cases.append(samples_from_history(history, graph, prop, variant, Path(path).stem))
    return cases


def cmd_train(args, config: RunConfig, argv) -> int:
    out = _out_dir(config, args.out)
    variant = _variant_from_args(args)
    cases = _load_cases(args.histories, variant, args.aggregation)
    holdout = args.holdout
    train_cases = cases[: len(cases) - holdout] if holdout else cases
    params = init_params(args.variant, variant.feature_width, config.seed, args.aggregation)
    params, trace = train_sequential(train_cases, config.training, params)
    persist_checkpoint(
        params,
        out / "model.mgck",
        CheckpointMeta(iterations=len(trace), loss=config.training.loss, seed=config.seed),
    )
    write_trace_csv(out / "trace.csv", trace)
    if holdout:
        holdout_pool = ConcatSamples(cases[len(cases) - holdout :])
        report = evaluate_metrics(params, holdout_pool, config.training.loss.threshold)
        print(
            f"holdout rmse={report.rmse:.3f} degC mape={report.mape:.3f}% "
            f"max_peak_ape={report.max_peak_ape:.3f}%"
        )
    _write_manifest(out, config, argv)
    print(f"model written to {out / 'model.mgck'}")
    return EXIT_OK


def cmd_transfer(args, config: RunConfig, argv) -> int:
    out = _out_dir(config, args.out)
    parent, meta = load_checkpoint(args.parent)
    variant = _variant_from_args(args)
    cases = _load_cases([args.history], variant, parent.aggregation)
    samples = cases[0]
    transfer_cfg = config.transfer
    model = transfer_retrain(
        parent,
        int(args.freeze_last if args.freeze_last is not None else transfer_cfg.get("freeze_last", 2)),
        samples,
        int(args.n_train if args.n_train is not None else transfer_cfg.get("n_train", 14)),
        int(args.n_val if args.n_val is not None else transfer_cfg.get("n_val", 2)),
        config.training,
        config.seed,
    )
    persist_checkpoint(model, out / "transfer.mgck", CheckpointMeta(loss=meta.loss, seed=config.seed))
    parent_report = evaluate_metrics(parent, samples, config.training.loss.threshold)
    child_report = evaluate_metrics(model, samples, config.training.loss.threshold)
    print(
        f"parent mape={parent_report.mape:.3f}% -> transferred mape={child_report.mape:.3f}%"
    )
    _write_manifest(out, config, argv)
    return EXIT_OK


def cmd_tune(args, config: RunConfig, argv) -> int:
    out = _out_dir(config, args.out)
    train_histories = [load_history(p) for p in args.histories]
    val_histories = [load_history(p) for p in args.val_histories]
    grid = train_histories[0].grid
    graph = grid_to_graph(grid)
    prop = propagation_matrix(graph, args.aggregation)
    gp_cfg = config.gpbo
    bounds_cfg = gp_cfg.get("bounds", {})
    bounds = HyperBounds(
        a=tuple(bounds_cfg.get("a", (1, 4))),
        b=tuple(bounds_cfg.get("b", (1.0, 1000.0))),
        c=tuple(bounds_cfg.get("c", (1.0, 1e4))),
    )

    def objective(point):
        return ml_candidate_rmse(
            point.a,
            point.b,
            point.c,
            train_histories,
            val_histories,
            graph,
            prop,
            steps=int(gp_cfg.get("candidate_steps", 600)),
            learning_rate=config.training.learning_rate,
            seed=config.seed,
            dropout=config.training.dropout,
            threshold=config.training.loss.threshold,
        )

    best, trace = tune(
        objective,
        bounds,
        n_init=int(gp_cfg.get("n_init", 5)),
        n_iter=int(gp_cfg.get("n_iter", 25)),
        seed=config.seed,
    )
    write_tune_csv(out / "tune_trace.csv", trace)
    _write_manifest(out, config, argv)
    print(f"best a={best.a} b={best.b:.3f} c={best.c:.3f}")
    print(format_table3(trace))
    return EXIT_OK


def cmd_evaluate(args, config: RunConfig, argv) -> int:
    out = _out_dir(config, args.out)
    params, _ = load_checkpoint(args.model)
    variant = _variant_from_args(args)
    cases = _load_cases(args.histories, variant, params.aggregation)
    pool = ConcatSamples(cases)
    report = evaluate_metrics(params, pool, config.training.loss.threshold)
    write_eval_csv(out / "eval.csv", params, pool, config.training.loss.threshold)
    _write_manifest(out, config, argv)
    print(
        f"rmse={report.rmse:.3f} degC mape={report.mape:.3f}% "
        f"max_peak_ape={report.max_peak_ape:.3f}%"
    )
    return EXIT_OK


def cmd_rollout(args, config: RunConfig, argv) -> int:
    out = _out_dir(config, args.out)
    params, _ = load_checkpoint(args.model)
    plan = plan_from_text(Path(args.plan).read_text(encoding="utf-8"))
    variant = _variant_from_args(args)
    graph = grid_to_graph(plan.grid)
    prop = propagation_matrix(graph, params.aggregation)
    schedule = compile_schedule(plan, config.process)
    if args.steps is not None:
        schedule = type(schedule)(
            steps=schedule.steps[: args.steps], dwell=schedule.dwell, grid=schedule.grid
        )
    predicted = rollout(
        params, graph, prop, schedule, config.process.substrate_temperature, variant
    )
    persist_history(predicted, out / "rollout.mgth")
    if args.truth:
        truth = load_history(args.truth)
        truth_frames = truth.frames[: predicted.n_frames]
        truth = type(truth)(grid=truth.grid, frames=truth_frames, dwell=truth.dwell)
        curve = error_curve(predicted, truth)
        with open(out / "rollout_error.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["timestep", "rmse"])
            for t, v in enumerate(curve):
                writer.writerow([t, repr(v)])
        print(f"final-step rmse={curve[-1]:.3f} degC")
    _write_manifest(out, config, argv)
    print(f"rollout written to {out / 'rollout.mgth'}")
    return EXIT_OK


def cmd_export_plot(args, config: RunConfig, argv) -> int:
    out = _out_dir(config, args.out)
    if args.history:
        history = load_history(args.history)
        frame = history.frames[args.frame]
        target = out / f"field_{args.frame:05d}.svg"
        export_field_svg(frame.temps, history.grid, target)
        print(f"wrote {target} and {target.with_suffix('.csv')}")
    if args.error_csv:
        values = []
        with open(args.error_csv, newline="") as fh:
            for row in csv.DictReader(fh):
                values.append(float(row["rmse"]))
        target = out / "error_curve.svg"
        export_curve_svg(values, target)
        print(f"wrote {target} and {target.with_suffix('.csv')}")
    _write_manifest(out, config, argv)
    return EXIT_OK


def cmd_table3(args, config: RunConfig, argv) -> int:
    trace = TuneTrace()
    with open(args.trace, newline="") as fh:
        for i, row in enumerate(csv.DictReader(fh)):
            from .gpbo import HyperPoint, TuneEval

            trace.evaluations.append(
                TuneEval(
                    index=int(row["iteration"]),
                    point=HyperPoint(
                        a=int(row["a"]), b=float(row["b"]), c=float(row["c"])
                    ),
                    raw_a=float(row["a"]),
                    objective=float(row["rmse"]),
                    seconds=float(row["seconds"]),
                )
            )
    print(format_table3(trace))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="meltgraph")
    parser.add_argument("--config", help="JSON run configuration file")
    parser.add_argument("--seed", type=int, help="override the config seed")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_variant_flags(p):
        p.add_argument("--variant", choices=["SL", "ML"], default="SL")
        p.add_argument("--dup-a", type=int, default=1, help="ML laser-column count")
        p.add_argument("--amp-b", type=float, default=1.0, help="ML laser-column value")

    p = sub.add_parser("gen-plans", help="emit island/raster/spiral/Hilbert plans")
    p.add_argument("--domain", default="A")
    p.add_argument("--kind", choices=["islands", "doe", "spiral", "hilbert"], default="islands")
    p.add_argument("--island-size", type=float, default=1.0)
    p.add_argument("--limit", type=int, default=100)
    p.add_argument("--lasers", type=int, default=3)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen_plans)

    p = sub.add_parser("gen-data", help="simulate plans into thermal histories")
    p.add_argument("--plans", nargs="+", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="case-sequential training on histories")
    p.add_argument("--histories", nargs="+", required=True)
    p.add_argument("--holdout", type=int, default=0, help="trailing cases held out")
    p.add_argument("--aggregation", choices=["mean", "symmetric"], default="mean")
    add_variant_flags(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("transfer", help="freeze-and-retrain on a target domain")
    p.add_argument("--parent", required=True)
    p.add_argument("--history", required=True)
    p.add_argument("--freeze-last", type=int)
    p.add_argument("--n-train", type=int)
    p.add_argument("--n-val", type=int)
    add_variant_flags(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_transfer)

    p = sub.add_parser("tune", help="GP-BO over the multi-laser hyperparameters")
    p.add_argument("--histories", nargs="+", required=True)
    p.add_argument("--val-histories", nargs="+", required=True)
    p.add_argument("--aggregation", choices=["mean", "symmetric"], default="mean")
    p.add_argument("--out")
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("evaluate", help="metrics for a checkpoint on histories")
    p.add_argument("--model", required=True)
    p.add_argument("--histories", nargs="+", required=True)
    add_variant_flags(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("rollout", help="autoregressive prediction over a plan")
    p.add_argument("--model", required=True)
    p.add_argument("--plan", required=True)
    p.add_argument("--truth")
    p.add_argument("--steps", type=int)
    add_variant_flags(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_rollout)

    p = sub.add_parser("export-plot", help="render fields/curves to SVG + CSV")
    p.add_argument("--history")
    p.add_argument("--frame", type=int, default=0)
    p.add_argument("--error-csv")
    p.add_argument("--out")
    p.set_defaults(func=cmd_export_plot)

    p = sub.add_parser("table3", help="print the top tuning rows")
    p.add_argument("--trace", required=True)
    p.set_defaults(func=cmd_table3)

    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = load_config(args.config, seed=args.seed)
        return args.func(args, config, argv)
    except (ConfigError,) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ThermalBlowupError, GpNumericError, RolloutDivergenceError, np.linalg.LinAlgError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (FormatError, TruncationError) as exc:
        print(f"format error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
