"""Command-line runner: ``perihorizon {generate,train,plot,sweep,diagnose}``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from perihorizon import config as config_mod
from perihorizon import diagnostics
from perihorizon.config import ConfigError, Experiment
from perihorizon.datagen import CollocationSet, build_collocation
from perihorizon.files import SchemaError, read_dataset, unique_path, write_dataset, write_json
from perihorizon.network import dphi_ddelta, load_checkpoint, save_checkpoint
from perihorizon.training import TrainingAborted, TrainTrace, seed_streams, train

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

log = logging.getLogger("perihorizon")


def _experiment(args, delta_init=None) -> Experiment:
    overrides = {
        "training.seed": getattr(args, "seed", None),
        "training.delta_init": delta_init if delta_init is not None else getattr(args, "delta_init", None),
        "output.dir": getattr(args, "out", None),
    }
    return Experiment.from_sources(getattr(args, "config", None), getattr(args, "preset", None), overrides)


def _out_dir(exp: Experiment) -> Path:
    out = Path(exp.values["output.dir"])
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc}") from exc
    return out


def generate_dataset(exp: Experiment) -> CollocationSet:
    _, data_seed, _ = seed_streams(exp.values["training.seed"])
    data = build_collocation(exp.problem(), exp.counts(), seed=data_seed)
    data.meta["config_hash"] = exp.hash
    return data


def run_generate(exp: Experiment) -> Path:
    out = _out_dir(exp)
    data = generate_dataset(exp)
    path = unique_path(out, f"dataset-{exp.hash}", ".csv")
    write_dataset(data, path)
    return path


def _check_dataset(exp: Experiment, data: CollocationSet) -> None:
    if data.dim != exp.values["problem.dim"]:
        raise ConfigError(f"dataset is {data.dim}D but the configuration is {exp.values['problem.dim']}D")


def run_train(exp: Experiment, data: CollocationSet | None = None) -> dict:
    """Train, then write the trace, checkpoint and the resolved configuration.

    On a numerical abort the partial trace and last finite parameters are
    still written before the exception propagates.
    """
    out = _out_dir(exp)
    data = generate_dataset(exp) if data is None else data
    _check_dataset(exp, data)
    stem = f"run-{exp.hash}"
    paths = {
        "trace": unique_path(out, f"{stem}-trace", ".csv"),
        "checkpoint": unique_path(out, f"{stem}-checkpoint", ".txt"),
        "config": unique_path(out, f"{stem}-config", ".cfg"),
    }
    paths["config"].write_text(config_mod.dump(exp.values))
    header = f"config_hash {exp.hash}"
    try:
        result = train(exp.train_config(), data, exp.model())
    except TrainingAborted as exc:
        exc.trace.to_csv(paths["trace"])
        save_checkpoint(exc.params, paths["checkpoint"], header)
        raise
    result.trace.to_csv(paths["trace"])
    save_checkpoint(result.params, paths["checkpoint"], header)
    return {"paths": paths, "result": result}


def convergence_summary(exp: Experiment, trace: TrainTrace):
    n = len(trace)
    transient = int(math.floor(exp.values["diagnostics.transient_fraction"] * n))
    return diagnostics.delta_monotonicity(
        trace, transient, exp.values["kernel.delta_true"], exp.values["diagnostics.gap_tol"]
    )


SWEEP_COLUMNS = ("delta_init", "converged", "direction", "final_delta", "final_R_s", "final_R_d", "status")


def run_sweep(exp: Experiment, delta_inits) -> Path:
    if len(delta_inits) < 2:
        raise ConfigError("a sweep needs at least two initial values")
    out = _out_dir(exp)
    data = generate_dataset(exp)
    path = unique_path(out, f"sweep-{exp.hash}", ".csv")
    rows = []
    for d0 in delta_inits:
        row = dict.fromkeys(SWEEP_COLUMNS, "")
        row["delta_init"] = d0
        try:
            sub = Experiment(config_mod.load(None, None, {**exp.values, "training.delta_init": d0}))
            run = run_train(sub, data)
            trace = run["result"].trace
            verdict = convergence_summary(sub, trace)
            row.update(
                converged="yes" if verdict.converged else "no",
                direction=verdict.direction,
                final_delta=float(run["result"].params.horizon),
                final_R_s=trace.rows[-1]["R_s"] if len(trace) else "",
                final_R_d=trace.rows[-1]["R_d"] if len(trace) else "",
                status="ok",
            )
        except (TrainingAborted, ConfigError, ValueError) as exc:
            row.update(converged="no", direction="none", status=f"failed: {exc}")
        rows.append(row)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    return path


def run_diagnose(exp: Experiment, checkpoint, data: CollocationSet) -> dict:
    _check_dataset(exp, data)
    model = exp.model()
    params = load_checkpoint(checkpoint)
    inner, ratio = diagnostics.grad_competition(params, data, model)
    pts = data.coords[data.data_mask]
    if len(pts) > diagnostics.TANGENT_KERNEL_LIMIT:
        idx = np.random.default_rng(0).choice(len(pts), diagnostics.TANGENT_KERNEL_LIMIT, replace=False)
        pts = pts[np.sort(idx)]
    return {
        "delta": float(params.horizon),
        "sign_indicator": diagnostics.sign_indicator(params, data, model),
        "grad_inner": inner,
        "grad_competition": ratio,
        "pl_ratio": diagnostics.pl_ratio(params, data, model, exp.values["training.loss_variant"]),
        "tangent_kernel_min_eig": diagnostics.tangent_kernel_min_eig(params, pts, model),
        "tangent_kernel_points": int(len(pts)),
        "max_abs_dphi_ddelta": float(max(abs(float(dphi_ddelta(params, p, model.arch))) for p in pts[:10])),
    }


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="perihorizon", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key = value configuration file")
        p.add_argument("--preset", choices=sorted(config_mod.PRESETS))
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output directory")
        p.add_argument("--delta-init", type=float, dest="delta_init")

    common(sub.add_parser("generate", help="write a collocation dataset"))
    p = sub.add_parser("train", help="train and write trace + checkpoint")
    common(p)
    p.add_argument("--dataset", help="dataset CSV (generated on the fly when omitted)")
    p.add_argument("--plot", action="store_true", help="also write the SVG panels")
    p = sub.add_parser("plot", help="SVG panels from a trace CSV")
    p.add_argument("trace")
    p.add_argument("--out", default=".")
    p.add_argument("--delta-true", type=float, dest="delta_true")
    p = sub.add_parser("sweep", help="train from several initial horizons")
    common(p)
    p.add_argument("--deltas", type=float, nargs="+", required=True)
    p = sub.add_parser("diagnose", help="probes from a checkpoint and dataset")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p = sub.add_parser("show-config", help="print the resolved configuration")
    common(p)
    return parser


def _plot(trace_path, out, delta_true=None):
    from perihorizon.plotting import plot_trace

    try:
        trace = TrainTrace.from_csv(trace_path)
    except ValueError as exc:
        raise SchemaError(str(exc)) from exc
    return plot_trace(trace, out, Path(trace_path).stem, delta_true)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "plot":
            Path(args.out).mkdir(parents=True, exist_ok=True)
            for path in _plot(args.trace, args.out, args.delta_true).values():
                print(path)
            return EXIT_OK
        exp = _experiment(args)
        if args.command == "show-config":
            sys.stdout.write(config_mod.dump(exp.values))
        elif args.command == "generate":
            print(run_generate(exp))
        elif args.command == "train":
            data = read_dataset(args.dataset) if args.dataset else None
            run = run_train(exp, data)
            for path in run["paths"].values():
                print(path)
            verdict = convergence_summary(exp, run["result"].trace) if len(run["result"].trace) > 1 else None
            if verdict is not None:
                print(f"final delta {float(run['result'].params.horizon):.6g} direction {verdict.direction} "
                      f"converged {verdict.converged}")
            if args.plot and len(run["result"].trace):
                for path in _plot(run["paths"]["trace"], exp.values["output.dir"], exp.values["kernel.delta_true"]).values():
                    print(path)
        elif args.command == "sweep":
            print(run_sweep(exp, args.deltas))
        elif args.command == "diagnose":
            report = run_diagnose(exp, args.checkpoint, read_dataset(args.dataset))
            print(json.dumps(report, indent=2))
            write_json(report, unique_path(_out_dir(exp), f"diagnose-{exp.hash}", ".json"))
    except (ConfigError, SchemaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TrainingAborted as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
