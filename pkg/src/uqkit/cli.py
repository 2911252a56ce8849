"""Command-line orchestration: ingest, split, train, report.

Subcommands: run, compare, search, select-descriptors, histogram. Every run
writes its report (JSON + CSV), the per-point interval table, the error
residual histogram, serialized models, and matplotlib figures into the
output directory. All outputs embed the config hash, dataset hash and seed,
so identical invocations reproduce identical files.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import uq
from .boosting import GbdtConfig, GbdtModel, fit_gbdt, predict_gbdt
from .data import load_dataset, make_split
from .errors import MismatchedPartitions, TooManyFeatures, UqkitError
from .figures import save_histogram_figure, save_parity_figure
from .forest import ForestConfig
from .gp import fit_gp
from .kernels import KernelExpr, default_kernel
from .loss import Objective

METHODS = ("quantile", "threesplit-l1", "threesplit-l2", "gp")


@dataclass
class ExperimentConfig:
    data: str
    target: str
    id_col: str
    method: str
    out: str
    alpha_lo: float = 0.14
    alpha_hi: float = 0.84
    seed: int = 0
    unit: str = ""
    engine: str = "gbdt"  # threesplit engine: "gbdt" | "forest"
    gbdt: dict = field(default_factory=dict)  # shared GbdtConfig overrides
    gbdt_lower: dict = field(default_factory=dict)
    gbdt_mid: dict = field(default_factory=dict)
    gbdt_upper: dict = field(default_factory=dict)
    forest: dict = field(default_factory=dict)
    kernel: dict | None = None
    gp_restarts: int = 5
    gp_max_iter: int = 200
    figures: bool = True
    histogram_bins: int = 30

    def canonical(self) -> dict:
        doc = asdict(self)
        doc.pop("out", None)  # output location must not change the config hash
        return doc


def _sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _sha256_doc(doc) -> str:
    return hashlib.sha256(
        json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")
    ).hexdigest()


def _write_json(path, doc):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _gbdt_config(cfg: ExperimentConfig, extra: dict, objective: Objective, seed_offset=0):
    params = {"seed": cfg.seed + seed_offset, **cfg.gbdt, **extra}
    params["objective"] = objective
    return GbdtConfig(**params)


def _round9(x: float) -> float:
    return float(round(x, 9))


def build_intervals(config: ExperimentConfig, dataset):
    """Fit per the configured method; returns (intervals, test subset, info)."""
    info = {}
    models = {}
    if config.method == "quantile":
        plan = make_split(dataset.n, "twoway", config.seed)
        train, test = dataset.subset(plan.partitions[0]), dataset.subset(plan.partitions[1])
        triad = uq.fit_quantile_triad(
            train,
            config.alpha_lo,
            config.alpha_hi,
            (
                _gbdt_config(config, config.gbdt_lower, Objective.quantile(config.alpha_lo), 1),
                _gbdt_config(config, config.gbdt_mid, Objective.mse(), 2),
                _gbdt_config(config, config.gbdt_upper, Objective.quantile(config.alpha_hi), 3),
            ),
        )
        intervals = uq.triad_intervals(triad, test.features)
        info["n_crossing"] = int(
            sum(1 for iv in intervals if iv.raw_upper < iv.raw_lower)
        )
        models = {"lower": triad[0], "mid": triad[1], "upper": triad[2]}
    elif config.method in ("threesplit-l1", "threesplit-l2"):
        kind = config.method.split("-")[1]
        plan = make_split(dataset.n, "threeway", config.seed)
        if config.engine == "forest":
            engine = ForestConfig(**{"seed": config.seed, **config.forest})
        else:
            engine = _gbdt_config(config, {}, Objective.mse())
        test = dataset.subset(plan.partitions[2])
        _, intervals, fitted, n_clipped = uq.threesplit_intervals(
            dataset, plan, kind, engine, return_models=True
        )
        info["n_clipped"] = n_clipped
        models = {"base": fitted[0], "error": fitted[1]}
    elif config.method == "gp":
        plan = make_split(dataset.n, "twoway", config.seed)
        train, test = dataset.subset(plan.partitions[0]), dataset.subset(plan.partitions[1])
        if config.kernel is not None:
            template = KernelExpr.from_dict(config.kernel, dataset.d)
        else:
            template = default_kernel(dataset.d)
        model = fit_gp(
            train,
            template,
            restarts=config.gp_restarts,
            seed=config.seed,
            max_iter=config.gp_max_iter,
        )
        intervals = uq.gp_intervals(model, test)
        info["log_likelihood"] = model.log_likelihood
        info["jitter"] = model.jitter
        models = {"gp_kernel": model.kernel}
    else:
        raise ValueError(f"unknown method {config.method!r}; choose from {METHODS}")
    return intervals, test, plan, models, info


def cmd_run(config: ExperimentConfig) -> dict:
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    dataset = load_dataset(config.data, config.target, config.id_col, unit=config.unit)
    dataset_hash = _sha256_file(config.data)
    config_hash = _sha256_doc(config.canonical())

    intervals, test, plan, models, info = build_intervals(config, dataset)

    observed = test.targets
    center = np.array([iv.center for iv in intervals])
    half = np.array([iv.half_width for iv in intervals])
    exact_error = np.abs(observed - center)
    base_mae = float(np.mean(exact_error))
    error_mae = float(np.mean(np.abs(half - exact_error)))
    inbounds = uq.inbounds_percentage(intervals, observed)
    calib = uq.calibrate_scale(intervals, observed, target_pct=68.0)
    flags = uq.inbounds_flags(intervals, observed)

    report = {
        "property": config.target,
        "method": config.method,
        "unit": config.unit,
        "seed": config.seed,
        "alpha_lo": config.alpha_lo,
        "alpha_hi": config.alpha_hi,
        "n_train": dataset.n - test.n,
        "n_test": test.n,
        "n_dropped": dataset.n_dropped,
        "base_mae": _round9(base_mae),
        "error_mae": _round9(error_mae),
        "inbounds_pct": _round9(inbounds),
        "scale_factor": _round9(calib.scale),
        "rescaled_inbounds_pct": _round9(calib.coverage_pct),
        "calibration_all_zero": calib.all_zero,
        "split": {"kind": plan.kind, "seed": plan.seed, "sizes": list(plan.sizes)},
        "dataset_hash": dataset_hash,
        "config_hash": config_hash,
        **{k: (_round9(v) if isinstance(v, float) else v) for k, v in info.items()},
    }
    _write_json(out / "report.json", report)
    _write_csv(
        out / "report.csv",
        ["property", "method", "base_mae", "error_mae", "inbounds_pct", "scale_factor", "n_test"],
        [
            [
                report["property"],
                report["method"],
                report["base_mae"],
                report["error_mae"],
                report["inbounds_pct"],
                report["scale_factor"],
                report["n_test"],
            ]
        ],
    )
    _write_csv(
        out / "intervals.csv",
        ["id", "observed", "center", "half_width", "inbounds_flag"],
        [
            [test.ids[i], repr(float(observed[i])), repr(float(center[i])), repr(float(half[i])), int(flags[i])]
            for i in range(test.n)
        ],
    )
    hist = uq.residual_histogram(half, exact_error, config.histogram_bins)
    _write_csv(
        out / "residual_hist.csv",
        ["bin_lo", "bin_hi", "count"],
        [
            [repr(float(hist.edges[i])), repr(float(hist.edges[i + 1])), int(hist.counts[i])]
            for i in range(len(hist.counts))
        ],
    )
    for name, model in models.items():
        if hasattr(model, "to_json"):
            with open(out / f"model_{name}.json", "w", encoding="utf-8") as fh:
                fh.write(model.to_json())
        elif hasattr(model, "to_dict"):
            _write_json(out / f"model_{name}.json", model.to_dict())
    if config.figures:
        save_parity_figure(
            out / "parity.png",
            observed,
            center,
            half,
            unit=config.unit,
            title=f"{config.target} ({config.method})",
        )
        save_histogram_figure(
            out / "residual_hist.png",
            hist.edges,
            hist.counts,
            xlabel="predicted error - exact error",
            title=f"{config.target} ({config.method})",
        )
    return report


def cmd_compare(report_paths, out_dir=None) -> list:
    if len(report_paths) < 2:
        raise ValueError("compare needs at least two reports")
    reports = []
    for p in report_paths:
        with open(p, encoding="utf-8") as fh:
            reports.append(json.load(fh))
    head = reports[0]
    for r in reports[1:]:
        for key in ("property", "dataset_hash", "seed", "n_test"):
            if r.get(key) != head.get(key):
                raise MismatchedPartitions(
                    f"reports disagree on {key}: {r.get(key)!r} vs {head.get(key)!r}"
                )
    rows = sorted(
        (
            {
                "method": r["method"],
                "base_mae": r["base_mae"],
                "error_mae": r["error_mae"],
                "inbounds_pct": r["inbounds_pct"],
                "scale_factor": r["scale_factor"],
                "rescaled_inbounds_pct": r["rescaled_inbounds_pct"],
            }
            for r in reports
        ),
        key=lambda row: row["method"],
    )
    header = ["method", "base_mae", "error_mae", "inbounds_pct", "scale_factor", "rescaled_inbounds_pct"]
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write_csv(out / "comparison.csv", header, [[row[k] for k in header] for row in rows])
        _write_json(
            out / "comparison.json",
            {"property": head["property"], "dataset_hash": head["dataset_hash"], "rows": rows},
        )
    return rows


SEARCH_SPACE = {
    "n_trees": (100, 600),  # log-uniform integer
    "learning_rate": (0.02, 0.2),  # log-uniform
    "max_leaves": (7, 15, 31, 63),
    "min_samples_leaf": (1, 5, 10, 20),
    "subsample": (0.6, 1.0),
    "colsample": (0.6, 1.0),
}


def _sample_config(seed: int, trial: int, objective: Objective) -> GbdtConfig:
    rng = np.random.default_rng([seed, trial])
    lo, hi = SEARCH_SPACE["n_trees"]
    n_trees = int(round(np.exp(rng.uniform(np.log(lo), np.log(hi)))))
    lo, hi = SEARCH_SPACE["learning_rate"]
    lr = float(np.exp(rng.uniform(np.log(lo), np.log(hi))))
    return GbdtConfig(
        n_trees=n_trees,
        learning_rate=lr,
        max_leaves=int(rng.choice(SEARCH_SPACE["max_leaves"])),
        min_samples_leaf=int(rng.choice(SEARCH_SPACE["min_samples_leaf"])),
        subsample=float(rng.uniform(*SEARCH_SPACE["subsample"])),
        colsample=float(rng.uniform(*SEARCH_SPACE["colsample"])),
        seed=seed,
        objective=objective,
    )


def cmd_search(config: ExperimentConfig, budget: int, role: str = "mid") -> dict:
    """Random search over the GBDT space, scored by validation MAE.

    The 10 % test partition is left untouched: trials are scored on a 20 %
    validation slice carved out of the training partition.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    dataset = load_dataset(config.data, config.target, config.id_col, unit=config.unit)
    plan = make_split(dataset.n, "twoway", config.seed)
    train_pool = dataset.subset(plan.partitions[0])
    rng = np.random.default_rng([config.seed, 2**31])
    perm = rng.permutation(train_pool.n)
    n_val = max(1, int(round(0.2 * train_pool.n)))
    fit_set = train_pool.subset(perm[:-n_val])
    val_set = train_pool.subset(perm[-n_val:])

    if role == "mid":
        objective = Objective.mse()
    elif role == "lower":
        objective = Objective.quantile(config.alpha_lo)
    elif role == "upper":
        objective = Objective.quantile(config.alpha_hi)
    else:
        raise ValueError(f"role must be mid/lower/upper, got {role!r}")

    trace = []
    best = None
    for trial in range(budget):
        trial_cfg = _sample_config(config.seed, trial, objective)
        model = fit_gbdt(fit_set, trial_cfg)
        val_mae = float(np.mean(np.abs(val_set.targets - predict_gbdt(model, val_set.features))))
        trace.append((trial, trial_cfg, val_mae))
        if best is None or val_mae < best[2]:
            best = (trial, trial_cfg, val_mae)

    _write_csv(
        out / "trace.csv",
        ["trial", "n_trees", "learning_rate", "max_leaves", "min_samples_leaf", "subsample", "colsample", "val_mae"],
        [
            [t, c.n_trees, repr(c.learning_rate), c.max_leaves, c.min_samples_leaf, repr(c.subsample), repr(c.colsample), repr(mae)]
            for t, c, mae in trace
        ],
    )
    best_doc = {
        "trial": best[0],
        "val_mae": best[2],
        "role": role,
        "seed": config.seed,
        "config": best[1].to_dict(),
    }
    _write_json(out / "best_config.json", best_doc)
    return best_doc


def cmd_select_descriptors(model_paths, top_k: int, out_path=None) -> list:
    models = [GbdtModel.load(p) for p in model_paths]
    selected = uq.select_descriptors(models, top_k=top_k)
    if out_path is not None:
        _write_json(out_path, {"top_k": top_k, "selected": selected})
    return selected


def cmd_histogram(input_path, pred_col, ref_col, n_bins, value_range, out_dir, figures=True):
    with open(input_path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        pred, ref = [], []
        for record in reader:
            pred.append(float(record[pred_col]))
            ref.append(float(record[ref_col]))
    hist = uq.residual_histogram(pred, ref, n_bins, value_range)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(
        out / "histogram.csv",
        ["bin_lo", "bin_hi", "count"],
        [
            [repr(float(hist.edges[i])), repr(float(hist.edges[i + 1])), int(hist.counts[i])]
            for i in range(len(hist.counts))
        ],
    )
    if figures:
        save_histogram_figure(out / "histogram.png", hist.edges, hist.counts)
    return hist


def _add_common(parser):
    parser.add_argument("--data", required=True)
    parser.add_argument("--target", required=True)
    parser.add_argument("--id-col", required=True)
    parser.add_argument("--alpha-lo", type=float, default=0.14)
    parser.add_argument("--alpha-hi", type=float, default=0.84)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--unit", default="")
    parser.add_argument("--out", required=True)
    parser.add_argument("--config", help="JSON file whose values override the flags")


def _experiment_config(args, method=None) -> ExperimentConfig:
    doc = {
        "data": args.data,
        "target": args.target,
        "id_col": args.id_col,
        "method": method or getattr(args, "method", "quantile"),
        "alpha_lo": args.alpha_lo,
        "alpha_hi": args.alpha_hi,
        "seed": args.seed,
        "unit": args.unit,
        "out": args.out,
    }
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            doc.update(json.load(fh))
    return ExperimentConfig(**doc)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uqkit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="fit one method and write its report")
    _add_common(p_run)
    p_run.add_argument("--method", choices=METHODS, required=True)
    p_run.add_argument("--no-figures", action="store_true")

    p_cmp = sub.add_parser("compare", help="tabulate reports over one test partition")
    p_cmp.add_argument("reports", nargs="+")
    p_cmp.add_argument("--out")

    p_search = sub.add_parser("search", help="random hyperparameter search (GBDT)")
    _add_common(p_search)
    p_search.add_argument("--budget", type=int, required=True)
    p_search.add_argument("--role", choices=("mid", "lower", "upper"), default="mid")

    p_sel = sub.add_parser("select-descriptors", help="shared top-k features of 3 models")
    p_sel.add_argument("--models", nargs=3, required=True)
    p_sel.add_argument("--top-k", type=int, default=50)
    p_sel.add_argument("--out")

    p_hist = sub.add_parser("histogram", help="residual histogram from a CSV")
    p_hist.add_argument("--input", required=True)
    p_hist.add_argument("--pred-col", required=True)
    p_hist.add_argument("--ref-col", required=True)
    p_hist.add_argument("--bins", type=int, default=50)
    p_hist.add_argument("--range", type=float, nargs=2)
    p_hist.add_argument("--out", required=True)
    p_hist.add_argument("--no-figures", action="store_true")

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            config = _experiment_config(args)
            if args.no_figures:
                config.figures = False
            report = cmd_run(config)
            print(json.dumps(report, sort_keys=True))
        elif args.command == "compare":
            rows = cmd_compare(args.reports, args.out)
            print(json.dumps(rows, sort_keys=True))
        elif args.command == "search":
            config = _experiment_config(args)
            best = cmd_search(config, args.budget, args.role)
            print(json.dumps(best, sort_keys=True))
        elif args.command == "select-descriptors":
            selected = cmd_select_descriptors(args.models, args.top_k, args.out)
            print(json.dumps(selected))
        elif args.command == "histogram":
            value_range = tuple(args.range) if args.range else None
            cmd_histogram(
                args.input,
                args.pred_col,
                args.ref_col,
                args.bins,
                value_range,
                args.out,
                figures=not args.no_figures,
            )
    except TooManyFeatures as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 2
    except UqkitError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1
    return 0


def entrypoint():
    raise SystemExit(main())
