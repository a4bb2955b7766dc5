"""Batch entry point: split -> train -> calibrate -> predict -> evaluate -> report.

Each stage persists its artifacts under one experiment directory per
(dataset, strategy) pair and consumes only the previous stage's files, so
pipelines can be partially re-executed. Re-running with an identical config
rewrites byte-identical artifacts.

Exit codes: 0 success, 1 usage/config error (including missing stage
dependencies), 2 data error, 3 training failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import ConfensError
from .conformal import Calibration, alpha_at, build_rf_cross_conformal, calibrate
from .dataset import Dataset, SplitPlan, load_dataset, make_split, mix_seed
from .ensembles import (
    SNAPSHOT_VARIANTS,
    MemberRetryError,
    SnapshotHarvestError,
    predict_ensemble,
    read_member_matrix_csv,
    save_ensemble,
    train_independent_ensemble,
    train_snapshot_ensemble,
    write_member_matrix_csv,
)
from .evaluation import (
    DEFAULT_CL_GRID,
    DistributionSummary,
    EvalReport,
    binned_error_rate,
    coverage,
    rmse_summary,
    validity_curve,
    write_report_csvs,
)
from .forest import fit_forest, forest_to_json, predict_forest_matrix
from .mlp import StepDecaySchedule, TrainConfig, TrainingDivergedError

STRATEGIES = ("rf", "dnn-ensemble", "snapshot-v1", "snapshot-v2", "snapshot-v3")
STAGES = ("split", "train", "calibrate", "predict", "evaluate")


class ConfigError(ConfensError, ValueError):
    pass


class StageDependencyError(ConfensError, FileNotFoundError):
    def __init__(self, artifact: Path, needed_by: str, produced_by: str):
        super().__init__(
            f"stage '{needed_by}' needs {artifact}, which stage "
            f"'{produced_by}' has not produced yet"
        )
        self.artifact = artifact


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str
    strategy: str
    n_repeats: int = 20
    base_seed: int = 0
    confidence_levels: tuple[float, ...] = DEFAULT_CL_GRID
    rmse_cutoff: float = 1.2
    epoch_budget: int = 3000
    n_snapshots: int = 100
    n_members: int = 100
    n_trees: int = 100
    kfold: int = 10
    lr0: float = 0.005
    momentum: float = 0.9
    dropout_rate: float = 0.10
    batch_fraction: float = 0.15
    max_epochs: int = 3000
    patience: int = 200
    pooling: str = "pooled"
    output_dir: str = ""
    workers: int = 0
    widths_cl: float = 0.8
    bin_width: float = 1.0

    def __post_init__(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ConfigError(
                f"unknown strategy {self.strategy!r}; expected one of {', '.join(STRATEGIES)}"
            )
        if self.n_repeats < 1:
            raise ConfigError("n_repeats must be >= 1")
        if self.rmse_cutoff <= 0:
            raise ConfigError("rmse_cutoff must be > 0")
        if self.pooling not in ("pooled", "per-run"):
            raise ConfigError("pooling must be 'pooled' or 'per-run'")
        if not all(0 < cl < 1 for cl in self.confidence_levels):
            raise ConfigError("confidence levels must lie in (0, 1)")
        if not 0 < self.widths_cl < 1:
            raise ConfigError("widths_cl must lie in (0, 1)")
        try:
            self.train_config
        except ValueError as exc:
            raise ConfigError(f"invalid training configuration: {exc}") from None

    @property
    def train_config(self) -> TrainConfig:
        return TrainConfig(
            lr0=self.lr0,
            momentum=self.momentum,
            dropout_rate=self.dropout_rate,
            max_epochs=self.max_epochs,
            patience=self.patience,
            batch_fraction=self.batch_fraction,
            schedule=StepDecaySchedule(0.6, 200, None),
        )

    @property
    def output_root(self) -> Path:
        root = self.output_dir or os.environ.get("CONFENS_OUTPUT_ROOT", "confens_out")
        return Path(root)

    @property
    def experiment_dir(self) -> Path:
        return self.output_root / f"{Path(self.dataset).stem}_{self.strategy}"

    def run_dir(self, repeat: int) -> Path:
        return self.experiment_dir / f"run{repeat:02d}"

    def repeat_seed(self, repeat: int) -> int:
        return mix_seed(self.base_seed, repeat)

    def region_grid(self) -> tuple[float, ...]:
        return tuple(sorted(set(self.confidence_levels) | {self.widths_cl}))


_INT_KEYS = {
    "n_repeats", "base_seed", "epoch_budget", "n_snapshots", "n_members",
    "n_trees", "kfold", "max_epochs", "patience", "workers",
}
_FLOAT_KEYS = {
    "rmse_cutoff", "lr0", "momentum", "dropout_rate", "batch_fraction",
    "widths_cl", "bin_width",
}
_STR_KEYS = {"dataset", "strategy", "pooling", "output_dir"}


def _parse_value(key: str, raw: str):
    try:
        if key in _INT_KEYS:
            return int(raw)
        if key in _FLOAT_KEYS:
            return float(raw)
        if key == "confidence_levels":
            return tuple(round(float(v), 10) for v in raw.split(","))
        if key in _STR_KEYS:
            return raw
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None
    raise ConfigError(f"unknown config key {key!r}")


def parse_config_file(path: str | Path) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    values: dict = {}
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, raw = (part.strip() for part in line.split("=", 1))
        values[key] = _parse_value(key, raw)
    return values


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    values: dict = {}
    if getattr(args, "config", None):
        values.update(parse_config_file(args.config))
    for key in list(_INT_KEYS | _FLOAT_KEYS | _STR_KEYS) + ["confidence_levels"]:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = _parse_value(key, str(flag)) if isinstance(flag, str) else flag
    for item in getattr(args, "set", None) or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, raw = (part.strip() for part in item.split("=", 1))
        values[key] = _parse_value(key, raw)
    if "dataset" not in values or "strategy" not in values:
        raise ConfigError("both 'dataset' and 'strategy' must be configured")
    try:
        return ExperimentConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def write_resolved_config(cfg: ExperimentConfig) -> None:
    exp = cfg.experiment_dir
    exp.mkdir(parents=True, exist_ok=True)
    lines = []
    for key, value in sorted(asdict(cfg).items()):
        if key == "confidence_levels":
            value = ",".join(repr(v) for v in value)
        lines.append(f"{key} = {value}")
    lines.append(
        "repeat_seeds = " + ",".join(str(cfg.repeat_seed(r)) for r in range(cfg.n_repeats))
    )
    (exp / "config.resolved.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


def _update_manifest(cfg: ExperimentConfig, **fields) -> None:
    path = cfg.experiment_dir / "manifest.json"
    manifest = json.loads(path.read_text(encoding="utf-8")) if path.exists() else {
        "stages": {},
        "status": "incomplete",
    }
    stages = fields.pop("stages", None)
    if stages:
        manifest["stages"].update(stages)
    manifest.update(fields)
    path.write_text(json.dumps(manifest, indent=1, sort_keys=True), encoding="utf-8")


def _require(path: Path, needed_by: str, produced_by: str) -> Path:
    if not path.exists():
        raise StageDependencyError(path, needed_by, produced_by)
    return path


def _load_split(cfg: ExperimentConfig, repeat: int, needed_by: str) -> SplitPlan:
    path = _require(cfg.run_dir(repeat) / "split.json", needed_by, "split")
    return SplitPlan.from_json(path.read_text(encoding="utf-8"))


# ---------------------------------------------------------------- stages


def stage_split(cfg: ExperimentConfig, dataset: Dataset) -> None:
    write_resolved_config(cfg)
    _update_manifest(cfg, status="incomplete")
    for r in range(cfg.n_repeats):
        run = cfg.run_dir(r)
        run.mkdir(parents=True, exist_ok=True)
        plan = make_split(dataset, seed=mix_seed(cfg.repeat_seed(r), 1))
        (run / "split.json").write_text(plan.to_json(), encoding="utf-8")
    _update_manifest(cfg, stages={"split": "complete"})


def _train_one_repeat(cfg_dict: dict, repeat: int) -> None:
    cfg = ExperimentConfig(**cfg_dict)
    dataset = load_dataset(cfg.dataset)
    split = _load_split(cfg, repeat, "train")
    run = cfg.run_dir(repeat)
    seed = cfg.repeat_seed(repeat)
    if cfg.strategy == "rf":
        train_idx = np.asarray(split.train_idx)
        forest = fit_forest(
            dataset.features[train_idx],
            dataset.targets[train_idx],
            n_trees=cfg.n_trees,
            seed=mix_seed(seed, 3),
        )
        (run / "forest.json").write_text(forest_to_json(forest), encoding="utf-8")
        test_idx = np.asarray(split.test_idx)
        matrix = predict_forest_matrix(forest, dataset.features[test_idx])
        write_member_matrix_csv(
            run / "predictions_test.csv", [dataset.ids[i] for i in test_idx], matrix
        )
        return
    train_seed = mix_seed(seed, 2)
    if cfg.strategy == "dnn-ensemble":
        model = train_independent_ensemble(
            dataset,
            split,
            cfg.train_config,
            m=cfg.n_members,
            seeds=train_seed,
            rmse_cutoff=cfg.rmse_cutoff,
        )
    else:
        model = train_snapshot_ensemble(
            dataset,
            split,
            cfg.train_config,
            SNAPSHOT_VARIANTS[cfg.strategy],
            seed=train_seed,
            n_snapshots=cfg.n_snapshots,
            epoch_budget=cfg.epoch_budget,
            rmse_cutoff=cfg.rmse_cutoff,
        )
    save_ensemble(model, run / "ensemble")
    if model.history is not None:
        (run / "history.json").write_text(
            json.dumps(model.history.to_dict()), encoding="utf-8"
        )
    for name, idx in (("valid", split.valid_idx), ("test", split.test_idx)):
        part = np.asarray(idx)
        pred = predict_ensemble(model, dataset.features[part])
        write_member_matrix_csv(
            run / f"predictions_{name}.csv",
            [dataset.ids[i] for i in part],
            pred.member_matrix,
        )


def stage_train(cfg: ExperimentConfig, dataset: Dataset) -> None:
    workers = cfg.workers or os.cpu_count() or 1
    workers = min(workers, cfg.n_repeats)
    cfg_dict = asdict(cfg)
    if workers <= 1:
        for r in range(cfg.n_repeats):
            _train_one_repeat(cfg_dict, r)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(_train_one_repeat, cfg_dict, r) for r in range(cfg.n_repeats)
            ]
            for fut in futures:
                fut.result()
    _update_manifest(cfg, stages={"train": "complete"})


def _run_records(cfg: ExperimentConfig, dataset: Dataset, repeat: int):
    """(y, y_hat, sigma) triples from a run's persisted validation matrix."""
    path = _require(
        cfg.run_dir(repeat) / "predictions_valid.csv", "calibrate", "train"
    )
    ids, matrix = read_member_matrix_csv(path)
    target_of = {rid: float(t) for rid, t in zip(dataset.ids, dataset.targets)}
    y = np.array([target_of[rid] for rid in ids])
    return list(zip(y, matrix.mean(axis=0), matrix.std(axis=0)))


def _write_calibration(directory: Path, cal: Calibration, name: str = "calibration") -> None:
    with (directory / f"{name}.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["alpha"])
        for a in cal.alphas:
            writer.writerow([repr(float(a))])
    (directory / f"{name}_provenance.json").write_text(
        json.dumps(cal.provenance, indent=1, sort_keys=True), encoding="utf-8"
    )


def _read_calibration(path: Path, needed_by: str) -> Calibration:
    _require(path, needed_by, "calibrate")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["alpha"]:
            raise ConfigError(f"{path}: malformed calibration header")
        alphas = np.array([float(row[0]) for row in reader])
    sidecar = path.with_name(path.stem + "_provenance.json")
    provenance = (
        json.loads(sidecar.read_text(encoding="utf-8")) if sidecar.exists() else {}
    )
    return Calibration(alphas=alphas, provenance=provenance)


def stage_calibrate(cfg: ExperimentConfig, dataset: Dataset) -> None:
    if cfg.strategy == "rf":
        per_run = []
        for r in range(cfg.n_repeats):
            split = _load_split(cfg, r, "calibrate")
            cal = build_rf_cross_conformal(
                dataset,
                split.train_idx,
                k=cfg.kfold,
                n_trees=cfg.n_trees,
                seed=mix_seed(cfg.repeat_seed(r), 4),
            )
            per_run.append(cal)
        if cfg.pooling == "per-run":
            for r, cal in enumerate(per_run):
                _write_calibration(cfg.run_dir(r), cal)
        else:
            records = [rec for cal in per_run for rec in cal.records]
            pooled = calibrate(
                records,
                provenance={
                    "mode": "pooled-across-runs",
                    "runs": cfg.n_repeats,
                    "source": "cross-validation",
                    "k": cfg.kfold,
                },
            )
            _write_calibration(cfg.experiment_dir, pooled)
    else:
        run_records = [
            _run_records(cfg, dataset, r) for r in range(cfg.n_repeats)
        ]
        if cfg.pooling == "per-run":
            for r, recs in enumerate(run_records):
                _write_calibration(
                    cfg.run_dir(r),
                    calibrate(recs, provenance={"mode": "per-run", "run": r}),
                )
        else:
            pooled = calibrate(
                [rec for recs in run_records for rec in recs],
                provenance={
                    "mode": "pooled-across-runs",
                    "runs": cfg.n_repeats,
                    "source": "validation-residuals",
                },
            )
            _write_calibration(cfg.experiment_dir, pooled)
    _update_manifest(cfg, stages={"calibrate": "complete"})


def stage_predict(cfg: ExperimentConfig, dataset: Dataset) -> None:
    pooled_cal = None
    if cfg.pooling == "pooled":
        pooled_cal = _read_calibration(cfg.experiment_dir / "calibration.csv", "predict")
    grid = cfg.region_grid()
    for r in range(cfg.n_repeats):
        run = cfg.run_dir(r)
        cal = pooled_cal if pooled_cal is not None else _read_calibration(
            run / "calibration.csv", "predict"
        )
        path = _require(run / "predictions_test.csv", "predict", "train")
        ids, matrix = read_member_matrix_csv(path)
        y_hat = matrix.mean(axis=0)
        sigma = matrix.std(axis=0)
        with (run / "regions.csv").open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["id", "cl", "center", "half_width", "lo", "hi"])
            for cl in grid:
                a = alpha_at(cal, cl)
                hw = np.exp(sigma) * a
                for j, rid in enumerate(ids):
                    writer.writerow(
                        [
                            rid,
                            repr(float(cl)),
                            repr(float(y_hat[j])),
                            repr(float(hw[j])),
                            repr(float(y_hat[j] - hw[j])),
                            repr(float(y_hat[j] + hw[j])),
                        ]
                    )
    _update_manifest(cfg, stages={"predict": "complete"})


def _read_regions(path: Path) -> dict[float, tuple[list[str], np.ndarray, np.ndarray]]:
    """regions.csv -> {cl: (ids, centers, half_widths)}, preserving row order."""
    grouped: dict[float, tuple[list[str], list[float], list[float]]] = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:4] != ["id", "cl", "center", "half_width"]:
            raise ConfigError(f"{path}: malformed regions header")
        for row in reader:
            cl = round(float(row[1]), 10)
            ids, centers, hws = grouped.setdefault(cl, ([], [], []))
            ids.append(row[0])
            centers.append(float(row[2]))
            hws.append(float(row[3]))
    return {
        cl: (ids, np.array(centers), np.array(hws))
        for cl, (ids, centers, hws) in grouped.items()
    }


def stage_evaluate(cfg: ExperimentConfig, dataset: Dataset) -> None:
    target_of = {rid: float(t) for rid, t in zip(dataset.ids, dataset.targets)}
    widths_cl = round(cfg.widths_cl, 10)
    pooled_by_cl: dict[float, list] = {}
    pooled_truths_by_cl: dict[float, list] = {}
    per_run_coverage: dict = {}
    per_run_preds, per_run_truths = [], []
    width_samples, spread_samples = {}, {}
    have_predictions = True
    for r in range(cfg.n_repeats):
        run = cfg.run_dir(r)
        regions = _read_regions(_require(run / "regions.csv", "evaluate", "predict"))
        run_cov = {}
        for cl, (ids, centers, hws) in sorted(regions.items()):
            truths = np.array([target_of[rid] for rid in ids])
            pooled_by_cl.setdefault(cl, []).append((centers, hws))
            pooled_truths_by_cl.setdefault(cl, []).append(truths)
            run_cov[repr(cl)] = coverage((centers, hws), truths)
        per_run_coverage[str(r)] = run_cov
        if widths_cl in regions:
            ids, centers, hws = regions[widths_cl]
            width_samples[r] = (ids, 2.0 * hws)
        pred_path = run / "predictions_test.csv"
        if pred_path.exists():
            ids, matrix = read_member_matrix_csv(pred_path)
            per_run_preds.append(matrix.mean(axis=0))
            per_run_truths.append(np.array([target_of[rid] for rid in ids]))
            spread_samples[r] = (ids, matrix.std(axis=0))
        else:
            have_predictions = False
    regions_by_cl = {
        cl: (
            np.concatenate([c for c, _ in parts]),
            np.concatenate([h for _, h in parts]),
        )
        for cl, parts in pooled_by_cl.items()
    }
    truths_by_cl = {
        cl: np.concatenate(parts) for cl, parts in pooled_truths_by_cl.items()
    }
    if widths_cl not in regions_by_cl:
        raise ConfigError(f"regions.csv files lack cl={cfg.widths_cl} rows")
    truths_pooled = truths_by_cl[widths_cl]
    for cl, truths in truths_by_cl.items():
        if not np.array_equal(truths, truths_pooled):
            raise ConfigError("regions.csv files cover different instances per cl")
    curve = validity_curve(regions_by_cl, truths_pooled)
    widths = DistributionSummary.of(2.0 * regions_by_cl[widths_cl][1])
    centers_w, hws_w = regions_by_cl[widths_cl]
    truths_w = truths_by_cl[widths_cl]
    binned_obs = binned_error_rate((centers_w, hws_w), truths_w, cfg.bin_width, "observed")
    binned_pred = binned_error_rate((centers_w, hws_w), truths_w, cfg.bin_width, "predicted")
    rmse_sum = (
        rmse_summary(per_run_preds, per_run_truths) if have_predictions and per_run_preds else None
    )
    spreads = (
        DistributionSummary.of(np.concatenate([s for _, s in spread_samples.values()]))
        if spread_samples
        else None
    )
    caveats = []
    if cfg.pooling == "pooled":
        caveats.append(
            "pooled calibration mixes validation residuals across repeats; "
            "per-run mode is available via pooling = per-run"
        )
    report = EvalReport(
        strategy=cfg.strategy,
        dataset=str(cfg.dataset),
        per_run_rmse=rmse_sum,
        validity=curve,
        per_run_coverage=per_run_coverage,
        widths=widths,
        spreads=spreads,
        binned_observed=binned_obs,
        binned_predicted=binned_pred,
        widths_cl=float(widths_cl),
        caveats=caveats,
    )
    (cfg.experiment_dir / "report.json").write_text(report.to_json(), encoding="utf-8")
    write_report_csvs(cfg.experiment_dir, report, width_samples, spread_samples)
    _update_manifest(cfg, stages={"evaluate": "complete"})


def stage_report(cfg: ExperimentConfig) -> None:
    path = _require(cfg.experiment_dir / "report.json", "report", "evaluate")
    obj = json.loads(path.read_text(encoding="utf-8"))
    print(f"strategy: {obj['strategy']}   dataset: {obj['dataset']}")
    if obj.get("rmse"):
        print(
            f"test RMSE: {obj['rmse']['mean']:.4f} +/- {obj['rmse']['std']:.4f} "
            f"over {len(obj['rmse']['per_run'])} runs"
        )
    v = obj["validity"]
    print(f"validity fit: slope={v['slope']:.4f} intercept={v['intercept']:.4f} R2={v['r2']:.5f}")
    cl_cov = dict(zip(v["cl"], v["coverage"]))
    for cl in (0.7, 0.8, 0.9):
        if cl in cl_cov:
            print(f"pooled coverage @ {cl:.2f}: {cl_cov[cl]:.4f}")
    w = obj["widths"]
    print(
        f"interval widths @ cl={obj['widths_cl']}: mean={w['mean']:.4f} "
        f"median={w['median']:.4f} max={w['max']:.4f}"
    )
    if obj.get("spreads"):
        print(f"ensemble spread: mean={obj['spreads']['mean']:.4f}")
    for caveat in obj.get("caveats", []):
        print(f"note: {caveat}")


def run_experiment(cfg: ExperimentConfig) -> None:
    dataset = load_dataset(cfg.dataset)
    cfg.experiment_dir.mkdir(parents=True, exist_ok=True)
    _update_manifest(cfg, status="incomplete", error=None)
    try:
        stage_split(cfg, dataset)
        stage_train(cfg, dataset)
        stage_calibrate(cfg, dataset)
        stage_predict(cfg, dataset)
        stage_evaluate(cfg, dataset)
    except Exception as exc:
        _update_manifest(cfg, status="incomplete", error=str(exc))
        raise
    _update_manifest(cfg, status="complete", error=None)


# ---------------------------------------------------------------- CLI


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's default 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("-c", "--config", help="experiment config file (key = value lines)")
    p.add_argument("--dataset", help="dataset CSV path")
    p.add_argument("--strategy", help="|".join(STRATEGIES))
    p.add_argument("--n-repeats", dest="n_repeats", type=int)
    p.add_argument("--seed", dest="base_seed", type=int)
    p.add_argument("--output-dir", dest="output_dir")
    p.add_argument("--workers", type=int)
    p.add_argument("--epoch-budget", dest="epoch_budget", type=int)
    p.add_argument("--n-snapshots", dest="n_snapshots", type=int)
    p.add_argument("--n-members", dest="n_members", type=int)
    p.add_argument("--n-trees", dest="n_trees", type=int)
    p.add_argument("--rmse-cutoff", dest="rmse_cutoff", type=float)
    p.add_argument("--pooling", choices=("pooled", "per-run"))
    p.add_argument(
        "--confidence-levels",
        dest="confidence_levels",
        help="comma-separated levels in (0,1)",
    )
    p.add_argument(
        "--set",
        action="append",
        metavar="KEY=VALUE",
        help="override any config key (repeatable)",
    )


def build_parser() -> _Parser:
    parser = _Parser(prog="confens", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in [
        ("run", "run the full pipeline"),
        ("split", "write per-repeat split files"),
        ("train", "train the configured strategy for every repeat"),
        ("calibrate", "build the conformal calibration"),
        ("predict", "write per-repeat confidence regions"),
        ("evaluate", "compute the report and per-figure CSVs"),
        ("report", "print a human-readable summary of report.json"),
    ]:
        p = sub.add_parser(name, help=text)
        _add_common(p)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        if args.command == "report":
            stage_report(cfg)
            return 0
        if args.command == "run":
            run_experiment(cfg)
            return 0
        dataset = load_dataset(cfg.dataset)
        if args.command == "split":
            stage_split(cfg, dataset)
        elif args.command == "train":
            stage_train(cfg, dataset)
        elif args.command == "calibrate":
            stage_calibrate(cfg, dataset)
        elif args.command == "predict":
            stage_predict(cfg, dataset)
        elif args.command == "evaluate":
            stage_evaluate(cfg, dataset)
        return 0
    except (ConfigError, StageDependencyError) as exc:
        print(f"confens: config error: {exc}", file=sys.stderr)
        return 1
    except (TrainingDivergedError, SnapshotHarvestError, MemberRetryError) as exc:
        print(f"confens: training failure: {exc}", file=sys.stderr)
        return 3
    except ConfensError as exc:  # dataset/format/consistency problems
        print(f"confens: data error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
