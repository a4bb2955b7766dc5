"""Ensemble construction for the four network strategies.

Either 100 independently trained networks (fresh seed per member, non-cyclic
step decay, early stopping) or a snapshot ensemble harvested from a single
cyclic-schedule training run, where the parameter state is saved at fixed
epoch intervals whenever it clears the validation-RMSE acceptance cutoff and
is not a degenerate constant-mean predictor.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import ConfensError
from .dataset import Dataset, SplitPlan, mix_seed
from .mlp import (
    NetworkParams,
    StepDecaySchedule,
    TrainConfig,
    TrainHistory,
    TrainingDivergedError,
    clone_params,
    params_from_json,
    params_to_json,
    predict,
    run_epochs,
    train_single,
)

DEFAULT_RMSE_CUTOFF = 1.2  # about twice the experimental spread of public IC50 data
DEFAULT_EPOCH_BUDGET = 3000


class EnsembleError(ConfensError, ValueError):
    pass


class SnapshotHarvestError(ConfensError, RuntimeError):
    """Snapshot run ended before collecting the requested member count."""

    def __init__(self, accepted: int, wanted: int, budget: int):
        if accepted == 0:
            msg = (
                f"no snapshot accepted within {budget} epochs: "
                "no usable local minima were reached"
            )
        else:
            msg = f"epoch budget {budget} exhausted with {accepted}/{wanted} snapshots"
        super().__init__(msg)
        self.accepted = accepted
        self.wanted = wanted
        self.budget = budget


class MemberRetryError(ConfensError, RuntimeError):
    """Independent-ensemble retry budget exhausted before m accepted members."""

    def __init__(self, accepted: int, wanted: int, attempts: int):
        super().__init__(
            f"{attempts} training attempts produced only {accepted}/{wanted} "
            "members under the acceptance cutoff"
        )
        self.accepted = accepted
        self.wanted = wanted
        self.attempts = attempts


@dataclass(frozen=True)
class ScheduleVariant:
    """Cyclic-annealing parameters for one snapshot strategy."""

    name: str
    snapshot_every: int
    cycle_epochs: int
    decay_step: int

    def __post_init__(self) -> None:
        if self.cycle_epochs % self.snapshot_every != 0:
            raise EnsembleError("snapshot_every must divide cycle_epochs")
        if self.decay_step > self.cycle_epochs:
            raise EnsembleError("decay_step must be <= cycle_epochs")

    @property
    def schedule(self) -> StepDecaySchedule:
        return StepDecaySchedule(0.6, self.decay_step, self.cycle_epochs)


SNAPSHOT_V1 = ScheduleVariant("snapshot-v1", snapshot_every=50, cycle_epochs=50, decay_step=10)
SNAPSHOT_V2 = ScheduleVariant("snapshot-v2", snapshot_every=25, cycle_epochs=250, decay_step=10)
SNAPSHOT_V3 = ScheduleVariant("snapshot-v3", snapshot_every=50, cycle_epochs=250, decay_step=50)
SNAPSHOT_VARIANTS = {v.name: v for v in (SNAPSHOT_V1, SNAPSHOT_V2, SNAPSHOT_V3)}

INDEPENDENT_KIND = "dnn-ensemble"
ENSEMBLE_KINDS = (INDEPENDENT_KIND,) + tuple(SNAPSHOT_VARIANTS)


@dataclass(frozen=True)
class Snapshot:
    """One accepted member: parameters plus acceptance provenance."""

    params: NetworkParams
    epoch_taken: int
    cycle_index: int
    valid_rmse: float


@dataclass
class EnsembleModel:
    kind: str
    members: tuple[Snapshot, ...]
    split: SplitPlan
    seeds: tuple[int, ...]
    rmse_cutoff: float = DEFAULT_RMSE_CUTOFF
    history: TrainHistory | None = None

    def __post_init__(self) -> None:
        if self.kind not in ENSEMBLE_KINDS:
            raise EnsembleError(f"unknown ensemble kind {self.kind!r}")
        if not self.members:
            raise EnsembleError("ensemble must have at least one member")
        for i, m in enumerate(self.members):
            if not m.valid_rmse < self.rmse_cutoff:
                raise EnsembleError(
                    f"member {i}: validation RMSE {m.valid_rmse} is not below "
                    f"the acceptance cutoff {self.rmse_cutoff}"
                )
        if self.kind in SNAPSHOT_VARIANTS:
            epochs = [m.epoch_taken for m in self.members]
            if epochs != sorted(epochs):
                raise EnsembleError("snapshots must be ordered by epoch_taken")

    @property
    def n_members(self) -> int:
        return len(self.members)


def detect_degenerate(
    valid_preds: np.ndarray,
    train_target_mean: float,
    std_threshold: float = 0.05,
    mean_threshold: float = 0.10,
) -> bool:
    """True iff the predictions are a constant-mean predictor.

    Both clauses must hold: the prediction spread is below ``std_threshold``
    and the prediction mean sits within ``mean_threshold`` of the training
    target mean. A constant predictor away from the mean is not degenerate
    by this test.
    """
    preds = np.asarray(valid_preds, dtype=np.float64).ravel()
    if preds.size == 0:
        raise EnsembleError("empty predictions")
    return bool(
        preds.std() < std_threshold
        and abs(preds.mean() - train_target_mean) < mean_threshold
    )


def train_snapshot_ensemble(
    dataset: Dataset,
    split: SplitPlan,
    config: TrainConfig,
    variant: ScheduleVariant,
    seed: int,
    n_snapshots: int = 100,
    epoch_budget: int = DEFAULT_EPOCH_BUDGET,
    rmse_cutoff: float = DEFAULT_RMSE_CUTOFF,
    degenerate_std: float = 0.05,
    degenerate_mean_delta: float = 0.10,
) -> EnsembleModel:
    """Harvest an ensemble from one cyclic-schedule training trajectory.

    Early stopping is disabled; training runs until ``n_snapshots`` grid
    states have been accepted or ``epoch_budget`` epochs elapse. A grid
    state (every ``variant.snapshot_every`` epochs) is accepted iff its
    validation RMSE is below ``rmse_cutoff`` and it is not a constant-mean
    predictor; rejected grid positions simply yield no member.
    """
    if n_snapshots < 1:
        raise EnsembleError("n_snapshots must be >= 1")
    cfg = replace(config, schedule=variant.schedule, patience=None)
    train_mean = float(dataset.targets[np.asarray(split.train_idx)].mean())
    members: list[Snapshot] = []
    rmse_hist: list[float] = []
    lr_hist: list[float] = []
    for state in run_epochs(dataset, split, cfg, seed, max_epochs=epoch_budget):
        rmse_hist.append(state.val_rmse)
        lr_hist.append(state.lr)
        if state.epoch % variant.snapshot_every != 0:
            continue
        if state.val_rmse >= rmse_cutoff:
            continue
        if detect_degenerate(state.val_preds, train_mean, degenerate_std, degenerate_mean_delta):
            continue
        members.append(
            Snapshot(
                params=clone_params(state.params),
                epoch_taken=state.epoch,
                cycle_index=(state.epoch - 1) // variant.cycle_epochs,
                valid_rmse=state.val_rmse,
            )
        )
        if len(members) == n_snapshots:
            break
    if len(members) < n_snapshots:
        raise SnapshotHarvestError(len(members), n_snapshots, epoch_budget)
    history = TrainHistory(
        val_rmse=rmse_hist,
        lr=lr_hist,
        best_epoch=int(np.argmin(rmse_hist)) + 1,
        stop_reason="external",
    )
    return EnsembleModel(
        kind=variant.name,
        members=tuple(members),
        split=split,
        seeds=(int(seed),),
        rmse_cutoff=rmse_cutoff,
        history=history,
    )


def train_independent_ensemble(
    dataset: Dataset,
    split: SplitPlan,
    config: TrainConfig,
    m: int = 100,
    seeds: int | Sequence[int] = 0,
    rmse_cutoff: float = DEFAULT_RMSE_CUTOFF,
    max_attempts: int | None = None,
) -> EnsembleModel:
    """Train ``m`` networks independently, replacing rejected members.

    ``seeds`` is either a base integer (attempt i trains with a seed derived
    from it) or an explicit sequence consumed in order. A member is rejected
    when it diverges or its best validation RMSE is not below the cutoff;
    rejected members are replaced with fresh seeds until ``m`` members are
    accepted or the retry budget (default ``3*m`` attempts) runs out.
    """
    if m < 1:
        raise EnsembleError("m must be >= 1")
    budget = 3 * m if max_attempts is None else max_attempts
    if isinstance(seeds, (int, np.integer)):
        seed_for = lambda attempt: mix_seed(int(seeds), attempt)  # noqa: E731
    else:
        explicit = [int(s) for s in seeds]
        if len(set(explicit)) != len(explicit):
            raise EnsembleError("explicit seeds must be distinct")
        budget = min(budget, len(explicit))
        seed_for = lambda attempt: explicit[attempt]  # noqa: E731
    members: list[Snapshot] = []
    used_seeds: list[int] = []
    attempts = 0
    while len(members) < m and attempts < budget:
        attempt_seed = seed_for(attempts)
        attempts += 1
        try:
            params, history = train_single(dataset, split, config, attempt_seed)
        except TrainingDivergedError:
            continue
        best_rmse = min(history.val_rmse)
        if not best_rmse < rmse_cutoff:
            continue
        members.append(
            Snapshot(
                params=params,
                epoch_taken=history.best_epoch,
                cycle_index=len(members),
                valid_rmse=best_rmse,
            )
        )
        used_seeds.append(attempt_seed)
    if len(members) < m:
        raise MemberRetryError(len(members), m, attempts)
    return EnsembleModel(
        kind=INDEPENDENT_KIND,
        members=tuple(members),
        split=split,
        seeds=tuple(used_seeds),
        rmse_cutoff=rmse_cutoff,
    )


@dataclass(frozen=True)
class EnsemblePrediction:
    """Per-instance mean, population spread, and the raw member matrix."""

    y_hat: np.ndarray
    sigma: np.ndarray
    member_matrix: np.ndarray  # (n_members, n_instances)


def predict_ensemble(model: EnsembleModel, X: np.ndarray) -> EnsemblePrediction:
    """Inference-mode member predictions aggregated to mean and spread."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if model.n_members == 0:
        raise EnsembleError("empty ensemble")
    if X.shape[1] != model.members[0].params.d:
        raise EnsembleError(
            f"input width {X.shape[1]} != network width {model.members[0].params.d}"
        )
    matrix = np.stack([predict(mem.params, X) for mem in model.members])
    return EnsemblePrediction(
        y_hat=matrix.mean(axis=0), sigma=matrix.std(axis=0), member_matrix=matrix
    )


def pairwise_member_correlation(member_matrix: np.ndarray) -> np.ndarray:
    """Pearson correlation between every pair of member prediction vectors."""
    m = np.atleast_2d(np.asarray(member_matrix, dtype=np.float64))
    if m.shape[1] < 2:
        raise EnsembleError("need at least 2 instances to correlate")
    centered = m - m.mean(axis=1, keepdims=True)
    ss = (centered**2).sum(axis=1)
    for i, v in enumerate(ss):
        if v == 0:
            raise EnsembleError(f"member {i} has zero prediction variance")
    corr = (centered @ centered.T) / np.sqrt(np.outer(ss, ss))
    np.clip(corr, -1.0, 1.0, out=corr)
    np.fill_diagonal(corr, 1.0)
    return corr


def save_ensemble(model: EnsembleModel, directory: str | Path) -> None:
    """Persist as a directory: manifest plus one parameter file per member."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = {
        "kind": model.kind,
        "seeds": list(model.seeds),
        "rmse_cutoff": model.rmse_cutoff,
        "split": json.loads(model.split.to_json()),
        "members": [
            {
                "file": f"member_{i:03d}.json",
                "epoch_taken": mem.epoch_taken,
                "cycle_index": mem.cycle_index,
                "valid_rmse": mem.valid_rmse,
            }
            for i, mem in enumerate(model.members)
        ],
    }
    if model.history is not None:
        manifest["history"] = model.history.to_dict()
    (directory / "manifest.json").write_text(
        json.dumps(manifest, indent=1, sort_keys=True), encoding="utf-8"
    )
    for i, mem in enumerate(model.members):
        (directory / f"member_{i:03d}.json").write_text(
            params_to_json(mem.params), encoding="utf-8"
        )


def load_ensemble(directory: str | Path) -> EnsembleModel:
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text(encoding="utf-8"))
    members = tuple(
        Snapshot(
            params=params_from_json((directory / entry["file"]).read_text(encoding="utf-8")),
            epoch_taken=int(entry["epoch_taken"]),
            cycle_index=int(entry["cycle_index"]),
            valid_rmse=float(entry["valid_rmse"]),
        )
        for entry in manifest["members"]
    )
    hist = None
    if "history" in manifest:
        h = manifest["history"]
        hist = TrainHistory(h["val_rmse"], h["lr"], h["best_epoch"], h["stop_reason"])
    return EnsembleModel(
        kind=manifest["kind"],
        members=members,
        split=SplitPlan.from_json(json.dumps(manifest["split"])),
        seeds=tuple(int(s) for s in manifest["seeds"]),
        rmse_cutoff=float(manifest["rmse_cutoff"]),
        history=hist,
    )


def write_member_matrix_csv(
    path: str | Path, ids: Sequence[str], matrix: np.ndarray
) -> None:
    """CSV with header ``id,m0..m{k-1}``: one row per instance, one column
    per member (the same shape the forest's per-tree matrices use)."""
    matrix = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    n_members, n_inst = matrix.shape
    if n_inst != len(ids):
        raise EnsembleError("ids and matrix disagree on instance count")
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id"] + [f"m{k}" for k in range(n_members)])
        for j, rid in enumerate(ids):
            writer.writerow([rid] + [repr(float(v)) for v in matrix[:, j]])


def read_member_matrix_csv(path: str | Path) -> tuple[list[str], np.ndarray]:
    """Inverse of :func:`write_member_matrix_csv`; returns (ids, matrix)."""
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        n_members = len(header) - 1
        if header != ["id"] + [f"m{k}" for k in range(n_members)]:
            raise EnsembleError(f"{path}: malformed member-matrix header")
        ids, rows = [], []
        for row in reader:
            ids.append(row[0])
            rows.append([float(v) for v in row[1:]])
    return ids, np.array(rows).T
