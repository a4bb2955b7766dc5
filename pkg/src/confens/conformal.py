"""Normalized inductive conformal regression.

Non-conformity of a labeled example is its absolute residual divided by the
exponential of the ensemble spread for that instance, so low-spread examples
are penalized less and every score is bounded by the raw residual (e^sigma
is at least 1 for non-negative spread). Sorted validation scores give a
calibration list; the confidence-level percentile of that list scales
per-instance interval half-widths back through the same e^sigma factor.

The percentile is the k-th smallest score with k = ceil((n+1)*cl), clamped
to n: the standard finite-sample-valid index for split conformal regression.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from . import ConfensError
from .dataset import Dataset, mix_seed
from .ensembles import EnsembleModel, predict_ensemble
from .forest import fit_forest, kfold_partition, predict_forest_matrix


class ConformalError(ConfensError, ValueError):
    pass


def nonconformity(y, y_hat, sigma):
    """|y - y_hat| / e^sigma, elementwise on arrays or plain scalars."""
    y = np.asarray(y, dtype=np.float64)
    y_hat = np.asarray(y_hat, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    if not (np.isfinite(y).all() and np.isfinite(y_hat).all() and np.isfinite(sigma).all()):
        raise ConformalError("non-finite input to nonconformity")
    if (sigma < 0).any():
        raise ConformalError("spread must be >= 0")
    alpha = np.abs(y - y_hat) / np.exp(sigma)
    return float(alpha) if alpha.ndim == 0 else alpha


@dataclass(frozen=True)
class CalibrationRecord:
    y: float
    y_hat: float
    sigma: float
    alpha: float

    @classmethod
    def make(cls, y: float, y_hat: float, sigma: float) -> "CalibrationRecord":
        return cls(float(y), float(y_hat), float(sigma), nonconformity(y, y_hat, sigma))


@dataclass(frozen=True)
class Calibration:
    """Sorted non-conformity scores plus provenance of where they came from."""

    alphas: np.ndarray
    provenance: dict = field(default_factory=dict)
    records: tuple[CalibrationRecord, ...] | None = None

    def __post_init__(self) -> None:
        a = np.asarray(self.alphas, dtype=np.float64)
        if a.size == 0:
            raise ConformalError("calibration needs at least one score")
        if not np.isfinite(a).all() or (a < 0).any():
            raise ConformalError("calibration scores must be finite and >= 0")
        if (np.diff(a) < 0).any():
            raise ConformalError("calibration scores must be sorted ascending")
        frozen = np.ascontiguousarray(a)
        frozen.setflags(write=False)
        object.__setattr__(self, "alphas", frozen)

    @property
    def n(self) -> int:
        return int(self.alphas.size)


def calibrate(
    records: Iterable[CalibrationRecord | tuple],
    provenance: dict | None = None,
) -> Calibration:
    """Sort non-conformity scores from (y, y_hat, sigma) records."""
    recs = tuple(
        r if isinstance(r, CalibrationRecord) else CalibrationRecord.make(*r)
        for r in records
    )
    if not recs:
        raise ConformalError("no calibration records")
    alphas = np.sort(np.array([r.alpha for r in recs]))
    return Calibration(alphas=alphas, provenance=provenance or {}, records=recs)


def alpha_at(calibration: Calibration, cl: float) -> float:
    """Score at rank ceil((n+1)*cl), clamped to n (1-based rank).

    The rank is computed in exact rational arithmetic so float rounding in
    the product can never shift it off the mathematical ceiling.
    """
    if not 0 < cl < 1:
        raise ConformalError(f"confidence level must be in (0, 1), got {cl}")
    n = calibration.n
    k = math.ceil(Fraction(n + 1) * Fraction(cl))
    k = min(k, n)
    return float(calibration.alphas[k - 1])


@dataclass(frozen=True)
class ConfidenceRegion:
    """Symmetric interval ``center +- half_width`` at confidence level ``cl``."""

    center: float
    half_width: float
    cl: float

    def __post_init__(self) -> None:
        if self.half_width < 0:
            raise ConformalError("half_width must be >= 0")

    @property
    def lo(self) -> float:
        return self.center - self.half_width

    @property
    def hi(self) -> float:
        return self.center + self.half_width

    def contains(self, y: float) -> bool:
        return self.lo <= y <= self.hi


def predict_region(y_hat: float, sigma: float, alpha_cl: float, cl: float) -> ConfidenceRegion:
    """Interval ``y_hat +- e^sigma * alpha_cl``."""
    for v in (y_hat, sigma, alpha_cl):
        if not math.isfinite(v):
            raise ConformalError("non-finite input to predict_region")
    if sigma < 0 or alpha_cl < 0:
        raise ConformalError("sigma and alpha_cl must be >= 0")
    return ConfidenceRegion(center=float(y_hat), half_width=float(math.exp(sigma) * alpha_cl), cl=float(cl))


def half_widths(sigma: np.ndarray, alpha_cl: float) -> np.ndarray:
    """Vectorized ``e^sigma * alpha_cl`` for building many regions at once."""
    return np.exp(np.asarray(sigma, dtype=np.float64)) * alpha_cl


RunData = tuple  # (EnsembleModel, X_valid, y_valid)


def build_ensemble_conformal(
    runs: RunData | Sequence[RunData],
    pooling: str = "pooled",
):
    """Calibration from ensemble predictions on held-out validation data.

    ``runs`` is one ``(model, X_valid, y_valid)`` triple or a sequence of
    them (one per repeat). ``pooling="pooled"`` concatenates all repeats'
    records before sorting and returns a single :class:`Calibration`;
    ``pooling="per-run"`` returns one :class:`Calibration` per run.
    """
    if pooling not in ("pooled", "per-run"):
        raise ConformalError(f"unknown pooling mode {pooling!r}")
    if isinstance(runs, tuple) and len(runs) == 3 and isinstance(runs[0], EnsembleModel):
        runs = [runs]
    per_run_records = []
    for run_id, (model, X_valid, y_valid) in enumerate(runs):
        y_valid = np.asarray(y_valid, dtype=np.float64).ravel()
        if y_valid.size == 0:
            raise ConformalError(f"run {run_id}: empty validation set")
        pred = predict_ensemble(model, X_valid)
        recs = tuple(
            CalibrationRecord.make(y_valid[j], pred.y_hat[j], pred.sigma[j])
            for j in range(y_valid.size)
        )
        per_run_records.append(recs)
    if pooling == "per-run":
        return [
            calibrate(recs, provenance={"mode": "per-run", "run": i})
            for i, recs in enumerate(per_run_records)
        ]
    pooled = tuple(r for recs in per_run_records for r in recs)
    return calibrate(
        pooled,
        provenance={"mode": "pooled-across-runs", "runs": len(per_run_records)},
    )


def build_rf_cross_conformal(
    dataset: Dataset,
    train_idx: Sequence[int] | np.ndarray,
    k: int = 10,
    n_trees: int = 100,
    seed: int = 0,
) -> Calibration:
    """Cross-conformal calibration for the forest baseline.

    The training indices are split into k seeded folds; for each fold a
    forest fit on the other k-1 folds predicts the held-out fold, producing
    one (y, y_hat, sigma-across-trees) record per training point. All
    held-out records are pooled into one calibration; the provenance lists
    the held-out order so accounting can be audited.
    """
    idx = np.asarray(train_idx, dtype=np.intp)
    folds = kfold_partition(idx, k=k, seed=mix_seed(seed, 0))
    records = []
    held_out_order = []
    for fold_i, fold in enumerate(folds):
        rest = np.concatenate([f for j, f in enumerate(folds) if j != fold_i])
        forest = fit_forest(
            dataset.features[rest],
            dataset.targets[rest],
            n_trees=n_trees,
            seed=mix_seed(seed, fold_i + 1),
        )
        matrix = predict_forest_matrix(forest, dataset.features[fold])
        y_hat = matrix.mean(axis=0)
        sigma = matrix.std(axis=0)
        for j, point in enumerate(fold):
            records.append(
                CalibrationRecord.make(dataset.targets[point], y_hat[j], sigma[j])
            )
            held_out_order.append(int(point))
    return calibrate(
        records,
        provenance={
            "mode": "cross-validation",
            "k": k,
            "n_trees": n_trees,
            "seed": seed,
            "fold_sizes": [int(f.size) for f in folds],
            "held_out_order": held_out_order,
        },
    )
