"""Report-side analyses: RMSE summaries, coverage-versus-confidence curves
with a least-squares fit, interval-width and ensemble-spread distributions,
and per-target-bin error rates.

Everything here is a pure function over persisted predictions/regions, so
every report number is recomputable from the CSV artifacts alone.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import ConfensError
from .mlp import rmse


class EvalError(ConfensError, ValueError):
    pass


def _as_bounds(regions) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Accept a list of ConfidenceRegion or a (centers, half_widths) pair."""
    if isinstance(regions, tuple) and len(regions) == 2:
        centers = np.asarray(regions[0], dtype=np.float64)
        hw = np.asarray(regions[1], dtype=np.float64)
    else:
        centers = np.array([r.center for r in regions])
        hw = np.array([r.half_width for r in regions])
    if centers.size == 0:
        raise EvalError("no regions")
    if (hw < 0).any():
        raise EvalError("negative half-width")
    return centers, hw, centers - hw


@dataclass(frozen=True)
class RmseSummary:
    per_run: tuple[float, ...]
    mean: float
    std: float  # population convention across runs


def rmse_summary(per_run_preds: Sequence[np.ndarray], truths) -> RmseSummary:
    """Per-run test RMSE with mean and population std across runs.

    ``truths`` is either one shared target vector or a list parallel to
    ``per_run_preds`` (test sets differ between repeats).
    """
    if len(per_run_preds) == 0:
        raise EvalError("need at least one run")
    first = np.asarray(truths[0] if isinstance(truths, (list, tuple)) else truths)
    if isinstance(truths, (list, tuple)) and len(truths) == len(per_run_preds):
        pairs = zip(per_run_preds, truths)
    else:
        pairs = ((p, first) for p in per_run_preds)
    values = tuple(rmse(p, t) for p, t in pairs)
    arr = np.array(values)
    return RmseSummary(per_run=values, mean=float(arr.mean()), std=float(arr.std()))


def coverage(regions, truths) -> float:
    """Fraction of truths inside their region (boundaries inclusive)."""
    centers, hw, lo = _as_bounds(regions)
    y = np.asarray(truths, dtype=np.float64).ravel()
    if y.size != centers.size:
        raise EvalError("regions and truths disagree on length")
    return float(np.mean((y >= lo) & (y <= centers + hw)))


@dataclass(frozen=True)
class ValidityCurve:
    cls: tuple[float, ...]
    coverage: tuple[float, ...]
    slope: float
    intercept: float
    r2: float


DEFAULT_CL_GRID = tuple(round(0.05 * i, 10) for i in range(1, 20))


def validity_curve(regions_by_cl: Mapping[float, object], truths) -> ValidityCurve:
    """Coverage per confidence level plus a least-squares line fit.

    ``regions_by_cl`` maps each confidence level to that level's regions for
    the same test instances (pooled over runs upstream when applicable).
    """
    if not regions_by_cl:
        raise EvalError("no confidence levels")
    cls = tuple(sorted(regions_by_cl))
    cov = tuple(coverage(regions_by_cl[cl], truths) for cl in cls)
    x = np.asarray(cls)
    y = np.asarray(cov)
    if len(cls) >= 2:
        slope, intercept = np.polyfit(x, y, 1)
        fit = slope * x + intercept
        ss_res = float(((y - fit) ** 2).sum())
        ss_tot = float(((y - y.mean()) ** 2).sum())
        if ss_tot == 0:  # constant coverage: a flat line fits it exactly
            r2 = 1.0 if ss_res <= 1e-12 else 0.0
        else:
            r2 = 1.0 - ss_res / ss_tot
    else:
        slope, intercept, r2 = math.nan, float(y[0]), math.nan
    return ValidityCurve(cls, cov, float(slope), float(intercept), float(r2))


@dataclass(frozen=True)
class DistributionSummary:
    samples: np.ndarray
    mean: float
    q25: float
    median: float
    q75: float
    max: float

    @classmethod
    def of(cls, samples: np.ndarray) -> "DistributionSummary":
        s = np.asarray(samples, dtype=np.float64).ravel()
        if s.size == 0:
            raise EvalError("empty sample set")
        q25, med, q75 = np.quantile(s, [0.25, 0.5, 0.75])
        return cls(s, float(s.mean()), float(q25), float(med), float(q75), float(s.max()))


def interval_width_distribution(regions) -> DistributionSummary:
    """Full widths (2 * half_width) per instance, pooled over runs upstream."""
    _, hw, _ = _as_bounds(regions)
    return DistributionSummary.of(2.0 * hw)


def spread_distribution(sigmas) -> DistributionSummary:
    s = np.asarray(sigmas, dtype=np.float64).ravel()
    if (s < 0).any():
        raise EvalError("spread samples must be >= 0")
    return DistributionSummary.of(s)


@dataclass(frozen=True)
class BinErrorRow:
    lo: float
    hi: float
    count: int
    error_rate: float


def binned_error_rate(
    regions,
    truths,
    bin_width: float = 1.0,
    binning_key: str = "observed",
) -> list[BinErrorRow]:
    """Error rate (truth outside region) per target bin.

    Bins are half-open ``[k*w, (k+1)*w)`` anchored at integer multiples of
    the width; ``binning_key`` selects whether instances are binned by their
    observed truth or by their predicted center. Only non-empty bins are
    returned, sorted by bin start; no minimum-count suppression is applied
    (counts are reported so the consumer can decide).
    """
    if bin_width <= 0:
        raise EvalError("bin_width must be > 0")
    if binning_key not in ("observed", "predicted"):
        raise EvalError(f"unknown binning key {binning_key!r}")
    centers, hw, lo = _as_bounds(regions)
    y = np.asarray(truths, dtype=np.float64).ravel()
    if y.size != centers.size:
        raise EvalError("regions and truths disagree on length")
    keys = y if binning_key == "observed" else centers
    bin_index = np.floor(keys / bin_width).astype(np.int64)
    outside = (y < lo) | (y > centers + hw)
    rows = []
    for b in np.unique(bin_index):
        mask = bin_index == b
        rows.append(
            BinErrorRow(
                lo=float(b * bin_width),
                hi=float((b + 1) * bin_width),
                count=int(mask.sum()),
                error_rate=float(outside[mask].mean()),
            )
        )
    return rows


def global_error_rate(rows: Sequence[BinErrorRow]) -> float:
    """Count-weighted mean of per-bin error rates (the partition identity)."""
    total = sum(r.count for r in rows)
    if total == 0:
        raise EvalError("no binned instances")
    return sum(r.count * r.error_rate for r in rows) / total


@dataclass
class EvalReport:
    """Everything the evaluation stage emits, JSON-serializable.

    ``per_run_rmse`` and ``spreads`` are None when the evaluation ran from
    region files alone (no persisted test predictions).
    """

    strategy: str
    dataset: str
    per_run_rmse: RmseSummary | None
    validity: ValidityCurve
    per_run_coverage: dict  # run -> {cl: coverage}
    widths: DistributionSummary
    spreads: DistributionSummary | None
    binned_observed: list[BinErrorRow]
    binned_predicted: list[BinErrorRow]
    widths_cl: float = 0.8
    caveats: list[str] = field(default_factory=list)
    reference_bands: dict = field(
        default_factory=lambda: {
            "test_rmse": [0.6, 0.9],
            "interval_width_cl80": [0.8, 1.2],
            "note": (
                "typical ranges for heterogeneous public IC50 data; "
                "annotations only, dataset-dependent"
            ),
        }
    )

    def to_json(self) -> str:
        def dist(d: DistributionSummary) -> dict:
            return {
                "mean": d.mean,
                "q25": d.q25,
                "median": d.median,
                "q75": d.q75,
                "max": d.max,
                "n": int(d.samples.size),
            }

        obj = {
            "strategy": self.strategy,
            "dataset": self.dataset,
            "rmse": None
            if self.per_run_rmse is None
            else {
                "per_run": list(self.per_run_rmse.per_run),
                "mean": self.per_run_rmse.mean,
                "std": self.per_run_rmse.std,
            },
            "validity": {
                "cl": list(self.validity.cls),
                "coverage": list(self.validity.coverage),
                "slope": self.validity.slope,
                "intercept": self.validity.intercept,
                "r2": self.validity.r2,
            },
            "per_run_coverage": self.per_run_coverage,
            "widths_cl": self.widths_cl,
            "widths": dist(self.widths),
            "spreads": None if self.spreads is None else dist(self.spreads),
            "binned_error": {
                "observed": [vars(r) for r in self.binned_observed],
                "predicted": [vars(r) for r in self.binned_predicted],
            },
            "caveats": self.caveats,
            "reference_bands": self.reference_bands,
        }
        return json.dumps(obj, indent=1, sort_keys=True)


def _write_csv(path: Path, header: list[str], rows) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)


def _fmt(value: float) -> str:
    return repr(float(value))


def write_report_csvs(
    directory: str | Path,
    report: EvalReport,
    width_samples_by_run: Mapping[int, tuple[Sequence[str], np.ndarray]],
    spread_samples_by_run: Mapping[int, tuple[Sequence[str], np.ndarray]],
) -> None:
    """Flat per-figure CSVs next to report.json.

    rmse_summary.csv: run,test_rmse (plus mean/std rows)
    validity.csv:     cl,coverage
    widths.csv:       run,id,width       (at the report's widths_cl)
    spreads.csv:      run,id,sigma
    binned_error.csv: binning_key,bin_lo,bin_hi,count,error_rate
    """
    directory = Path(directory)
    rows = []
    if report.per_run_rmse is not None:
        rows = [[str(i), _fmt(v)] for i, v in enumerate(report.per_run_rmse.per_run)]
        rows.append(["mean", _fmt(report.per_run_rmse.mean)])
        rows.append(["std", _fmt(report.per_run_rmse.std)])
    _write_csv(directory / "rmse_summary.csv", ["run", "test_rmse"], rows)
    _write_csv(
        directory / "validity.csv",
        ["cl", "coverage"],
        [[_fmt(cl), _fmt(cov)] for cl, cov in zip(report.validity.cls, report.validity.coverage)],
    )
    _write_csv(
        directory / "widths.csv",
        ["run", "id", "width"],
        (
            [str(run), rid, _fmt(w)]
            for run in sorted(width_samples_by_run)
            for rid, w in zip(*width_samples_by_run[run])
        ),
    )
    _write_csv(
        directory / "spreads.csv",
        ["run", "id", "sigma"],
        (
            [str(run), rid, _fmt(s)]
            for run in sorted(spread_samples_by_run)
            for rid, s in zip(*spread_samples_by_run[run])
        ),
    )
    _write_csv(
        directory / "binned_error.csv",
        ["binning_key", "bin_lo", "bin_hi", "count", "error_rate"],
        (
            [key, _fmt(r.lo), _fmt(r.hi), str(r.count), _fmt(r.error_rate)]
            for key, rows_ in (
                ("observed", report.binned_observed),
                ("predicted", report.binned_predicted),
            )
            for r in rows_
        ),
    )
