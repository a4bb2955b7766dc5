"""Dataset loading, seeded train/valid/test splits, and mini-batch construction.

The dataset file contract is a UTF-8 CSV with Unix newlines and header
``id,y,b0,b1,...,b{d-1}``: ``y`` holds the regression target (pIC50 scale
for bioactivity data) and every ``b*`` cell is the literal ``0`` or ``1``.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from . import ConfensError

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def mix_seed(seed: int, index: int) -> int:
    """Derive a child seed from ``(seed, index)`` with a splitmix64-style mix.

    Pure function; distinct indices give distinct seeds for a fixed parent,
    so any derived seed can be recomputed for replay. Every artifact that
    depends on a derived seed records the parent seed and index instead of
    shared RNG state.
    """
    z = (seed + (index + 1) * _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


class DatasetError(ConfensError, ValueError):
    """Malformed dataset file or violated dataset invariant."""


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(arr, dtype=np.float64)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Dataset:
    """Immutable feature matrix of binary descriptors plus target vector.

    ``ids`` are opaque, unique instance identifiers; ``features`` is an
    ``n x d`` matrix with every entry 0 or 1; ``targets`` is length ``n``
    and finite everywhere.
    """

    ids: tuple[str, ...]
    features: np.ndarray
    targets: np.ndarray

    def __post_init__(self) -> None:
        feats = np.atleast_2d(np.asarray(self.features, dtype=np.float64))
        targs = np.asarray(self.targets, dtype=np.float64).ravel()
        if feats.shape[0] != len(self.ids) or targs.shape[0] != len(self.ids):
            raise DatasetError(
                f"inconsistent sizes: {len(self.ids)} ids, "
                f"{feats.shape[0]} feature rows, {targs.shape[0]} targets"
            )
        if feats.shape[1] < 1:
            raise DatasetError("feature matrix needs at least one column")
        if len(set(self.ids)) != len(self.ids):
            raise DatasetError("duplicate instance ids")
        if not ((feats == 0.0) | (feats == 1.0)).all():
            raise DatasetError("feature entries must all be 0 or 1")
        if not np.isfinite(targs).all():
            raise DatasetError("targets must all be finite")
        object.__setattr__(self, "ids", tuple(self.ids))
        object.__setattr__(self, "features", _freeze(feats))
        object.__setattr__(self, "targets", _freeze(targs))

    @property
    def n(self) -> int:
        return len(self.ids)

    @property
    def d(self) -> int:
        return int(self.features.shape[1])


def load_dataset(path: str | Path) -> Dataset:
    """Load a dataset CSV, preserving file row order.

    Raises :class:`DatasetError` naming the offending row (1-based, header
    is row 1) for a malformed header, a feature cell other than the literal
    ``0``/``1``, a non-numeric or non-finite target, or a duplicate id.
    """
    path = Path(path)
    try:
        fh = path.open(newline="", encoding="utf-8")
    except OSError as exc:
        raise DatasetError(f"{path}: {exc.strerror or exc}") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError(f"{path}: empty file") from None
        if len(header) < 3 or header[0] != "id" or header[1] != "y":
            raise DatasetError(f"{path}: row 1: header must start with 'id,y,b0,...'")
        d = len(header) - 2
        expected = [f"b{i}" for i in range(d)]
        if header[2:] != expected:
            raise DatasetError(
                f"{path}: row 1: feature columns must be b0..b{d - 1} in order"
            )
        ids: list[str] = []
        seen: set[str] = set()
        targets: list[float] = []
        rows: list[list[float]] = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != d + 2:
                raise DatasetError(
                    f"{path}: row {lineno}: expected {d + 2} cells, got {len(row)}"
                )
            rid = row[0]
            if not rid:
                raise DatasetError(f"{path}: row {lineno}: empty id")
            if rid in seen:
                raise DatasetError(f"{path}: row {lineno}: duplicate id {rid!r}")
            seen.add(rid)
            try:
                y = float(row[1])
            except ValueError:
                raise DatasetError(
                    f"{path}: row {lineno}: non-numeric target {row[1]!r}"
                ) from None
            if not np.isfinite(y):
                raise DatasetError(f"{path}: row {lineno}: non-finite target {row[1]!r}")
            bits = []
            for col, cell in enumerate(row[2:]):
                if cell == "0":
                    bits.append(0.0)
                elif cell == "1":
                    bits.append(1.0)
                else:
                    raise DatasetError(
                        f"{path}: row {lineno}: feature b{col} must be 0 or 1, "
                        f"got {cell!r}"
                    )
            ids.append(rid)
            targets.append(y)
            rows.append(bits)
    if not ids:
        raise DatasetError(f"{path}: no data rows")
    return Dataset(ids=tuple(ids), features=np.array(rows), targets=np.array(targets))


def save_dataset(dataset: Dataset, path: str | Path) -> None:
    """Write a dataset back out under the CSV contract (round-trip helper)."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id", "y"] + [f"b{i}" for i in range(dataset.d)])
        for i, rid in enumerate(dataset.ids):
            bits = ["1" if v else "0" for v in dataset.features[i]]
            writer.writerow([rid, repr(float(dataset.targets[i]))] + bits)


@dataclass(frozen=True)
class SplitPlan:
    """Disjoint train/valid/test index lists that partition ``[0, n)``."""

    seed: int
    train_idx: tuple[int, ...]
    valid_idx: tuple[int, ...]
    test_idx: tuple[int, ...]

    def __post_init__(self) -> None:
        parts = (self.train_idx, self.valid_idx, self.test_idx)
        combined = [i for part in parts for i in part]
        n = len(combined)
        if sorted(combined) != list(range(n)):
            raise DatasetError("split lists must partition [0, n) exactly")

    @property
    def n(self) -> int:
        return len(self.train_idx) + len(self.valid_idx) + len(self.test_idx)

    def to_json(self) -> str:
        return json.dumps(
            {
                "seed": self.seed,
                "train": list(self.train_idx),
                "valid": list(self.valid_idx),
                "test": list(self.test_idx),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "SplitPlan":
        obj = json.loads(text)
        return cls(
            seed=int(obj["seed"]),
            train_idx=tuple(int(i) for i in obj["train"]),
            valid_idx=tuple(int(i) for i in obj["valid"]),
            test_idx=tuple(int(i) for i in obj["test"]),
        )


def _exact_fraction(x: float | Fraction) -> Fraction:
    # Decimal-string conversion so that e.g. 0.7 means 7/10 exactly;
    # floor(0.7 * 10) must be 7, not the 6 that raw float arithmetic gives.
    if isinstance(x, Fraction):
        return x
    return Fraction(str(float(x)))


def make_split(
    dataset: Dataset | int,
    seed: int,
    fractions: tuple[float, float, float] = (0.70, 0.15, 0.15),
) -> SplitPlan:
    """Seeded uniformly-random 70/15/15 split.

    Sizes are ``floor(f_train * n)`` and ``floor(f_valid * n)`` with the
    remainder assigned to test; when a floor leaves a part empty (n < 7 at
    the default fractions) one index is moved from train so that all three
    parts stay non-empty. Deterministic for a fixed seed.
    """
    n = dataset if isinstance(dataset, int) else dataset.n
    if n < 3:
        raise DatasetError(f"need at least 3 instances to split, got {n}")
    fr = [_exact_fraction(f) for f in fractions]
    if any(f <= 0 for f in fr):
        raise DatasetError("split fractions must be positive")
    if abs(float(sum(fr)) - 1.0) > 1e-9:
        raise DatasetError(f"split fractions must sum to 1, got {fractions}")
    n_train = int(fr[0] * n)
    n_valid = int(fr[1] * n)
    n_test = n - n_train - n_valid
    if n_valid == 0 and n_train > 1:
        n_train -= 1
        n_valid += 1
    if n_test == 0 and n_train > 1:
        n_train -= 1
        n_test += 1
    perm = np.random.default_rng(seed).permutation(n)
    return SplitPlan(
        seed=int(seed),
        train_idx=tuple(int(i) for i in perm[:n_train]),
        valid_idx=tuple(int(i) for i in perm[n_train : n_train + n_valid]),
        test_idx=tuple(int(i) for i in perm[n_train + n_valid :]),
    )


def make_batches(
    train_idx: Sequence[int] | np.ndarray,
    batch_fraction: float,
    rng_seed: int,
) -> list[np.ndarray]:
    """One epoch of shuffled mini-batches over the training indices.

    Batch size is the nearest integer to ``batch_fraction * len(train_idx)``
    (half rounds up) clamped below at 1; the final batch may be smaller.
    Every index appears exactly once per call.
    """
    idx = np.asarray(train_idx, dtype=np.intp)
    if idx.size == 0:
        raise DatasetError("train_idx must be non-empty")
    if not 0 < batch_fraction <= 1:
        raise DatasetError(f"batch_fraction must be in (0, 1], got {batch_fraction}")
    size = max(1, int(_exact_fraction(batch_fraction) * idx.size + Fraction(1, 2)))
    shuffled = np.random.default_rng(rng_seed).permutation(idx)
    return [shuffled[i : i + size] for i in range(0, idx.size, size)]


@dataclass(frozen=True)
class RepeatSpec:
    """Bookkeeping for repeated runs: per-repeat seeds derived from a base."""

    n_repeats: int
    base_seed: int

    def __post_init__(self) -> None:
        if self.n_repeats < 1:
            raise DatasetError("n_repeats must be >= 1")

    @property
    def seeds(self) -> tuple[int, ...]:
        return tuple(mix_seed(self.base_seed, i) for i in range(self.n_repeats))

    def seed_for(self, repeat: int) -> int:
        if not 0 <= repeat < self.n_repeats:
            raise IndexError(f"repeat {repeat} out of range")
        return mix_seed(self.base_seed, repeat)
