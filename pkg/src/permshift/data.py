"""Binary feature catalogs and datasets, CSV ingestion, alignment and splits."""

from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DataError,
    DuplicateFeatureName,
    EmptyDataset,
    EmptyIntersection,
    InsufficientClassRows,
    MissingLabelColumn,
    NonBinaryValue,
)
from .jsonio import atomic_write_text
from .seeding import derive_rng

BENIGN = 0
MALWARE = 1


@dataclass(frozen=True)
class FeatureCatalog:
    """Ordered, unique feature names defining a model's input space."""

    names: tuple[str, ...]
    _index: dict = field(init=False, repr=False, compare=False)

    def __init__(self, names: Iterable[str]):
        names = tuple(str(n) for n in names)
        if not names:
            raise DataError("feature catalog must not be empty")
        dupes = [n for n, c in Counter(names).items() if c > 1]
        if dupes:
            raise DuplicateFeatureName(f"duplicate feature names: {sorted(dupes)[:5]}")
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "_index", {n: i for i, n in enumerate(names)})

    def __len__(self) -> int:
        return len(self.names)

    def __iter__(self):
        return iter(self.names)

    def __contains__(self, name: object) -> bool:
        return name in self._index

    def index(self, name: str) -> int:
        return self._index[name]

    def positions(self, names: Iterable[str]) -> np.ndarray:
        """Column positions of ``names``; -1 where a name is not in the catalog."""
        return np.array([self._index.get(n, -1) for n in names], dtype=np.int64)

    def to_text(self) -> str:
        return "".join(n + "\n" for n in self.names)

    @classmethod
    def from_text(cls, text: str) -> "FeatureCatalog":
        return cls(line for line in text.splitlines() if line)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "FeatureCatalog":
        return cls.from_text(Path(path).read_text(encoding="utf-8"))


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class BinaryDataset:
    """Rows of 0/1 features with labels (benign=0, malware=1).

    ``tags`` names the source domain of each row (``None`` when untagged) and
    ``row_index`` is the row's position in its source file; together they
    identify a row across merges and splits.
    """

    catalog: FeatureCatalog
    X: np.ndarray
    y: np.ndarray
    tags: np.ndarray | None = None
    row_index: np.ndarray | None = None

    def __post_init__(self):
        X = np.ascontiguousarray(self.X, dtype=np.uint8)
        y = np.ascontiguousarray(self.y, dtype=np.uint8)
        if X.ndim != 2 or X.shape[1] != len(self.catalog):
            raise DataError(
                f"row width {X.shape[-1] if X.ndim else 0} does not match catalog size {len(self.catalog)}"
            )
        if y.shape != (X.shape[0],):
            raise DataError(f"{y.shape[0]} labels for {X.shape[0]} rows")
        if X.size and X.max() > 1:
            raise DataError("feature cells must be 0 or 1")
        if y.size and y.max() > 1:
            raise DataError("labels must be 0 or 1")
        row_index = self.row_index
        if row_index is None:
            row_index = np.arange(X.shape[0], dtype=np.int64)
        row_index = np.asarray(row_index, dtype=np.int64)
        tags = self.tags
        if tags is not None:
            tags = np.asarray(tags, dtype=object)
            if tags.shape != y.shape:
                raise DataError("one domain tag per row required")
            tags = _readonly(tags.copy())
        object.__setattr__(self, "X", _readonly(X if X is not self.X else X.copy()))
        object.__setattr__(self, "y", _readonly(y if y is not self.y else y.copy()))
        object.__setattr__(self, "tags", tags)
        object.__setattr__(self, "row_index", _readonly(row_index.copy()))

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    def class_counts(self) -> tuple[int, int]:
        n1 = int(self.y.sum())
        return self.n_rows - n1, n1

    def take(self, indices: Sequence[int] | np.ndarray) -> "BinaryDataset":
        idx = np.asarray(indices, dtype=np.int64)
        return BinaryDataset(
            self.catalog,
            self.X[idx],
            self.y[idx],
            None if self.tags is None else self.tags[idx],
            self.row_index[idx],
        )

    def with_domain(self, name: str) -> "BinaryDataset":
        tags = np.full(self.n_rows, name, dtype=object)
        return BinaryDataset(self.catalog, self.X, self.y, tags, self.row_index)

    def row_keys(self) -> set[tuple[str | None, int]]:
        """(domain tag, source row) pairs, used to audit train/test separation."""
        tags = self.tags if self.tags is not None else [None] * self.n_rows
        return set(zip(tags, self.row_index.tolist()))

    def domain_counts(self) -> dict[str, int]:
        if self.tags is None:
            return {}
        return dict(sorted(Counter(self.tags.tolist()).items()))


@dataclass(frozen=True)
class SplitPair:
    train: BinaryDataset
    test: BinaryDataset
    train_indices: np.ndarray
    test_indices: np.ndarray


@dataclass(frozen=True)
class FoldSet:
    folds: tuple[np.ndarray, ...]

    def __len__(self) -> int:
        return len(self.folds)

    def split(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """(train indices, held-out indices) for fold ``i``."""
        train = np.sort(np.concatenate([f for j, f in enumerate(self.folds) if j != i]))
        return train, self.folds[i]


# -- CSV ---------------------------------------------------------------------


def load_csv(path: str | Path, label_column: str = "Result") -> BinaryDataset:
    """Read a header-first CSV whose non-label cells are literal 0/1."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise EmptyDataset(f"{path}: no header row") from None
        records = [r for r in reader if r]
    if label_column not in header:
        raise MissingLabelColumn(f"{path}: label column {label_column!r} not in header")
    dupes = [n for n, c in Counter(header).items() if c > 1]
    if dupes:
        raise DuplicateFeatureName(f"{path}: duplicate column names {sorted(dupes)[:5]}")
    bad_names = [n for n in header if "," in n or not n]
    if bad_names:
        raise DataError(f"{path}: invalid column names {bad_names[:5]}")
    if not records:
        raise EmptyDataset(f"{path}: no data rows")

    width = len(header)
    for i, rec in enumerate(records):
        if len(rec) != width:
            raise DataError(f"{path}: row {i + 1} has {len(rec)} cells, header has {width}")
    cells = np.char.strip(np.array(records, dtype=str))
    ones = cells == "1"
    valid = ones | (cells == "0")
    if not valid.all():
        r, c = np.argwhere(~valid)[0]
        raise NonBinaryValue(int(r) + 1, header[c], str(cells[r, c]))

    label_pos = header.index(label_column)
    feature_pos = [i for i in range(width) if i != label_pos]
    catalog = FeatureCatalog(header[i] for i in feature_pos)
    return BinaryDataset(catalog, ones[:, feature_pos], ones[:, label_pos])


def write_csv(data: BinaryDataset, path: str | Path, label_column: str = "Result") -> None:
    if label_column in data.catalog:
        raise DataError(f"label column {label_column!r} collides with a feature name")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    table = np.concatenate([data.X, data.y[:, None]], axis=1)
    lines = [",".join([*data.catalog.names, label_column])]
    lines += [",".join(row) for row in np.where(table == 1, "1", "0").tolist()]
    atomic_write_text(path, "\n".join(lines) + "\n")


# -- alignment and projection ---------------------------------------------------


def align_to_catalog(data: BinaryDataset, target: FeatureCatalog) -> BinaryDataset:
    """Re-express ``data`` in ``target``'s feature space.

    Features missing from ``data`` become all-zero columns, features unknown to
    ``target`` are dropped, and column order follows ``target``.
    """
    if data.catalog.names == target.names:
        return data
    src = data.catalog.positions(target.names)
    present = src >= 0
    X = np.zeros((data.n_rows, len(target)), dtype=np.uint8)
    X[:, present] = data.X[:, src[present]]
    return BinaryDataset(target, X, data.y, data.tags, data.row_index)


def catalog_intersection(a: FeatureCatalog, b: FeatureCatalog) -> FeatureCatalog:
    """Names present in both catalogs, in ``a``'s order."""
    common = [n for n in a.names if n in b]
    if not common:
        raise EmptyIntersection("catalogs share no features")
    return FeatureCatalog(common)


def project(data: BinaryDataset, catalog: FeatureCatalog) -> BinaryDataset:
    """Column selection onto a sub-catalog (every name must exist in ``data``)."""
    pos = data.catalog.positions(catalog.names)
    if (pos < 0).any():
        missing = [n for n, p in zip(catalog.names, pos) if p < 0]
        raise DataError(f"features not in dataset: {missing[:5]}")
    return BinaryDataset(catalog, data.X[:, pos], data.y, data.tags, data.row_index)


def merge_common(
    a: BinaryDataset,
    b: BinaryDataset,
    seed: int,
    tag_a: str = "a",
    tag_b: str = "b",
) -> BinaryDataset:
    """Project both datasets onto their shared features, concatenate and shuffle.

    Rows keep existing domain tags; untagged inputs are tagged ``tag_a``/``tag_b``.
    """
    common = catalog_intersection(a.catalog, b.catalog)
    parts = []
    for data, tag in ((a, tag_a), (b, tag_b)):
        if data.tags is None:
            data = data.with_domain(tag)
        parts.append(project(data, common))
    X = np.concatenate([p.X for p in parts])
    y = np.concatenate([p.y for p in parts])
    tags = np.concatenate([p.tags for p in parts])
    row_index = np.concatenate([p.row_index for p in parts])
    order = derive_rng(seed, "merge_common").permutation(len(y))
    return BinaryDataset(common, X[order], y[order], tags[order], row_index[order])


# -- stratified splitting ------------------------------------------------------


def _class_indices(data: BinaryDataset, minimum: int) -> list[np.ndarray]:
    groups = [np.flatnonzero(data.y == c) for c in (BENIGN, MALWARE)]
    for c, g in enumerate(groups):
        if len(g) < minimum:
            raise InsufficientClassRows(f"class {c} has {len(g)} rows, need at least {minimum}")
    return groups


def _round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


def stratified_split(data: BinaryDataset, test_fraction: float, seed: int) -> SplitPair:
    """Per-class test count is ``round_half_up(count * test_fraction)``, kept in [1, count-1]."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must be in (0, 1)")
    test_parts = []
    for c, idx in enumerate(_class_indices(data, 2)):
        n_test = min(max(_round_half_up(len(idx) * test_fraction), 1), len(idx) - 1)
        perm = derive_rng(seed, "stratified_split", c).permutation(idx)
        test_parts.append(perm[:n_test])
    test_idx = np.sort(np.concatenate(test_parts))
    mask = np.ones(data.n_rows, dtype=bool)
    mask[test_idx] = False
    train_idx = np.flatnonzero(mask)
    return SplitPair(data.take(train_idx), data.take(test_idx), train_idx, test_idx)


def stratified_kfold(data: BinaryDataset, k: int, seed: int) -> FoldSet:
    """Deal each class's shuffled rows round-robin into ``k`` folds.

    The dealing position carries over from one class to the next so fold sizes
    differ by at most one row overall.
    """
    if k < 2:
        raise ValueError("k must be at least 2")
    buckets: list[list[np.ndarray]] = [[] for _ in range(k)]
    offset = 0
    for c, idx in enumerate(_class_indices(data, k)):
        perm = derive_rng(seed, "stratified_kfold", c).permutation(idx)
        for j in range(k):
            buckets[(offset + j) % k].append(perm[j::k])
        offset = (offset + len(perm)) % k
    return FoldSet(tuple(np.sort(np.concatenate(b)) for b in buckets))
