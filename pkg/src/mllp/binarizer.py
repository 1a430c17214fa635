"""Tabular ingestion, supervised entropy discretization and one-hot binarization.

Continuous columns are cut with recursive minimal-entropy partitioning
(Fayyad & Irani, MDL stopping rule); categorical columns are one-hot encoded.
The resulting :class:`FeatureDictionary` keeps a readable condition for every
binary column so learned rules can be printed in terms of the raw data.
"""
from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError

CONTINUOUS = "continuous"
CATEGORICAL = "categorical"
MISSING_TOKENS = frozenset({"", "?"})
DISCRETIZER_FORMAT = "mllp.discretizer"
FORMAT_VERSION = 1


# --------------------------------------------------------------------------
# raw data
# --------------------------------------------------------------------------

@dataclass
class RawDataset:
    """Column-oriented table with one label column.

    ``values[col]`` holds floats for continuous columns and strings for
    categorical ones. ``labels`` holds the raw class values as strings.
    """

    columns: list[str]
    kinds: dict[str, str]
    values: dict[str, list]
    labels: list[str]
    label_col: str = "class"
    row_ids: list[int] | None = None  # positions in the file the rows came from

    def __post_init__(self):
        if self.row_ids is None:
            self.row_ids = list(range(len(self.labels)))
        if not self.labels:
            raise DataError("dataset is empty")
        for col in self.columns:
            if self.kinds.get(col) not in (CONTINUOUS, CATEGORICAL):
                raise DataError(f"column {col!r} has no valid kind")
            if len(self.values[col]) != len(self.labels):
                raise DataError(f"column {col!r} length differs from label column")

    @property
    def n(self) -> int:
        return len(self.labels)

    def subset(self, indices: Sequence[int]) -> "RawDataset":
        idx = list(indices)
        return RawDataset(
            columns=list(self.columns),
            kinds=dict(self.kinds),
            values={c: [self.values[c][i] for i in idx] for c in self.columns},
            labels=[self.labels[i] for i in idx],
            label_col=self.label_col,
            row_ids=[self.row_ids[i] for i in idx],
        )

    def label_order(self) -> list[str]:
        return list(dict.fromkeys(self.labels))


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def load_csv(
    path: str | Path,
    label_col: str | None = None,
    schema: dict[str, str] | None = None,
    labelled: bool = True,
) -> RawDataset:
    """Read a UTF-8 CSV with a header row.

    Column kinds are inferred (all-numeric -> continuous, otherwise
    categorical); ``schema`` overrides individual columns. The label column
    defaults to the last column. Missing values (empty or ``?``) are rejected.
    With ``labelled=False`` every column is a feature (unless ``label_col``
    names one, which is then dropped) and labels are left empty.
    """
    schema = dict(schema or {})
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        rows = [[c.strip() for c in row] for row in reader if row and any(c.strip() for c in row)]

    if not labelled:
        label_col = label_col if label_col in header else None
    elif label_col is None:
        label_col = header[-1]
    if labelled and label_col not in header:
        raise DataError(f"label column {label_col!r} not in header {header}")
    unknown = set(schema) - set(header)
    if unknown:
        raise DataError(f"schema names unknown columns: {sorted(unknown)}")

    for lineno, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise DataError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        for name, cell in zip(header, row):
            if cell in MISSING_TOKENS:
                raise DataError(f"{path}:{lineno}: missing value in column {name!r}")

    li = header.index(label_col) if label_col is not None else -1
    columns = [h for h in header if h != label_col]
    kinds: dict[str, str] = {}
    values: dict[str, list] = {}
    for j, name in enumerate(header):
        if j == li:
            continue
        raw = [row[j] for row in rows]
        kind = schema.get(name)
        if kind is None:
            kind = CONTINUOUS if all(_is_number(v) for v in raw) else CATEGORICAL
        if kind == CONTINUOUS:
            try:
                values[name] = [float(v) for v in raw]
            except ValueError as exc:
                raise DataError(f"column {name!r} declared continuous: {exc}") from None
        elif kind == CATEGORICAL:
            values[name] = raw
        else:
            raise DataError(f"column {name!r}: unknown kind {kind!r}")
        kinds[name] = kind

    labels = [row[li] if li >= 0 else "" for row in rows]
    data = RawDataset(columns, kinds, values, labels, label_col or "")
    if labelled and len(set(data.labels)) < 2:
        raise DataError("label column needs at least two distinct classes")
    return data


def load_schema(path: str | Path) -> dict[str, str]:
    with open(path, encoding="utf-8") as f:
        schema = json.load(f)
    if not isinstance(schema, dict):
        raise DataError("schema file must hold a JSON object {column: kind}")
    return {str(k): str(v) for k, v in schema.items()}


# --------------------------------------------------------------------------
# entropy discretization
# --------------------------------------------------------------------------

def entropy(labels: Sequence) -> float:
    """Shannon entropy (bits) of the empirical class distribution."""
    if len(labels) == 0:
        raise ValueError("empty partition")
    _, counts = np.unique(np.asarray(labels), return_counts=True)
    return _entropy_counts(counts)


def _entropy_counts(counts: np.ndarray) -> float:
    total = counts.sum()
    p = counts[counts > 0] / total
    return float(-(p * np.log2(p)).sum()) + 0.0


def _mdl_accepts(parent: np.ndarray, left: np.ndarray, right: np.ndarray) -> bool:
    n = parent.sum()
    n1, n2 = left.sum(), right.sum()
    ent, ent1, ent2 = _entropy_counts(parent), _entropy_counts(left), _entropy_counts(right)
    gain = ent - (n1 / n) * ent1 - (n2 / n) * ent2
    k, k1, k2 = (int((c > 0).sum()) for c in (parent, left, right))
    delta = math.log2(3**k - 2) - (k * ent - k1 * ent1 - k2 * ent2)
    return gain > (math.log2(n - 1) + delta) / n


def mdlp_cuts(values: Sequence[float], labels: Sequence) -> list[float]:
    """Recursive minimal-entropy cut points under the MDL stopping criterion.

    Candidates are midpoints between adjacent distinct values whose value
    groups are not both pure in the same class (boundary points). Equal
    weighted entropies are resolved towards the smallest cut.
    """
    x = np.asarray(values, dtype=float)
    if x.size != len(labels):
        raise ValueError("values and labels differ in length")
    if x.size < 2:
        return []
    _, y = np.unique(np.asarray(labels), return_inverse=True)
    uniq, inv = np.unique(x, return_inverse=True)
    if uniq.size < 2:
        return []
    counts = np.zeros((uniq.size, int(y.max()) + 1), dtype=np.int64)
    np.add.at(counts, (inv, y), 1)

    cuts: list[float] = []
    _split(uniq, counts, cuts)
    return sorted(cuts)


def _split(uniq: np.ndarray, counts: np.ndarray, out: list[float]) -> None:
    if uniq.size < 2:
        return
    parent = counts.sum(axis=0)
    if (parent > 0).sum() < 2:
        return
    n = parent.sum()
    left = np.cumsum(counts, axis=0)[:-1]
    right = parent - left

    # a gap between value groups is a boundary unless both sides are pure in one shared class
    pure = (counts > 0).sum(axis=1) == 1
    same = pure[:-1] & pure[1:] & (counts[:-1].argmax(axis=1) == counts[1:].argmax(axis=1))
    candidates = np.flatnonzero(~same)
    if candidates.size == 0:
        return

    best, best_ent = -1, math.inf
    for i in candidates:
        nl, nr = left[i].sum(), right[i].sum()
        ent = (nl * _entropy_counts(left[i]) + nr * _entropy_counts(right[i])) / n
        if ent < best_ent - 1e-12:
            best, best_ent = i, ent
    if not _mdl_accepts(parent, left[best], right[best]):
        return
    out.append(float((uniq[best] + uniq[best + 1]) / 2.0))
    _split(uniq[: best + 1], counts[: best + 1], out)
    _split(uniq[best + 1:], counts[best + 1:], out)


# --------------------------------------------------------------------------
# discretizer and feature dictionary
# --------------------------------------------------------------------------

def _fmt(v: float) -> str:
    return f"{v:.6g}"


@dataclass(frozen=True)
class FeatureEntry:
    """One binary feature: ``low <= value < high`` or ``value == category``."""

    index: int
    column: str
    condition: str
    category: str | None = None
    low: float = -math.inf
    high: float = math.inf

    def holds(self, value) -> bool:
        if self.category is not None:
            return value == self.category
        return self.low <= value < self.high

    def to_json(self) -> dict:
        d: dict = {"index": self.index, "column": self.column, "condition": self.condition}
        if self.category is not None:
            d["category"] = self.category
        else:
            d["low"] = None if math.isinf(self.low) else self.low
            d["high"] = None if math.isinf(self.high) else self.high
        return d

    @classmethod
    def from_json(cls, d: dict) -> "FeatureEntry":
        if "category" in d:
            return cls(d["index"], d["column"], d["condition"], category=d["category"])
        low = -math.inf if d.get("low") is None else float(d["low"])
        high = math.inf if d.get("high") is None else float(d["high"])
        return cls(d["index"], d["column"], d["condition"], low=low, high=high)


@dataclass
class FeatureDictionary:
    entries: list[FeatureEntry]
    dropped: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, j: int) -> FeatureEntry:
        return self.entries[j]

    def groups(self) -> dict[str, list[int]]:
        out: dict[str, list[int]] = {}
        for e in self.entries:
            out.setdefault(e.column, []).append(e.index)
        return out

    def to_json(self) -> dict:
        return {"entries": [e.to_json() for e in self.entries], "dropped": list(self.dropped)}

    @classmethod
    def from_json(cls, d: dict) -> "FeatureDictionary":
        return cls([FeatureEntry.from_json(e) for e in d["entries"]], list(d.get("dropped", [])))


def _continuous_entries(col: str, cuts: list[float], start: int) -> list[FeatureEntry]:
    edges = [-math.inf, *cuts, math.inf]
    out = []
    for b in range(len(cuts) + 1):
        lo, hi = edges[b], edges[b + 1]
        if math.isinf(lo):
            text = f"{col} < {_fmt(hi)}"
        elif math.isinf(hi):
            text = f"{col} >= {_fmt(lo)}"
        else:
            text = f"{_fmt(lo)} <= {col} < {_fmt(hi)}"
        out.append(FeatureEntry(start + b, col, text, low=lo, high=hi))
    return out


@dataclass
class Discretizer:
    columns: list[str]
    kinds: dict[str, str]
    cuts: dict[str, list[float]]
    categories: dict[str, list[str]]
    label_order: list[str]
    dropped: list[str] = field(default_factory=list)
    label_col: str = "class"

    @property
    def dictionary(self) -> FeatureDictionary:
        entries: list[FeatureEntry] = []
        for col in self.columns:
            if col in self.dropped:
                continue
            if self.kinds[col] == CONTINUOUS:
                entries += _continuous_entries(col, self.cuts[col], len(entries))
            else:
                for cat in self.categories[col]:
                    entries.append(FeatureEntry(len(entries), col, f"{col} = {cat}", category=cat))
        return FeatureDictionary(entries, list(self.dropped))

    @property
    def n_features(self) -> int:
        return len(self.dictionary)

    def to_json(self) -> dict:
        return {
            "format": DISCRETIZER_FORMAT,
            "version": FORMAT_VERSION,
            "label_col": self.label_col,
            "columns": self.columns,
            "kinds": self.kinds,
            "cuts": self.cuts,
            "categories": self.categories,
            "label_order": self.label_order,
            "dropped": self.dropped,
            "dictionary": self.dictionary.to_json()["entries"],
        }

    @classmethod
    def from_json(cls, d: dict) -> "Discretizer":
        if d.get("format") != DISCRETIZER_FORMAT or d.get("version") != FORMAT_VERSION:
            raise DataError("not a version-1 discretizer document")
        return cls(
            columns=list(d["columns"]),
            kinds=dict(d["kinds"]),
            cuts={k: [float(c) for c in v] for k, v in d["cuts"].items()},
            categories={k: list(v) for k, v in d["categories"].items()},
            label_order=list(d["label_order"]),
            dropped=list(d["dropped"]),
            label_col=d.get("label_col", "class"),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Discretizer":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def fit_discretizer(data: RawDataset) -> Discretizer:
    """Fit cut points per continuous column and category lists per categorical one.

    Columns that would produce a single constant feature are dropped.
    """
    cuts: dict[str, list[float]] = {}
    categories: dict[str, list[str]] = {}
    dropped: list[str] = []
    for col in data.columns:
        vals = data.values[col]
        if data.kinds[col] == CONTINUOUS:
            if any(isinstance(v, str) for v in vals):
                raise DataError(f"non-numeric value in continuous column {col!r}")
            cuts[col] = mdlp_cuts(vals, data.labels)
            if not cuts[col]:
                dropped.append(col)
        else:
            categories[col] = list(dict.fromkeys(vals))
            if len(categories[col]) < 2:
                dropped.append(col)
    return Discretizer(
        columns=list(data.columns),
        kinds=dict(data.kinds),
        cuts=cuts,
        categories=categories,
        label_order=data.label_order(),
        dropped=dropped,
        label_col=data.label_col,
    )


@dataclass
class BinarizedDataset:
    features: np.ndarray  # (N, J) uint8
    labels: np.ndarray  # (N, C) uint8 one-hot
    dictionary: FeatureDictionary
    label_order: list[str] = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def y(self) -> np.ndarray:
        """Class indices."""
        return self.labels.argmax(axis=1)

    def subset(self, indices) -> "BinarizedDataset":
        idx = np.asarray(indices, dtype=int)
        return BinarizedDataset(self.features[idx], self.labels[idx], self.dictionary, self.label_order)


def binarize(data: RawDataset, disc: Discretizer) -> BinarizedDataset:
    dictionary = disc.dictionary
    if set(data.columns) != set(disc.columns):
        raise DataError("dataset columns do not match the fitted discretizer")
    X = np.zeros((data.n, len(dictionary)), dtype=np.uint8)
    groups = dictionary.groups()
    for col, idx in groups.items():
        vals = data.values[col]
        if disc.kinds[col] == CONTINUOUS:
            if data.kinds[col] != CONTINUOUS:
                raise DataError(f"column {col!r} is not continuous in this dataset")
            bins = np.searchsorted(np.asarray(disc.cuts[col]), np.asarray(vals, dtype=float), side="right")
            X[np.arange(data.n), np.asarray(idx)[bins]] = 1
        else:
            pos = {str(c): i for c, i in zip(disc.categories[col], idx)}
            unseen = 0
            for r, v in enumerate(vals):
                j = pos.get(str(v) if not isinstance(v, str) else v)
                if j is None:
                    unseen += 1
                else:
                    X[r, j] = 1
            if unseen:
                warnings.warn(f"{unseen} unseen value(s) in column {col!r}; group left all-zero", stacklevel=2)

    label_pos = {lab: i for i, lab in enumerate(disc.label_order)}
    Y = np.zeros((data.n, len(disc.label_order)), dtype=np.uint8)
    for r, lab in enumerate(data.labels):
        if lab not in label_pos:
            raise DataError(f"unknown class {lab!r}")
        Y[r, label_pos[lab]] = 1
    return BinarizedDataset(X, Y, dictionary, list(disc.label_order))


def binarize_with_dictionary(data: RawDataset, dictionary: FeatureDictionary,
                             label_order: Sequence[str] | None = None) -> BinarizedDataset:
    """Binarize using the predicates stored in a feature dictionary.

    Used when only a saved model (which embeds its dictionary) is at hand.
    Labels outside ``label_order`` raise; without ``label_order`` the label
    matrix is left empty.
    """
    X = np.zeros((data.n, len(dictionary)), dtype=np.uint8)
    for e in dictionary.entries:
        if e.column not in data.values:
            raise DataError(f"column {e.column!r} missing from the data")
        col = data.values[e.column]
        if e.category is not None:
            X[:, e.index] = [str(v) == e.category for v in col]
        else:
            if data.kinds[e.column] != CONTINUOUS:
                raise DataError(f"column {e.column!r} is not continuous in this dataset")
            v = np.asarray(col, dtype=float)
            X[:, e.index] = (v >= e.low) & (v < e.high)
    labels = list(label_order or [])
    Y = np.zeros((data.n, len(labels)), dtype=np.uint8)
    if labels:
        pos = {lab: i for i, lab in enumerate(labels)}
        for r, lab in enumerate(data.labels):
            if lab not in pos:
                raise DataError(f"unknown class {lab!r}")
            Y[r, pos[lab]] = 1
    return BinarizedDataset(X, Y, dictionary, labels)
