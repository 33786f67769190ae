"""Datasets, CSV ingestion, standardization, and experiment splits."""
from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import (
    DataError,
    DegenerateColumnError,
    ParameterError,
    ParseError,
    SchemaError,
    SizeError,
)
from .numcore import FLOAT, SeededRng

CONTINUOUS = "continuous"
BINARY = "binary"


@dataclass(frozen=True)
class Column:
    name: str
    kind: str = CONTINUOUS


@dataclass(frozen=True)
class Schema:
    columns: tuple[Column, ...]

    def __post_init__(self):
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise SchemaError(f"duplicate column names in {names}")
        for c in self.columns:
            if c.kind not in (CONTINUOUS, BINARY):
                raise SchemaError(f"unknown column kind {c.kind!r}")

    @classmethod
    def continuous(cls, names):
        return cls(tuple(Column(n) for n in names))

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.columns]

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise SchemaError(f"no column named {name!r}") from None

    def __len__(self):
        return len(self.columns)


@dataclass(frozen=True)
class Dataset:
    schema: Schema
    values: np.ndarray
    standardized: bool = False
    mean: np.ndarray | None = field(default=None, repr=False)
    std: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=FLOAT, copy=True)
        if values.ndim == 1:
            values = values.reshape(-1, 1)
        if values.ndim != 2 or values.shape[1] != len(self.schema):
            raise SchemaError(
                f"values of shape {values.shape} do not match {len(self.schema)} columns"
            )
        if not np.all(np.isfinite(values)):
            raise DataError("dataset contains non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_array(cls, values, names=None) -> "Dataset":
        values = np.asarray(values, dtype=FLOAT)
        if values.ndim == 1:
            values = values.reshape(-1, 1)
        names = names or [f"x{i}" for i in range(values.shape[1])]
        return cls(Schema.continuous(names), values)

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_cols(self) -> int:
        return self.values.shape[1]

    def __len__(self):
        return self.n_rows

    def take(self, idx) -> "Dataset":
        return replace(self, values=self.values[np.asarray(idx, dtype=int)])

    def with_values(self, values) -> "Dataset":
        return replace(self, values=values)

    def destandardize(self) -> "Dataset":
        if not self.standardized:
            return self
        return Dataset(self.schema, self.values * self.std + self.mean)


def concat(parts: list[Dataset]) -> Dataset:
    first = parts[0]
    for p in parts[1:]:
        if p.schema != first.schema:
            raise SchemaError("cannot concatenate datasets with different schemas")
    return replace(first, values=np.vstack([p.values for p in parts]))


def infer_kind(column: np.ndarray) -> str:
    return BINARY if np.all((column == 0.0) | (column == 1.0)) else CONTINUOUS


def load_csv(path, binary_hint: bool = True) -> Dataset:
    """Read a numeric CSV with a header row.

    With ``binary_hint`` a column whose values are all 0 or 1 is typed binary.
    Row numbers in errors are 1-based data rows (the header is row 0).
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        rows = []
        for row_no, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"{path}: row {row_no} has {len(row)} cells, expected {len(header)}")
            parsed = []
            for col_no, cell in enumerate(row):
                cell = cell.strip()
                if cell == "" or cell.lower() in ("na", "nan", "null"):
                    raise DataError(
                        f"{path}: missing value at row {row_no}, column {header[col_no]!r}"
                    )
                try:
                    value = float(cell)
                except ValueError:
                    raise ParseError(
                        f"{path}: non-numeric cell {cell!r} at row {row_no}, column {header[col_no]!r}",
                        row=row_no,
                        col=col_no,
                    ) from None
                if not math.isfinite(value):
                    raise ParseError(f"{path}: non-finite cell at row {row_no}", row=row_no, col=col_no)
                parsed.append(value)
            rows.append(parsed)
    if not rows:
        raise DataError(f"{path}: no data rows")
    values = np.array(rows, dtype=FLOAT)
    kinds = [infer_kind(values[:, j]) if binary_hint else CONTINUOUS for j in range(values.shape[1])]
    schema = Schema(tuple(Column(n, k) for n, k in zip(header, kinds)))
    return Dataset(schema, values)


def format_value(x: float) -> str:
    return format(float(x), ".17g")


def write_csv(dataset: Dataset, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(dataset.schema.names) + "\n")
        for row in dataset.values:
            fh.write(",".join(format_value(v) for v in row) + "\n")


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    std: np.ndarray

    def apply(self, dataset: Dataset) -> Dataset:
        if dataset.standardized:
            raise DataError("dataset is already standardized")
        values = (dataset.values - self.mean) / self.std
        return Dataset(dataset.schema, values, True, self.mean, self.std)


def fit_standardizer(dataset: Dataset) -> Standardizer:
    if dataset.n_rows == 0:
        raise SizeError("cannot standardize on an empty dataset")
    mean = dataset.values.mean(axis=0)
    std = dataset.values.std(axis=0)  # population convention
    for j, s in enumerate(std):
        if not s > 0.0:
            raise DegenerateColumnError(dataset.schema.names[j])
    return Standardizer(mean, std)


def standardize_fit_apply(fit_on: Dataset, apply_to: list[Dataset]):
    """Fit mean/std on ``fit_on`` and transform every dataset in ``apply_to``."""
    params = fit_standardizer(fit_on)
    return [params.apply(d) for d in apply_to], params


def dequantize(dataset: Dataset, rng: SeededRng, width: float = 0.05) -> Dataset:
    """Add U(-width, width) jitter to binary columns; continuous columns untouched."""
    binary = np.array([c.kind == BINARY for c in dataset.schema.columns])
    if not binary.any():
        return dataset
    noise = rng.uniform(-width, width, size=dataset.values.shape) * binary
    return replace(dataset, values=dataset.values + noise)


@dataclass(frozen=True)
class ExperimentSplit:
    d_mem: Dataset
    d_ref: Dataset
    d_test: Dataset
    labels: np.ndarray
    # row indices into the source dataset, kept for disjointness checks
    mem_idx: np.ndarray = field(repr=False, default=None)
    ref_idx: np.ndarray = field(repr=False, default=None)
    test_idx: np.ndarray = field(repr=False, default=None)

    def map(self, fn) -> "ExperimentSplit":
        return replace(self, d_mem=fn(self.d_mem), d_ref=fn(self.d_ref), d_test=fn(self.d_test))


def make_split(data: Dataset, n_mem: int, n_ref: int, n_test: int, rng: SeededRng) -> ExperimentSplit:
    """Draw disjoint member, reference, and test sets from one permutation.

    The test set holds ``n_test/2`` members drawn from ``d_mem`` (label 1)
    and ``n_test/2`` fresh rows (label 0), shuffled together.
    """
    if n_test % 2 or n_test <= 0:
        raise SizeError(f"n_test must be a positive even number, got {n_test}")
    half = n_test // 2
    if n_mem < 1 or n_ref < 1:
        raise SizeError("n_mem and n_ref must be positive")
    if half > n_mem:
        raise SizeError(f"cannot draw {half} members from a training set of {n_mem}")
    need = n_mem + n_ref + half
    if need > data.n_rows:
        raise SizeError(f"split needs {need} rows, dataset has {data.n_rows}")
    perm = rng.permutation(data.n_rows)
    mem_idx = perm[:n_mem]
    ref_idx = perm[n_mem : n_mem + n_ref]
    fresh_idx = perm[n_mem + n_ref : need]
    member_pick = mem_idx[rng.sample_without_replacement(n_mem, half)]
    test_idx = np.concatenate([member_pick, fresh_idx])
    labels = np.concatenate([np.ones(half, dtype=int), np.zeros(half, dtype=int)])
    order = rng.permutation(n_test)
    test_idx, labels = test_idx[order], labels[order]
    return ExperimentSplit(
        d_mem=data.take(mem_idx),
        d_ref=data.take(ref_idx),
        d_test=data.take(test_idx),
        labels=labels,
        mem_idx=mem_idx,
        ref_idx=ref_idx,
        test_idx=test_idx,
    )


_PREDICATE = re.compile(r"^\s*(\w+)\s*(<=|>=|==|!=|<|>)\s*([-+0-9.eE]+)\s*$")
_OPS = {
    "<": np.less,
    "<=": np.less_equal,
    ">": np.greater,
    ">=": np.greater_equal,
    "==": np.equal,
    "!=": np.not_equal,
}


@dataclass(frozen=True)
class Predicate:
    """Row predicate of the form ``<column> <op> <number>``, e.g. ``x0 < -1.5``."""

    column: str
    op: str
    value: float

    @classmethod
    def parse(cls, text: str) -> "Predicate":
        m = _PREDICATE.match(text)
        if not m:
            raise ParameterError(f"cannot parse predicate {text!r}")
        return cls(m.group(1), m.group(2), float(m.group(3)))

    def mask(self, dataset: Dataset) -> np.ndarray:
        col = dataset.values[:, dataset.schema.index(self.column)]
        return _OPS[self.op](col, self.value)

    def __str__(self):
        return f"{self.column} {self.op} {self.value:g}"


@dataclass(frozen=True)
class SubgroupMask:
    mask: np.ndarray
    predicate: Predicate

    @classmethod
    def from_predicate(cls, dataset: Dataset, predicate: Predicate) -> "SubgroupMask":
        return cls(predicate.mask(dataset).astype(int), predicate)

    def __len__(self):
        return len(self.mask)


def shifted_reference(
    pool: Dataset, group0: Predicate, p_group0: float, n_ref: int, rng: SeededRng
) -> Dataset:
    """Reference sample with exactly ``floor(p_group0 * n_ref + 0.5)`` rows from group A=0.

    ``group0`` selects the A=0 rows of ``pool``; the rest are A=1. Each stratum
    is sampled without replacement and the selected rows keep pool order.
    """
    if not 0.0 <= p_group0 <= 1.0:
        raise ParameterError(f"p_group0 must lie in [0, 1], got {p_group0}")
    in_group0 = group0.mask(pool)
    idx0 = np.flatnonzero(in_group0)
    idx1 = np.flatnonzero(~in_group0)
    n0 = math.floor(p_group0 * n_ref + 0.5)
    n1 = n_ref - n0
    if n0 > idx0.size:
        raise SizeError(f"group A=0 has {idx0.size} rows, need {n0}")
    if n1 > idx1.size:
        raise SizeError(f"group A=1 has {idx1.size} rows, need {n1}")
    pick0 = idx0[rng.sample_without_replacement(idx0.size, n0)]
    pick1 = idx1[rng.sample_without_replacement(idx1.size, n1)]
    return pool.take(np.sort(np.concatenate([pick0, pick1])))
