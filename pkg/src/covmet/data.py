"""Tabular data handling: named numeric columns, column roles, and a
strict CSV reader/writer.

The CSV dialect is deliberately small: one header row of unique column
names, comma separated, every body cell a finite decimal or scientific
literal.  Missing values are not supported; an empty or NA-like cell is
an error that names the offending row and column rather than silently
becoming NaN.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DataFormatError, RoleError

__all__ = [
    "ColumnRoles",
    "Dataset",
    "read_csv",
    "select_blocks",
    "write_csv",
]

_MISSING_TOKENS = {"", "na", "n/a", "nan", "null"}


@dataclass(frozen=True)
class Dataset:
    """Named numeric columns of equal length.

    ``values`` has shape (n, p) with column j named ``names[j]``.  All
    entries are finite float64 and names are unique; both are enforced
    at construction.
    """

    names: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        names = tuple(str(n) for n in self.names)
        object.__setattr__(self, "names", names)
        if len(names) == 0:
            raise DataFormatError("dataset needs at least one column")
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise DataFormatError(f"duplicate column names: {dupes}")
        if any(n.strip() == "" for n in names):
            raise DataFormatError("column names must be non-empty")
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise DataFormatError(f"values must be 2-dimensional, got ndim={values.ndim}")
        if values.shape[1] != len(names):
            raise DataFormatError(
                f"{len(names)} column names but values has {values.shape[1]} columns"
            )
        if values.shape[0] < 1:
            raise DataFormatError("dataset needs at least one row")
        if not np.all(np.isfinite(values)):
            bad = np.argwhere(~np.isfinite(values))[0]
            raise DataFormatError(
                f"non-finite value at row {bad[0] + 1}, column '{names[bad[1]]}'"
            )
        object.__setattr__(self, "values", np.ascontiguousarray(values))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise DataFormatError(f"unknown column '{name}'") from None

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.index(name)].copy()


@dataclass(frozen=True)
class ColumnRoles:
    """Assignment of dataset columns to test roles.

    One response column, at least one candidate column, and zero or more
    conditioning columns; the three groups must be disjoint.
    """

    response: str
    candidates: tuple[str, ...]
    conditioning: tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "candidates", tuple(self.candidates))
        object.__setattr__(self, "conditioning", tuple(self.conditioning))
        if len(self.candidates) == 0:
            raise RoleError("at least one candidate column is required")
        named = [self.response, *self.candidates, *self.conditioning]
        if len(set(named)) != len(named):
            dupes = sorted({n for n in named if named.count(n) > 1})
            raise RoleError(f"column roles overlap: {dupes}")

    def validate(self, dataset: Dataset) -> None:
        missing = [
            name
            for name in (self.response, *self.candidates, *self.conditioning)
            if name not in dataset.names
        ]
        if missing:
            raise RoleError(f"columns not in dataset: {missing}")


def select_blocks(dataset: Dataset, roles: ColumnRoles) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Split a dataset into (y, X, Z) arrays by role.

    Returns copies: y of shape (n,), X of shape (n, #candidates), Z of
    shape (n, #conditioning); Z has zero columns when no conditioning
    columns were assigned.
    """
    roles.validate(dataset)
    y = dataset.column(roles.response)
    x_idx = [dataset.index(name) for name in roles.candidates]
    z_idx = [dataset.index(name) for name in roles.conditioning]
    x = np.ascontiguousarray(dataset.values[:, x_idx])
    z = (
        np.ascontiguousarray(dataset.values[:, z_idx])
        if z_idx
        else np.empty((dataset.n, 0), dtype=np.float64)
    )
    return y, x, z


def _parse_cell(token: str, row: int, name: str) -> float:
    stripped = token.strip()
    if stripped.lower() in _MISSING_TOKENS:
        raise DataFormatError(
            f"missing values are not supported: empty/NA cell at row {row}, column '{name}'"
        )
    try:
        value = float(stripped)
    except ValueError:
        raise DataFormatError(
            f"cannot parse '{token}' as a number at row {row}, column '{name}'"
        ) from None
    if not math.isfinite(value):
        raise DataFormatError(
            f"non-finite value '{token}' at row {row}, column '{name}'"
        )
    return value


def read_csv(path) -> Dataset:
    """Read a strict numeric CSV file into a Dataset.

    Row numbers in error messages are 1-based over the data body (the
    header is row 0).
    """
    with open(path, "r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}: file is empty") from None
        names = [cell.strip() for cell in header]
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise DataFormatError(f"{path}: duplicate column names {dupes}")
        rows: list[list[float]] = []
        for i, cells in enumerate(reader, start=1):
            if len(cells) != len(names):
                raise DataFormatError(
                    f"{path}: row {i} has {len(cells)} cells, expected {len(names)}"
                )
            rows.append([_parse_cell(cell, i, names[j]) for j, cell in enumerate(cells)])
        if not rows:
            raise DataFormatError(f"{path}: no data rows")
    return Dataset(names=tuple(names), values=np.array(rows, dtype=np.float64))


def write_csv(dataset: Dataset, path) -> None:
    """Write a Dataset as CSV with full round-trip precision.

    Floats are rendered with ``repr``, the shortest string that parses
    back to the same double, so ``read_csv(write_csv(ds)) == ds``
    exactly.
    """
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(dataset.names)
        for row in dataset.values:
            writer.writerow([repr(float(v)) for v in row])
