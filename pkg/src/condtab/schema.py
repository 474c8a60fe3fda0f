"""Table schema, CSV loading/validation and deterministic row splits."""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np
import pandas as pd
import yaml

NUMERICAL = "numerical"
CATEGORICAL = "categorical"


class SchemaError(ValueError):
    """Raised for an invalid schema definition."""


class DataError(ValueError):
    """Raised for a CSV cell or table that violates the schema.

    ``row`` is the 1-based data row (header excluded) and ``column`` the column
    name, when the problem can be located.
    """

    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        loc = []
        if row is not None:
            loc.append(f"row {row}")
        if column is not None:
            loc.append(f"column {column!r}")
        super().__init__(f"{', '.join(loc)}: {message}" if loc else message)
        self.row = row
        self.column = column


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    kind: str
    categories: tuple[str, ...] = ()
    always_observed: bool = False
    dependencies: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in (NUMERICAL, CATEGORICAL):
            raise SchemaError(f"column {self.name!r}: unknown kind {self.kind!r}")
        if self.kind == CATEGORICAL:
            if len(self.categories) < 2:
                raise SchemaError(f"column {self.name!r}: needs at least 2 categories")
            if len(set(self.categories)) != len(self.categories):
                raise SchemaError(f"column {self.name!r}: duplicate categories")
        elif self.categories:
            raise SchemaError(f"column {self.name!r}: numerical column cannot list categories")

    @property
    def is_categorical(self) -> bool:
        return self.kind == CATEGORICAL


@dataclass(frozen=True)
class TableSchema:
    """Ordered column list; the order fixes the encoding layout.

    Encoded rows are laid out as all numerical columns (in schema order)
    followed by one one-hot block per categorical column (in schema order).
    """

    columns: tuple[ColumnSpec, ...]
    missing: str = ""

    def __post_init__(self):
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise SchemaError("duplicate column names")
        if not names:
            raise SchemaError("schema has no columns")
        known = set(names)
        for col in self.columns:
            for dep in col.dependencies:
                if dep not in known:
                    raise SchemaError(f"column {col.name!r}: unknown dependency {dep!r}")
                if dep == col.name:
                    raise SchemaError(f"column {col.name!r}: depends on itself")
        _check_acyclic({c.name: c.dependencies for c in self.columns})

    # convenience views -------------------------------------------------

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.columns]

    @property
    def numerical(self) -> list[ColumnSpec]:
        return [c for c in self.columns if not c.is_categorical]

    @property
    def categorical(self) -> list[ColumnSpec]:
        return [c for c in self.columns if c.is_categorical]

    @property
    def n_num(self) -> int:
        return len(self.numerical)

    @property
    def cat_widths(self) -> list[int]:
        return [len(c.categories) for c in self.categorical]

    @property
    def cat_offsets(self) -> list[int]:
        """Start offset of every categorical block inside the one-hot matrix."""
        return [int(o) for o in np.concatenate([[0], np.cumsum(self.cat_widths)[:-1]])] if self.categorical else []

    def column(self, name: str) -> ColumnSpec:
        for c in self.columns:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict[str, Any]:
        cols = []
        for c in self.columns:
            d: dict[str, Any] = {"name": c.name, "kind": c.kind}
            if c.is_categorical:
                d["categories"] = list(c.categories)
            d["always_observed"] = c.always_observed
            d["dependencies"] = list(c.dependencies)
            cols.append(d)
        return {"missing": self.missing, "columns": cols}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "TableSchema":
        try:
            raw_cols = data["columns"]
        except (KeyError, TypeError):
            raise SchemaError("schema needs a 'columns' list") from None
        cols = []
        for i, c in enumerate(raw_cols):
            if "name" not in c or "kind" not in c:
                raise SchemaError(f"columns[{i}]: 'name' and 'kind' are required")
            cols.append(
                ColumnSpec(
                    name=str(c["name"]),
                    kind=str(c["kind"]),
                    categories=tuple(str(v) for v in c.get("categories", ()) or ()),
                    always_observed=bool(c.get("always_observed", False)),
                    dependencies=tuple(str(v) for v in c.get("dependencies", ()) or ()),
                )
            )
        return cls(columns=tuple(cols), missing=str(data.get("missing", "")))

    def digest(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode()).hexdigest()


def _check_acyclic(graph: dict[str, Sequence[str]]) -> None:
    state: dict[str, int] = {}

    def visit(node: str, path: list[str]) -> None:
        mark = state.get(node, 0)
        if mark == 1:
            cycle = path[path.index(node):] + [node]
            raise SchemaError("dependency cycle: " + " -> ".join(cycle))
        if mark == 2:
            return
        state[node] = 1
        for dep in graph[node]:
            visit(dep, path + [node])
        state[node] = 2

    for name in graph:
        visit(name, [])


def load_schema(path: str | Path) -> TableSchema:
    """Read a schema config (YAML or JSON)."""
    with open(path, encoding="utf-8") as fh:
        data = yaml.safe_load(fh)
    return TableSchema.from_dict(data)


def save_schema(schema: TableSchema, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(schema.to_dict(), fh, sort_keys=False)


@dataclass
class DataTable:
    """Validated table. Missing cells are NaN (numerical) or None (categorical)."""

    schema: TableSchema
    frame: pd.DataFrame = field(repr=False)

    def __post_init__(self):
        frame = self.frame
        missing_cols = [n for n in self.schema.names if n not in frame.columns]
        if missing_cols:
            raise DataError(f"missing columns {missing_cols}")
        frame = frame[self.schema.names].reset_index(drop=True)
        out = {}
        for col in self.schema.columns:
            values = frame[col.name]
            if col.is_categorical:
                vocab = set(col.categories)
                cells = []
                for i, v in enumerate(values.tolist()):
                    if v is None or (isinstance(v, float) and math.isnan(v)):
                        cells.append(None)
                    elif str(v) in vocab:
                        cells.append(str(v))
                    else:
                        raise DataError(f"unknown category {v!r}", row=i + 1, column=col.name)
                out[col.name] = pd.Series(cells, dtype=object)
            else:
                arr = pd.to_numeric(values, errors="coerce").to_numpy(dtype=np.float64)
                if np.isinf(arr).any():
                    i = int(np.flatnonzero(np.isinf(arr))[0])
                    raise DataError("non-finite numerical value", row=i + 1, column=col.name)
                out[col.name] = arr
        self.frame = pd.DataFrame(out, columns=self.schema.names)

    def __len__(self) -> int:
        return len(self.frame)

    def missing_mask(self) -> np.ndarray:
        """Boolean (rows, columns) array, True where the cell is MISSING."""
        return self.frame.isna().to_numpy()

    def take(self, indices: Iterable[int]) -> "DataTable":
        idx = np.asarray(list(indices) if not isinstance(indices, np.ndarray) else indices, dtype=np.int64)
        return DataTable(self.schema, self.frame.iloc[idx].reset_index(drop=True))

    def copy(self) -> "DataTable":
        return DataTable(self.schema, self.frame.copy())


def _parse_cell(text: str, col: ColumnSpec, missing: str, row: int):
    if text == missing or (missing == "" and text.strip() == ""):
        return None
    if col.is_categorical:
        if text not in col.categories:
            raise DataError(f"unknown category {text!r}", row=row, column=col.name)
        return text
    try:
        value = float(text)
    except ValueError:
        raise DataError(f"non-numeric value {text!r}", row=row, column=col.name) from None
    if not math.isfinite(value):
        raise DataError(f"non-finite value {text!r}", row=row, column=col.name)
    return value


def load_csv(path: str | Path, schema: TableSchema) -> DataTable:
    """Load and validate a CSV file against ``schema``.

    The header must hold exactly the schema's column names, in any order.
    Errors carry 1-based data-row coordinates.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError("missing header row") from None
        expected = set(schema.names)
        unknown = [h for h in header if h not in expected]
        if unknown:
            raise DataError(f"unknown column {unknown[0]!r}", row=0, column=unknown[0])
        absent = [n for n in schema.names if n not in header]
        if absent:
            raise DataError(f"header is missing column {absent[0]!r}", row=0, column=absent[0])
        if len(header) != len(set(header)):
            raise DataError("duplicate column in header", row=0)
        cols = [schema.column(h) for h in header]
        records: dict[str, list] = {h: [] for h in header}
        for r, cells in enumerate(reader, start=1):
            if not cells:
                continue
            if len(cells) != len(header):
                raise DataError(f"expected {len(header)} cells, found {len(cells)}", row=r)
            for col, text in zip(cols, cells):
                records[col.name].append(_parse_cell(text, col, schema.missing, r))
    frame = pd.DataFrame({n: records[n] for n in schema.names}, columns=schema.names)
    for col in schema.numerical:
        frame[col.name] = frame[col.name].astype(np.float64)
    return DataTable(schema, frame)


def format_number(value: float) -> str:
    # repr gives the shortest string that round-trips exactly
    return repr(float(value))


def write_csv(table: DataTable, path: str | Path) -> None:
    schema = table.schema
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(schema.names)
        columns = []
        for col in schema.columns:
            values = table.frame[col.name].tolist()
            if col.is_categorical:
                columns.append([schema.missing if v is None else v for v in values])
            else:
                columns.append([schema.missing if math.isnan(v) else format_number(v) for v in values])
        for row in zip(*columns):
            writer.writerow(row)


def split_sizes(n: int, fractions: Sequence[float]) -> list[int]:
    sizes = [int(math.floor(n * f)) for f in fractions]
    sizes[0] += n - sum(sizes)
    return sizes


def split(
    table: DataTable, fractions: tuple[float, float, float], seed: int
) -> tuple[DataTable, DataTable, DataTable]:
    """Shuffle rows and cut them into train/validation/test.

    Each part gets ``floor(n * fraction)`` rows; leftover rows go to train.
    """
    if len(table) == 0:
        raise DataError("cannot split an empty table")
    if len(fractions) != 3 or any(f <= 0 for f in fractions):
        raise ValueError("fractions must be three positive numbers")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"fractions must sum to 1, got {sum(fractions)!r}")
    n = len(table)
    perm = np.random.default_rng(seed).permutation(n)
    n_train, n_val, _ = split_sizes(n, fractions)
    parts = (perm[:n_train], perm[n_train:n_train + n_val], perm[n_train + n_val:])
    return tuple(table.take(p) for p in parts)  # type: ignore[return-value]
