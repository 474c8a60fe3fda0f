"""Numerical quantile-to-Gaussian transform and categorical one-hot encoding."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import pandas as pd
from scipy.special import ndtri

from .schema import DataError, DataTable, TableSchema

CLIP = 5.2
MAX_LANDMARKS = 1000
PREPROCESSOR_FORMAT = "condtab-preprocessor"
PREPROCESSOR_VERSION = 1


@dataclass(frozen=True)
class QuantileTransform:
    """Monotone map from a column's empirical ranks to standard-normal quantiles.

    ``values`` are strictly increasing landmarks and ``z`` their normal scores.
    Inputs outside the landmark range map to the clip value.
    """

    values: np.ndarray
    z: np.ndarray

    def forward(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        out = np.interp(x, self.values, self.z)
        out = np.where(x < self.values[0], -CLIP, out)
        out = np.where(x > self.values[-1], CLIP, out)
        return np.clip(out, -CLIP, CLIP)

    def inverse(self, z) -> np.ndarray:
        # np.interp clamps to the end landmarks outside [z[0], z[-1]]
        return np.interp(np.asarray(z, dtype=np.float64), self.z, self.values)

    @property
    def max_gap(self) -> float:
        return float(np.max(np.diff(self.values)))

    def to_dict(self) -> dict[str, Any]:
        return {"values": self.values.tolist(), "z": self.z.tolist()}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "QuantileTransform":
        return cls(np.asarray(d["values"], dtype=np.float64), np.asarray(d["z"], dtype=np.float64))


def fit_quantile(values: Sequence[float], max_landmarks: int = MAX_LANDMARKS, name: str = "") -> QuantileTransform:
    """Fit a quantile transform on finite ``values``.

    Tied values share their average rank; rank ``r`` of ``n`` maps to the
    normal quantile of ``r / (n + 1)``.
    """
    x = np.asarray(values, dtype=np.float64)
    x = x[~np.isnan(x)]
    if not np.all(np.isfinite(x)):
        raise ValueError(f"column {name!r}: non-finite values")
    uniq, counts = np.unique(x, return_counts=True)
    if len(uniq) < 2:
        raise ValueError(
            f"column {name!r} has fewer than 2 distinct values; drop it or declare it categorical"
        )
    n = len(x)
    below = np.concatenate([[0], np.cumsum(counts)[:-1]])
    avg_rank = below + (counts + 1) / 2.0
    z = ndtri(avg_rank / (n + 1))
    if len(uniq) > max_landmarks:
        keep = np.unique(np.round(np.linspace(0, len(uniq) - 1, max_landmarks)).astype(np.int64))
        uniq, z = uniq[keep], z[keep]
    return QuantileTransform(uniq, np.clip(z, -CLIP, CLIP))


@dataclass(frozen=True)
class CategoryEncoder:
    categories: tuple[str, ...]

    @property
    def width(self) -> int:
        return len(self.categories)

    def ordinal(self, values: Sequence[str | None]) -> np.ndarray:
        """Ordinal codes; -1 for missing."""
        lookup = {c: i for i, c in enumerate(self.categories)}
        codes = np.empty(len(values), dtype=np.int64)
        for i, v in enumerate(values):
            if v is None:
                codes[i] = -1
            elif v in lookup:
                codes[i] = lookup[v]
            else:
                raise DataError(f"out-of-vocabulary category {v!r}", row=i + 1)
        return codes

    def encode(self, values: Sequence[str | None]) -> np.ndarray:
        codes = self.ordinal(values)
        out = np.zeros((len(codes), self.width))
        rows = np.flatnonzero(codes >= 0)
        out[rows, codes[rows]] = 1.0
        return out

    def decode(self, block: np.ndarray) -> list[str]:
        # argmax returns the first maximum, so ties go to the lowest ordinal
        idx = np.argmax(np.asarray(block), axis=1)
        return [self.categories[i] for i in idx]


@dataclass
class EncodedBatch:
    x_num: np.ndarray
    x_cat: np.ndarray
    row_ids: np.ndarray

    def __len__(self) -> int:
        return len(self.row_ids)

    @property
    def x(self) -> np.ndarray:
        return np.concatenate([self.x_num, self.x_cat], axis=1)


class Preprocessor:
    """All per-column transforms for one schema, fitted on the training split."""

    def __init__(self, schema: TableSchema, quantiles: dict[str, QuantileTransform]):
        self.schema = schema
        self.quantiles = quantiles
        self.encoders = {c.name: CategoryEncoder(c.categories) for c in schema.categorical}

    @classmethod
    def fit(cls, table: DataTable, max_landmarks: int = MAX_LANDMARKS) -> "Preprocessor":
        quantiles = {
            c.name: fit_quantile(table.frame[c.name].to_numpy(), max_landmarks, name=c.name)
            for c in table.schema.numerical
        }
        return cls(table.schema, quantiles)

    def transform(self, table: DataTable, allow_missing: bool = False) -> EncodedBatch:
        """Encode a table.

        With ``allow_missing`` a MISSING numerical cell encodes as 0 and a
        MISSING categorical cell as an all-zero block; callers must mask them.
        """
        frame = table.frame
        if not allow_missing:
            missing = table.missing_mask()
            if missing.any():
                r, c = np.argwhere(missing)[0]
                raise DataError("MISSING cell cannot be encoded", row=int(r) + 1, column=self.schema.names[c])
        n = len(frame)
        x_num = np.zeros((n, self.schema.n_num))
        for j, col in enumerate(self.schema.numerical):
            v = frame[col.name].to_numpy(dtype=np.float64)
            known = ~np.isnan(v)
            x_num[known, j] = self.quantiles[col.name].forward(v[known])
        blocks = [self.encoders[c.name].encode(frame[c.name].tolist()) for c in self.schema.categorical]
        x_cat = np.concatenate(blocks, axis=1) if blocks else np.zeros((n, 0))
        return EncodedBatch(x_num, x_cat, np.arange(n))

    def inverse_transform(self, x_num: np.ndarray, x_cat: np.ndarray) -> DataTable:
        out: dict[str, Any] = {}
        for j, col in enumerate(self.schema.numerical):
            out[col.name] = self.quantiles[col.name].inverse(x_num[:, j])
        for col, off, k in zip(self.schema.categorical, self.schema.cat_offsets, self.schema.cat_widths):
            out[col.name] = self.encoders[col.name].decode(x_cat[:, off:off + k])
        return DataTable(self.schema, pd.DataFrame(out, columns=self.schema.names))

    # serialization -----------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        return {
            "format": PREPROCESSOR_FORMAT,
            "version": PREPROCESSOR_VERSION,
            "schema": self.schema.to_dict(),
            "quantiles": {k: v.to_dict() for k, v in self.quantiles.items()},
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Preprocessor":
        if d.get("format") != PREPROCESSOR_FORMAT or d.get("version") != PREPROCESSOR_VERSION:
            raise ValueError("not a supported preprocessor artifact")
        schema = TableSchema.from_dict(d["schema"])
        return cls(schema, {k: QuantileTransform.from_dict(v) for k, v in d["quantiles"].items()})

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Preprocessor":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
