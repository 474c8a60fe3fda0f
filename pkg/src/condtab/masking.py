"""Dynamic masking and the condition/target partition.

Mask convention: 1 = observed (condition), 0 = masked (target).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .schema import DataError, DataTable, TableSchema


@dataclass
class MaskPair:
    mask_num: np.ndarray  # (B, N_num)
    mask_cat: np.ndarray  # (B, C)

    def expand_cat(self, schema: TableSchema) -> np.ndarray:
        """Repeat every categorical bit across its one-hot block."""
        return np.repeat(self.mask_cat, schema.cat_widths, axis=1)

    def expanded(self, schema: TableSchema) -> np.ndarray:
        """Mask over the full encoded width (numerical then one-hot)."""
        return np.concatenate([self.mask_num, self.expand_cat(schema)], axis=1)

    @property
    def bits(self) -> np.ndarray:
        return np.concatenate([self.mask_num, self.mask_cat], axis=1)

    def __len__(self) -> int:
        return self.mask_num.shape[0]


def masked_count(ratio: float, n_maskable: int) -> int:
    return min(max(math.ceil(ratio * n_maskable), 1), n_maskable)


def _draw_block(batch_size: int, maskable: np.ndarray, f_mask: float, rng: np.random.Generator) -> np.ndarray:
    n_cols = len(maskable)
    mask = np.ones((batch_size, n_cols))
    idx = np.flatnonzero(maskable)
    if f_mask <= 0:
        return mask
    if len(idx) == 0:
        raise ValueError("masking ratio is positive but no column is maskable")
    ratio = 0.0
    while ratio == 0.0:  # the ratio must be strictly positive
        ratio = rng.uniform(0.0, f_mask)
    k = masked_count(ratio, len(idx))
    order = np.argsort(rng.random((batch_size, len(idx))), axis=1)[:, :k]
    rows = np.repeat(np.arange(batch_size), k)
    mask[rows, idx[order.ravel()]] = 0.0
    return mask


def draw_masks(batch_size: int, schema: TableSchema, f_mask_num: float, f_mask_cat: float,
               rng: np.random.Generator) -> MaskPair:
    """Draw training masks for one batch.

    One ratio per feature type is drawn for the whole batch, so every row
    masks the same number of features; which features is random per row.
    Always-observed columns are never masked.
    """
    if not (0.0 <= f_mask_num <= 1.0 and 0.0 <= f_mask_cat <= 1.0):
        raise ValueError("masking ratios must lie in [0, 1]")
    num_ok = np.array([not c.always_observed for c in schema.numerical], dtype=bool)
    cat_ok = np.array([not c.always_observed for c in schema.categorical], dtype=bool)
    return MaskPair(
        _draw_block(batch_size, num_ok, f_mask_num, rng),
        _draw_block(batch_size, cat_ok, f_mask_cat, rng),
    )


def partition(x: np.ndarray, masks: MaskPair, schema: TableSchema) -> tuple[np.ndarray, np.ndarray]:
    """Split encoded rows into ``(x_cond, x_target)``; they sum back to ``x``."""
    m = masks.expanded(schema)
    if m.shape != x.shape:
        raise ValueError(f"mask shape {m.shape} does not match batch shape {x.shape}")
    x_cond = np.where(m > 0, x, 0.0)
    x_target = np.where(m > 0, 0.0, x)
    return x_cond, x_target


def mask_from_missing(table: DataTable) -> MaskPair:
    """Inference masks: every MISSING cell becomes a target."""
    schema = table.schema
    missing = table.missing_mask()
    names = schema.names
    always = [c.name for c in schema.columns if c.always_observed]
    for name in always:
        j = names.index(name)
        rows = np.flatnonzero(missing[:, j])
        if len(rows):
            raise DataError("always-observed column is MISSING", row=int(rows[0]) + 1, column=name)
    empty = np.flatnonzero(missing.all(axis=1))
    if len(empty):
        raise DataError("row has no observed feature", row=int(empty[0]) + 1)
    num_idx = [names.index(c.name) for c in schema.numerical]
    cat_idx = [names.index(c.name) for c in schema.categorical]
    observed = (~missing).astype(np.float64)
    return MaskPair(observed[:, num_idx], observed[:, cat_idx])
