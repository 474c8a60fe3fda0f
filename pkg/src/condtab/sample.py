"""Conditional reverse diffusion: fill MISSING cells given the observed ones."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import denoiser
from .diffusion import gaussian_reverse_mean, multinomial_posterior, sample_categorical, softmax
from .masking import MaskPair, mask_from_missing
from .model import ConditionalTabDDPM
from .schema import DataError, DataTable

CHUNK_ROWS = 4096


@dataclass
class ImputationResult:
    table: DataTable
    generated: np.ndarray  # (rows, columns) bool, True where the cell was generated
    scenario: int


def _reverse_chunk(model: ConditionalTabDDPM, x_num0: np.ndarray, x_cat0: np.ndarray,
                   masks: MaskPair, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    schema = model.schema
    params = model.params
    g, m = model.gaussian, model.multinomial
    widths, offsets = schema.cat_widths, schema.cat_offsets
    B = x_num0.shape[0]
    num_obs = masks.mask_num > 0
    cat_obs = masks.expand_cat(schema) > 0
    x_cond = np.concatenate([np.where(num_obs, x_num0, 0.0), np.where(cat_obs, x_cat0, 0.0)], axis=1)
    bits = masks.bits

    x_num = rng.standard_normal(x_num0.shape)
    x_cat = np.zeros_like(x_cat0)
    for off, k in zip(offsets, widths):
        x_cat[:, off:off + k] = sample_categorical(np.full((B, k), 1.0 / k), rng)

    n_num = schema.n_num
    for t in range(model.config.T, 0, -1):
        noisy = np.concatenate([np.where(num_obs, 0.0, x_num), np.where(cat_obs, 0.0, x_cat)], axis=1)
        out, _ = denoiser.forward(params, noisy, x_cond, bits, t)
        out = out.astype(np.float64)
        eps_pred = out[:, :n_num]
        mu = gaussian_reverse_mean(x_num, eps_pred, t, g)
        if t > 1:
            x_num = mu + g.posterior_sigma[t - 1] * rng.standard_normal(mu.shape)
        else:
            x_num = mu
        new_cat = np.empty_like(x_cat)
        for off, k in zip(offsets, widths):
            probs = softmax(out[:, n_num + off:n_num + off + k])
            if t > 1:
                post = multinomial_posterior(x_cat[:, off:off + k], probs, t, m)
                new_cat[:, off:off + k] = sample_categorical(post, rng)
            elif model.config.categorical_decode == "argmax":
                new_cat[:, off:off + k] = np.eye(k)[np.argmax(probs, axis=1)]
            else:
                new_cat[:, off:off + k] = sample_categorical(probs, rng)
        x_cat = new_cat
    return np.where(num_obs, x_num0, x_num), np.where(cat_obs, x_cat0, x_cat)


def impute(model: ConditionalTabDDPM, table: DataTable, n_scenarios: int = 1,
           seed: int = 0) -> list[ImputationResult]:
    """Impute every MISSING cell of ``table``, ``n_scenarios`` times.

    Scenario ``s`` uses its own child seed of ``seed``, so scenario draws are
    independent and reproducible. Observed cells are copied from the input.
    """
    if table.schema.digest() != model.schema.digest():
        raise DataError("table schema does not match the checkpoint schema")
    if n_scenarios < 1:
        raise ValueError("n_scenarios must be >= 1")
    masks = mask_from_missing(table)
    missing = table.missing_mask()
    todo = np.flatnonzero(missing.any(axis=1))
    enc = model.preprocessor.transform(table, allow_missing=True) if len(todo) else None
    results = []
    children = np.random.SeedSequence(seed).spawn(n_scenarios)
    for s, child in enumerate(children):
        rng = np.random.default_rng(child)
        frame = table.frame.copy()
        if len(todo):
            filled_num = []
            filled_cat = []
            for start in range(0, len(todo), CHUNK_ROWS):
                rows = todo[start:start + CHUNK_ROWS]
                sub = MaskPair(masks.mask_num[rows], masks.mask_cat[rows])
                xn, xc = _reverse_chunk(model, enc.x_num[rows], enc.x_cat[rows], sub, rng)
                filled_num.append(xn)
                filled_cat.append(xc)
            decoded = model.preprocessor.inverse_transform(np.concatenate(filled_num), np.concatenate(filled_cat))
            for j, name in enumerate(table.schema.names):
                col_missing = missing[todo, j]
                if not col_missing.any():
                    continue
                target_rows = todo[col_missing]
                values = decoded.frame[name].to_numpy()[col_missing]
                col = frame[name].to_numpy(copy=True)
                col[target_rows] = values
                frame[name] = col
        results.append(ImputationResult(DataTable(table.schema, frame), missing.copy(), s))
    return results
