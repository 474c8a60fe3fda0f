"""Training: weighted hybrid loss on target variables with dynamic masking."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import denoiser
from .denoiser import Adam, DenoiserParams
from .diffusion import DiffusionSchedule, gaussian_forward, multinomial_forward_probs, multinomial_term, sample_categorical
from .masking import MaskPair, draw_masks
from .model import ConditionalTabDDPM, TrainConfig
from .preprocess import EncodedBatch, Preprocessor
from .schema import DataTable, TableSchema

log = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainingBatch:
    """One fully noised batch; holds everything the loss needs."""

    x_num: np.ndarray
    x_cat: np.ndarray
    masks: MaskPair
    t: np.ndarray
    eps: np.ndarray
    x_t_num: np.ndarray
    x_t_cat: np.ndarray

    def network_inputs(self, schema: TableSchema) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        num_obs = self.masks.mask_num > 0
        cat_obs = self.masks.expand_cat(schema) > 0
        noisy = np.concatenate([np.where(num_obs, 0.0, self.x_t_num), np.where(cat_obs, 0.0, self.x_t_cat)], axis=1)
        cond = np.concatenate([np.where(num_obs, self.x_num, 0.0), np.where(cat_obs, self.x_cat, 0.0)], axis=1)
        return noisy, cond, self.masks.bits


def make_training_batch(x_num: np.ndarray, x_cat: np.ndarray, masks: MaskPair, schema: TableSchema,
                        gauss: DiffusionSchedule, multi: DiffusionSchedule,
                        rng: np.random.Generator, t: np.ndarray | None = None) -> TrainingBatch:
    """Draw per-row timesteps and noise, then diffuse the rows forward."""
    B = x_num.shape[0]
    if t is None:
        t = rng.integers(1, gauss.T + 1, size=B)
    eps = rng.standard_normal(x_num.shape)
    x_t_num = gaussian_forward(x_num, t, eps, gauss)
    x_t_cat = np.zeros_like(x_cat)
    for off, k in zip(schema.cat_offsets, schema.cat_widths):
        probs = multinomial_forward_probs(x_cat[:, off:off + k], t, multi)
        x_t_cat[:, off:off + k] = sample_categorical(probs, rng)
    return TrainingBatch(x_num, x_cat, masks, np.asarray(t), eps, x_t_num, x_t_cat)


def loss_and_gradients(params: DenoiserParams, batch: TrainingBatch, schema: TableSchema,
                       multi: DiffusionSchedule, lambda_num: float = 1.0, lambda_cat: float = 1.0,
                       need_grad: bool = True, rng: np.random.Generator | None = None):
    """Weighted loss ``lambda_num * L_num + lambda_cat * sum_i L_i / C``.

    ``L_num`` is the MSE over masked numerical entries. ``L_i`` is the mean
    multinomial variational term over the rows where categorical feature
    ``i`` is masked (0 if none). Observed entries never reach the loss.

    Returns ``(total, parts, grads)``; ``grads`` is None without ``need_grad``.
    """
    noisy, cond, bits = batch.network_inputs(schema)
    out, cache = denoiser.forward(params, noisy, cond, bits, batch.t, rng=rng, keep_cache=need_grad)
    out = out.astype(np.float64)
    n_num = schema.n_num
    d_out = np.zeros_like(out)

    target_num = batch.masks.mask_num == 0
    n_t = int(target_num.sum())
    loss_num = 0.0
    if n_t:
        diff = np.where(target_num, out[:, :n_num] - batch.eps, 0.0)
        loss_num = float(np.sum(diff ** 2) / n_t)
        d_out[:, :n_num] = lambda_num * 2.0 * diff / n_t

    C = len(schema.cat_widths)
    loss_cat = 0.0
    per_feature = []
    for i, (off, k) in enumerate(zip(schema.cat_offsets, schema.cat_widths)):
        rows = np.flatnonzero(batch.masks.mask_cat[:, i] == 0)
        if len(rows) == 0:
            per_feature.append(0.0)
            continue
        sl = slice(n_num + off, n_num + off + k)
        term, grad = multinomial_term(batch.x_cat[rows, off:off + k], batch.x_t_cat[rows, off:off + k],
                                      out[rows, sl], batch.t[rows], multi)
        li = float(term.mean())
        per_feature.append(li)
        loss_cat += li / C
        d_out[rows, sl] = lambda_cat * grad / (len(rows) * C)

    total = lambda_num * loss_num + lambda_cat * loss_cat
    parts = {"num": loss_num, "cat": loss_cat, "per_feature": per_feature, "has_num_targets": bool(n_t)}
    grads = denoiser.backward(params, cache, d_out) if need_grad else None
    return total, parts, grads


def training_step(params: DenoiserParams, opt: Adam, batch: TrainingBatch, schema: TableSchema,
                  multi: DiffusionSchedule, lambda_cat: float, step: int,
                  rng: np.random.Generator | None = None) -> tuple[float, dict]:
    """One optimizer update. Raises TrainingError on a non-finite loss."""
    total, parts, grads = loss_and_gradients(params, batch, schema, multi, 1.0, lambda_cat, rng=rng)
    norms = [float(np.linalg.norm(g)) for g in grads]
    if not np.isfinite(total) or not all(np.isfinite(norms)):
        hist = np.bincount(np.asarray(batch.t) * 10 // (multi.T + 1), minlength=10).tolist()
        raise TrainingError(
            f"non-finite loss at step {step}: loss={total!r}, t decile histogram={hist}, "
            f"grad norms={dict(zip(params.names(), norms))}"
        )
    opt.step(params.arrays(), grads)
    return total, parts


def _validation_task(model: ConditionalTabDDPM, val: DataTable, rng: np.random.Generator):
    """Fixed validation rows and masks, drawn once so every evaluation scores
    the same imputation problem."""
    schema = model.schema
    n = min(model.config.val_rows, len(val))
    rows = np.sort(rng.choice(len(val), size=n, replace=False))
    truth = val.take(rows)
    masks = draw_masks(n, schema, model.config.f_mask_num, model.config.f_mask_cat, rng)
    masked = truth.copy()
    for j, col in enumerate(schema.numerical):
        masked.frame.loc[masks.mask_num[:, j] == 0, col.name] = np.nan
    for j, col in enumerate(schema.categorical):
        masked.frame.loc[masks.mask_cat[:, j] == 0, col.name] = None
    return truth, masked, masks, int(rng.integers(2**31))


def _validation_score(model: ConditionalTabDDPM, task) -> dict:
    """Reconstruction error on the fixed validation task."""
    from .sample import impute

    schema = model.schema
    truth, masked, masks, seed = task
    out = impute(model, masked, 1, seed=seed)[0].table
    sq, hits, total = [], 0, 0
    for j, col in enumerate(schema.numerical):
        sel = masks.mask_num[:, j] == 0
        if sel.any():
            q = model.preprocessor.quantiles[col.name]
            span = q.values[-1] - q.values[0]
            d = (out.frame[col.name].to_numpy()[sel] - truth.frame[col.name].to_numpy()[sel]) / span
            sq.extend((d ** 2).tolist())
    for j, col in enumerate(schema.categorical):
        sel = masks.mask_cat[:, j] == 0
        if sel.any():
            hits += int((out.frame[col.name].to_numpy()[sel] == truth.frame[col.name].to_numpy()[sel]).sum())
            total += int(sel.sum())
    mse = float(np.mean(sq)) if sq else 0.0
    acc = hits / total if total else 1.0
    if not np.isfinite(mse):
        raise TrainingError("validation metric is NaN")
    return {"val_mse": mse, "val_accuracy": acc, "val_score": mse + (1.0 - acc)}


def train(train_table: DataTable, config: TrainConfig, val_table: DataTable | None = None,
          preprocessor: Preprocessor | None = None,
          callback: Callable[[int, float, dict], None] | None = None) -> ConditionalTabDDPM:
    """Train a conditional imputer. Fully determined by ``config.seed``.

    With a validation table, reconstruction metrics are tracked every
    ``eval_every`` steps and (with ``select_best``) the parameters with the
    best ``mse + (1 - accuracy)`` are kept.
    """
    schema = train_table.schema
    pre = preprocessor or Preprocessor.fit(train_table)
    enc: EncodedBatch = pre.transform(train_table)
    dtype = np.float32 if config.dtype == "float32" else np.float64
    seeds = np.random.SeedSequence(config.seed).spawn(4)
    init_seed = int(seeds[0].generate_state(1)[0])
    params = denoiser.init(schema, config.hidden, init_seed, config.emb_dim, config.dropout, dtype)
    model = ConditionalTabDDPM(pre, params, config)
    gauss, multi = model.gaussian, model.multinomial
    data_rng, noise_rng, drop_rng, val_rng = (np.random.default_rng(s) for s in seeds)
    opt = Adam(config.lr)
    n = len(enc)
    bs = min(config.batch_size, n)
    order = data_rng.permutation(n)
    cursor = 0
    ema = params.copy() if config.ema > 0 else None
    task = _validation_task(model, val_table, val_rng) if val_table is not None and len(val_table) else None
    best = None
    history = []
    running = []
    for step in range(config.steps):
        if cursor + bs > n:
            order = data_rng.permutation(n)
            cursor = 0
        rows = order[cursor:cursor + bs]
        cursor += bs
        masks = draw_masks(bs, schema, config.f_mask_num, config.f_mask_cat, data_rng)
        batch = make_training_batch(enc.x_num[rows], enc.x_cat[rows], masks, schema, gauss, multi, noise_rng)
        lam = config.lambda_cat_at(step)
        loss, parts = training_step(params, opt, batch, schema, multi, lam, step,
                                    rng=drop_rng if config.dropout > 0 else None)
        running.append(loss)
        if ema is not None:
            for e, a in zip(ema.arrays(), params.arrays()):
                e *= config.ema
                e += (1.0 - config.ema) * a
        if callback is not None:
            callback(step, loss, parts)
        last = step == config.steps - 1
        if (step + 1) % config.eval_every == 0 or last:
            entry = {"step": step + 1, "loss": float(np.mean(running)), "lambda_cat": lam}
            running = []
            if task is not None:
                scored = params if ema is None else ema
                model.params = scored
                entry.update(_validation_score(model, task))
                model.params = params
                if config.select_best and (best is None or entry["val_score"] < best[0]):
                    best = (entry["val_score"], scored.copy(), step + 1)
            history.append(entry)
            log.info("step %d %s", step + 1, {k: round(v, 5) for k, v in entry.items() if k != "step"})
    if ema is not None:
        model.params = ema
    if best is not None:
        model.params = best[1]
        history.append({"selected_step": best[2]})
    model.history = history
    return model
