"""Conditional-generation and reconstruction evaluation.

Every routine takes an *imputer*: a callable ``(table_with_missing, seed) ->
completed_table``. :func:`model_imputer` wraps a trained model; tests plug
in stubs (perfect predictors, resamplers of the truth, degenerate samplers).
"""

from __future__ import annotations

import json
import logging
import math
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np
import pandas as pd

from .schema import DataTable, TableSchema

log = logging.getLogger(__name__)

Imputer = Callable[[DataTable, int], DataTable]

MAX_GROUP = 1000
MIN_GROUP = 30
CELL_CAP = 10_000
NUM_BINS = 20
COLLAPSE_TOP = 0.99
COLLAPSE_TRUE_MAX = 0.9


def model_imputer(model) -> Imputer:
    from .sample import impute

    def run(table: DataTable, seed: int) -> DataTable:
        return impute(model, table, 1, seed)[0].table

    return run


# metrics --------------------------------------------------------------------

def js_distance(p, q) -> float:
    """Jensen-Shannon distance (base 2, so in [0, 1]) between two count or
    probability vectors over the same support."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ValueError("distributions must share a support")
    if p.sum() <= 0 or q.sum() <= 0:
        raise ValueError("empty distribution")
    p = p / p.sum()
    q = q / q.sum()
    m = 0.5 * (p + q)

    def kl(a):
        nz = a > 0
        return float(np.sum(a[nz] * np.log2(a[nz] / m[nz])))

    div = 0.5 * kl(p) + 0.5 * kl(q)
    return math.sqrt(max(div, 0.0))


def category_counts(true_values: Sequence, gen_values: Sequence) -> tuple[list, np.ndarray, np.ndarray]:
    """Counts over the union of observed categories (sorted for stability)."""
    universe = sorted(set(true_values) | set(gen_values), key=str)
    ct, cg = Counter(true_values), Counter(gen_values)
    return universe, np.array([ct[u] for u in universe], float), np.array([cg[u] for u in universe], float)


def js_distance_samples(true_values: Sequence, gen_values: Sequence) -> float:
    if len(true_values) == 0 or len(gen_values) == 0:
        raise ValueError("empty sample set")
    _, a, b = category_counts(list(true_values), list(gen_values))
    return js_distance(a, b)


def wasserstein_1d(a, b) -> float:
    """W1 between two empirical distributions (area between their CDFs)."""
    a = np.sort(np.asarray(a, dtype=np.float64))
    b = np.sort(np.asarray(b, dtype=np.float64))
    if len(a) == 0 or len(b) == 0:
        raise ValueError("empty sample set")
    grid = np.concatenate([a, b])
    grid.sort(kind="mergesort")
    widths = np.diff(grid)
    fa = np.searchsorted(a, grid[:-1], side="right") / len(a)
    fb = np.searchsorted(b, grid[:-1], side="right") / len(b)
    return float(np.sum(np.abs(fa - fb) * widths))


def wasserstein_1d_normalized(true_values, gen_values) -> tuple[float, bool]:
    """W1 divided by the range of the true samples.

    Returns ``(distance, normalized)``; with zero true range the raw W1 is
    returned and ``normalized`` is False.
    """
    w = wasserstein_1d(true_values, gen_values)
    span = float(np.max(true_values) - np.min(true_values))
    if span <= 0:
        return w, False
    return w / span, True


# dependency groups ---------------------------------------------------------

@dataclass
class GroupResult:
    dependency_values: dict[str, Any]
    n_train_matched: int
    n_test_matched: int
    n_samples: int
    distance: float | None
    included: bool
    random_baseline: float | None = None
    normalized: bool = True
    histogram: dict[str, Any] = field(default_factory=dict)


def _group_keys(frame: pd.DataFrame, deps: Sequence[str]) -> list[tuple]:
    return list(frame[list(deps)].itertuples(index=False, name=None))


def _index_groups(keys: list[tuple]) -> dict[tuple, np.ndarray]:
    out: dict[tuple, list[int]] = {}
    for i, k in enumerate(keys):
        out.setdefault(k, []).append(i)
    return {k: np.asarray(v) for k, v in out.items()}


def _balanced_pick(rows: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` rows drawn from ``rows``, using each as evenly as possible."""
    reps, rem = divmod(n, len(rows))
    extra = rng.choice(rows, size=rem, replace=False) if rem else np.zeros(0, dtype=rows.dtype)
    return np.concatenate([np.tile(rows, reps), extra])


def _mask_and_impute(imputer: Imputer, test: DataTable, rows: np.ndarray, targets: Sequence[str],
                     seed: int) -> DataTable:
    cond = test.take(rows)
    for t in targets:
        col = test.schema.column(t)
        cond.frame[t] = None if col.is_categorical else np.nan
    return imputer(cond, seed)


def _dependencies(schema: TableSchema, targets: Sequence[str]) -> list[str]:
    deps: list[str] = []
    for t in targets:
        for d in schema.column(t).dependencies:
            if d not in targets and d not in deps:
                deps.append(d)
    return deps


def _histogram(col, true_vals, gen_vals, span=None) -> dict[str, Any]:
    if col.is_categorical:
        universe, a, b = category_counts(list(true_vals), list(gen_vals))
        return {"categories": universe, "true": a.tolist(), "generated": b.tolist()}
    lo, hi = (float(np.min(true_vals)), float(np.max(true_vals))) if span is None else span
    if hi <= lo:
        hi = lo + 1.0
    edges = np.linspace(lo, hi, NUM_BINS + 1)
    a, _ = np.histogram(np.clip(true_vals, lo, hi), edges)
    b, _ = np.histogram(np.clip(gen_vals, lo, hi), edges)
    return {"edges": edges.tolist(), "true": a.tolist(), "generated": b.tolist()}


@dataclass
class UnivariateResult:
    target: str
    kind: str
    metric: str
    average: float | None
    random_baseline: float | None
    groups: list[GroupResult]

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def univariate_eval(imputer: Imputer, train: DataTable, test: DataTable, target: str, seed: int = 0,
                    max_group: int = MAX_GROUP, min_group: int = MIN_GROUP) -> UnivariateResult:
    """Compare true and generated conditional distributions of one column.

    Rows are grouped by the target's documented dependencies. For each group
    present in ``test``, up to ``max_group`` matched training values form the
    true distribution; the generated distribution has as many imputations,
    drawn on the group's test rows (target masked, everything else
    observed). Groups with fewer than ``min_group`` matched training rows
    are reported but left out of the average.
    """
    schema = train.schema
    col = schema.column(target)
    deps = _dependencies(schema, [target])
    rng = np.random.default_rng(seed)
    train_vals = train.frame[target].to_numpy()

    plans = []  # (dep values, train rows chosen, test rows for generation, n_train, n_test)
    if not deps:
        n = min(max_group, len(train), len(test)) if len(test) else 0
        tr = rng.choice(len(train), size=min(max_group, len(train)), replace=False)
        te = _balanced_pick(np.arange(len(test)), len(tr), rng) if len(test) else np.zeros(0, int)
        plans.append(({}, tr, te, len(train), len(test)))
        del n
    else:
        tr_groups = _index_groups(_group_keys(train.frame, deps))
        te_groups = _index_groups(_group_keys(test.frame, deps))
        for key in sorted(te_groups, key=lambda k: tuple(map(str, k))):
            te_rows = te_groups[key]
            dep_values = dict(zip(deps, (v.item() if hasattr(v, "item") else v for v in key)))
            matched = tr_groups.get(key)
            if matched is None:
                log.info("%s: no training rows match %s; group skipped", target, dep_values)
                plans.append((dep_values, np.zeros(0, int), np.zeros(0, int), 0, len(te_rows)))
                continue
            tr = matched if len(matched) <= max_group else rng.choice(matched, size=max_group, replace=False)
            te = _balanced_pick(te_rows, len(tr), rng)
            plans.append((dep_values, tr, te, len(matched), len(te_rows)))

    all_te = np.concatenate([p[2] for p in plans]) if plans else np.zeros(0, int)
    generated = None
    if len(all_te):
        generated = _mask_and_impute(imputer, test, all_te, [target], int(rng.integers(2**31)))
    gen_all = generated.frame[target].to_numpy() if generated is not None else np.zeros(0)

    groups = []
    cursor = 0
    for dep_values, tr, te, n_tr, n_te in plans:
        if len(tr) == 0 or len(te) == 0:
            groups.append(GroupResult(dep_values, n_tr, n_te, 0, None, False))
            continue
        true_vals = train_vals[tr]
        gen_vals = gen_all[cursor:cursor + len(te)]
        cursor += len(te)
        included = n_tr >= min_group
        if col.is_categorical:
            dist = js_distance_samples(list(true_vals), list(gen_vals))
            rand = rng.choice(np.asarray(col.categories, dtype=object), size=len(true_vals))
            baseline = js_distance_samples(list(true_vals), list(rand))
            normalized = True
        else:
            dist, normalized = wasserstein_1d_normalized(true_vals.astype(float), gen_vals.astype(float))
            baseline = None
        groups.append(GroupResult(dep_values, n_tr, n_te, len(te), dist, included, baseline, normalized,
                                  _histogram(col, true_vals, gen_vals)))
    used = [g for g in groups if g.included and g.distance is not None]
    avg = float(np.mean([g.distance for g in used])) if used else None
    rand_avg = float(np.mean([g.random_baseline for g in used])) if used and col.is_categorical else None
    metric = "js_distance" if col.is_categorical else "normalized_wasserstein"
    return UnivariateResult(target, col.kind, metric, avg, rand_avg, groups)


# bivariate ---------------------------------------------------------------------

@dataclass
class BivariateGroup:
    dependency_values: dict[str, Any]
    n_train_matched: int
    n_samples: int
    included: bool
    joint_distance: float | None
    marginal_distances: list[float] | None
    axes: list[list] = field(default_factory=list)
    true_joint: list[list[float]] = field(default_factory=list)
    error_grid: list[list[float]] = field(default_factory=list)


@dataclass
class BivariateResult:
    targets: tuple[str, str]
    joint_distance: float | None
    marginal_distances: list[float] | None
    groups: list[BivariateGroup]

    def best_group(self) -> BivariateGroup | None:
        used = [g for g in self.groups if g.included and g.joint_distance is not None]
        return min(used, key=lambda g: g.joint_distance) if used else None

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def _codes_2d(col, true_vals, gen_vals):
    if col.is_categorical:
        axis = list(col.categories)
        lookup = {c: i for i, c in enumerate(axis)}
        return axis, np.array([lookup[v] for v in true_vals]), np.array([lookup[v] for v in gen_vals])
    lo, hi = float(np.min(true_vals)), float(np.max(true_vals))
    if hi <= lo:
        hi = lo + 1.0
    edges = np.linspace(lo, hi, NUM_BINS + 1)

    def binned(v):
        return np.clip(np.searchsorted(edges, np.asarray(v, float), side="right") - 1, 0, NUM_BINS - 1)

    return edges.tolist(), binned(true_vals), binned(gen_vals)


def bivariate_eval(imputer: Imputer, train: DataTable, test: DataTable, targets: tuple[str, str],
                   seed: int = 0, max_group: int = MAX_GROUP, min_group: int = MIN_GROUP,
                   cell_cap: int = CELL_CAP) -> BivariateResult:
    """Joint conditional comparison for two simultaneously imputed columns.

    Both columns must be categorical, or both numerical (binned into
    equal-width bins over each group's true range).
    """
    schema = train.schema
    a, b = (schema.column(t) for t in targets)
    if a.is_categorical != b.is_categorical:
        raise ValueError("bivariate evaluation needs two categorical or two numerical columns")
    cells = (len(a.categories) * len(b.categories)) if a.is_categorical else NUM_BINS * NUM_BINS
    if cells > cell_cap:
        raise ValueError(f"joint space of {cells} cells exceeds the cap of {cell_cap}")
    deps = _dependencies(schema, targets)
    rng = np.random.default_rng(seed)
    if deps:
        tr_groups = _index_groups(_group_keys(train.frame, deps))
        te_groups = _index_groups(_group_keys(test.frame, deps))
        keys = sorted(te_groups, key=lambda k: tuple(map(str, k)))
    else:
        tr_groups = {(): np.arange(len(train))}
        te_groups = {(): np.arange(len(test))}
        keys = [()]
    plans = []
    for key in keys:
        matched = tr_groups.get(key)
        dep_values = dict(zip(deps, (v.item() if hasattr(v, "item") else v for v in key)))
        if matched is None:
            plans.append((dep_values, np.zeros(0, int), np.zeros(0, int), 0))
            continue
        tr = matched if len(matched) <= max_group else rng.choice(matched, size=max_group, replace=False)
        plans.append((dep_values, tr, _balanced_pick(te_groups[key], len(tr), rng), len(matched)))
    all_te = np.concatenate([p[2] for p in plans])
    gen = _mask_and_impute(imputer, test, all_te, list(targets), int(rng.integers(2**31))) if len(all_te) else None

    groups = []
    cursor = 0
    for dep_values, tr, te, n_tr in plans:
        if len(tr) == 0:
            groups.append(BivariateGroup(dep_values, 0, 0, False, None, None))
            continue
        g_rows = slice(cursor, cursor + len(te))
        cursor += len(te)
        tv = [train.frame[t].to_numpy()[tr] for t in targets]
        gv = [gen.frame[t].to_numpy()[g_rows] for t in targets]
        ax0, t0, g0 = _codes_2d(a, tv[0], gv[0])
        ax1, t1, g1 = _codes_2d(b, tv[1], gv[1])
        shape = (len(ax0) if a.is_categorical else NUM_BINS, len(ax1) if b.is_categorical else NUM_BINS)
        tj = np.zeros(shape)
        gj = np.zeros(shape)
        np.add.at(tj, (t0, t1), 1.0)
        np.add.at(gj, (g0, g1), 1.0)
        tj /= tj.sum()
        gj /= gj.sum()
        joint = js_distance(tj.ravel(), gj.ravel())
        marg = [js_distance(tj.sum(axis=1), gj.sum(axis=1)), js_distance(tj.sum(axis=0), gj.sum(axis=0))]
        groups.append(BivariateGroup(dep_values, n_tr, len(te), n_tr >= min_group, joint, marg,
                                     [ax0, ax1], tj.tolist(), (gj - tj).tolist()))
    used = [g for g in groups if g.included]
    joint = float(np.mean([g.joint_distance for g in used])) if used else None
    marg = np.mean([g.marginal_distances for g in used], axis=0).tolist() if used else None
    return BivariateResult(tuple(targets), joint, marg, groups)


# reconstruction --------------------------------------------------------------

@dataclass
class ReconstructionFeature:
    column: str
    kind: str
    model: float  # normalized RMSE (numerical) or accuracy (categorical)
    mean_or_mode_baseline: float
    random_baseline: float | None
    n_rows: int


def score_reconstruction(truth, pred, kind: str, span: float | None = None) -> float:
    """Normalized RMSE for numerical columns, accuracy for categorical ones."""
    truth = np.asarray(truth)
    pred = np.asarray(pred)
    if kind == "categorical":
        return float(np.mean(truth == pred))
    d = pred.astype(float) - truth.astype(float)
    rmse = float(np.sqrt(np.mean(d ** 2)))
    if span is None:
        span = float(np.max(truth) - np.min(truth))
    return rmse / span if span > 0 else rmse


def dependency_baseline(train: DataTable, test: DataTable, column: str) -> np.ndarray:
    """Per test row: mean (numerical) or mode (categorical) of the target over
    training rows sharing the row's dependency values. Rows with no match
    fall back to the whole training column."""
    schema = train.schema
    col = schema.column(column)
    deps = list(col.dependencies)
    vals = train.frame[column].to_numpy()

    def summarize(v):
        if col.is_categorical:
            counts = Counter(v)
            # ties go to the lowest ordinal
            return max(col.categories, key=lambda c: (counts.get(c, 0), -col.categories.index(c)))
        return float(np.mean(v.astype(float)))

    overall = summarize(vals)
    if not deps:
        return np.array([overall] * len(test), dtype=object if col.is_categorical else float)
    tr_groups = _index_groups(_group_keys(train.frame, deps))
    cache = {k: summarize(vals[idx]) for k, idx in tr_groups.items()}
    keys = _group_keys(test.frame, deps)
    return np.array([cache.get(k, overall) for k in keys], dtype=object if col.is_categorical else float)


@dataclass
class ReconstructionResult:
    features: list[ReconstructionFeature]

    def average(self, kind: str, field_name: str = "model") -> float | None:
        vals = [getattr(f, field_name) for f in self.features if f.kind == kind]
        vals = [v for v in vals if v is not None]
        return float(np.mean(vals)) if vals else None

    def feature(self, name: str) -> ReconstructionFeature:
        return next(f for f in self.features if f.column == name)

    def to_dict(self) -> dict[str, Any]:
        return {
            "features": [asdict(f) for f in self.features],
            "average_rmse": self.average("numerical"),
            "average_accuracy": self.average("categorical"),
            "average_mean_baseline_rmse": self.average("numerical", "mean_or_mode_baseline"),
            "average_mode_baseline_accuracy": self.average("categorical", "mean_or_mode_baseline"),
            "average_random_baseline_accuracy": self.average("categorical", "random_baseline"),
        }


def reconstruction_eval(imputer: Imputer, train: DataTable, test: DataTable,
                        columns: Sequence[str] | None = None, seed: int = 0,
                        max_rows: int | None = None) -> ReconstructionResult:
    """Mask each imputable column alone, impute once per row, score.

    ``max_rows`` limits the number of test rows used (a random subset).
    """
    schema = train.schema
    rng = np.random.default_rng(seed)
    if max_rows is not None and max_rows < len(test):
        test = test.take(np.sort(rng.choice(len(test), size=max_rows, replace=False)))
    if columns is None:
        columns = [c.name for c in schema.columns if not c.always_observed]
    out = []
    rows = np.arange(len(test))
    for name in columns:
        col = schema.column(name)
        truth = test.frame[name].to_numpy()
        pred = _mask_and_impute(imputer, test, rows, [name], int(rng.integers(2**31))).frame[name].to_numpy()
        base = dependency_baseline(train, test, name)
        if col.is_categorical:
            rand = rng.choice(np.asarray(col.categories, dtype=object), size=len(truth))
            out.append(ReconstructionFeature(name, col.kind, score_reconstruction(truth, pred, col.kind),
                                             score_reconstruction(truth, base, col.kind),
                                             score_reconstruction(truth, rand, col.kind), len(truth)))
        else:
            span = float(np.max(truth) - np.min(truth))
            out.append(ReconstructionFeature(name, col.kind, score_reconstruction(truth, pred, col.kind, span),
                                             score_reconstruction(truth, base, col.kind, span), None, len(truth)))
    return ReconstructionResult(out)


# mode-collapse diagnostic ---------------------------------------------------

@dataclass
class DiversityResult:
    target: str
    counts: dict[str, int]
    top_frequency: float
    true_top_probability: float | None
    collapsed: bool


def diversity_diagnostic(imputer: Imputer, condition_row: DataTable, target: str, n_samples: int = 1000,
                         seed: int = 0, true_distribution: dict[str, float] | None = None) -> DiversityResult:
    """Sample one condition row repeatedly and flag conditional mode collapse.

    Collapse means the top category takes at least 99% of samples while the
    true conditional puts at most 0.9 on its top category.
    """
    if n_samples < 100:
        raise ValueError("n_samples must be >= 100")
    if len(condition_row) != 1:
        raise ValueError("condition_row must hold exactly one row")
    col = condition_row.schema.column(target)
    if not col.is_categorical:
        raise ValueError("diversity diagnostic needs a categorical target")
    gen = _mask_and_impute(imputer, condition_row, np.zeros(n_samples, dtype=np.int64), [target], seed)
    counts = Counter(gen.frame[target].tolist())
    top = max(counts.values()) / n_samples
    true_top = max(true_distribution.values()) if true_distribution else None
    collapsed = top >= COLLAPSE_TOP and true_top is not None and true_top <= COLLAPSE_TRUE_MAX
    return DiversityResult(target, {c: counts.get(c, 0) for c in col.categories}, float(top), true_top,
                           bool(collapsed))


def matched_distribution(train: DataTable, condition_row: DataTable, target: str) -> dict[str, float] | None:
    """Empirical p(target | dependencies) from training rows matching the row."""
    deps = list(train.schema.column(target).dependencies)
    frame = train.frame
    sel = np.ones(len(frame), dtype=bool)
    for d in deps:
        sel &= (frame[d] == condition_row.frame[d].iloc[0]).to_numpy()
    if not sel.any():
        return None
    counts = Counter(frame[target].to_numpy()[sel])
    n = sum(counts.values())
    return {k: v / n for k, v in counts.items()}


# report output ------------------------------------------------------------

def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def write_report(report: dict[str, Any], outdir: str | Path, name: str = "report.json") -> Path:
    """Write the report as JSON plus one histogram CSV per evaluated group."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    hist_dir = outdir / "histograms"
    for res in report.get("univariate", {}).values():
        for i, g in enumerate(res.get("groups", [])):
            h = g.get("histogram")
            if not h:
                continue
            hist_dir.mkdir(exist_ok=True)
            labels = h.get("categories") or [f"{lo!r}..{hi!r}" for lo, hi in zip(h["edges"][:-1], h["edges"][1:])]
            pd.DataFrame({"bin": labels, "true": h["true"], "generated": h["generated"]}).to_csv(
                hist_dir / f"{res['target']}_group{i:03d}.csv", index=False, lineterminator="\n")
    path = outdir / name
    path.write_text(json.dumps(_jsonable(report), indent=1, sort_keys=True), encoding="utf-8")
    return path
