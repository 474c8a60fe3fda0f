"""Imputer stubs with known behaviour, used in place of a trained model."""

import itertools

import numpy as np

from condtab import oracle as O
from condtab.evaluation import _group_keys, _index_groups
from condtab.schema import DataTable


def exact_sampler(spec, seed_offset=0):
    """Fill missing categorical cells by sampling the exact joint posterior."""

    def run(table: DataTable, seed: int) -> DataTable:
        rng = np.random.default_rng(seed + seed_offset)
        frame = table.frame.copy()
        missing = table.missing_mask()
        names = table.schema.names
        patterns = {}
        for i, row in enumerate(missing):
            patterns.setdefault(tuple(np.flatnonzero(row)), []).append(i)
        for cols, rows in patterns.items():
            if not cols:
                continue
            targets = [names[j] for j in cols]
            cats = [spec.column(t).categories for t in targets]
            combos = list(itertools.product(*cats))
            sub = frame.iloc[rows].reset_index(drop=True)
            logs = []
            for combo in combos:
                for t, v in zip(targets, combo):
                    sub[t] = v
                logs.append(O.log_joint(spec, sub))
            lp = np.stack(logs, axis=1)
            p = np.exp(lp - lp.max(axis=1, keepdims=True))
            p /= p.sum(axis=1, keepdims=True)
            u = rng.random((len(rows), 1))
            pick = np.minimum((u > np.cumsum(p, axis=1)).sum(axis=1), len(combos) - 1)
            for k, t in enumerate(targets):
                col = frame[t].to_numpy(copy=True)
                col[rows] = [combos[c][k] for c in pick]
                frame[t] = col
        return DataTable(table.schema, frame)

    return run


def matched_resampler(train: DataTable):
    """Fill each missing cell with the value of a random training row that
    shares the row's dependency values (whole training column if none)."""

    def run(table: DataTable, seed: int) -> DataTable:
        rng = np.random.default_rng(seed)
        frame = table.frame.copy()
        missing = table.missing_mask()
        for j, col in enumerate(table.schema.columns):
            rows = np.flatnonzero(missing[:, j])
            if not len(rows):
                continue
            values = train.frame[col.name].to_numpy()
            deps = list(col.dependencies)
            out = frame[col.name].to_numpy(copy=True)
            if not deps:
                out[rows] = values[rng.integers(0, len(values), len(rows))]
            else:
                groups = _index_groups(_group_keys(train.frame, deps))
                keys = _group_keys(frame.iloc[rows], deps)
                for r, k in zip(rows, keys):
                    pool = groups[k]
                    out[r] = values[pool[rng.integers(len(pool))]]
            frame[col.name] = out
        return DataTable(table.schema, frame)

    return run


def constant_imputer(value_by_column):
    """Always write the same value into missing cells of each column."""

    def run(table: DataTable, seed: int) -> DataTable:
        frame = table.frame.copy()
        missing = table.missing_mask()
        for j, name in enumerate(table.schema.names):
            rows = np.flatnonzero(missing[:, j])
            if len(rows):
                out = frame[name].to_numpy(copy=True)
                out[rows] = value_by_column[name]
                frame[name] = out
        return DataTable(table.schema, frame)

    return run


def uniform_imputer():
    """Uniformly random categories for missing categorical cells."""

    def run(table: DataTable, seed: int) -> DataTable:
        rng = np.random.default_rng(seed)
        frame = table.frame.copy()
        missing = table.missing_mask()
        for j, col in enumerate(table.schema.columns):
            rows = np.flatnonzero(missing[:, j])
            if len(rows) and col.is_categorical:
                out = frame[col.name].to_numpy(copy=True)
                out[rows] = rng.choice(np.asarray(col.categories, dtype=object), size=len(rows))
                frame[col.name] = out
        return DataTable(table.schema, frame)

    return run


def parent_mode_imputer(spec):
    """Predict argmax p(column | parents) exactly (the Bayes predictor)."""

    def run(table: DataTable, seed: int) -> DataTable:
        frame = table.frame.copy()
        missing = table.missing_mask()
        for j, col in enumerate(table.schema.columns):
            rows = np.flatnonzero(missing[:, j])
            if not len(rows) or not col.is_categorical:
                continue
            oc = spec.column(col.name)
            out = frame[col.name].to_numpy(copy=True)
            cache = {}
            for r, key in zip(rows, _group_keys(frame.iloc[rows], list(oc.parents))):
                if key not in cache:
                    probs = O.exact_conditional(spec, col.name, dict(zip(oc.parents, key))).probs
                    cache[key] = oc.categories[int(np.argmax(probs))]
                out[r] = cache[key]
            frame[col.name] = out
        return DataTable(table.schema, frame)

    return run
