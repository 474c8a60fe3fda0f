"""Synthetic building-stock generator with exactly known conditionals.

A spec is a DAG of columns. Categorical columns carry a root probability
vector or a table keyed by parent values; numerical columns are either a
root mixture of Gaussians or a conditional linear-Gaussian rule
``base + sum(effects) + sum(slope * parent) + N(0, std^2)``. A numerical
root whose components all have ``std == 0`` is discrete (e.g. a region
centroid) and may parent categorical columns.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np
import pandas as pd
import yaml
from scipy.special import logsumexp

from .schema import CATEGORICAL, NUMERICAL, ColumnSpec, DataTable, TableSchema

MAX_ENUMERATION = 200_000
_LOG2PI = math.log(2 * math.pi)


class OracleSpecError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass
class OracleColumn:
    name: str
    kind: str
    categories: tuple[str, ...] = ()
    always_observed: bool = False
    parents: tuple[str, ...] = ()
    dependencies: tuple[str, ...] | None = None  # documented deps; defaults to parents
    probs: np.ndarray | None = None  # categorical root
    table: np.ndarray | None = None  # categorical conditional, indexed by parent codes
    mixture: list[tuple[float, float, float]] | None = None  # numerical root
    base: float = 0.0
    effects: dict[str, np.ndarray] = field(default_factory=dict)
    slopes: dict[str, float] = field(default_factory=dict)
    std: float = 1.0

    @property
    def is_categorical(self) -> bool:
        return self.kind == CATEGORICAL

    @property
    def is_discrete_numeric(self) -> bool:
        return self.kind == NUMERICAL and self.mixture is not None and all(s == 0 for _, _, s in self.mixture)

    @property
    def is_discrete(self) -> bool:
        return self.is_categorical or self.is_discrete_numeric

    def support(self) -> list:
        if self.is_categorical:
            return list(self.categories)
        if self.is_discrete_numeric:
            return [m for _, m, _ in self.mixture]
        raise TypeError(f"column {self.name!r} has continuous support")


@dataclass
class OracleSpec:
    columns: list[OracleColumn]
    held_out: tuple[str, tuple] | None = None
    raw: dict[str, Any] | None = field(default=None, repr=False)

    def __post_init__(self):
        self.by_name = {c.name: c for c in self.columns}

    def column(self, name: str) -> OracleColumn:
        return self.by_name[name]

    def topological(self) -> list[str]:
        order: list[str] = []
        seen: set[str] = set()

        def visit(n: str) -> None:
            if n in seen:
                return
            seen.add(n)
            for p in self.by_name[n].parents:
                visit(p)
            order.append(n)

        for c in self.columns:
            visit(c.name)
        return order

    def ancestors(self, names: Sequence[str]) -> set[str]:
        out: set[str] = set()
        stack = list(names)
        while stack:
            n = stack.pop()
            for p in self.by_name[n].parents:
                if p not in out:
                    out.add(p)
                    stack.append(p)
        return out

    def schema(self) -> TableSchema:
        cols = []
        for c in self.columns:
            deps = c.parents if c.dependencies is None else c.dependencies
            cols.append(ColumnSpec(c.name, c.kind, c.categories, c.always_observed, tuple(deps)))
        return TableSchema(tuple(cols))


# parsing ------------------------------------------------------------------

def _match_value(col: OracleColumn, text: str, path: str) -> int:
    support = col.support()
    if col.is_categorical:
        if text not in support:
            raise OracleSpecError(path, f"{text!r} is not a category of {col.name!r}")
        return support.index(text)
    try:
        value = float(text)
    except ValueError:
        raise OracleSpecError(path, f"{text!r} is not a value of {col.name!r}") from None
    for i, v in enumerate(support):
        if math.isclose(v, value, rel_tol=0, abs_tol=1e-9):
            return i
    raise OracleSpecError(path, f"{text!r} is not an atom of {col.name!r}")


def _check_probs(p, k: int, path: str) -> np.ndarray:
    arr = np.asarray(p, dtype=np.float64)
    if arr.shape != (k,):
        raise OracleSpecError(path, f"expected {k} probabilities, got {len(arr)}")
    if np.any(arr < 0) or abs(arr.sum() - 1.0) > 1e-9:
        raise OracleSpecError(path, "probabilities must be non-negative and sum to 1")
    return arr


def parse_spec(data: Mapping[str, Any]) -> OracleSpec:
    """Build and validate an :class:`OracleSpec` from plain data (YAML/JSON)."""
    if "columns" not in data:
        raise OracleSpecError("spec", "missing 'columns'")
    raw_cols = data["columns"]
    names = [str(c.get("name")) for c in raw_cols]
    if len(set(names)) != len(names):
        raise OracleSpecError("columns", "duplicate column names")
    cols: dict[str, OracleColumn] = {}
    # pass 1: shapes that do not depend on other columns
    for i, rc in enumerate(raw_cols):
        path = f"columns[{i}]({rc.get('name')})"
        kind = rc.get("kind")
        if kind not in (NUMERICAL, CATEGORICAL):
            raise OracleSpecError(path, f"unknown kind {kind!r}")
        parents = tuple(str(p) for p in rc.get("parents", ()) or ())
        for p in parents:
            if p not in names:
                raise OracleSpecError(f"{path}.parents", f"unknown parent {p!r}")
        deps = rc.get("dependencies")
        col = OracleColumn(
            name=str(rc["name"]), kind=kind,
            categories=tuple(str(c) for c in rc.get("categories", ()) or ()),
            always_observed=bool(rc.get("always_observed", False)),
            parents=parents,
            dependencies=None if deps is None else tuple(str(d) for d in deps),
        )
        if kind == CATEGORICAL and len(col.categories) < 2:
            raise OracleSpecError(path, "categorical column needs at least 2 categories")
        if kind == NUMERICAL and not parents:
            mix = rc.get("mixture")
            if not mix:
                raise OracleSpecError(path, "numerical root needs a 'mixture'")
            comps = []
            for j, m in enumerate(mix):
                w, mu, sd = float(m["weight"]), float(m["mean"]), float(m.get("std", 0.0))
                if w < 0 or sd < 0:
                    raise OracleSpecError(f"{path}.mixture[{j}]", "weight and std must be non-negative")
                comps.append((w, mu, sd))
            total = sum(w for w, _, _ in comps)
            if abs(total - 1.0) > 1e-9:
                raise OracleSpecError(f"{path}.mixture", "weights must sum to 1")
            stds = [s for _, _, s in comps]
            if any(s == 0 for s in stds) and not all(s == 0 for s in stds):
                raise OracleSpecError(f"{path}.mixture", "mix of zero and non-zero std components")
            if all(s == 0 for s in stds) and len({mu for _, mu, _ in comps}) != len(comps):
                raise OracleSpecError(f"{path}.mixture", "duplicate atoms")
            col.mixture = comps
        cols[col.name] = col
    # pass 2: parent-dependent tables
    for i, rc in enumerate(raw_cols):
        col = cols[str(rc["name"])]
        path = f"columns[{i}]({col.name})"
        if col.is_categorical and not col.parents:
            col.probs = _check_probs(rc.get("probs"), len(col.categories), f"{path}.probs")
        elif col.is_categorical:
            pcols = [cols[p] for p in col.parents]
            for pc in pcols:
                if not pc.is_discrete:
                    raise OracleSpecError(f"{path}.parents", f"parent {pc.name!r} is not discrete")
            shape = tuple(len(pc.support()) for pc in pcols) + (len(col.categories),)
            table = np.full(shape, np.nan)
            for key, probs in (rc.get("table") or {}).items():
                parts = str(key).split("|")
                kpath = f"{path}.table[{key!r}]"
                if len(parts) != len(pcols):
                    raise OracleSpecError(kpath, f"key needs {len(pcols)} parent values")
                idx = tuple(_match_value(pc, part.strip(), kpath) for pc, part in zip(pcols, parts))
                table[idx] = _check_probs(probs, len(col.categories), kpath)
            if np.isnan(table).any():
                bad = np.argwhere(np.isnan(table[..., 0]))[0]
                combo = "|".join(str(pc.support()[j]) for pc, j in zip(pcols, bad))
                raise OracleSpecError(f"{path}.table", f"no entry for parent values {combo!r}")
            col.table = table
        elif col.kind == NUMERICAL and col.parents:
            col.base = float(rc.get("base", 0.0))
            col.std = float(rc.get("std", 1.0))
            if col.std <= 0:
                raise OracleSpecError(f"{path}.std", "conditional std must be positive")
            effects = rc.get("effects") or {}
            slopes = rc.get("slopes") or {}
            for p in col.parents:
                pc = cols[p]
                if p in effects:
                    if not pc.is_discrete:
                        raise OracleSpecError(f"{path}.effects.{p}", "effects need a discrete parent")
                    arr = np.full(len(pc.support()), np.nan)
                    for k, v in effects[p].items():
                        arr[_match_value(pc, str(k), f"{path}.effects.{p}")] = float(v)
                    if np.isnan(arr).any():
                        raise OracleSpecError(f"{path}.effects.{p}", "every parent value needs an effect")
                    col.effects[p] = arr
                elif p in slopes:
                    if pc.is_categorical:
                        raise OracleSpecError(f"{path}.slopes.{p}", "slopes need a numerical parent")
                    col.slopes[p] = float(slopes[p])
                else:
                    raise OracleSpecError(f"{path}", f"parent {p!r} has neither an effect nor a slope")
    held = data.get("held_out")
    held_out = None
    if held:
        hc = str(held["column"])
        if hc not in cols:
            raise OracleSpecError("held_out.column", f"unknown column {hc!r}")
        if cols[hc].parents:
            raise OracleSpecError("held_out.column", "held-out predicate must use a root column")
        vals = tuple(held["values"])
        for v in vals:
            _match_value(cols[hc], str(v), "held_out.values")
        held_out = (hc, vals)
    spec = OracleSpec([cols[n] for n in names], held_out, raw=dict(data))
    try:
        spec.schema()
    except ValueError as exc:
        raise OracleSpecError("columns", str(exc)) from None
    return spec


def load_spec(path: str | Path) -> OracleSpec:
    with open(path, encoding="utf-8") as fh:
        return parse_spec(yaml.safe_load(fh))


def save_spec(spec: OracleSpec, path: str | Path) -> None:
    if spec.raw is None:
        raise ValueError("spec was not built from plain data")
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(spec.raw, fh, sort_keys=False)


# generation ---------------------------------------------------------------

def generate(spec: OracleSpec, n: int, seed: int) -> DataTable:
    """Ancestral sampling of ``n`` rows in topological order."""
    rng = np.random.default_rng(seed)
    codes: dict[str, np.ndarray] = {}
    values: dict[str, np.ndarray] = {}
    for name in spec.topological():
        col = spec.column(name)
        if col.is_categorical:
            if col.table is None:
                codes[name] = rng.choice(len(col.categories), size=n, p=col.probs)
            else:
                probs = col.table[tuple(codes[p] for p in col.parents)]
                cdf = np.cumsum(probs, axis=1)
                u = rng.random((n, 1))
                codes[name] = np.minimum((u > cdf).sum(axis=1), len(col.categories) - 1)
        elif col.mixture is not None:
            w = np.array([c[0] for c in col.mixture])
            comp = rng.choice(len(w), size=n, p=w)
            mu = np.array([c[1] for c in col.mixture])[comp]
            sd = np.array([c[2] for c in col.mixture])[comp]
            noise = rng.standard_normal(n)
            values[name] = mu + sd * noise
            if col.is_discrete_numeric:
                codes[name] = comp
        else:
            mean = np.full(n, col.base)
            for p, eff in col.effects.items():
                mean += eff[codes[p]]
            for p, s in col.slopes.items():
                mean += s * values[p]
            values[name] = mean + col.std * rng.standard_normal(n)
    frame = {}
    for c in spec.columns:
        if c.is_categorical:
            frame[c.name] = np.asarray(c.categories, dtype=object)[codes[c.name]]
        else:
            frame[c.name] = values[c.name]
    return DataTable(spec.schema(), pd.DataFrame(frame, columns=[c.name for c in spec.columns]))


def split_held_out(spec: OracleSpec, table: DataTable) -> tuple[DataTable, DataTable]:
    """Separate rows matching the held-out predicate: ``(in_distribution, ood)``."""
    if spec.held_out is None:
        return table, table.take(np.zeros(0, dtype=np.int64))
    name, vals = spec.held_out
    col = table.frame[name].to_numpy()
    hit = np.isin(col, np.asarray(vals, dtype=col.dtype if col.dtype != object else object))
    return table.take(np.flatnonzero(~hit)), table.take(np.flatnonzero(hit))


# exact densities ------------------------------------------------------------

def _codes_of(col: OracleColumn, series) -> np.ndarray:
    support = col.support()
    if col.is_categorical:
        lookup = {c: i for i, c in enumerate(support)}
        return np.array([lookup.get(v, -1) for v in series], dtype=np.int64)
    arr = np.asarray(series, dtype=np.float64)
    out = np.full(len(arr), -1, dtype=np.int64)
    for i, v in enumerate(support):
        out[np.isclose(arr, v, rtol=0, atol=1e-9)] = i
    return out


def log_joint(spec: OracleSpec, table: DataTable | pd.DataFrame) -> np.ndarray:
    """Per-row log density of fully observed rows (log-probability for
    discrete columns, log-density for continuous ones)."""
    frame = table.frame if isinstance(table, DataTable) else table
    n = len(frame)
    codes = {c.name: _codes_of(c, frame[c.name]) for c in spec.columns if c.is_discrete}
    total = np.zeros(n)
    for c in spec.columns:
        if c.is_categorical:
            k = codes[c.name]
            if c.table is None:
                p = c.probs[np.maximum(k, 0)]
            else:
                pidx = tuple(np.maximum(codes[q], 0) for q in c.parents)
                p = c.table[pidx + (np.maximum(k, 0),)]
            bad = (k < 0) | np.any([codes[q] < 0 for q in c.parents], axis=0) if c.parents else (k < 0)
            with np.errstate(divide="ignore"):
                total += np.where(bad, -np.inf, np.log(p))
        elif c.is_discrete_numeric:
            k = codes[c.name]
            w = np.array([m[0] for m in c.mixture])
            with np.errstate(divide="ignore"):
                total += np.where(k < 0, -np.inf, np.log(w[np.maximum(k, 0)]))
        else:
            x = frame[c.name].to_numpy(dtype=np.float64)
            if c.mixture is not None:
                comps = np.array(c.mixture)
                lp = (np.log(comps[:, 0])[None, :] - 0.5 * _LOG2PI - np.log(comps[:, 2])[None, :]
                      - 0.5 * ((x[:, None] - comps[:, 1][None, :]) / comps[:, 2][None, :]) ** 2)
                total += logsumexp(lp, axis=1)
            else:
                mean = np.full(n, c.base)
                for p, eff in c.effects.items():
                    mean += eff[np.maximum(codes[p], 0)]
                for p, s in c.slopes.items():
                    mean += s * frame[p].to_numpy(dtype=np.float64)
                total += -0.5 * _LOG2PI - math.log(c.std) - 0.5 * ((x - mean) / c.std) ** 2
    return total


def posterior_given_rest(spec: OracleSpec, table: DataTable, column: str) -> np.ndarray:
    """Exact p(column | every other column) per row for a categorical column.

    Returns an (n, K) array; the values currently in ``column`` are ignored.
    """
    col = spec.column(column)
    if not col.is_categorical:
        raise ValueError("posterior_given_rest supports categorical columns only")
    frame = table.frame.copy()
    logs = []
    for cat in col.categories:
        frame[column] = cat
        logs.append(log_joint(spec, frame))
    lp = np.stack(logs, axis=1)
    return np.exp(lp - logsumexp(lp, axis=1, keepdims=True))


# exact conditionals by enumeration -------------------------------------------

@dataclass
class DiscreteConditional:
    """Exact joint distribution over one or more discrete target columns."""

    targets: tuple[str, ...]
    support: tuple[tuple, ...]  # per target, its ordered values
    probs: np.ndarray  # shape (|support_1|, ..., |support_k|)

    def prob(self, *values) -> float:
        idx = tuple(s.index(v) for s, v in zip(self.support, values))
        return float(self.probs[idx])


@dataclass
class GaussianMixtureSummary:
    weights: np.ndarray
    means: np.ndarray
    stds: np.ndarray

    @property
    def mean(self) -> float:
        return float(np.sum(self.weights * self.means))

    @property
    def var(self) -> float:
        second = np.sum(self.weights * (self.stds ** 2 + self.means ** 2))
        return float(second - self.mean ** 2)

    def cdf(self, x) -> np.ndarray:
        from scipy.stats import norm

        x = np.asarray(x, dtype=np.float64)[..., None]
        return np.sum(self.weights * norm.cdf(x, self.means, np.maximum(self.stds, 1e-300)), axis=-1)


def _clg_moments(spec: OracleSpec, cont: list[str], assign: dict[str, int], comp: dict[str, int]):
    """Joint mean/cov of continuous nodes given a discrete assignment."""
    n = len(cont)
    pos = {c: i for i, c in enumerate(cont)}
    m = np.zeros(n)
    S = np.zeros((n, n))
    d = np.zeros(n)
    for c in cont:
        col = spec.column(c)
        i = pos[c]
        if col.mixture is not None:
            w, mu, sd = col.mixture[comp[c]]
            m[i], d[i] = mu, sd ** 2
        else:
            m[i] = col.base + sum(eff[assign[p]] for p, eff in col.effects.items())
            for p, s in col.slopes.items():
                S[i, pos[p]] = s
            d[i] = col.std ** 2
    A = np.linalg.inv(np.eye(n) - S)
    return A @ m, A @ np.diag(d) @ A.T


def exact_conditional(spec: OracleSpec, targets: Sequence[str] | str,
                      condition: Mapping[str, Any] | None = None):
    """Exact conditional of ``targets`` given ``condition``.

    Discrete targets give a :class:`DiscreteConditional`; a single continuous
    target gives a :class:`GaussianMixtureSummary`. Works by enumerating the
    discrete variables in the ancestral closure of targets and condition;
    continuous variables are handled in closed form (conditional
    linear-Gaussian). Discrete parents are required for categorical columns,
    so continuous marginalisation never feeds back into a categorical.
    """
    targets = (targets,) if isinstance(targets, str) else tuple(targets)
    condition = dict(condition or {})
    overlap = set(targets) & set(condition)
    if overlap:
        raise ValueError(f"targets also appear in the condition: {sorted(overlap)}")
    tcols = [spec.column(t) for t in targets]
    if any(not c.is_discrete for c in tcols) and (len(tcols) > 1):
        raise ValueError("continuous targets are supported one at a time")
    relevant = set(targets) | set(condition) | spec.ancestors(list(targets) + list(condition))
    order = [n for n in spec.topological() if n in relevant]
    discrete = [n for n in order if spec.column(n).is_discrete]
    cont = [n for n in order if not spec.column(n).is_discrete]
    latent = [n for n in cont if spec.column(n).mixture is not None and len(spec.column(n).mixture) > 1]

    fixed: dict[str, int] = {}
    for name in discrete:
        if name in condition:
            col = spec.column(name)
            idx = _codes_of(col, [condition[name]])[0]
            if idx < 0:
                raise ValueError(f"{condition[name]!r} is not a value of {name!r}")
            fixed[name] = int(idx)
    free = [n for n in discrete if n not in fixed]
    cards = [len(spec.column(n).support()) for n in free] + [len(spec.column(n).mixture) for n in latent]
    total = int(np.prod(cards)) if cards else 1
    if total > MAX_ENUMERATION:
        raise ValueError(f"enumeration of {total} configurations exceeds {MAX_ENUMERATION}")

    obs_cont = [n for n in cont if n in condition]
    x_obs = np.array([float(condition[n]) for n in obs_cont])
    cont_target = targets[0] if tcols and not tcols[0].is_discrete else None

    if cont_target is None:
        acc = np.zeros(tuple(len(c.support()) for c in tcols))
    else:
        comp_w, comp_m, comp_s = [], [], []

    for combo in itertools.product(*[range(c) for c in cards]):
        assign = dict(fixed)
        assign.update(zip(free, combo[:len(free)]))
        comp = dict(zip(latent, combo[len(free):]))
        for n in cont:
            if spec.column(n).mixture is not None and n not in comp:
                comp[n] = 0
        logw = 0.0
        for name in discrete:
            col = spec.column(name)
            if col.is_categorical:
                if col.table is None:
                    p = col.probs[assign[name]]
                else:
                    p = col.table[tuple(assign[q] for q in col.parents) + (assign[name],)]
            else:
                p = col.mixture[assign[name]][0]
            if p <= 0:
                logw = -np.inf
                break
            logw += math.log(p)
        if logw == -np.inf:
            continue
        for n in latent:
            logw += math.log(spec.column(n).mixture[comp[n]][0])
        if cont:
            mu, cov = _clg_moments(spec, cont, assign, comp)
            io = [cont.index(n) for n in obs_cont]
            if io:
                mo, co = mu[io], cov[np.ix_(io, io)]
                diff = x_obs - mo
                sign, logdet = np.linalg.slogdet(co)
                logw += -0.5 * (len(io) * _LOG2PI + logdet + diff @ np.linalg.solve(co, diff))
            if cont_target is not None:
                it = cont.index(cont_target)
                if io:
                    gain = np.linalg.solve(co, cov[io, it])
                    cm = mu[it] + gain @ diff
                    cv = cov[it, it] - cov[it, io] @ gain
                else:
                    cm, cv = mu[it], cov[it, it]
                comp_w.append(logw)
                comp_m.append(cm)
                comp_s.append(math.sqrt(max(cv, 0.0)))
                continue
        if cont_target is None:
            acc[tuple(assign[t] for t in targets)] += math.exp(logw)

    if cont_target is None:
        z = acc.sum()
        if z <= 0:
            raise ValueError("condition has zero probability")
        return DiscreteConditional(targets, tuple(tuple(c.support()) for c in tcols), acc / z)
    lw = np.array(comp_w)
    w = np.exp(lw - logsumexp(lw))
    return GaussianMixtureSummary(w, np.array(comp_m), np.array(comp_s))


def entropy(p: np.ndarray) -> float:
    p = np.asarray(p, dtype=np.float64).ravel()
    p = p[p > 0]
    return float(-np.sum(p * np.log(p)))


def parents_informative(spec: OracleSpec, column: str, tol: float = 1e-12) -> bool:
    """True when H(column | parents) < H(column), computed exactly.

    For a linear-Gaussian numerical column the parents are informative
    whenever any effect varies or any slope is non-zero.
    """
    col = spec.column(column)
    if not col.parents:
        return False
    if not col.is_categorical:
        return any(np.ptp(e) > 0 for e in col.effects.values()) or any(s != 0 for s in col.slopes.values())
    joint = exact_conditional(spec, (column,) + col.parents)
    pj = np.moveaxis(joint.probs, 0, -1)  # parents..., column
    p_par = pj.sum(axis=-1)
    h_cond = entropy(pj) - entropy(p_par)
    h_marg = entropy(pj.reshape(-1, pj.shape[-1]).sum(axis=0))
    return h_cond < h_marg - tol


def bayes_accuracy(spec: OracleSpec, column: str) -> float:
    """Accuracy of predicting ``column`` by the argmax of p(column | parents)."""
    col = spec.column(column)
    joint = exact_conditional(spec, (column,) + col.parents)
    pj = np.moveaxis(joint.probs, 0, -1).reshape(-1, len(col.categories))
    return float(pj.max(axis=1).sum())



def conditional_given_row(spec: OracleSpec, row: DataTable, column: str) -> dict[str, float]:
    """Exact p(column | rest of a single row) as a category -> prob dict."""
    probs = posterior_given_rest(spec, row, column)[0]
    return dict(zip(spec.column(column).categories, probs.tolist()))


def exact_random_baseline(spec: OracleSpec, result) -> float | None:
    """JS distance between a uniform random guess and the exact conditional.

    Averaged over the included dependency groups of a categorical
    univariate evaluation result, so it is directly comparable to the
    result's own average distance.
    """
    from .evaluation import js_distance

    col = spec.column(result.target)
    if not col.is_categorical:
        raise ValueError("random baseline is defined for categorical targets")
    k = len(col.categories)
    dists = []
    for g in result.groups:
        if not g.included:
            continue
        cond = exact_conditional(spec, col.name, g.dependency_values)
        dists.append(js_distance(cond.probs, np.full(k, 1.0 / k)))
    return float(np.mean(dists)) if dists else None

# default spec -------------------------------------------------------------

REGIONS = (30.0, 33.0, 36.0, 39.0, 42.0, 45.0)
BUILDING_TYPES = ("Single-Family Detached", "Single-Family Attached", "Multi-Family")
VINTAGES = ("<1960", "1960-1989", "1990-2009", "2010+")
FUELS = ("Electricity", "Natural Gas", "Fuel Oil")
DRYERS = ("Electric", "Gas", "None")
WASHERS = ("Standard", "EnergyStar", "None")
USAGE = ("Low", "Medium", "High")
HEAT_SP = ("64F", "68F", "70F", "72F")
COOL_SP = ("72F", "75F", "76F", "78F")


def _by_region(rows: Sequence[Sequence[float]]) -> dict[str, list[float]]:
    return {repr(r): list(p) for r, p in zip(REGIONS, rows)}


def default_building_spec_dict() -> dict[str, Any]:
    """Plain-data form of the default 12-column building-stock spec."""
    dryer_table = {
        "Electricity|Single-Family Detached": [0.85, 0.02, 0.13],
        "Electricity|Single-Family Attached": [0.75, 0.02, 0.23],
        "Electricity|Multi-Family": [0.45, 0.01, 0.54],
        "Natural Gas|Single-Family Detached": [0.35, 0.55, 0.10],
        "Natural Gas|Single-Family Attached": [0.35, 0.45, 0.20],
        "Natural Gas|Multi-Family": [0.25, 0.20, 0.55],
        "Fuel Oil|Single-Family Detached": [0.75, 0.10, 0.15],
        "Fuel Oil|Single-Family Attached": [0.65, 0.10, 0.25],
        "Fuel Oil|Multi-Family": [0.40, 0.05, 0.55],
    }
    return {
        "held_out": {"column": "region", "values": [36.0]},
        "columns": [
            {"name": "region", "kind": "numerical", "always_observed": True,
             "mixture": [{"weight": w, "mean": r, "std": 0.0}
                         for w, r in zip((0.18, 0.18, 0.12, 0.18, 0.17, 0.17), REGIONS)]},
            {"name": "building_type", "kind": "categorical", "categories": list(BUILDING_TYPES),
             "parents": ["region"],
             "table": _by_region([(0.70, 0.10, 0.20), (0.60, 0.15, 0.25), (0.50, 0.20, 0.30),
                                  (0.40, 0.25, 0.35), (0.55, 0.20, 0.25), (0.65, 0.10, 0.25)])},
            {"name": "vintage", "kind": "categorical", "categories": list(VINTAGES),
             "parents": ["region"],
             "table": _by_region([(0.10, 0.30, 0.35, 0.25), (0.15, 0.35, 0.30, 0.20),
                                  (0.25, 0.35, 0.25, 0.15), (0.40, 0.30, 0.20, 0.10),
                                  (0.35, 0.35, 0.20, 0.10), (0.30, 0.40, 0.20, 0.10)])},
            {"name": "heating_fuel", "kind": "categorical", "categories": list(FUELS),
             "parents": ["region"],
             "table": _by_region([(0.75, 0.20, 0.05), (0.60, 0.35, 0.05), (0.40, 0.50, 0.10),
                                  (0.25, 0.60, 0.15), (0.20, 0.55, 0.25), (0.15, 0.50, 0.35)])},
            {"name": "water_heater_fuel", "kind": "categorical", "categories": list(FUELS),
             "parents": ["heating_fuel"],
             "table": {f: [0.85 if g == f else 0.075 for g in FUELS] for f in FUELS}},
            {"name": "clothes_dryer", "kind": "categorical", "categories": list(DRYERS),
             "parents": ["heating_fuel", "building_type"], "table": dryer_table},
            {"name": "clothes_washer", "kind": "categorical", "categories": list(WASHERS),
             "parents": ["clothes_dryer"],
             "table": {"Electric": [0.70, 0.27, 0.03], "Gas": [0.30, 0.67, 0.03], "None": [0.04, 0.04, 0.92]}},
            {"name": "clothes_dryer_usage_level", "kind": "categorical", "categories": list(USAGE),
             "probs": [1 / 3, 1 / 3, 1 / 3]},
            {"name": "heating_setpoint", "kind": "categorical", "categories": list(HEAT_SP),
             "parents": ["vintage"],
             "table": {"<1960": [0.50, 0.30, 0.15, 0.05], "1960-1989": [0.20, 0.50, 0.20, 0.10],
                       "1990-2009": [0.10, 0.25, 0.50, 0.15], "2010+": [0.05, 0.15, 0.30, 0.50]}},
            {"name": "cooling_setpoint", "kind": "categorical", "categories": list(COOL_SP),
             "parents": ["heating_setpoint"],
             "table": {"64F": [0.15, 0.25, 0.30, 0.30], "68F": [0.20, 0.30, 0.30, 0.20],
                       "70F": [0.25, 0.30, 0.25, 0.20], "72F": [0.35, 0.30, 0.20, 0.15]}},
            {"name": "sqft", "kind": "numerical", "parents": ["building_type", "vintage"],
             "base": 1800.0, "std": 200.0,
             "effects": {"building_type": dict(zip(BUILDING_TYPES, (600.0, 0.0, -800.0))),
                         "vintage": dict(zip(VINTAGES, (-200.0, 0.0, 200.0, 350.0)))}},
            {"name": "electricity", "kind": "numerical",
             "parents": ["sqft", "building_type", "vintage", "heating_fuel", "water_heater_fuel",
                         "clothes_dryer", "clothes_washer", "heating_setpoint", "cooling_setpoint"],
             # simulation output: no documented dependencies
             "dependencies": [],
             "base": 1000.0, "std": 120.0, "slopes": {"sqft": 4.0},
             "effects": {
                 "building_type": dict(zip(BUILDING_TYPES, (1500.0, 700.0, 0.0))),
                 "vintage": dict(zip(VINTAGES, (1800.0, 1200.0, 600.0, 0.0))),
                 "heating_fuel": dict(zip(FUELS, (3000.0, 0.0, 1500.0))),
                 "water_heater_fuel": dict(zip(FUELS, (1800.0, 0.0, 900.0))),
                 "clothes_dryer": dict(zip(DRYERS, (1200.0, 600.0, 0.0))),
                 "clothes_washer": dict(zip(WASHERS, (1000.0, 500.0, 0.0))),
                 "heating_setpoint": dict(zip(HEAT_SP, (0.0, 600.0, 1200.0, 1800.0))),
                 "cooling_setpoint": dict(zip(COOL_SP, (1800.0, 1200.0, 600.0, 0.0))),
             }},
        ],
    }


def default_building_spec() -> OracleSpec:
    """12 columns: a discrete always-observed region, square footage,
    electricity use and nine categorical building attributes."""
    return parse_spec(default_building_spec_dict())
