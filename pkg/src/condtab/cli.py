"""Command-line entry point: ``condtab <sub-command> [options]``.

Sub-commands: ``gen-data``, ``train``, ``impute``, ``evaluate``,
``diversity``. Every run writes its artifacts plus a ``manifest.json``
(config hash, seed, package versions, timing) into ``--out``.

Exit codes: 0 success, 2 usage error, 1 runtime failure. Failures print
one line ``condtab: error: <reason>`` on stderr.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import platform
import sys
import time
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from . import evaluation as ev
from . import oracle
from .model import ConditionalTabDDPM, TrainConfig, file_digest
from .schema import load_csv, load_schema, save_schema, split, write_csv

log = logging.getLogger("condtab")

# flag name -> TrainConfig field, for options that map one-to-one
TRAIN_FLAGS = {
    "lr": float, "batch_size": int, "steps": int, "T": int, "f_mask_num": float, "f_mask_cat": float,
    "lambda_cat": str, "eval_every": int, "val_rows": int, "dropout": float, "emb_dim": int,
    "categorical_decode": str, "dtype": str, "ema": float,
}


class UsageError(Exception):
    pass


def _versions() -> dict[str, str]:
    import pandas
    import scipy

    return {"condtab": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "pandas": pandas.__version__}


def _config_hash(config: dict[str, Any]) -> str:
    return hashlib.sha256(json.dumps(config, sort_keys=True, default=str).encode()).hexdigest()


def write_manifest(out: Path, command: str, config: dict[str, Any], seed: int, started: float,
                   artifacts: Sequence[Path]) -> Path:
    manifest = {
        "command": command,
        "config": config,
        "config_hash": _config_hash(config),
        "seed": seed,
        "versions": _versions(),
        "timing_seconds": round(time.time() - started, 3),
        "artifacts": {p.name: file_digest(p) for p in artifacts if p.is_file()},
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=1, sort_keys=True), encoding="utf-8")
    return path


def _read_config(path: str | None) -> dict[str, Any]:
    if not path:
        return {}
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"config file not found: {path}")
    import yaml

    data = yaml.safe_load(p.read_text(encoding="utf-8")) or {}
    if not isinstance(data, dict):
        raise UsageError(f"config file {path} must hold a mapping")
    return data


def _need_file(path: str | None, what: str) -> Path:
    if not path:
        raise UsageError(f"missing required option for {what}")
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"{what} not found: {path}")
    return p


def _merged(args: argparse.Namespace, keys: Sequence[str]) -> dict[str, Any]:
    """Config-file values overridden by any flag given on the command line."""
    cfg = _read_config(args.config)
    unknown = set(cfg) - set(keys)
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    for k in keys:
        v = getattr(args, k, None)
        if v is not None:
            cfg[k] = v
    return cfg


# sub-commands ----------------------------------------------------------------

GEN_KEYS = ("spec", "rows", "seed", "fractions")


def cmd_gen_data(args: argparse.Namespace) -> int:
    started = time.time()
    cfg = _merged(args, GEN_KEYS)
    seed = int(cfg.get("seed", 0))
    spec = oracle.load_spec(_need_file(cfg["spec"], "oracle spec")) if cfg.get("spec") else oracle.default_building_spec()
    rows = int(cfg.get("rows", 50_000))
    try:
        fractions = tuple(float(x) for x in str(cfg.get("fractions", "0.8,0.1,0.1")).split(","))
    except ValueError as exc:
        raise UsageError(f"bad --fractions: {exc}") from None
    if len(fractions) != 3:
        raise UsageError("--fractions needs three values (train,val,test)")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    table = oracle.generate(spec, rows, seed)
    in_dist, ood = oracle.split_held_out(spec, table)
    parts = split(in_dist, fractions, seed)
    written = []
    for name, part in zip(("train", "val", "test"), parts):
        write_csv(part, out / f"{name}.csv")
        written.append(out / f"{name}.csv")
    if len(ood):
        write_csv(ood, out / "ood.csv")
        written.append(out / "ood.csv")
    save_schema(spec.schema(), out / "schema.yaml")
    oracle.save_spec(spec, out / "oracle_spec.yaml")
    written += [out / "schema.yaml", out / "oracle_spec.yaml"]
    write_manifest(out, "gen-data", cfg, seed, started, written)
    log.info("wrote %d rows (%s) to %s", rows, ", ".join(p.name for p in written), out)
    return 0


TRAIN_KEYS = tuple(TRAIN_FLAGS) + ("hidden", "seed")


def cmd_train(args: argparse.Namespace) -> int:
    started = time.time()
    schema = load_schema(_need_file(args.schema, "schema"))
    train_path = _need_file(args.train, "training data")
    val_path = _need_file(args.val, "validation data") if args.val else None
    cfg = _merged(args, TRAIN_KEYS)
    if isinstance(cfg.get("hidden"), str):
        cfg["hidden"] = [int(h) for h in cfg["hidden"].split(",") if h]
    try:
        config = TrainConfig.from_dict(cfg)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from exc
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    from .train import train

    train_table = load_csv(train_path, schema)
    val_table = load_csv(val_path, schema) if val_path else None
    model = train(train_table, config, val_table)
    ckpt = out / "model.ckpt"
    model.save(ckpt)
    write_manifest(out, "train", config.to_dict(), config.seed, started, [ckpt])
    log.info("checkpoint written to %s", ckpt)
    return 0


def cmd_impute(args: argparse.Namespace) -> int:
    started = time.time()
    ckpt = _need_file(args.checkpoint, "checkpoint")
    data = _need_file(args.data, "input data")
    if args.scenarios < 1:
        raise UsageError("--scenarios must be >= 1")
    from .sample import impute

    model = ConditionalTabDDPM.load(ckpt)
    table = load_csv(data, model.schema)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    results = impute(model, table, args.scenarios, args.seed)
    written = []
    for r in results:
        path = out / f"imputed_s{r.scenario}.csv"
        write_csv(r.table, path)
        written.append(path)
    generated = results[0].generated
    provenance = {
        "checkpoint": ckpt.name,
        "checkpoint_sha256": file_digest(ckpt),
        "input": data.name,
        "seed": args.seed,
        "scenarios": args.scenarios,
        "generated_cells": {name: np.flatnonzero(generated[:, j]).tolist()
                            for j, name in enumerate(model.schema.names) if generated[:, j].any()},
    }
    prov = out / "provenance.json"
    prov.write_text(json.dumps(provenance, indent=1, sort_keys=True), encoding="utf-8")
    written.append(prov)
    write_manifest(out, "impute", {"scenarios": args.scenarios}, args.seed, started, written)
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    started = time.time()
    ckpt = _need_file(args.checkpoint, "checkpoint")
    train_path = _need_file(args.train, "training data")
    test_path = _need_file(args.test, "test data")
    spec = oracle.load_spec(_need_file(args.oracle_spec, "oracle spec")) if args.oracle_spec else None
    model = ConditionalTabDDPM.load(ckpt)
    schema = model.schema
    targets = [t for t in (args.targets or "").split(",") if t]
    for t in targets:
        if t not in schema.names:
            raise UsageError(f"unknown target column: {t}")
    modes = ["univariate", "reconstruction"] if args.mode == "all" else [args.mode]
    if "bivariate" in modes and len(targets) != 2:
        raise UsageError("bivariate mode needs exactly two --targets")
    train_table = load_csv(train_path, schema)
    test_table = load_csv(test_path, schema)
    imputer = ev.model_imputer(model)
    report = evaluate_all(imputer, train_table, test_table, modes, targets, args.seed, args.max_rows, spec)
    report["checkpoint_sha256"] = file_digest(ckpt)
    out = Path(args.out)
    path = ev.write_report(report, out)
    config = {"mode": args.mode, "targets": targets, "max_rows": args.max_rows}
    write_manifest(out, "evaluate", config, args.seed, started, [path])
    log.info("report written to %s", path)
    return 0


def evaluate_all(imputer, train_table, test_table, modes, targets, seed=0, max_rows=None, spec=None) -> dict:
    """Run the requested evaluation modes and collect one report dict."""
    schema = train_table.schema
    report: dict[str, Any] = {}
    if "univariate" in modes:
        cols = targets or [c.name for c in schema.columns if not c.always_observed]
        uni = {}
        for i, name in enumerate(cols):
            res = ev.univariate_eval(imputer, train_table, test_table, name, seed=seed + i)
            d = res.to_dict()
            if spec is not None and schema.column(name).is_categorical:
                d["exact_random_baseline"] = oracle.exact_random_baseline(spec, res)
            uni[name] = d
        report["univariate"] = uni
        cat = [v["average"] for k, v in uni.items() if schema.column(k).is_categorical and v["average"] is not None]
        num = [v["average"] for k, v in uni.items() if not schema.column(k).is_categorical and v["average"] is not None]
        report["average_categorical_jsd"] = float(np.mean(cat)) if cat else None
        report["average_numerical_wd"] = float(np.mean(num)) if num else None
    if "bivariate" in modes:
        report["bivariate"] = ev.bivariate_eval(imputer, train_table, test_table, tuple(targets), seed=seed).to_dict()
    if "reconstruction" in modes:
        cols = targets or None
        report["reconstruction"] = ev.reconstruction_eval(imputer, train_table, test_table, cols, seed=seed,
                                                          max_rows=max_rows).to_dict()
    return report


def cmd_diversity(args: argparse.Namespace) -> int:
    started = time.time()
    ckpt = _need_file(args.checkpoint, "checkpoint")
    data = _need_file(args.data, "condition data")
    spec = oracle.load_spec(_need_file(args.oracle_spec, "oracle spec")) if args.oracle_spec else None
    train_path = _need_file(args.train, "training data") if args.train else None
    model = ConditionalTabDDPM.load(ckpt)
    if args.target not in model.schema.names:
        raise UsageError(f"unknown target column: {args.target}")
    table = load_csv(data, model.schema)
    if not 0 <= args.row < len(table):
        raise UsageError(f"--row {args.row} outside 0..{len(table) - 1}")
    if args.n_samples < 100:
        raise UsageError("--n-samples must be >= 100")
    row = table.take([args.row])
    if spec is not None:
        true = oracle.conditional_given_row(spec, row, args.target)
    elif train_path is not None:
        true = ev.matched_distribution(load_csv(train_path, model.schema), row, args.target)
    else:
        true = None
    res = ev.diversity_diagnostic(ev.model_imputer(model), row, args.target, args.n_samples, args.seed, true)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "diversity.json"
    path.write_text(json.dumps(ev._jsonable(res.__dict__), indent=1, sort_keys=True), encoding="utf-8")
    write_manifest(out, "diversity", {"row": args.row, "target": args.target, "n_samples": args.n_samples},
                   args.seed, started, [path])
    return 0


# parser ------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):  # one-line reason, exit 2
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="condtab", description="Conditional diffusion imputation for tabular data.")
    p.add_argument("-v", "--verbose", action="count", default=0, help="more log output (repeatable)")
    sub = p.add_subparsers(dest="command", metavar="{gen-data,train,impute,evaluate,diversity}",
                           parser_class=_Parser)
    sub.required = True

    g = sub.add_parser("gen-data", help="sample a synthetic table from an oracle spec")
    g.add_argument("--spec", help="oracle spec (JSON/YAML); default: built-in building-stock spec")
    g.add_argument("--rows", "--n", dest="rows", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--fractions", help="comma-separated split fractions (default 0.8,0.1,0.1)")
    g.add_argument("--config")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen_data)

    t = sub.add_parser("train", help="train an imputer checkpoint")
    t.add_argument("--schema", required=True)
    t.add_argument("--train", required=True)
    t.add_argument("--val")
    t.add_argument("--config", help="YAML/JSON with training options; flags override it")
    t.add_argument("--seed", type=int)
    t.add_argument("--hidden", help="comma-separated hidden widths")
    for name, typ in TRAIN_FLAGS.items():
        t.add_argument("--" + name.replace("_", "-"), dest=name, type=typ)
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_train)

    i = sub.add_parser("impute", help="fill MISSING cells of a CSV")
    i.add_argument("--checkpoint", required=True)
    i.add_argument("--data", required=True)
    i.add_argument("--scenarios", type=int, default=1)
    i.add_argument("--seed", type=int, default=0)
    i.add_argument("--out", required=True)
    i.set_defaults(func=cmd_impute)

    e = sub.add_parser("evaluate", help="score a checkpoint against held-out data")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--train", required=True)
    e.add_argument("--test", required=True)
    e.add_argument("--targets", help="comma-separated target columns (default: all imputable)")
    e.add_argument("--mode", choices=("univariate", "bivariate", "reconstruction", "all"), default="all")
    e.add_argument("--max-rows", type=int, help="cap on test rows for reconstruction")
    e.add_argument("--oracle-spec", help="oracle spec for exact random baselines")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_evaluate)

    d = sub.add_parser("diversity", help="check one condition row for conditional mode collapse")
    d.add_argument("--checkpoint", required=True)
    d.add_argument("--data", required=True, help="CSV holding the condition row")
    d.add_argument("--row", type=int, default=0)
    d.add_argument("--target", required=True)
    d.add_argument("--n-samples", type=int, default=1000)
    d.add_argument("--oracle-spec", help="oracle spec giving the exact true conditional")
    d.add_argument("--train", help="training data for an empirical true conditional")
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--out", required=True)
    d.set_defaults(func=cmd_diversity)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    level = logging.WARNING - 10 * min(args.verbose + 1, 2)
    logging.basicConfig(level=level, stream=sys.stderr,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"condtab: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - top-level contract: one line, exit 1
        reason = " ".join(str(exc).split()) or type(exc).__name__
        print(f"condtab: error: {type(exc).__name__}: {reason}", file=sys.stderr)
        log.debug("traceback", exc_info=True)
        return 1


if __name__ == "__main__":
    sys.exit(main())
