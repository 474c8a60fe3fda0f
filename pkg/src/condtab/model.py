"""Model container, training configuration and checkpoint I/O."""

from __future__ import annotations

import dataclasses
import hashlib
import io
import json
import zipfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .denoiser import DEFAULT_EMB_DIM, DEFAULT_HIDDEN, DenoiserParams
from .diffusion import DiffusionSchedule, make_schedule
from .preprocess import Preprocessor

CHECKPOINT_FORMAT = "condtab-checkpoint"
CHECKPOINT_VERSION = 1
LAMBDA_SCHEDULES = ("constant_1", "linear_decay_from_1")
# fixed zip timestamp keeps checkpoints byte-reproducible
_ZIP_DATE = (1980, 1, 1, 0, 0, 0)


@dataclass
class TrainConfig:
    lr: float = 5e-4
    batch_size: int = 4096
    steps: int = 30000
    T: int = 1000
    gaussian_schedule: str = "linear"
    multinomial_schedule: str = "cosine"
    beta_min: float = 1e-4
    beta_max: float = 0.02
    f_mask_num: float = 0.5
    f_mask_cat: float = 0.2
    lambda_cat: str = "linear_decay_from_1"
    lambda_cat_floor: float = 0.1
    hidden: tuple[int, ...] = DEFAULT_HIDDEN
    emb_dim: int = DEFAULT_EMB_DIM
    dropout: float = 0.0
    ema: float = 0.0  # weight EMA decay; 0 disables it
    seed: int = 0
    eval_every: int = 1000
    val_rows: int = 512
    select_best: bool = True
    dtype: str = "float32"
    categorical_decode: str = "sample"

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        if self.lr <= 0 or self.batch_size <= 0 or self.steps <= 0 or self.T <= 0:
            raise ValueError("lr, batch_size, steps and T must be positive")
        if self.eval_every <= 0 or self.val_rows <= 0:
            raise ValueError("eval_every and val_rows must be positive")
        if not (0 <= self.f_mask_num <= 1 and 0 <= self.f_mask_cat <= 1):
            raise ValueError("f_mask values must lie in [0, 1]")
        if self.lambda_cat not in LAMBDA_SCHEDULES:
            raise ValueError(f"lambda_cat must be one of {LAMBDA_SCHEDULES}")
        if not (0 <= self.ema < 1):
            raise ValueError("ema must lie in [0, 1)")
        if not (0 <= self.lambda_cat_floor <= 1):
            raise ValueError("lambda_cat_floor must lie in [0, 1]")
        if self.categorical_decode not in ("sample", "argmax"):
            raise ValueError("categorical_decode must be 'sample' or 'argmax'")
        if self.dtype not in ("float32", "float64"):
            raise ValueError("dtype must be float32 or float64")

    def lambda_cat_at(self, step: int) -> float:
        """Categorical loss weight at 0-based ``step``."""
        if self.lambda_cat == "constant_1":
            return 1.0
        frac = step / max(self.steps - 1, 1)
        return 1.0 - (1.0 - self.lambda_cat_floor) * min(max(frac, 0.0), 1.0)

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d["hidden"] = list(self.hidden)
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "TrainConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown training options: {sorted(unknown)}")
        return cls(**d)


@dataclass
class ConditionalTabDDPM:
    """A trained conditional imputer: preprocessor, denoiser and schedules."""

    preprocessor: Preprocessor
    params: DenoiserParams
    config: TrainConfig
    history: list[dict[str, Any]] = field(default_factory=list)

    @property
    def schema(self):
        return self.preprocessor.schema

    @property
    def gaussian(self) -> DiffusionSchedule:
        c = self.config
        return make_schedule(c.T, c.gaussian_schedule, c.beta_min, c.beta_max)

    @property
    def multinomial(self) -> DiffusionSchedule:
        c = self.config
        return make_schedule(c.T, c.multinomial_schedule, c.beta_min, c.beta_max)

    # checkpoint I/O --------------------------------------------------------

    def save(self, path: str | Path) -> None:
        arrays = self.params.arrays()
        names = self.params.names()
        meta = {
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "schema_hash": self.schema.digest(),
            "preprocessor": self.preprocessor.to_dict(),
            "config": self.config.to_dict(),
            "param_names": names,
            "dropout": self.params.dropout,
            "history": self.history,
        }
        with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_STORED) as zf:
            _write_entry(zf, "meta.json", json.dumps(meta, sort_keys=True, indent=1).encode())
            for name, arr in zip(names, arrays):
                buf = io.BytesIO()
                np.save(buf, arr, allow_pickle=False)
                _write_entry(zf, f"params/{name}.npy", buf.getvalue())

    @classmethod
    def load(cls, path: str | Path) -> "ConditionalTabDDPM":
        with zipfile.ZipFile(path) as zf:
            meta = json.loads(zf.read("meta.json"))
            if meta.get("format") != CHECKPOINT_FORMAT or meta.get("version") != CHECKPOINT_VERSION:
                raise ValueError(f"{path}: not a supported checkpoint")
            arrays = [np.load(io.BytesIO(zf.read(f"params/{n}.npy")), allow_pickle=False)
                      for n in meta["param_names"]]
        pre = Preprocessor.from_dict(meta["preprocessor"])
        if pre.schema.digest() != meta["schema_hash"]:
            raise ValueError(f"{path}: schema hash mismatch")
        params = DenoiserParams.from_arrays(arrays, meta.get("dropout", 0.0))
        return cls(pre, params, TrainConfig.from_dict(meta["config"]), meta.get("history", []))


def _write_entry(zf: zipfile.ZipFile, name: str, data: bytes) -> None:
    info = zipfile.ZipInfo(name, date_time=_ZIP_DATE)
    info.external_attr = 0o644 << 16
    zf.writestr(info, data)


def file_digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
