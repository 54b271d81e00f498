"""Run configuration: defaults, file parsing, validation, precedence.

Config files are flat ``key = value`` text ('#' starts a comment).
Precedence is command-line flags > file values > built-in defaults.
Unknown keys are rejected.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from .errors import UsageError

MODES = ("train", "eval", "synth", "gradcheck", "report")


@dataclass
class RunConfig:
    mode: str = "train"
    dataset: str = "synth"          # "synth" or a directory of WAV + annotations
    split_file: str = ""            # defaults to <dataset>/split.txt for directories
    out_dir: str = "runs/default"
    checkpoint: str = ""            # eval: checkpoint to load
    seed: int = 0

    # model dimensions
    dim: int = 96
    heads: int = 4
    layers: int = 4
    mask_hidden: int = 32

    # optimization
    lr: float = 5e-5
    weight_decay: float = 0.1
    batch: int = 8
    epochs: int = 50

    # loss / filter hyperparameters
    beta: float = 0.5
    epsilon: float = 0.2
    alpha: float = 0.02

    # ablation toggles
    no_aff: bool = False
    no_ddl: bool = False
    no_bias_loss: bool = False

    # documented variants, off by default
    aff_residual: bool = False
    shared_lambda: bool = False
    bd_project_first: bool = False

    # synthetic dataset shape
    train_per_class: int = 25
    test_per_class: int = 10
    train_subjects: int = 6
    test_subjects: int = 4
    snr_lo: float = 5.0
    snr_hi: float = 20.0

    def ablation_flags(self) -> dict[str, bool]:
        return {"no_aff": self.no_aff, "no_ddl": self.no_ddl, "no_bias_loss": self.no_bias_loss}

    def snapshot(self) -> dict:
        return dataclasses.asdict(self)


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


def _coerce(key: str, value: str):
    ftype = _FIELDS[key].type
    try:
        if ftype == "bool":
            lowered = value.strip().lower()
            if lowered in ("true", "1", "yes"):
                return True
            if lowered in ("false", "0", "no"):
                return False
            raise ValueError(f"not a boolean: {value!r}")
        if ftype == "int":
            return int(value)
        if ftype == "float":
            return float(value)
        return value
    except ValueError as exc:
        raise UsageError(f"config key '{key}': {exc}") from exc


def parse_config_file(path: str) -> dict:
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in _FIELDS:
                raise UsageError(f"{path}:{lineno}: unknown config key '{key}'")
            values[key] = _coerce(key, value)
    return values


def validate_config(cfg: RunConfig) -> RunConfig:
    def need(cond: bool, msg: str):
        if not cond:
            raise UsageError(msg)

    need(cfg.mode in MODES, f"mode must be one of {MODES}, got '{cfg.mode}'")
    need(cfg.lr > 0, f"lr must be > 0, got {cfg.lr}")
    need(cfg.weight_decay >= 0, f"weight_decay must be >= 0, got {cfg.weight_decay}")
    need(cfg.batch >= 1, f"batch must be >= 1, got {cfg.batch}")
    need(cfg.epochs >= 0, f"epochs must be >= 0, got {cfg.epochs}")
    need(0.0 <= cfg.beta <= 1.0, f"beta must be in [0, 1], got {cfg.beta}")
    need(0.0 <= cfg.epsilon < 1.0, f"epsilon must be in [0, 1), got {cfg.epsilon}")
    need(cfg.alpha >= 0.0, f"alpha must be >= 0, got {cfg.alpha}")
    need(cfg.dim >= 1 and cfg.heads >= 1 and cfg.layers >= 0, "model dimensions must be positive")
    need(cfg.mask_hidden >= 1, f"mask_hidden must be >= 1, got {cfg.mask_hidden}")
    need(cfg.dim % (2 * cfg.heads) == 0,
         f"dim={cfg.dim} must be divisible by 2*heads={2 * cfg.heads} for the query/key split")
    need(cfg.train_per_class >= 1, f"train_per_class must be >= 1, got {cfg.train_per_class}")
    need(cfg.test_per_class >= 0, f"test_per_class must be >= 0, got {cfg.test_per_class}")
    need(cfg.train_subjects >= 1 and cfg.test_subjects >= 1, "subject counts must be >= 1")
    need(cfg.snr_lo <= cfg.snr_hi, f"snr_lo={cfg.snr_lo} exceeds snr_hi={cfg.snr_hi}")
    return cfg


def parse_config(overrides: dict, config_file: str | None = None) -> RunConfig:
    """Merge defaults, an optional config file, and explicit overrides."""
    values = dataclasses.asdict(RunConfig())
    if config_file:
        try:
            values.update(parse_config_file(config_file))
        except OSError as exc:
            raise UsageError(f"cannot read config file {config_file}: {exc}") from exc
    for key, value in overrides.items():
        if key not in _FIELDS:
            raise UsageError(f"unknown config key '{key}'")
        if value is not None:
            values[key] = value
    return validate_config(RunConfig(**values))
