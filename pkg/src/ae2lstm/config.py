"""Pipeline configuration.

Defaults reproduce the published setup: feature size 1000 for every AE,
500 LSTM hidden units, learning rate 1e-4, 400 AE epochs, at most 1000 LSTM
epochs with early stopping, batch size 32, 5 folds, 10 seeded runs.

Config files are INI-style with a single ``[pipeline]`` section::

    [pipeline]
    dims = 32,32,8
    d = 32
    nh = 32
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ConfigError
from .lstm import LstmTrainConfig
from .sparse_ae import AeTrainConfig

OPTIMIZERS = ("sgd", "adam")


@dataclass(frozen=True)
class PipelineConfig:
    # data
    manifest: str = ""
    n_patients: int = 119
    dims: tuple[int, int, int] = (192, 192, 12)
    poor_fraction: float = 0.34
    drop_empty_slices: bool = False
    # autoencoders
    d: int = 1000
    d_final: int = 0  # 0 means "same as d"
    rho: float = 0.05
    beta: float = 4.0
    lam: float = 0.004
    ae_epochs: int = 400
    ae_optimizer: str = "sgd"
    ae_lr: float = 1e-4
    ae_batch_size: int = 32
    # lstm
    nh: int = 500
    optimizer: str = "adam"
    lr: float = 1e-4
    lstm_epochs: int = 1000
    batch_size: int = 32
    patience: int = 20
    val_fraction: float = 0.2
    # protocol
    k_folds: int = 5
    n_runs: int = 10
    seed: int = 0

    def __post_init__(self):
        validate(self)

    @property
    def fusion_size(self) -> int:
        return self.d_final or self.d

    def ae_train_config(self, seed: int) -> AeTrainConfig:
        return AeTrainConfig(self.ae_epochs, self.ae_batch_size, self.ae_optimizer, self.ae_lr, seed)

    def lstm_train_config(self, seed: int) -> LstmTrainConfig:
        return LstmTrainConfig(self.optimizer, self.lr, self.lstm_epochs, self.batch_size,
                               self.patience, self.val_fraction, seed)

    def replace(self, **changes) -> "PipelineConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


_POSITIVE_INTS = ("n_patients", "d", "ae_epochs", "ae_batch_size", "nh", "lstm_epochs", "batch_size", "patience", "n_runs")


def validate(cfg: PipelineConfig):
    for name in _POSITIVE_INTS:
        v = getattr(cfg, name)
        if isinstance(v, bool) or not isinstance(v, int) or v < 1:
            raise ConfigError(name, f"must be a positive integer, got {v!r}")
    if not isinstance(cfg.d_final, int) or cfg.d_final < 0:
        raise ConfigError("d_final", f"must be >= 0 (0 = same as d), got {cfg.d_final!r}")
    if len(cfg.dims) != 3 or any(not isinstance(k, int) for k in cfg.dims) \
            or cfg.dims[0] < 4 or cfg.dims[1] < 4 or cfg.dims[2] < 1:
        raise ConfigError("dims", f"need three integers with nx, ny >= 4 and nz >= 1, got {cfg.dims!r}")
    if not 0 < cfg.poor_fraction < 1:
        raise ConfigError("poor_fraction", f"must lie in (0, 1), got {cfg.poor_fraction}")
    if not 0 < cfg.rho < 1:
        raise ConfigError("rho", f"must lie in (0, 1), got {cfg.rho}")
    for name in ("beta", "lam"):
        if getattr(cfg, name) < 0:
            raise ConfigError(name, "must be >= 0")
    for name in ("lr", "ae_lr"):
        if not getattr(cfg, name) > 0:
            raise ConfigError(name, "must be > 0")
    for name in ("optimizer", "ae_optimizer"):
        if getattr(cfg, name) not in OPTIMIZERS:
            raise ConfigError(name, f"must be one of {OPTIMIZERS}, got {getattr(cfg, name)!r}")
    if not 0 < cfg.val_fraction < 1:
        raise ConfigError("val_fraction", f"must lie in (0, 1), got {cfg.val_fraction}")
    if isinstance(cfg.k_folds, bool) or not isinstance(cfg.k_folds, int) or cfg.k_folds < 2:
        raise ConfigError("k_folds", f"must be an integer >= 2, got {cfg.k_folds!r}")
    if isinstance(cfg.seed, bool) or not isinstance(cfg.seed, int) or cfg.seed < 0:
        raise ConfigError("seed", f"must be a non-negative integer, got {cfg.seed!r}")


FIELD_TYPES = {f.name: f.type for f in fields(PipelineConfig)}


def coerce(name: str, raw: str):
    """Parse one textual value into the field's type."""
    if name not in FIELD_TYPES:
        raise ConfigError(name, "unknown configuration field")
    kind = FIELD_TYPES[name]
    text = str(raw).strip()
    try:
        if kind == "int":
            return int(text)
        if kind == "float":
            return float(text)
        if kind == "bool":
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if kind.startswith("tuple"):
            return tuple(int(v) for v in text.replace("x", ",").split(","))
        return text
    except ValueError:
        raise ConfigError(name, f"cannot parse {raw!r} as {kind}") from None


def load_config(path=None, overrides: dict | None = None) -> PipelineConfig:
    """Defaults <- config file <- overrides (flag wins). Validation is all-or-nothing."""
    values = {}
    if path is not None:
        parser = configparser.ConfigParser()
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError("config", f"cannot read {path}: {exc}") from None
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ConfigError("config", f"{path}: {exc}") from None
        if not parser.has_section("pipeline"):
            raise ConfigError("config", f"{path} has no [pipeline] section")
        for key, raw in parser.items("pipeline"):
            values[key] = coerce(key, raw)
    for key, raw in (overrides or {}).items():
        if raw is not None:
            values[key] = coerce(key, raw) if isinstance(raw, str) else raw
    return PipelineConfig(**values)


def dump_config(cfg: PipelineConfig) -> str:
    lines = ["[pipeline]"]
    for name, value in cfg.to_dict().items():
        if isinstance(value, tuple):
            value = ",".join(str(v) for v in value)
        lines.append(f"{name} = {value}")
    return "\n".join(lines) + "\n"
