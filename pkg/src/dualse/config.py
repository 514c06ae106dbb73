"""Flat key=value run configuration, shared by the config file format and
the per-key CLI override flags."""

from dataclasses import dataclass, fields

from .errors import ConfigError
from .model import STRUCTURE_VARIANTS

FUSION_MODES = ("adaptive", "equal", "attribute_only", "structure_only")
DATASET_KINDS = ("synthetic", "csv", "idx")

DEFAULT_LAMBDA_GRID = (0.001, 0.01, 0.1, 1.0, 10.0, 100.0, 1000.0)


@dataclass
class RunConfig:
    """Every knob of an experiment; see ``parse_value`` for the accepted
    textual forms used both in config files and on the command line."""

    # dataset source (exactly one kind active, selected by `dataset`)
    dataset: str = "synthetic"
    synth_k: int = 4
    synth_sub_dim: int = 3
    synth_ambient_dim: int = 20
    synth_per_cluster: int = 40
    synth_noise_sigma: float = 0.01
    csv_path: str = ""
    labels_column: int | None = None
    idx_images: str = ""
    idx_labels: str = ""
    per_class: int = 0          # subsample first m per class; 0 = keep all
    normalize: bool = False
    k: int = 0                  # cluster count; 0 = take from labels

    # model / loss
    hidden_dims: tuple = (12,)
    gamma: float = 1.0
    lambda1: float = 1.0
    lambda2: float = 1.0
    structure_variant: str = "mixed_symmetric"
    zs_grad: bool = True
    fusion_in_loss: bool = False

    # training
    pretrain_epochs: int = 500
    finetune_epochs: int = 1000
    lr: float = 1e-3
    seed: int = 0
    log_every: int = 0

    # clustering / outputs
    fusion: str = "adaptive"
    topk: int = 0               # per-row sparsification; 0 = off
    out: str = "out"
    workers: int = 1
    checkpoint: str = ""        # input checkpoint for finetune/eval
    cold_start: bool = False    # allow finetune without a pre-trained state
    lambda1_grid: tuple = DEFAULT_LAMBDA_GRID
    lambda2_grid: tuple = DEFAULT_LAMBDA_GRID


_FIELD_TYPES = {f.name: f for f in fields(RunConfig)}
_DEFAULTS = RunConfig()


def parse_value(key, text):
    """Convert the textual form of one config key to its typed value."""
    if key not in _FIELD_TYPES:
        raise ConfigError(f"unknown config key {key!r}")
    text = text.strip()
    current_default = getattr(_DEFAULTS, key)
    try:
        if key == "labels_column":
            return None if text.lower() in ("", "none") else int(text)
        if key in ("hidden_dims",):
            vals = tuple(int(v) for v in text.split(",") if v.strip())
            if not vals:
                raise ValueError("empty list")
            return vals
        if key in ("lambda1_grid", "lambda2_grid"):
            vals = tuple(float(v) for v in text.split(",") if v.strip())
            if not vals:
                raise ValueError("empty list")
            return vals
        if isinstance(current_default, bool):
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError("expected a boolean")
        if isinstance(current_default, int):
            return int(text)
        if isinstance(current_default, float):
            return float(text)
        return text
    except ValueError as exc:
        raise ConfigError(f"config key {key!r}: cannot parse {text!r} ({exc})") from None


def read_config_file(path):
    """Parse a key=value file with '#' comments into a dict of raw strings."""
    raw = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, value = line.split("=", 1)
            key = key.strip()
            if key not in _FIELD_TYPES:
                raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
            raw[key] = value.strip()
    return raw


def build_config(file_values=None, overrides=None):
    """Layer defaults <- config file <- CLI overrides, then validate."""
    cfg = RunConfig()
    for source in (file_values or {}), (overrides or {}):
        for key, text in source.items():
            setattr(cfg, key, parse_value(key, text))
    validate_config(cfg)
    return cfg


def validate_config(cfg):
    if cfg.dataset not in DATASET_KINDS:
        raise ConfigError(f"dataset must be one of {DATASET_KINDS}, got {cfg.dataset!r}")
    if cfg.dataset == "csv" and not cfg.csv_path:
        raise ConfigError("dataset=csv requires csv_path")
    if cfg.dataset == "idx" and not (cfg.idx_images and cfg.idx_labels):
        raise ConfigError("dataset=idx requires idx_images and idx_labels")
    if cfg.dataset != "csv" and cfg.csv_path:
        raise ConfigError("csv_path set but dataset is not 'csv'")
    if cfg.dataset != "idx" and (cfg.idx_images or cfg.idx_labels):
        raise ConfigError("idx_images/idx_labels set but dataset is not 'idx'")
    if cfg.fusion not in FUSION_MODES:
        raise ConfigError(f"fusion must be one of {FUSION_MODES}, got {cfg.fusion!r}")
    if cfg.structure_variant not in STRUCTURE_VARIANTS:
        raise ConfigError(
            f"structure_variant must be one of {STRUCTURE_VARIANTS}, "
            f"got {cfg.structure_variant!r}"
        )
    if any(d < 1 for d in cfg.hidden_dims):
        raise ConfigError(f"hidden_dims entries must be >= 1, got {cfg.hidden_dims}")
    for name in ("pretrain_epochs", "finetune_epochs", "per_class", "topk", "k", "log_every"):
        if getattr(cfg, name) < 0:
            raise ConfigError(f"{name} must be >= 0, got {getattr(cfg, name)}")
    if not cfg.lr > 0:
        raise ConfigError(f"lr must be > 0, got {cfg.lr}")
    if not cfg.gamma > 0:
        raise ConfigError(f"gamma must be > 0, got {cfg.gamma}")
    if cfg.lambda1 < 0 or cfg.lambda2 < 0:
        raise ConfigError("lambda1 and lambda2 must be >= 0")
    if cfg.workers < 1:
        raise ConfigError(f"workers must be >= 1, got {cfg.workers}")
    if any(v <= 0 for v in cfg.lambda1_grid + cfg.lambda2_grid):
        raise ConfigError("lambda grid values must be > 0")


def config_keys():
    return tuple(_FIELD_TYPES)
