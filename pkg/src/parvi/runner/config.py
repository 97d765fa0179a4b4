"""Run configuration: flat ``key = value`` text, validated into :class:`RunConfig`.

Lines starting with ``#`` or ``;`` are comments.  Keys are case-sensitive and
unknown keys are rejected.  Lists (e.g. ``target_mean``) are comma-separated.
"""

from __future__ import annotations

import configparser
import math
import os
from dataclasses import asdict, dataclass, field, fields

from ..dynamics import AccelParams, Method
from ..errors import ParviError
from ..fields import ESTIMATORS
from ..kernel import BandwidthPolicy

__all__ = ["ConfigError", "RunConfig", "parse_config_text", "validate_config", "load_config", "KEYS"]


class ConfigError(ParviError, ValueError):
    """Configuration rejected; ``errors`` lists every violation."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid configuration:\n" + "\n".join(f"  - {e}" for e in self.errors))


@dataclass(frozen=True)
class RunConfig:
    estimator: str = "blob"
    dynamics: str = "wgd"
    target: str = "gaussian"

    bandwidth: str = "median"
    h0: float | None = None
    he_trust_ratio: float = 2.0
    he_probe_delta: float = 0.1
    gfsf_reg: float = 1e-5
    gfsf_reg_mode: str = "relative"
    svgd_unit_kernel: bool = True

    step_size: float = 0.01
    decay: float = 0.0
    burn_in: int = 0
    alpha: float = 3.9
    mu: float = 1000.0
    beta: float = 0.2
    po_momentum: float = 0.7
    po_noise_var: float = 0.0
    adagrad: bool = False
    adagrad_rho: float = 0.9
    wnes_freeze: bool = False

    target_dim: int = 2
    target_mean: tuple = (0.0,)
    target_var: tuple = (1.0,)
    dataset: str = "synthetic"
    dataset_header: bool = False
    split_seed: int = 0
    train_fraction: float = 0.8
    synthetic_n: int = 2000
    synthetic_d: int = 10
    a0: float = 1.0
    b0: float = 100.0
    batch_size: int = 50

    n_particles: int = 100
    n_iterations: int = 100
    seed: int = 0
    init: str = "gaussian"
    init_mean: tuple = (0.0,)
    init_std: float = 1.0

    output_dir: str = "runs/out"
    metrics_stride: int = 1
    snapshot_stride: int = 100
    record_wall_clock: bool = False

    # filled in by validation
    resolved: dict = field(default_factory=dict, compare=False)

    def accel_params(self) -> AccelParams:
        return AccelParams(
            method=Method(self.dynamics),
            eps0=self.step_size,
            decay=self.decay,
            burn_in=self.burn_in,
            alpha=self.alpha,
            mu=self.mu,
            beta=self.beta,
            po_momentum=self.po_momentum,
            po_noise_std=math.sqrt(self.po_noise_var),
            adagrad=self.adagrad,
            adagrad_rho=self.adagrad_rho,
            wnes_freeze=self.wnes_freeze,
        )

    @property
    def dim(self) -> int:
        if self.target == "toy_bimodal":
            return 2
        if self.target == "gaussian":
            return self.target_dim
        return -1  # BLR: known after the dataset is loaded

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("resolved")
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig) if f.name != "resolved"}
KEYS = tuple(_FIELD_TYPES)

_CHOICES = {
    "estimator": tuple(ESTIMATORS),
    "dynamics": tuple(m.value for m in Method),
    "target": ("gaussian", "toy_bimodal", "blr"),
    "bandwidth": tuple(p.value for p in BandwidthPolicy),
    "gfsf_reg_mode": ("relative", "absolute"),
    "init": ("gaussian", "prior"),
}


def _to_bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _to_floats(text):
    return tuple(float(p) for p in text.split(",") if p.strip())


def _convert(key, text):
    typ = _FIELD_TYPES[key]
    if typ == "bool":
        return _to_bool(text)
    if typ == "int":
        value = float(text)
        if not value.is_integer():
            raise ValueError(f"not an integer: {text!r}")
        return int(value)
    if typ in ("float", "float | None"):
        return float(text)
    if typ == "tuple":
        values = _to_floats(text)
        if not values:
            raise ValueError("empty list")
        return values
    return text.strip()


def parse_config_text(text: str) -> dict:
    """Parse flat ``key = value`` text into a dict of raw strings."""
    parser = configparser.ConfigParser(
        interpolation=None, comment_prefixes=("#", ";"), inline_comment_prefixes=("#",), strict=True
    )
    parser.optionxform = str
    try:
        parser.read_string("[run]\n" + text)
    except configparser.Error as exc:
        raise ConfigError([f"unparseable config: {exc}"]) from None
    if len(parser.sections()) != 1:
        raise ConfigError(["section headers are not allowed; the format is flat key = value"])
    return dict(parser["run"])


def validate_config(text: str, base_dir: str | None = None) -> RunConfig:
    """Parse and validate config text, collecting every violation."""
    raw = parse_config_text(text)
    errors = []
    values = {}
    for key, val in raw.items():
        if key not in _FIELD_TYPES:
            errors.append(f"unknown key {key!r}")
            continue
        try:
            values[key] = _convert(key, val)
        except ValueError as exc:
            errors.append(f"{key}: {exc}")

    for key, choices in _CHOICES.items():
        if key in values and values[key] not in choices:
            errors.append(f"{key}: {values[key]!r} is not one of {', '.join(choices)}")

    cfg = RunConfig(**values) if not errors else None
    if cfg is None:
        raise ConfigError(errors)

    def need(cond, msg):
        if not cond:
            errors.append(msg)

    need(cfg.step_size > 0 and math.isfinite(cfg.step_size), "step_size must be positive")
    need(cfg.decay >= 0, "decay must be >= 0")
    need(cfg.burn_in >= 0, "burn_in must be >= 0")
    need(cfg.n_particles >= 2, "n_particles must be >= 2")
    need(cfg.n_iterations >= 0, "n_iterations must be >= 0")
    need(cfg.metrics_stride >= 1, "metrics_stride must be >= 1")
    need(cfg.snapshot_stride >= 1, "snapshot_stride must be >= 1")
    need(cfg.h0 is None or cfg.h0 > 0, "h0 must be positive")
    need(cfg.he_trust_ratio > 1, "he_trust_ratio must be > 1")
    need(0 < cfg.he_probe_delta < 1, "he_probe_delta must be in (0, 1)")
    need(cfg.gfsf_reg >= 0, "gfsf_reg must be >= 0")
    need(cfg.po_noise_var >= 0, "po_noise_var must be >= 0")
    need(0 <= cfg.po_momentum < 1, "po_momentum must be in [0, 1)")
    need(0 <= cfg.adagrad_rho < 1, "adagrad_rho must be in [0, 1)")
    need(cfg.init_std > 0, "init_std must be positive")
    if cfg.dynamics == "wag":
        need(cfg.alpha > 3, f"alpha must be > 3 for wag (got {cfg.alpha})")
    if cfg.dynamics == "wnes":
        need(cfg.mu > 0 and cfg.beta > 0, "mu and beta must be positive for wnes")
    if cfg.adagrad:
        need(cfg.dynamics == "wgd", "adagrad applies to dynamics = wgd only")
    if cfg.bandwidth == "fixed":
        need(cfg.h0 is not None, "bandwidth = fixed requires h0")

    if cfg.target == "gaussian":
        need(cfg.target_dim >= 1, "target_dim must be >= 1")
        for key in ("target_mean", "init_mean"):
            need(len(getattr(cfg, key)) in (1, cfg.target_dim), f"{key} must have 1 or target_dim entries")
        need(len(cfg.target_var) in (1, cfg.target_dim), "target_var must have 1 or target_dim entries")
        need(all(v > 0 for v in cfg.target_var), "target_var entries must be positive")
        need(cfg.init == "gaussian", "init = prior is only available for target = blr")
    elif cfg.target == "toy_bimodal":
        need(len(cfg.init_mean) in (1, 2), "init_mean must have 1 or 2 entries")
        need(cfg.init == "gaussian", "init = prior is only available for target = blr")
    else:
        need(cfg.a0 > 0 and cfg.b0 > 0, "a0 and b0 must be positive")
        need(cfg.batch_size >= 1, "batch_size must be >= 1")
        need(0 < cfg.train_fraction < 1, "train_fraction must be in (0, 1)")
        if cfg.dataset == "synthetic":
            need(cfg.synthetic_n >= 2 and cfg.synthetic_d >= 1, "synthetic_n >= 2 and synthetic_d >= 1 required")
        else:
            path = cfg.dataset
            if base_dir and not os.path.isabs(path):
                path = os.path.join(base_dir, path)
            need(os.path.isfile(path), f"dataset file not found: {cfg.dataset}")
    if errors:
        raise ConfigError(errors)

    resolved = {"seed": cfg.seed, "seed_defaulted": "seed" not in values}
    if cfg.estimator == "gfsf":
        resolved["gfsf_reg"] = cfg.gfsf_reg
        resolved["gfsf_reg_mode"] = cfg.gfsf_reg_mode
        resolved["gfsf_reg_defaulted"] = "gfsf_reg" not in values
    resolved["base_dir"] = base_dir
    object.__setattr__(cfg, "resolved", resolved)
    return cfg


def load_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError([f"cannot read config {path}: {exc}"]) from None
    return validate_config(text, base_dir=os.path.dirname(os.path.abspath(path)))
