"""Flat ``key = value`` run configuration.

Blank lines and ``#`` comments are ignored. Unknown keys and out-of-range
values raise :class:`ConfigError` naming the offending key. ``sigma2`` is
accepted as an alias for the Butterworth cutoff ``f``.
"""
from dataclasses import dataclass, fields, replace
from pathlib import Path

from irgs.local_gmm import GmmParams
from irgs.localization import ButterworthParams
from irgs.pipeline import ABLATIONS, PipelineConfig
from irgs.quality import QualityParams
from irgs.recon import MODES, LossWeights

ALIASES = {"sigma2": "f"}


class ConfigError(ValueError):
    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass(frozen=True)
class RunConfig:
    # pipeline
    K: int = 3
    ablation: str = "full"
    adjust_background: bool = True
    # quality
    sigma1: float = 0.05
    kernel_size: int = 5
    # butterworth
    n: int = 4
    f: float = 6.0
    # local gmm
    em_iters: int = 20
    variance_floor: float = 1e-4
    gmm_seed: int = 0
    identity: str = "center"
    # loss
    beta: float = 0.1
    gamma: float = 0.5
    zeta: float = 0.0
    grad_through_q: bool = True
    mask_weighted_recon: bool = True
    # model and training
    mode: str = "vae"
    hidden: int = 64
    latent: int = 8
    height: int = 32
    width: int = 32
    optimizer: str = "sgd"
    lr: float = 1e-2
    epochs: int = 10
    seed: int = 0
    # paths
    data: str = ""
    out: str = ""
    model: str = ""

    def validate(self):
        checks = [
            ("K", self.K >= 2, "must be >= 2"),
            ("ablation", self.ablation in ABLATIONS, f"must be one of {ABLATIONS}"),
            ("sigma1", self.sigma1 > 0, "must be positive"),
            ("kernel_size", self.kernel_size >= 1 and self.kernel_size % 2 == 1,
             "must be an odd positive integer"),
            ("kernel_size", self.kernel_size <= min(self.height, self.width),
             "must not exceed the image size"),
            ("n", self.n >= 1, "must be >= 1"),
            ("f", self.f > 0, "must be positive"),
            ("em_iters", self.em_iters >= 1, "must be >= 1"),
            ("variance_floor", self.variance_floor > 0, "must be positive"),
            ("identity", self.identity in ("center", "literal"), "must be center or literal"),
            ("beta", self.beta >= 0, "must be non-negative"),
            ("gamma", self.gamma >= 0, "must be non-negative"),
            ("zeta", 0.0 <= self.zeta <= 1.0, "must lie in [0, 1]"),
            ("mode", self.mode in MODES, f"must be one of {MODES}"),
            ("hidden", self.hidden >= 1, "must be >= 1"),
            ("latent", self.latent >= 1, "must be >= 1"),
            ("height", self.height >= 1, "must be >= 1"),
            ("width", self.width >= 1, "must be >= 1"),
            ("optimizer", self.optimizer in ("sgd", "adam"), "must be sgd or adam"),
            ("lr", self.lr >= 0, "must be non-negative"),
            ("epochs", self.epochs >= 0, "must be >= 0"),
        ]
        for key, ok, msg in checks:
            if not ok:
                raise ConfigError(key, msg)
        return self

    def pipeline_config(self):
        return PipelineConfig(
            K=self.K,
            quality=QualityParams(self.sigma1, self.kernel_size),
            butter=ButterworthParams(self.n, self.f),
            gmm=GmmParams(self.em_iters, self.variance_floor, self.gmm_seed, self.identity),
            loss=LossWeights(self.beta, self.gamma, self.zeta,
                             self.grad_through_q, self.mask_weighted_recon),
            ablation=self.ablation,
            adjust_background=self.adjust_background,
        )

    def updated(self, **overrides):
        return replace(self, **{k: v for k, v in overrides.items() if v is not None}).validate()


_FIELDS = {f.name: f for f in fields(RunConfig)}


def _convert(key, raw, default):
    try:
        if isinstance(default, bool):
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(key, f"cannot parse {raw!r}") from None


def parse_config(text, base=None):
    values = {}
    defaults = base or RunConfig()
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, raw = line.partition("=")
        key = key.strip()
        if not sep:
            raise ConfigError(key or f"line {lineno}", "expected key = value")
        key = ALIASES.get(key, key)
        if key not in _FIELDS:
            raise ConfigError(key, "unknown key")
        values[key] = _convert(key, raw.strip(), getattr(defaults, key))
    return replace(defaults, **values).validate()


def load_config(path):
    return parse_config(Path(path).read_text())


def format_config(cfg):
    lines = []
    for name in _FIELDS:
        val = getattr(cfg, name)
        if isinstance(val, bool):
            val = "true" if val else "false"
        lines.append(f"{name} = {val}")
    return "\n".join(lines) + "\n"
