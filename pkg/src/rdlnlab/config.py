"""Experiment configuration: flat ``key = value`` files with a closed key set.

Blank lines and lines starting with ``#`` are ignored; unknown keys,
duplicate keys and unparsable values are rejected.  ``hidden_dims`` is a
comma-separated list; booleans accept ``true``/``false``.
"""

import dataclasses
from dataclasses import dataclass, field

from .errors import ConfigError
from .rdln import VariantConfig


@dataclass(frozen=True)
class ExperimentConfig:
    # ground-truth HMM
    num_phones: int = 10
    states_per_phone: int = 3
    feature_dim: int = 13
    self_loop_prob: float = 0.5
    mean_scale: float = 0.8
    # corpus
    n_utts: int = 250
    min_frames: int = 20
    max_frames: int = 60
    split_ratio: float = 0.8
    seed: int = 1
    # network and training
    hidden_dims: tuple = (64,)
    learning_rate: float = 0.05
    batch_size: int = 16
    epochs: int = 30
    warm_start_epoch: int = 8
    # variant
    context_source: str = "outputs"
    processing: str = "context_independent"
    incorporation: str = "input_stack"
    context_depth: int = 1
    compress_to_monophone: bool = True
    aux_weight: float = 0.3
    decode_mode: str = "sum"
    output_dir: str = "out"
    _variant: VariantConfig = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(self.hidden_dims))
        self.validate()

    def validate(self):
        errs = []
        for name in ("num_phones", "states_per_phone", "feature_dim", "n_utts",
                     "min_frames", "max_frames", "batch_size", "epochs", "context_depth"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 1:
                errs.append(f"{name} must be an integer >= 1 (got {v!r})")
        if self.n_utts < 2:
            errs.append("n_utts must be >= 2")
        if not 0.0 < self.self_loop_prob < 1.0:
            errs.append("self_loop_prob must lie in (0, 1)")
        if not self.mean_scale > 0:
            errs.append("mean_scale must be positive")
        if not 0.0 < self.split_ratio < 1.0:
            errs.append("split_ratio must lie in (0, 1)")
        if self.min_frames > self.max_frames:
            errs.append("min_frames must not exceed max_frames")
        if self.min_frames < self.states_per_phone:
            errs.append("min_frames must be >= states_per_phone so every utterance holds a whole phone")
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**63:
            errs.append("seed must be a non-negative integer")
        if not self.hidden_dims or any(not isinstance(h, int) or h < 1 for h in self.hidden_dims):
            errs.append("hidden_dims must be a non-empty list of integers >= 1")
        if not self.learning_rate > 0:
            errs.append("learning_rate must be positive")
        if not isinstance(self.warm_start_epoch, int) or not 1 <= self.warm_start_epoch < self.epochs:
            errs.append("warm_start_epoch must satisfy 1 <= warm_start_epoch < epochs")
        if errs:
            raise ConfigError("; ".join(errs))
        try:
            variant = VariantConfig(self.context_source, self.processing, self.incorporation,
                                    self.context_depth, self.compress_to_monophone,
                                    self.aux_weight, self.decode_mode)
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        object.__setattr__(self, "_variant", variant)

    @property
    def variant(self):
        return self._variant

    @property
    def num_pdfs(self):
        return self.num_phones * self.states_per_phone

    def layer_dims(self, input_dim=None):
        return [input_dim or self.feature_dim, *self.hidden_dims, self.num_pdfs]

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig) if f.init}


def _parse_value(name, raw):
    default = _FIELDS[name].default
    if name == "hidden_dims":
        return tuple(int(t) for t in raw.split(",") if t.strip())
    if isinstance(default, bool):
        low = raw.lower()
        if low not in ("true", "false"):
            raise ValueError(f"expected true or false, got {raw!r}")
        return low == "true"
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    return raw


def parse_config(text, **overrides):
    values = {}
    for n, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected key = value")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in _FIELDS:
            raise ConfigError(f"line {n}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {n}: duplicate key {key!r}")
        try:
            values[key] = _parse_value(key, raw)
        except ValueError as exc:
            raise ConfigError(f"line {n}: bad value for {key}: {exc}") from None
    values.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(**values)


def load_config(path, **overrides):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), **overrides)


def dumps_config(cfg):
    lines = []
    for name in _FIELDS:
        v = getattr(cfg, name)
        if name == "hidden_dims":
            v = ",".join(str(h) for h in v)
        elif isinstance(v, bool):
            v = "true" if v else "false"
        lines.append(f"{name} = {v}")
    return "\n".join(lines) + "\n"
