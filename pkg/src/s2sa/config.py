"""Flat ``key = value`` run configuration.

Lines are ``key = value``; ``#`` starts a comment.  Unknown keys are
rejected.  Command-line overrides are applied on top of the file, and the
``S2SA_SEED`` environment variable, when set, overrides ``seed``.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, fields
from pathlib import Path

from .corpus import SplitSpec
from .decoding import BeamConfig, ContextStrategy, parse_strategy
from .errors import ConfigError, S2SAError
from .model import TrainConfig

SEED_ENV = "S2SA_SEED"


@dataclass
class RunConfig:
    # training
    learning_rate: float = 0.2
    batch_size: int = 128
    dropout_rate: float = 0.2
    max_epochs: int = 10
    adadelta_rho: float = 0.95
    adadelta_eps: float = 1e-6
    grad_clip: float = 0.0
    emb_dim: int = 32
    hidden_dim: int = 32
    init_scale: float = 0.08
    # decoding
    beam_width: int = 10
    max_len: int = 50
    length_normalize: bool = False
    strategy: str = "standard"
    mmi_lambda: float = 1.0
    # data
    train_ratio: float = 0.85
    test_ratio: float = 0.1
    valid_ratio: float = 0.05
    vocab_capacity: int = 25000
    max_tokens: int = 6
    # misc
    seed: int = 1234
    workers: int = 1

    def train_config(self) -> TrainConfig:
        return _build(TrainConfig, learning_rate=self.learning_rate, batch_size=self.batch_size,
                      dropout_rate=self.dropout_rate, max_epochs=self.max_epochs,
                      adadelta_rho=self.adadelta_rho, adadelta_eps=self.adadelta_eps,
                      seed=self.seed, grad_clip=self.grad_clip)

    def beam_config(self) -> BeamConfig:
        return _build(BeamConfig, beam_width=self.beam_width, max_len=self.max_len,
                      length_normalize=self.length_normalize)

    def split_spec(self) -> SplitSpec:
        return _build(SplitSpec, train_ratio=self.train_ratio, test_ratio=self.test_ratio,
                      valid_ratio=self.valid_ratio, seed=self.seed)

    def context_strategy(self) -> ContextStrategy:
        return parse_strategy(self.strategy)

    def dumps(self) -> str:
        lines = ["# effective configuration"]
        for f in fields(self):
            lines.append(f"{f.name} = {_render(getattr(self, f.name))}")
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")


def _build(cls, **kw):
    try:
        return cls(**kw)
    except S2SAError as exc:
        raise ConfigError(str(exc)) from exc


def _render(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    return repr(value) if isinstance(value, float) else str(value)


def _coerce(name: str, raw: str, kind):
    raw = raw.strip()
    try:
        if kind is bool or kind == "bool":
            low = raw.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(raw)
        if kind is int or kind == "int":
            return int(raw)
        if kind is float or kind == "float":
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"bad value for {name}: {raw!r}") from None


_TYPES = {f.name: f.type for f in fields(RunConfig)}


def parse_config(text: str, source: str = "<config>") -> dict[str, object]:
    values: dict[str, object] = {}
    for n, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep:
            raise ConfigError(f"{source}:{n}: expected 'key = value'")
        if key not in _TYPES:
            raise ConfigError(f"{source}:{n}: unknown key {key!r}")
        values[key] = _coerce(key, value, _TYPES[key])
    return values


def load_config(path=None, overrides: dict[str, object] | None = None, env=None) -> RunConfig:
    env = os.environ if env is None else env
    values: dict[str, object] = {}
    if path is not None:
        values.update(parse_config(Path(path).read_text(encoding="utf-8"), str(path)))
    if env.get(SEED_ENV):
        values["seed"] = _coerce("seed", env[SEED_ENV], int)
    for key, value in (overrides or {}).items():
        if key not in _TYPES:
            raise ConfigError(f"unknown key {key!r}")
        values[key] = _coerce(key, value, _TYPES[key]) if isinstance(value, str) else value
    cfg = RunConfig(**values)
    # validate eagerly so bad values fail before any work starts
    cfg.train_config()
    cfg.beam_config()
    cfg.split_spec()
    cfg.context_strategy()
    if cfg.vocab_capacity <= 4 or cfg.max_tokens < 1 or cfg.emb_dim < 1 or cfg.hidden_dim < 1 or cfg.workers < 1:
        raise ConfigError("vocab_capacity must exceed 4; max_tokens, emb_dim, hidden_dim, workers must be positive")
    return cfg
