from __future__ import annotations

import json

from pathlib import Path
from typing import Any, Dict, NamedTuple, Optional

from ..errors import ConfigError


class RunConfig(NamedTuple):
    """
    Everything a run depends on. Field names double as JSON config keys.
    """
    dataset: Optional[str] = None
    format: str = "jsonl"
    coefficient: str = "jaccard"
    vocab_max_size: int = 50000
    vocab_min_count: int = 1
    embed_dim: int = 300
    action_dim: int = 16
    hidden_dim: int = 256
    decoder_dim: int = 512
    lr: float = 0.001
    clip: float = 5.0
    batch_size: int = 8
    dropout: float = 0.2
    max_edits: int = 512
    patience: int = 5
    max_epochs: int = 200
    max_decode_len: int = 64
    beam_size: int = 1
    seed: int = 0
    embedding_mode: str = "random"
    embedding_path: Optional[str] = None
    workers: int = 1

    COEFFICIENTS = ("jaccard", "dice", "overlap")
    EMBEDDING_MODES = ("random", "pretrained")

    @classmethod
    def from_dict(cls, values: Dict[str, Any]) -> RunConfig:
        unknown = sorted(set(values) - set(cls._fields))
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
        return cls(**values).validate()

    @classmethod
    def from_file(cls, path: str | Path) -> RunConfig:
        try:
            with open(path, "r", encoding="utf-8") as f:
                values = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"config file '{path}' is not valid JSON: {e.msg}") from e
        if not isinstance(values, dict):
            raise ConfigError(f"config file '{path}' must hold a JSON object")
        return cls.from_dict(values)

    def override(self, **values: Any) -> RunConfig:
        """
        Returns a copy where every non-None value replaces the current one.
        """
        return self._replace(**{k: v for k, v in values.items() if v is not None}).validate()

    def to_dict(self) -> Dict[str, Any]:
        return dict(self._asdict())

    def validate(self) -> RunConfig:
        for field in ("vocab_max_size", "embed_dim", "action_dim", "hidden_dim", "decoder_dim",
                      "batch_size", "max_edits", "patience", "max_epochs", "max_decode_len", "beam_size", "workers"):
            if getattr(self, field) <= 0:
                raise ConfigError(f"{field} must be positive, got {getattr(self, field)}")
        if self.coefficient not in RunConfig.COEFFICIENTS:
            raise ConfigError(f"coefficient must be one of {', '.join(RunConfig.COEFFICIENTS)}, got '{self.coefficient}'")
        if self.embedding_mode not in RunConfig.EMBEDDING_MODES:
            raise ConfigError(f"embedding_mode must be one of {', '.join(RunConfig.EMBEDDING_MODES)}")
        if self.embedding_mode == "pretrained" and not self.embedding_path:
            raise ConfigError("embedding_mode 'pretrained' needs embedding_path")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must lie in [0, 1), got {self.dropout}")
        if self.lr <= 0 or self.clip <= 0:
            raise ConfigError("lr and clip must be positive")
        if self.vocab_min_count < 1:
            raise ConfigError("vocab_min_count must be at least 1")
        if self.format not in ("jsonl", "parallel-text"):
            raise ConfigError(f"format must be 'jsonl' or 'parallel-text', got '{self.format}'")
        return self
