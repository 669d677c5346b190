from __future__ import annotations

import json
import logging
import numpy as np

from pathlib import Path
from typing import Any, BinaryIO, Dict, List, NamedTuple

from ..core.config import RunConfig
from ..errors import CheckpointError, ConfigError
from ..numcore.tensor import Tensor
from .params import ModelParams, parameter_shapes
from .vocab import Vocabulary

logger = logging.getLogger(__name__)

MAGIC: bytes = b"EDAS"
VERSION: int = 1
BLOB_DTYPE: str = "<f4"


class EpochStats(NamedTuple):
    epoch: int
    train_loss: float
    perplexity: float


class Checkpoint(NamedTuple):
    params: ModelParams
    vocab: Vocabulary
    config: RunConfig
    history: List[EpochStats] = []
    best_epoch: int = 0


def save_checkpoint(checkpoint: Checkpoint, path: str | Path) -> None:
    """
    Writes magic, version, a JSON header and the parameters as little-endian f32 blobs
    in header order.
    """
    names: List[Dict[str, Any]] = [
        {"name": name, "shape": list(t.shape), "nbytes": int(t.data.size) * 4, "trainable": t.requires_grad}
        for name, t in checkpoint.params
    ]
    header: bytes = json.dumps({
        "config": checkpoint.config.to_dict(),
        "vocab": checkpoint.vocab.to_list(),
        "params": names,
        "history": [list(stats) for stats in checkpoint.history],
        "best_epoch": checkpoint.best_epoch,
    }).encode("utf-8")

    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(VERSION.to_bytes(4, "little"))
        f.write(len(header).to_bytes(4, "little"))
        f.write(header)
        for _, t in checkpoint.params:
            f.write(np.ascontiguousarray(t.data, dtype=BLOB_DTYPE).tobytes())
    logger.info("Saved checkpoint to '%s' (%d arrays)", path, len(names))


def _read_exact(f: BinaryIO, size: int, what: str) -> bytes:
    data: bytes = f.read(size)
    if len(data) != size:
        raise CheckpointError(f"checkpoint is truncated while reading {what}")
    return data


def load_checkpoint(path: str | Path) -> Checkpoint:
    with open(path, "rb") as f:
        # Read header:
        if f.read(4) != MAGIC:
            raise CheckpointError(f"'{path}' is not a model checkpoint")
        version: int = int.from_bytes(_read_exact(f, 4, "the version"), "little")
        if version != VERSION:
            raise CheckpointError(f"'{path}' has checkpoint version {version}, expected {VERSION}")
        size: int = int.from_bytes(_read_exact(f, 4, "the header length"), "little")
        try:
            header: Dict[str, Any] = json.loads(_read_exact(f, size, "the header").decode("utf-8"))
            config = RunConfig.from_dict(header["config"])
            vocab = Vocabulary.from_list(header["vocab"])
            entries: List[Dict[str, Any]] = header["params"]
        except (ValueError, KeyError, TypeError, ConfigError) as e:
            raise CheckpointError(f"'{path}' has a malformed header: {e}") from e

        # Declared shapes must match the ones the config implies:
        expected = parameter_shapes(config, len(vocab))
        declared = {entry["name"]: tuple(entry["shape"]) for entry in entries}
        if declared != expected:
            raise CheckpointError(f"'{path}' declares parameter shapes inconsistent with its config")

        # Read blobs:
        tensors: Dict[str, Tensor] = {}
        for entry in entries:
            name, shape = entry["name"], tuple(entry["shape"])
            nbytes: int = int(np.prod(shape, dtype=np.int64)) * 4
            if entry.get("nbytes", nbytes) != nbytes:
                raise CheckpointError(f"'{path}': blob '{name}' declares {entry['nbytes']} bytes, shape needs {nbytes}")
            data = np.frombuffer(_read_exact(f, nbytes, f"blob '{name}'"), dtype=BLOB_DTYPE).reshape(shape)
            tensors[name] = Tensor(data.astype(np.float32), requires_grad=entry.get("trainable", True), name=name)

        if f.read(1):
            raise CheckpointError(f"'{path}' has trailing bytes after the last blob")

    history = [EpochStats(int(e), float(loss), float(ppl)) for e, loss, ppl in header.get("history", [])]
    logger.info("Loaded checkpoint from '%s' (vocabulary %d, %d arrays)", path, len(vocab), len(tensors))
    return Checkpoint(ModelParams(tensors), vocab, config, history, int(header.get("best_epoch", 0)))
