from __future__ import annotations

import logging
import numpy as np

from pathlib import Path
from typing import Dict, Iterator, List, Optional, Tuple

from ..core.config import RunConfig
from ..core.editseq import EditAction
from ..errors import CheckpointError
from ..numcore.layers import LSTMWeights
from ..numcore.tensor import DEFAULT_DTYPE, Tensor
from .vocab import Vocabulary

logger = logging.getLogger(__name__)

INIT_SCALE: float = 0.1
FORGET_BIAS: float = 1.0

ACTIONS: Tuple[EditAction, ...] = (EditAction.INSERT, EditAction.DELETE, EditAction.EQUAL, EditAction.REPLACE)
ACTION_IDS: Dict[EditAction, int] = {action: i for i, action in enumerate(ACTIONS)}

LSTM_LAYERS: Tuple[str, ...] = (
    "edit_context_fwd", "edit_context_bwd",
    "assertion_context_fwd", "assertion_context_bwd",
    "edit_modeling_fwd", "edit_modeling_bwd",
    "assertion_modeling_fwd", "assertion_modeling_bwd",
    "decoder",
)


def parameter_shapes(config: RunConfig, vocab_size: int) -> Dict[str, Tuple[int, ...]]:
    """
    Names and shapes of every model array, in checkpoint order.
    """
    e, a, h, d = config.embed_dim, config.action_dim, config.hidden_dim, config.decoder_dim
    inputs: Dict[str, int] = {
        "edit_context": 2 * e + a,
        "assertion_context": e,
        "edit_modeling": 4 * h,
        "assertion_modeling": 4 * h,
    }

    shapes: Dict[str, Tuple[int, ...]] = {
        "token_embedding": (vocab_size, e),
        "action_embedding": (len(ACTIONS), a),
    }
    for layer in LSTM_LAYERS[:-1]:
        width = inputs[layer.rsplit("_", 1)[0]]
        shapes[f"{layer}.w_x"] = (width, 4 * h)
        shapes[f"{layer}.w_h"] = (h, 4 * h)
        shapes[f"{layer}.b"] = (4 * h,)

    shapes.update({
        "w_alpha": (2 * h, 2 * h),
        "init_h.w": (4 * h, d),
        "init_h.b": (d,),
        "init_c.w": (4 * h, d),
        "init_c.b": (d,),
        "decoder.w_x": (e + d, 4 * d),
        "decoder.w_h": (d, 4 * d),
        "decoder.b": (4 * d,),
        "attend_assertion": (d, 2 * h),
        "attend_edits": (d, 2 * h),
        "v_c": (4 * h + d, d),
        "v_out": (d, vocab_size),
        "gamma.w": (4 * h + d, 1),
        "gamma.b": (1,),
        "theta.w": (4 * h + d, 1),
        "theta.b": (1,),
    })
    return shapes


class ModelParams:
    """
    All arrays of the edit model, addressable by name.
    """

    __slots__ = ("tensors",)

    def __init__(self, tensors: Dict[str, Tensor]) -> None:
        self.tensors: Dict[str, Tensor] = tensors

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def __iter__(self) -> Iterator[Tuple[str, Tensor]]:
        return iter(self.tensors.items())

    def lstm(self, layer: str) -> LSTMWeights:
        return LSTMWeights(self.tensors[f"{layer}.w_x"], self.tensors[f"{layer}.w_h"], self.tensors[f"{layer}.b"])

    def trainable(self) -> List[Tensor]:
        return [t for t in self.tensors.values() if t.requires_grad]

    def zero_grad(self) -> None:
        for t in self.tensors.values():
            t.zero_grad()

    def to(self, dtype) -> ModelParams:
        """
        Copies the parameters to another float precision.
        """
        return ModelParams({
            name: Tensor(t.data.astype(dtype), requires_grad=t.requires_grad, name=name)
            for name, t in self.tensors.items()
        })

    def snapshot(self) -> Dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self.tensors.items()}

    def restore(self, arrays: Dict[str, np.ndarray]) -> None:
        for name, data in arrays.items():
            self.tensors[name].data[...] = data

    @classmethod
    def initialize(cls, config: RunConfig, vocab: Vocabulary, rng: np.random.Generator, dtype=DEFAULT_DTYPE) -> ModelParams:
        """
        Uniform(-0.1, 0.1) weights, zero biases, forget-gate biases at one.
        """
        tensors: Dict[str, Tensor] = {}
        for name, shape in parameter_shapes(config, len(vocab)).items():
            if name.endswith(".b"):
                data = np.zeros(shape)
                if name.rsplit(".", 1)[0] in LSTM_LAYERS:
                    hidden = shape[0] // 4
                    data[hidden:2 * hidden] = FORGET_BIAS
            else:
                data = rng.uniform(-INIT_SCALE, INIT_SCALE, size=shape)
            tensors[name] = Tensor(data, requires_grad=True, name=name, dtype=dtype)

        if config.embedding_mode == "pretrained":
            found = load_pretrained_embeddings(config.embedding_path, vocab, tensors["token_embedding"].data)
            tensors["token_embedding"].requires_grad = False
            logger.info("Loaded %d/%d pre-trained embeddings (frozen)", found, len(vocab))
        return cls(tensors)


def load_pretrained_embeddings(path: Optional[str], vocab: Vocabulary, table: np.ndarray) -> int:
    """
    Copies vectors of vocabulary tokens from a `token f1 ... fN` text file into the table.
    """
    if not path or not Path(path).exists():
        raise FileNotFoundError(f"embedding file '{path}' does not exist")

    found: int = 0
    width: int = table.shape[1]
    with open(path, "r", encoding="utf-8") as f:
        for line_number, line in enumerate(f, start=1):
            parts = line.rstrip("\n").split(" ")
            if len(parts) == 2 and line_number == 1:
                # fastText header: "<count> <dim>"
                continue
            token, values = parts[0], parts[1:]
            if token not in vocab:
                continue
            if len(values) != width:
                raise CheckpointError(f"'{path}' line {line_number}: expected {width} values, got {len(values)}")
            table[vocab.id(token)] = np.asarray(values, dtype=table.dtype)
            found += 1
    return found
