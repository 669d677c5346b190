from __future__ import annotations

import logging
import math
import numpy as np

from tqdm import tqdm
from typing import Dict, List, Optional, Sequence

from ..core.config import RunConfig
from ..core.corpus import Dataset
from ..core.pipeline import EditExample, prepare_examples
from ..core.retrieval import RetrievalIndex
from ..errors import TrainingError
from ..numcore.ops import scale
from ..numcore.optim import AdamState, adam_step, clip_global_norm
from ..numcore.tensor import Tape
from .checkpoint import Checkpoint, EpochStats
from .editmodel import EditModel, EncodedExample
from .params import ModelParams
from .vocab import build_vocab

logger = logging.getLogger(__name__)


def compile_examples(model: EditModel, examples: Sequence[EditExample]) -> List[EncodedExample]:
    return [model.compile(e.retrieval.retrieved_assertion, e.edits, e.assertion) for e in examples]


def perplexity(model: EditModel, examples: Sequence[EncodedExample]) -> float:
    """
    exp of the mean per-token cross-entropy, without dropout.
    """
    total: float = 0.0
    tokens: int = 0
    for example in examples:
        total += model.example_loss(example).item()
        tokens += len(example.targets)
    return math.exp(min(total / max(tokens, 1), 700.0))


def train_epoch(model: EditModel,
                examples: Sequence[EncodedExample],
                state: AdamState,
                rng: np.random.Generator,
                progress: bool = False) -> float:
    """
    One pass in shuffled order. Each batch accumulates the gradients of its per-example
    tapes, scaled by the batch's token count. Returns the mean per-token loss.
    """
    config = model.config
    params = model.params.trainable()
    order = rng.permutation(len(examples))

    total_loss: float = 0.0
    total_tokens: int = 0
    batches = range(0, len(order), config.batch_size)
    for start in tqdm(batches, desc="batches", leave=False, disable=not progress):
        batch = [examples[i] for i in order[start:start + config.batch_size]]
        n_tokens: int = sum(len(example.targets) for example in batch)
        model.params.zero_grad()

        batch_loss: float = 0.0
        for example in batch:
            with Tape() as tape:
                loss = model.example_loss(example, training=True, rng=rng)
                tape.backward(scale(loss, 1.0 / n_tokens))
            batch_loss += loss.item()

        if not math.isfinite(batch_loss):
            raise TrainingError(f"loss diverged to {batch_loss} in batch starting at position {start}; "
                                f"try a smaller lr (now {config.lr}) or clip (now {config.clip})")

        clip_global_norm(params, config.clip)
        adam_step(params, state)
        total_loss += batch_loss
        total_tokens += n_tokens
    return total_loss / total_tokens


def train(dataset: Dataset, index: RetrievalIndex, config: RunConfig, progress: bool = False) -> Checkpoint:
    """
    Trains the edit model on the training split and keeps the parameters of the epoch
    with the lowest validation perplexity (training perplexity, measured without dropout, when
    there is no validation split). Training stops after `patience` epochs without
    improvement or after `max_epochs`.
    """
    if not dataset.train:
        raise TrainingError("the training split is empty")
    rng = np.random.default_rng(config.seed)

    # Training pairs: retrieve with self-exclusion, align, truncate:
    train_pairs = prepare_examples(dataset.train, index, config.max_edits, config.workers)
    validation_pairs = prepare_examples(dataset.validation, index, config.max_edits, config.workers)

    vocab = build_vocab(dataset.train, config.vocab_max_size, config.vocab_min_count)
    model = EditModel(ModelParams.initialize(config, vocab, rng), vocab, config)
    train_examples = compile_examples(model, train_pairs)
    validation_examples = compile_examples(model, validation_pairs)
    logger.info("Training on %d pairs (%d validation), vocabulary %d", len(train_examples), len(validation_examples), len(vocab))

    state = AdamState(model.params.trainable(), lr=config.lr)
    history: List[EpochStats] = []
    best: Optional[Dict[str, np.ndarray]] = None
    best_epoch: int = 0
    best_perplexity: float = math.inf
    stale: int = 0

    epochs = tqdm(range(1, config.max_epochs + 1), desc="epochs", disable=not progress)
    for epoch in epochs:
        train_loss = train_epoch(model, train_examples, state, rng, progress)

        # Select on validation perplexity; on dropout-free training perplexity when there is no validation split:
        current = perplexity(model, validation_examples or train_examples)
        history.append(EpochStats(epoch, train_loss, current))

        if current < best_perplexity:
            best_perplexity, best_epoch, stale = current, epoch, 0
            best = model.params.snapshot()
        else:
            stale += 1
        logger.info("epoch %d: train loss %.4f, perplexity %.4f (best %.4f at epoch %d, patience %d/%d)",
                    epoch, train_loss, current, best_perplexity, best_epoch, stale, config.patience)

        if stale >= config.patience:
            logger.info("Early stop at epoch %d", epoch)
            break

    if best is not None:
        model.params.restore(best)
    return Checkpoint(model.params, vocab, config, history, best_epoch)
