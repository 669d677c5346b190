from __future__ import annotations

import logging
import numpy as np

from typing import List, NamedTuple, Optional

from ..core.editseq import EditSequence
from ..core.lexer import TokenSeq
from .editmodel import DecoderState, EditModel, EncodedExample, EncoderOutput
from .vocab import Vocabulary

logger = logging.getLogger(__name__)

# Ids the decoder never emits:
_BLOCKED: tuple = (Vocabulary.PAD, Vocabulary.SOS, Vocabulary.EMPTY)


class Hypothesis(NamedTuple):
    ids: List[int]
    log_prob: float
    state: DecoderState
    finished: bool

    @property
    def score(self) -> float:
        # Length-normalised, EOS counted as one step:
        return self.log_prob / (len(self.ids) + 1)


class Generator:
    """
    Decodes assertions from a trained edit model; greedy unless beam_size > 1.
    """

    __slots__ = ("model", "max_len", "beam_size")

    def __init__(self, model: EditModel, max_len: Optional[int] = None, beam_size: Optional[int] = None) -> None:
        self.model: EditModel = model
        self.max_len: int = max_len or model.config.max_decode_len
        self.beam_size: int = beam_size or model.config.beam_size

    def generate(self, retrieved_assertion: TokenSeq, edits: EditSequence) -> TokenSeq:
        """
        Rewrites the retrieved assertion; copied out-of-vocabulary tokens come out verbatim.
        An EOS on the first step yields an empty sequence.
        """
        example = self.model.compile(retrieved_assertion, edits)
        encoded = self.model.encode(example)
        if self.beam_size == 1:
            ids = self._greedy(example, encoded)
        else:
            ids = self._beam(example, encoded)

        tokens: TokenSeq = [example.extended.token(i) for i in ids]
        if not tokens:
            logger.warning("Generation failure: the decoder emitted EOS first")
        return tokens

    def _scores(self, mixture: np.ndarray) -> np.ndarray:
        log_p = np.log(np.maximum(mixture[0].astype(np.float64), 1e-30))
        log_p[list(_BLOCKED)] = -np.inf
        return log_p

    def _greedy(self, example: EncodedExample, encoded: EncoderOutput) -> List[int]:
        state = self.model.initial_state(encoded)
        prev: int = Vocabulary.SOS
        ids: List[int] = []
        for _ in range(self.max_len):
            step = self.model.decode_step(prev, state, encoded, example)
            best = int(np.argmax(self._scores(step.mixture.data)))
            if best == Vocabulary.EOS:
                break
            ids.append(best)
            prev = example.extended.input_id(best)
            state = step.state
        return ids

    def _beam(self, example: EncodedExample, encoded: EncoderOutput) -> List[int]:
        beams: List[Hypothesis] = [Hypothesis([], 0.0, self.model.initial_state(encoded), False)]
        for _ in range(self.max_len):
            if all(h.finished for h in beams):
                break

            candidates: List[Hypothesis] = []
            for hyp in beams:
                if hyp.finished:
                    candidates.append(hyp)
                    continue
                prev = example.extended.input_id(hyp.ids[-1]) if hyp.ids else Vocabulary.SOS
                step = self.model.decode_step(prev, hyp.state, encoded, example)
                log_p = self._scores(step.mixture.data)

                # Stable order keeps ties on the lowest id:
                for token in np.argsort(-log_p, kind="stable")[:self.beam_size]:
                    token = int(token)
                    if not np.isfinite(log_p[token]):
                        break
                    finished = token == Vocabulary.EOS
                    ids = hyp.ids if finished else hyp.ids + [token]
                    candidates.append(Hypothesis(ids, hyp.log_prob + float(log_p[token]), step.state, finished))

            candidates.sort(key=lambda h: -h.score)
            beams = candidates[:self.beam_size]

        finished = [h for h in beams if h.finished]
        return max(finished or beams, key=lambda h: h.score).ids
