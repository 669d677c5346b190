from __future__ import annotations

import logging

from concurrent.futures import ThreadPoolExecutor
from tqdm import tqdm
from typing import TYPE_CHECKING, Iterable, List, NamedTuple, Optional, Sequence

from .corpus import TAP
from .editseq import DEFAULT_MAX_EDITS, EditSequence, align, truncate
from .lexer import TokenSeq, dedup_bag
from .retrieval import RetrievalIndex, RetrievalResult

if TYPE_CHECKING:
    from ..model.checkpoint import Checkpoint

logger = logging.getLogger(__name__)


class EditExample(NamedTuple):
    """
    A focal-test with its retrieved prototype and the edits between the two focal-tests.
    """
    focal_test: TokenSeq
    retrieval: RetrievalResult
    edits: EditSequence
    assertion: Optional[TokenSeq] = None
    tap_id: Optional[int] = None

    def to_record(self) -> dict:
        return {
            "id": self.tap_id,
            "retrieved_id": self.retrieval.tap_id,
            "score": self.retrieval.score,
            "retrieved_assertion": " ".join(self.retrieval.retrieved_assertion),
            "edits": [edit.to_record() for edit in self.edits],
        }


def prepare_example(focal_test: TokenSeq,
                    index: RetrievalIndex,
                    max_edits: int = DEFAULT_MAX_EDITS,
                    exclude_id: Optional[int] = None,
                    assertion: Optional[TokenSeq] = None) -> EditExample:
    """
    Retrieves the most similar TAP and aligns its focal-test against the query.
    """
    retrieval = index.retrieve_top1(dedup_bag(focal_test), exclude_id)
    edits = truncate(align(retrieval.retrieved_focal_test, focal_test), max_edits)
    return EditExample(focal_test, retrieval, edits, assertion, exclude_id)


def prepare_examples(taps: Iterable[TAP],
                     index: RetrievalIndex,
                     max_edits: int = DEFAULT_MAX_EDITS,
                     workers: int = 1,
                     exclude_self: bool = True) -> List[EditExample]:
    """
    Prepares one example per TAP, excluding the TAP itself from retrieval. Results keep
    input order for any number of workers.
    """
    taps = list(taps)

    def prepare(tap: TAP) -> EditExample:
        example = prepare_example(tap.focal_test, index, max_edits, tap.id if exclude_self else None, tap.assertion)
        return example._replace(tap_id=tap.id)

    if workers <= 1:
        return [prepare(tap) for tap in taps]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(prepare, taps))


class Pipeline:
    """
    Wires retrieval, alignment and (optionally) a trained edit model together.
    Without a checkpoint it is the retrieval-only baseline.
    """

    __slots__ = ("index", "checkpoint", "generator", "max_edits")

    def __init__(self,
                 index: RetrievalIndex,
                 checkpoint: Optional[Checkpoint] = None,
                 beam_size: Optional[int] = None,
                 max_edits: int = DEFAULT_MAX_EDITS) -> None:
        self.index: RetrievalIndex = index
        self.checkpoint: Optional[Checkpoint] = checkpoint
        self.max_edits: int = max_edits
        self.generator = None

        # Attach the model:
        if checkpoint is not None:
            from ..model.editmodel import EditModel
            from ..model.generator import Generator

            model = EditModel(checkpoint.params, checkpoint.vocab, checkpoint.config)
            self.generator = Generator(model, beam_size=beam_size)
            self.max_edits = checkpoint.config.max_edits

    def prepare(self, focal_test: TokenSeq, exclude_id: Optional[int] = None) -> EditExample:
        return prepare_example(focal_test, self.index, self.max_edits, exclude_id)

    def generate(self, focal_test: TokenSeq, exclude_id: Optional[int] = None) -> TokenSeq:
        """
        Retrieve, align, edit. The retrieval-only baseline returns the prototype unchanged.
        """
        example = self.prepare(focal_test, exclude_id)
        if self.generator is None:
            return list(example.retrieval.retrieved_assertion)
        return self.generator.generate(example.retrieval.retrieved_assertion, example.edits)

    def generate_batch(self, focal_tests: Sequence[TokenSeq], workers: int = 1, progress: bool = False) -> List[TokenSeq]:
        """
        Generates for every query; output order matches input order.
        """
        bar = tqdm(total=len(focal_tests), desc="generate", leave=False, disable=not progress)

        def run(focal_test: TokenSeq) -> TokenSeq:
            tokens = self.generate(focal_test)
            bar.update()
            return tokens

        with bar:
            if workers <= 1:
                return [run(focal_test) for focal_test in focal_tests]
            with ThreadPoolExecutor(max_workers=workers) as pool:
                return list(pool.map(run, focal_tests))
