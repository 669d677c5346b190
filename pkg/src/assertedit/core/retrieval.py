from __future__ import annotations

import logging

from collections import defaultdict
from pathlib import Path
from typing import BinaryIO, Dict, Iterable, List, NamedTuple, Optional, Tuple, Type

from ..errors import IndexFileError, RetrievalError
from .coefficients.coefficient import Coefficient
from .coefficients.dice import Dice
from .coefficients.jaccard import Jaccard
from .coefficients.overlap import Overlap
from .corpus import TAP
from .lexer import TokenBag, TokenSeq, dedup_bag

logger = logging.getLogger(__name__)

COEFFICIENTS: Dict[str, Type[Coefficient]] = {
    "jaccard": Jaccard,
    "dice": Dice,
    "overlap": Overlap,
}


def get_coefficient(name: str) -> Coefficient:
    try:
        return COEFFICIENTS[name.lower()]()
    except KeyError:
        raise RetrievalError(f"unknown similarity coefficient '{name}', expected one of {', '.join(COEFFICIENTS)}")


def similarity(a: TokenBag, b: TokenBag, c: str = "jaccard") -> float:
    return get_coefficient(c).similarity(a, b)


class RetrievalResult(NamedTuple):
    tap_id: int
    score: float
    retrieved_focal_test: TokenSeq
    retrieved_assertion: TokenSeq


class RetrievalIndex:
    """
    Token bags of a TAP corpus with top-1 lookup under one coefficient.
    """

    __slots__ = ("coefficient", "entries", "taps", "_postings")

    MAGIC: bytes = b"EDIX"
    VERSION: int = 1

    def __init__(self, coefficient: str, entries: List[Tuple[int, TokenBag]], taps: Dict[int, TAP]) -> None:
        self.coefficient: Coefficient = get_coefficient(coefficient)
        self.entries: List[Tuple[int, TokenBag]] = entries
        self.taps: Dict[int, TAP] = taps

        # Inverted index: token -> positions of the entries containing it:
        self._postings: Dict[str, List[int]] = defaultdict(list)
        for position, (_, bag) in enumerate(self.entries):
            for token in bag:
                self._postings[token].append(position)

    def __len__(self) -> int:
        return len(self.entries)

    def retrieve_top1(self, query: TokenBag, exclude_id: Optional[int] = None, accelerated: bool = True) -> RetrievalResult:
        """
        Returns the entry scoring highest against the query; ties go to the lowest TAP id.
        """
        if accelerated:
            best_id, best_score = self._scan_postings(query, exclude_id)
        else:
            best_id, best_score = self._scan_linear(query, exclude_id)

        if best_id is None:
            raise RetrievalError("no retrievable entry: the index is empty after exclusion")

        tap: Optional[TAP] = self.taps.get(best_id)
        if tap is None:
            raise RetrievalError(f"TAP {best_id} is indexed but its payload is not attached")
        return RetrievalResult(best_id, best_score, tap.focal_test, tap.assertion)

    def _scan_linear(self, query: TokenBag, exclude_id: Optional[int]) -> Tuple[Optional[int], float]:
        best_id: Optional[int] = None
        best_score: float = -1.0
        for tap_id, bag in self.entries:
            if tap_id == exclude_id:
                continue
            score = self.coefficient.from_counts(len(query & bag), len(query), len(bag))
            if score > best_score or (score == best_score and tap_id < best_id):
                best_id, best_score = tap_id, score
        return best_id, best_score

    def _scan_postings(self, query: TokenBag, exclude_id: Optional[int]) -> Tuple[Optional[int], float]:
        # Accumulate intersection sizes over the posting lists:
        overlaps: Dict[int, int] = defaultdict(int)
        for token in query:
            for position in self._postings.get(token, ()):
                overlaps[position] += 1

        best_id: Optional[int] = None
        best_score: float = -1.0
        for position, intersection in overlaps.items():
            tap_id, bag = self.entries[position]
            if tap_id == exclude_id:
                continue
            score = self.coefficient.from_counts(intersection, len(query), len(bag))
            if score > best_score or (score == best_score and tap_id < best_id):
                best_id, best_score = tap_id, score

        # Entries sharing no token all score zero; the lowest id among them may still win:
        if best_score <= 0.0:
            for tap_id, bag in self.entries:
                if tap_id == exclude_id:
                    continue
                if best_id is None or best_score < 0.0 or tap_id < best_id:
                    best_id, best_score = tap_id, 0.0
        return best_id, best_score

    def save(self, path: str | Path) -> None:
        """
        Persists the index: header, then per entry its id and length-prefixed tokens.
        """
        with open(path, "wb") as f:
            name: bytes = self.coefficient.name.encode("utf-8")
            f.write(RetrievalIndex.MAGIC)
            f.write(RetrievalIndex.VERSION.to_bytes(4, "little"))
            f.write(len(name).to_bytes(1, "little"))
            f.write(name)
            f.write(len(self.entries).to_bytes(4, "little"))

            for tap_id, bag in self.entries:
                f.write(tap_id.to_bytes(8, "little", signed=True))
                f.write(len(bag).to_bytes(4, "little"))
                for token in sorted(bag):
                    data: bytes = token.encode("utf-8")
                    f.write(len(data).to_bytes(4, "little"))
                    f.write(data)

    @classmethod
    def load(cls, path: str | Path, corpus: Iterable[TAP]) -> RetrievalIndex:
        """
        Reads a persisted index and re-attaches TAP payloads from the corpus.
        """
        with open(path, "rb") as f:
            # Read header:
            if f.read(4) != RetrievalIndex.MAGIC:
                raise IndexFileError(f"'{path}' is not a retrieval index")
            version: int = _read_int(f, 4)
            if version != RetrievalIndex.VERSION:
                raise IndexFileError(f"'{path}' has index version {version}, expected {RetrievalIndex.VERSION}")
            coefficient: str = _read_exact(f, _read_int(f, 1)).decode("utf-8")
            count: int = _read_int(f, 4)

            # Read entries:
            entries: List[Tuple[int, TokenBag]] = []
            for _ in range(count):
                tap_id: int = _read_int(f, 8, signed=True)
                n_tokens: int = _read_int(f, 4)
                bag = dedup_bag([_read_exact(f, _read_int(f, 4)).decode("utf-8") for _ in range(n_tokens)])
                entries.append((tap_id, bag))

        taps: Dict[int, TAP] = {tap.id: tap for tap in corpus}
        missing: List[int] = [tap_id for tap_id, _ in entries if tap_id not in taps]
        if missing:
            raise IndexFileError(f"'{path}' indexes {len(missing)} TAP(s) absent from the corpus, e.g. id {missing[0]}")

        logger.info("Loaded %d-entry %s index from '%s'", count, coefficient, path)
        return cls(coefficient, entries, taps)


def _read_exact(f: BinaryIO, size: int) -> bytes:
    data: bytes = f.read(size)
    if len(data) != size:
        raise IndexFileError("index file is truncated")
    return data


def _read_int(f: BinaryIO, size: int, signed: bool = False) -> int:
    return int.from_bytes(_read_exact(f, size), "little", signed=signed)


def build_index(corpus: Iterable[TAP], c: str = "jaccard") -> RetrievalIndex:
    """
    Indexes every TAP's deduplicated focal-test tokens.
    """
    corpus = list(corpus)
    if not corpus:
        raise RetrievalError("cannot build an index over an empty corpus")

    entries: List[Tuple[int, TokenBag]] = [(tap.id, dedup_bag(tap.focal_test)) for tap in corpus]
    return RetrievalIndex(c, entries, {tap.id: tap for tap in corpus})


def retrieve_top1(index: RetrievalIndex,
                  query: TokenBag,
                  exclude_id: Optional[int] = None,
                  accelerated: bool = True) -> RetrievalResult:
    return index.retrieve_top1(query, exclude_id, accelerated)


def save_index(index: RetrievalIndex, path: str | Path) -> None:
    index.save(path)


def load_index(path: str | Path, corpus: Iterable[TAP]) -> RetrievalIndex:
    return RetrievalIndex.load(path, corpus)
