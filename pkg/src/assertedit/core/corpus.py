from __future__ import annotations

import json
import logging
import numpy as np

from collections import Counter
from enum import Enum
from pathlib import Path
from typing import Container, Dict, Iterable, Iterator, List, NamedTuple, Optional, Tuple

from ..errors import DatasetError, LexError
from .lexer import TokenSeq, tokenize

logger = logging.getLogger(__name__)


class TAP(NamedTuple):
    """
    A test-assert pair: focal-test tokens and the assertion written for them.
    """
    id: int
    focal_test: TokenSeq
    assertion: TokenSeq


class AssertType(Enum):
    EQUALS = "Equals"
    TRUE = "True"
    THAT = "That"
    NOT_NULL = "NotNull"
    FALSE = "False"
    NULL = "Null"
    ARRAY_EQUALS = "ArrayEquals"
    SAME = "Same"
    OTHER = "Other"


_ASSERT_SUFFIXES: Dict[str, AssertType] = {t.value: t for t in AssertType if t is not AssertType.OTHER}


def classify_assertion(assertion: TokenSeq) -> AssertType:
    """
    Classifies an assertion by the first token starting with "assert".
    """
    for token in assertion:
        if token.startswith("assert"):
            return _ASSERT_SUFFIXES.get(token[len("assert"):], AssertType.OTHER)
    return AssertType.OTHER


class SplitStats(NamedTuple):
    size: int
    length_histogram: Dict[int, int]
    type_counts: Dict[str, int]

    def as_dict(self) -> dict:
        return {
            "size": self.size,
            "assertion_lengths": {str(k): v for k, v in sorted(self.length_histogram.items())},
            "types": dict(self.type_counts),
        }


class Dataset:
    """
    Train/validation/test splits of TAPs.
    """

    __slots__ = ("name", "train", "validation", "test", "rejected")

    SPLITS: Tuple[str, ...] = ("train", "validation", "test")

    def __init__(self,
                 name: str,
                 train: Optional[List[TAP]] = None,
                 validation: Optional[List[TAP]] = None,
                 test: Optional[List[TAP]] = None,
                 rejected: int = 0) -> None:
        self.name: str = name
        self.train: List[TAP] = list(train or [])
        self.validation: List[TAP] = list(validation or [])
        self.test: List[TAP] = list(test or [])
        self.rejected: int = rejected

        # Ids must be unique across all splits:
        seen: set = set()
        for split in Dataset.SPLITS:
            for tap in self.split(split):
                if tap.id in seen:
                    raise DatasetError(f"duplicate TAP id {tap.id} in dataset '{name}'")
                seen.add(tap.id)

    def split(self, name: str) -> List[TAP]:
        if name not in Dataset.SPLITS:
            raise DatasetError(f"unknown split '{name}', expected one of {', '.join(Dataset.SPLITS)}")
        return getattr(self, name)

    def sizes(self) -> Dict[str, int]:
        return {split: len(self.split(split)) for split in Dataset.SPLITS}

    def __iter__(self) -> Iterator[TAP]:
        for split in Dataset.SPLITS:
            yield from self.split(split)

    def __len__(self) -> int:
        return sum(self.sizes().values())


_SPLIT_DIRS: Dict[str, Tuple[str, ...]] = {
    "train": ("train",),
    "validation": ("validation", "valid", "eval"),
    "test": ("test",),
}

FOCAL_FILE: str = "focal.txt"
ASSERTION_FILE: str = "assertion.txt"


def load_dataset(path: str | Path, format: str = "jsonl", split: str = "train", name: Optional[str] = None) -> Dataset:
    """
    Loads TAPs from a JSON Lines file or from parallel focal/assertion text files.

    A single source (one .jsonl file, or one directory holding focal.txt and
    assertion.txt) lands in `split`; a directory of per-split sources fills every
    split it finds.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"dataset path '{path}' does not exist")
    if split not in Dataset.SPLITS:
        raise DatasetError(f"unknown split '{split}'")

    splits: Dict[str, List[TAP]] = {s: [] for s in Dataset.SPLITS}
    rejected: int = 0
    next_id: int = 0

    for split_name, source in _find_sources(path, format, split):
        if format == "jsonl":
            taps, dropped = _read_jsonl(source, next_id)
        elif format == "parallel-text":
            taps, dropped = _read_parallel(source, next_id)
        else:
            raise DatasetError(f"unknown dataset format '{format}'")

        splits[split_name].extend(taps)
        rejected += dropped
        next_id = max([next_id] + [tap.id + 1 for tap in taps])

    if rejected:
        logger.warning("Rejected %d record(s) while loading '%s'", rejected, path)

    return Dataset(name or path.stem, rejected=rejected, **splits)


def _find_sources(path: Path, format: str, split: str) -> List[Tuple[str, Path]]:
    suffix: str = ".jsonl"

    if format == "jsonl" and path.is_file():
        return [(split, path)]
    if format == "parallel-text" and (path / FOCAL_FILE).exists():
        return [(split, path)]
    if not path.is_dir():
        raise DatasetError(f"'{path}' is not a {format} source")

    # Per-split layout:
    sources: List[Tuple[str, Path]] = []
    for split_name, candidates in _SPLIT_DIRS.items():
        for candidate in candidates:
            source = path / (candidate + suffix) if format == "jsonl" else path / candidate
            if source.exists():
                sources.append((split_name, source))
                break
    return sources


def _read_jsonl(path: Path, first_id: int) -> Tuple[List[TAP], int]:
    taps: List[TAP] = []
    rejected: int = 0

    with open(path, "r", encoding="utf-8") as f:
        for line_number, line in enumerate(f, start=1):
            if not line.strip():
                continue

            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise DatasetError(f"malformed JSON ({e.msg})", line_number) from e
            if not isinstance(record, dict):
                raise DatasetError("record is not a JSON object", line_number)

            # Schema violations reject the record:
            focal_source = record.get("focal_test")
            assertion_source = record.get("assertion")
            if not isinstance(focal_source, str) or not isinstance(assertion_source, str):
                logger.debug("line %d: missing focal_test/assertion field", line_number)
                rejected += 1
                continue

            try:
                focal_test = tokenize(focal_source)
                assertion = tokenize(assertion_source)
            except LexError as e:
                raise DatasetError(str(e), line_number) from e

            if not focal_test or not assertion:
                rejected += 1
                continue

            tap_id = record.get("id", first_id + len(taps) + rejected)
            if not isinstance(tap_id, int) or isinstance(tap_id, bool):
                raise DatasetError(f"id must be an integer, got {tap_id!r}", line_number)

            taps.append(TAP(tap_id, focal_test, assertion))

    return taps, rejected


def _read_parallel(directory: Path, first_id: int) -> Tuple[List[TAP], int]:
    with open(directory / FOCAL_FILE, "r", encoding="utf-8") as f:
        focal_lines: List[str] = f.read().splitlines()
    with open(directory / ASSERTION_FILE, "r", encoding="utf-8") as f:
        assertion_lines: List[str] = f.read().splitlines()

    if len(focal_lines) != len(assertion_lines):
        raise DatasetError(
            f"'{directory}' has {len(focal_lines)} focal-test lines but {len(assertion_lines)} assertion lines",
            min(len(focal_lines), len(assertion_lines)) + 1,
        )

    taps: List[TAP] = []
    rejected: int = 0
    for i, (focal_line, assertion_line) in enumerate(zip(focal_lines, assertion_lines)):
        focal_test, assertion = focal_line.split(), assertion_line.split()
        if not focal_test or not assertion:
            rejected += 1
            continue
        taps.append(TAP(first_id + i, focal_test, assertion))

    return taps, rejected


def serialize_dataset(d: Dataset, path: str | Path, format: str = "jsonl") -> None:
    """
    Writes the dataset in the per-split layout understood by load_dataset.
    """
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)

    for split in Dataset.SPLITS:
        taps: List[TAP] = d.split(split)
        if format == "jsonl":
            with open(path / f"{split}.jsonl", "w", encoding="utf-8", newline="\n") as f:
                for tap in taps:
                    record = {"id": tap.id, "focal_test": " ".join(tap.focal_test), "assertion": " ".join(tap.assertion)}
                    f.write(json.dumps(record, ensure_ascii=False) + "\n")

        elif format == "parallel-text":
            split_dir = path / split
            split_dir.mkdir(exist_ok=True)
            with open(split_dir / FOCAL_FILE, "w", encoding="utf-8", newline="\n") as f:
                f.writelines(" ".join(tap.focal_test) + "\n" for tap in taps)
            with open(split_dir / ASSERTION_FILE, "w", encoding="utf-8", newline="\n") as f:
                f.writelines(" ".join(tap.assertion) + "\n" for tap in taps)

        else:
            raise DatasetError(f"unknown dataset format '{format}'")


def split_dataset(taps: Iterable[TAP],
                  ratios: Tuple[int, int, int] = (8, 1, 1),
                  seed: int = 0,
                  name: str = "dataset") -> Dataset:
    """
    Shuffles TAPs with a seeded generator and cuts them by ratio.
    """
    taps = list(taps)
    order = np.random.default_rng(seed).permutation(len(taps))
    total: int = sum(ratios)
    n_train: int = len(taps) * ratios[0] // total
    n_valid: int = len(taps) * ratios[1] // total

    shuffled: List[TAP] = [taps[i] for i in order]
    return Dataset(name,
                   train=shuffled[:n_train],
                   validation=shuffled[n_train:n_train + n_valid],
                   test=shuffled[n_train + n_valid:])


def split_stats(d: Dataset) -> Dict[str, SplitStats]:
    """
    Per-split sizes, assertion-length histograms and assert-type counts.
    """
    stats: Dict[str, SplitStats] = {}
    for split in Dataset.SPLITS:
        taps: List[TAP] = d.split(split)
        lengths: Counter = Counter(len(tap.assertion) for tap in taps)
        types: Counter = Counter(classify_assertion(tap.assertion) for tap in taps)
        stats[split] = SplitStats(
            size=len(taps),
            length_histogram=dict(sorted(lengths.items())),
            type_counts={t.value: types.get(t, 0) for t in AssertType},
        )
    return stats


def unknown_token_report(taps: Iterable[TAP], vocab: Container[str]) -> Dict[str, int]:
    """
    Counts assertions using tokens found neither in their focal-test nor in the vocabulary.
    """
    total: int = 0
    unknown: int = 0
    for tap in taps:
        total += 1
        context = set(tap.focal_test)
        if any(token not in context and token not in vocab for token in tap.assertion):
            unknown += 1
    return {"total": total, "with_unknown_tokens": unknown, "known_only": total - unknown}
