from __future__ import annotations

import math

from collections import Counter
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

from sacrebleu.metrics import BLEU

from ..errors import EvaluationError
from .corpus import TAP, AssertType, classify_assertion
from .editseq import edit_distance
from .lexer import TokenSeq
from .retrieval import RetrievalResult

# (label, lower bound exclusive, upper bound inclusive):
DISTANCE_BUCKETS: Tuple[Tuple[str, float, float], ...] = (
    ("0", -1, 0),
    ("1", 0, 1),
    ("2", 1, 2),
    ("3", 2, 3),
    ("(3,5]", 3, 5),
    ("(5,10]", 5, 10),
    (">10", 10, math.inf),
)

ADAPTATION_BUCKETS: Tuple[Tuple[str, float, float], ...] = (
    ("0", -1, 0),
    ("1", 0, 1),
    ("2", 1, 2),
    ("3", 2, 3),
    ("4", 3, 4),
    ("5", 4, 5),
    (">5", 5, math.inf),
)


class TypeScore(NamedTuple):
    correct: int
    total: int

    @property
    def ratio(self) -> float:
        return self.correct / self.total if self.total else 0.0


class EvalReport(NamedTuple):
    """
    Scores of a prediction file against its references.
    """
    total: int
    accuracy: float
    bleu: float
    per_type: Dict[str, TypeScore]
    distance_histogram: Optional[Dict[str, int]] = None
    adaptation: Optional[Dict[str, Dict[str, int]]] = None

    def as_dict(self) -> dict:
        report = {
            "total": self.total,
            "accuracy": round(self.accuracy, 2),
            "bleu": round(self.bleu, 2),
            "per_type": {
                name: {"correct": score.correct, "total": score.total, "ratio": round(score.ratio, 4)}
                for name, score in self.per_type.items()
            },
        }
        if self.distance_histogram is not None:
            report["edit_distance"] = self.distance_histogram
        if self.adaptation is not None:
            report["adaptation"] = self.adaptation
        return report


def _check_lengths(predictions: Sequence[TokenSeq], references: Sequence[TokenSeq]) -> None:
    if len(predictions) != len(references):
        raise EvaluationError(f"{len(predictions)} predictions but {len(references)} references")


def _bucket(distance: int, buckets: Tuple[Tuple[str, float, float], ...]) -> str:
    for label, lower, upper in buckets:
        if lower < distance <= upper:
            return label
    raise EvaluationError(f"distance {distance} falls outside every bucket")


def _histogram(distances: List[int], buckets: Tuple[Tuple[str, float, float], ...]) -> Dict[str, int]:
    counts: Counter = Counter(_bucket(d, buckets) for d in distances)
    return {label: counts.get(label, 0) for label, _, _ in buckets}


def exact_match_accuracy(predictions: Sequence[TokenSeq], references: Sequence[TokenSeq]) -> float:
    """
    Percentage of predictions token-identical to their reference.
    """
    _check_lengths(predictions, references)
    if not references:
        return 0.0
    matches: int = sum(" ".join(p) == " ".join(r) for p, r in zip(predictions, references))
    return 100.0 * matches / len(references)


def corpus_bleu(predictions: Sequence[TokenSeq], references: Sequence[TokenSeq]) -> float:
    """
    Corpus-level BLEU-4 with pooled n-gram counts and no smoothing.

    Sequences reach sacrebleu joined by single spaces, so a string-literal token that
    contains spaces counts as several BLEU units.
    """
    _check_lengths(predictions, references)
    if not references:
        raise EvaluationError("BLEU is undefined on an empty corpus")

    metric = BLEU(tokenize="none", smooth_method="none", force=True)
    result = metric.corpus_score([" ".join(p) for p in predictions], [[" ".join(r) for r in references]])
    return float(result.score)


def edit_distance_table(taps: Sequence[TAP], retrievals: Sequence[RetrievalResult]) -> Dict[str, int]:
    """
    Buckets the distance between each retrieved assertion and the ground truth.
    """
    if len(taps) != len(retrievals):
        raise EvaluationError(f"{len(taps)} TAPs but {len(retrievals)} retrieval results")
    distances = [edit_distance(r.retrieved_assertion, tap.assertion) for tap, r in zip(taps, retrievals)]
    return _histogram(distances, DISTANCE_BUCKETS)


def per_type_report(predictions: Sequence[TokenSeq], references: Sequence[TokenSeq]) -> Dict[str, TypeScore]:
    """
    Exact-match counts per assert type of the reference; empty types are left out.
    """
    _check_lengths(predictions, references)
    correct: Counter = Counter()
    total: Counter = Counter()
    for prediction, reference in zip(predictions, references):
        assert_type: AssertType = classify_assertion(reference)
        total[assert_type] += 1
        correct[assert_type] += list(prediction) == list(reference)
    return {t.value: TypeScore(correct[t], total[t]) for t in AssertType if total[t]}


def adaptation_table(retrieved: Sequence[TokenSeq],
                     predictions: Sequence[TokenSeq],
                     references: Sequence[TokenSeq]) -> Dict[str, Dict[str, int]]:
    """
    How far each prediction moved away from its retrieved prototype, split by
    whether the prediction is correct.
    """
    _check_lengths(predictions, references)
    _check_lengths(retrieved, references)

    rows: Dict[str, List[int]] = {"correct": [], "incorrect": []}
    for prototype, prediction, reference in zip(retrieved, predictions, references):
        row = "correct" if list(prediction) == list(reference) else "incorrect"
        rows[row].append(edit_distance(prototype, prediction))
    return {row: _histogram(distances, ADAPTATION_BUCKETS) for row, distances in rows.items()}


def evaluate(predictions: Sequence[TokenSeq],
             references: Sequence[TokenSeq],
             retrieved: Optional[Sequence[TokenSeq]] = None) -> EvalReport:
    per_type = per_type_report(predictions, references)

    distance_histogram: Optional[Dict[str, int]] = None
    adaptation: Optional[Dict[str, Dict[str, int]]] = None
    if retrieved is not None:
        distance_histogram = _histogram([edit_distance(p, r) for p, r in zip(retrieved, references)], DISTANCE_BUCKETS)
        adaptation = adaptation_table(retrieved, predictions, references)

    return EvalReport(
        total=len(references),
        accuracy=exact_match_accuracy(predictions, references),
        bleu=corpus_bleu(predictions, references),
        per_type=per_type,
        distance_histogram=distance_histogram,
        adaptation=adaptation,
    )


def render_table(report: EvalReport) -> str:
    """
    Renders a report as aligned plain-text tables.
    """
    lines: List[str] = [
        f"{'Total':<12}{report.total:>10}",
        f"{'Accuracy':<12}{report.accuracy:>10.2f}",
        f"{'BLEU':<12}{report.bleu:>10.2f}",
        "",
        f"{'AssertType':<14}{'Correct':>9}{'Total':>9}{'Ratio':>9}",
    ]
    for name, score in report.per_type.items():
        lines.append(f"{name:<14}{score.correct:>9}{score.total:>9}{score.ratio:>9.2%}")

    if report.distance_histogram is not None:
        lines += ["", "Edit distance (retrieved vs. reference)"]
        lines.append("".join(f"{label:>9}" for label in report.distance_histogram))
        lines.append("".join(f"{count:>9}" for count in report.distance_histogram.values()))

    if report.adaptation is not None:
        lines += ["", "Edit distance (retrieved vs. prediction)"]
        labels = next(iter(report.adaptation.values()))
        lines.append(f"{'':<11}" + "".join(f"{label:>7}" for label in labels))
        for row, counts in report.adaptation.items():
            lines.append(f"{row:<11}" + "".join(f"{count:>7}" for count in counts.values()))

    return "\n".join(lines)
