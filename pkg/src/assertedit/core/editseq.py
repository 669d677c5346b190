from __future__ import annotations

from enum import Enum
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

from .lexer import TokenSeq

DEFAULT_MAX_EDITS: int = 512


class EditAction(Enum):
    INSERT = "insert"
    DELETE = "delete"
    EQUAL = "equal"
    REPLACE = "replace"


class Edit(NamedTuple):
    """
    One aligned position: a retrieved focal-test token, an input focal-test token
    and the action turning the first into the second. None stands for the empty token.
    """
    retrieved_token: Optional[str]
    input_token: Optional[str]
    action: EditAction

    def to_record(self) -> dict:
        return {"r": self.retrieved_token, "q": self.input_token, "a": self.action.value}

    @classmethod
    def from_record(cls, record: dict) -> Edit:
        return cls(record["r"], record["q"], EditAction(record["a"]))


EditSequence = List[Edit]


def _shortest_script(a: Sequence[str], b: Sequence[str]) -> List[Tuple[str, int, int]]:
    """
    Myers' greedy O(ND) search for a shortest insert/delete script from a to b.
    Yields ("=", i, j), ("-", i, -1) and ("+", -1, j) steps in order.
    """
    n, m = len(a), len(b)
    v: Dict[int, int] = {1: 0}
    trace: List[Dict[int, int]] = []

    # Forward pass, remembering the frontier of every edit distance:
    for d in range(n + m + 1):
        trace.append(dict(v))
        for k in range(-d, d + 1, 2):
            if k == -d or (k != d and v[k - 1] < v[k + 1]):
                x = v[k + 1]
            else:
                x = v[k - 1] + 1
            y = x - k
            while x < n and y < m and a[x] == b[y]:
                x += 1
                y += 1
            v[k] = x
            if x >= n and y >= m:
                break
        else:
            continue
        break

    # Backtrack from the end point:
    script: List[Tuple[str, int, int]] = []
    x, y = n, m
    for d in range(len(trace) - 1, -1, -1):
        v = trace[d]
        k = x - y
        if k == -d or (k != d and v[k - 1] < v[k + 1]):
            prev_k = k + 1
        else:
            prev_k = k - 1
        prev_x = v[prev_k]
        prev_y = prev_x - prev_k

        while x > prev_x and y > prev_y:
            script.append(("=", x - 1, y - 1))
            x -= 1
            y -= 1

        if d > 0:
            if x == prev_x:
                script.append(("+", -1, y - 1))
            else:
                script.append(("-", x - 1, -1))
        x, y = prev_x, prev_y

    script.reverse()
    return script


def align(retrieved: TokenSeq, input: TokenSeq) -> EditSequence:
    """
    Aligns two focal-tests into an edit sequence. Inside every changed hunk the
    deleted and inserted runs are paired positionally into replacements; the
    unpaired rest stays a pure delete or insert.
    """
    edits: EditSequence = []
    deleted: List[str] = []
    inserted: List[str] = []

    def flush() -> None:
        paired: int = min(len(deleted), len(inserted))
        for r_token, q_token in zip(deleted, inserted):
            edits.append(Edit(r_token, q_token, EditAction.REPLACE))
        for r_token in deleted[paired:]:
            edits.append(Edit(r_token, None, EditAction.DELETE))
        for q_token in inserted[paired:]:
            edits.append(Edit(None, q_token, EditAction.INSERT))
        deleted.clear()
        inserted.clear()

    for op, i, j in _shortest_script(retrieved, input):
        if op == "=":
            flush()
            edits.append(Edit(retrieved[i], input[j], EditAction.EQUAL))
        elif op == "-":
            deleted.append(retrieved[i])
        else:
            inserted.append(input[j])
    flush()

    return edits


def project(e: EditSequence, side: str) -> TokenSeq:
    """
    Recovers one of the aligned sequences by reading a single slot of every edit.
    """
    if side == "retrieved":
        return [edit.retrieved_token for edit in e if edit.retrieved_token is not None]
    if side == "input":
        return [edit.input_token for edit in e if edit.input_token is not None]
    raise ValueError(f"side must be 'retrieved' or 'input', got '{side}'")


def truncate(e: EditSequence, limit: int = DEFAULT_MAX_EDITS) -> EditSequence:
    return e[:limit]


def count_changes(e: EditSequence) -> int:
    return sum(1 for edit in e if edit.action is not EditAction.EQUAL)


def edit_distance(a: TokenSeq, b: TokenSeq) -> int:
    """
    Token-level Levenshtein distance with unit costs.
    """
    if len(a) < len(b):
        a, b = b, a

    previous: List[int] = list(range(len(b) + 1))
    for i, a_token in enumerate(a, start=1):
        current: List[int] = [i] + [0] * len(b)
        for j, b_token in enumerate(b, start=1):
            current[j] = min(previous[j] + 1,
                             current[j - 1] + 1,
                             previous[j - 1] + (a_token != b_token))
        previous = current
    return previous[-1]
