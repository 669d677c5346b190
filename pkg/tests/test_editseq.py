from functools import lru_cache

import numpy as np
import pytest

from assertedit.core.editseq import (
    Edit, EditAction, align, count_changes, edit_distance, project, truncate,
)

E, I, D, R = EditAction.EQUAL, EditAction.INSERT, EditAction.DELETE, EditAction.REPLACE


def brute_force_distance(a, b):
    @lru_cache(maxsize=None)
    def go(i, j):
        if i == len(a):
            return len(b) - j
        if j == len(b):
            return len(a) - i
        return min(go(i + 1, j) + 1, go(i, j + 1) + 1, go(i + 1, j + 1) + (a[i] != b[j]))
    return go(0, 0)


def random_pair(rng, max_len=12, alphabet=4):
    a = [f"t{k}" for k in rng.integers(0, alphabet, size=int(rng.integers(0, max_len + 1)))]
    b = [f"t{k}" for k in rng.integers(0, alphabet, size=int(rng.integers(0, max_len + 1)))]
    return a, b


class TestAlign:
    def test_replace(self) -> None:
        assert align(["a", "b", "c"], ["a", "x", "c"]) == [
            Edit("a", "a", E), Edit("b", "x", R), Edit("c", "c", E),
        ]

    def test_insert(self) -> None:
        assert align(["a", "c"], ["a", "b", "c"]) == [
            Edit("a", "a", E), Edit(None, "b", I), Edit("c", "c", E),
        ]

    def test_delete(self) -> None:
        assert align(["a", "b", "c"], ["a", "c"]) == [
            Edit("a", "a", E), Edit("b", None, D), Edit("c", "c", E),
        ]

    def test_uneven_hunk_pairs_then_inserts(self) -> None:
        assert align(["x"], ["y", "z"]) == [Edit("x", "y", R), Edit(None, "z", I)]

    def test_identity_is_all_equal(self) -> None:
        tokens = ["assertEquals", "(", "a", ",", "b", ")"]
        assert all(edit.action is E for edit in align(tokens, tokens))
        assert len(align(tokens, tokens)) == len(tokens)

    def test_empty_sides(self) -> None:
        assert align([], []) == []
        assert align([], ["a"]) == [Edit(None, "a", I)]
        assert align(["a"], []) == [Edit("a", None, D)]

    def test_projection_identities_random(self) -> None:
        rng = np.random.default_rng(0)
        for _ in range(2000):
            a, b = random_pair(rng, max_len=20)
            edits = align(a, b)
            assert project(edits, "retrieved") == a
            assert project(edits, "input") == b
            assert all(edit.action is E for edit in align(a, a))

    def test_equal_count_is_longest_common_subsequence(self) -> None:
        rng = np.random.default_rng(1)
        for _ in range(300):
            a, b = random_pair(rng)
            equal = sum(edit.action is E for edit in align(a, b))
            # |a| + |b| - 2 * LCS equals the insert/delete-only distance:
            indel = len(a) + len(b) - 2 * equal
            assert indel == _indel_distance(tuple(a), tuple(b))

    def test_bad_side(self) -> None:
        with pytest.raises(ValueError):
            project([], "output")


def _indel_distance(a, b):
    @lru_cache(maxsize=None)
    def go(i, j):
        if i == len(a) or j == len(b):
            return len(a) - i + len(b) - j
        if a[i] == b[j]:
            return go(i + 1, j + 1)
        return 1 + min(go(i + 1, j), go(i, j + 1))
    return go(0, 0)


class TestEditDistance:
    @pytest.mark.parametrize(
        ("a", "b", "expected"),
        [
            ("", "", 0),
            ("a b c", "a b c", 0),
            ("a b c", "a x c", 1),
            ("a b c", "", 3),
            ("k i t t e n", "s i t t i n g", 3),
        ],
    )
    def test_examples(self, a, b, expected) -> None:
        assert edit_distance(a.split(), b.split()) == expected

    def test_matches_brute_force(self) -> None:
        rng = np.random.default_rng(2)
        for _ in range(500):
            a, b = random_pair(rng)
            assert edit_distance(a, b) == brute_force_distance(tuple(a), tuple(b))

    def test_symmetric(self) -> None:
        assert edit_distance(["a", "b"], ["b"]) == edit_distance(["b"], ["a", "b"])

    def test_metric_axioms_random(self) -> None:
        rng = np.random.default_rng(3)
        for _ in range(2000):
            a, b = random_pair(rng, alphabet=3)
            c, _ = random_pair(rng, alphabet=3)
            assert (edit_distance(a, b) == 0) == (a == b)
            assert edit_distance(a, b) == edit_distance(b, a)
            assert edit_distance(a, c) <= edit_distance(a, b) + edit_distance(b, c)


class TestHelpers:
    def test_truncate(self) -> None:
        edits = align(list("abcdef"), list("abcdef"))
        assert len(truncate(edits, 4)) == 4
        assert truncate(edits, 100) == edits

    def test_count_changes(self) -> None:
        assert count_changes(align(["a", "b", "c"], ["a", "x"])) == 2

    def test_record_round_trip(self) -> None:
        edit = Edit(None, "b", I)
        assert edit.to_record() == {"r": None, "q": "b", "a": "insert"}
        assert Edit.from_record(edit.to_record()) == edit
