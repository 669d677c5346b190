import numpy as np
import pytest

from assertedit.core.retrieval import (
    COEFFICIENTS, build_index, load_index, retrieve_top1, save_index, similarity,
)
from assertedit.errors import IndexFileError, RetrievalError
from conftest import make_tap


def random_corpus(rng, n, alphabet=30):
    taps = []
    for i in range(n):
        size = int(rng.integers(1, 12))
        tokens = [f"t{k}" for k in rng.integers(0, alphabet, size=size)]
        taps.append(make_tap(i, " ".join(tokens), "assertTrue ( x )"))
    return taps


def brute_force(taps, query, name, exclude_id=None):
    best = None
    for tap in taps:
        if tap.id == exclude_id:
            continue
        score = similarity(frozenset(tap.focal_test), query, name)
        if best is None or score > best[1] or (score == best[1] and tap.id < best[0]):
            best = (tap.id, score)
    return best


class TestCoefficients:
    @pytest.mark.parametrize(
        ("name", "expected"),
        [("jaccard", 2 / 4), ("dice", 2 / 6), ("overlap", 2 / 3)],
    )
    def test_values(self, name, expected) -> None:
        a = frozenset({"a", "b", "c"})
        b = frozenset({"b", "c", "d"})
        assert similarity(a, b, name) == pytest.approx(expected)

    @pytest.mark.parametrize("name", sorted(COEFFICIENTS))
    def test_empty_bags_score_zero(self, name) -> None:
        assert similarity(frozenset(), frozenset(), name) == 0.0

    @pytest.mark.parametrize("name", sorted(COEFFICIENTS))
    def test_identical_bags_score_one(self, name) -> None:
        bag = frozenset({"x", "y"})
        expected = 0.5 if name == "dice" else 1.0
        assert similarity(bag, bag, name) == pytest.approx(expected)

    def test_unknown_coefficient(self) -> None:
        with pytest.raises(RetrievalError):
            similarity(frozenset(), frozenset(), "cosine")


class TestRetrieveTop1:
    @pytest.mark.parametrize("seed", range(20))
    @pytest.mark.parametrize("name", sorted(COEFFICIENTS))
    def test_matches_brute_force(self, seed, name) -> None:
        rng = np.random.default_rng(seed)
        taps = random_corpus(rng, int(rng.integers(2, 200)))
        index = build_index(taps, name)
        for _ in range(5):
            query = frozenset(f"t{k}" for k in rng.integers(0, 30, size=int(rng.integers(1, 10))))
            exclude = int(rng.integers(0, len(taps)))
            expected = brute_force(taps, query, name, exclude)
            for accelerated in (True, False):
                result = retrieve_top1(index, query, exclude, accelerated)
                assert (result.tap_id, result.score) == (expected[0], pytest.approx(expected[1]))

    @pytest.mark.parametrize("seed", range(20))
    def test_jaccard_and_dice_pick_the_same_winner(self, seed) -> None:
        rng = np.random.default_rng(100 + seed)
        taps = random_corpus(rng, 150)
        jaccard, dice = build_index(taps, "jaccard"), build_index(taps, "dice")
        query = frozenset(f"t{k}" for k in rng.integers(0, 30, size=6))
        assert jaccard.retrieve_top1(query).tap_id == dice.retrieve_top1(query).tap_id

    def test_self_exclusion(self, toy_taps) -> None:
        index = build_index(toy_taps)
        result = index.retrieve_top1(frozenset(toy_taps[0].focal_test), exclude_id=0)
        assert result.tap_id != 0
        assert index.retrieve_top1(frozenset(toy_taps[0].focal_test)).tap_id == 0

    def test_ties_go_to_lowest_id(self) -> None:
        taps = [make_tap(5, "a b", "x"), make_tap(2, "a c", "y"), make_tap(9, "a d", "z")]
        index = build_index(taps)
        assert index.retrieve_top1(frozenset({"a"})).tap_id == 2

    def test_no_shared_token_still_retrieves(self) -> None:
        taps = [make_tap(3, "a", "x"), make_tap(1, "b", "y")]
        result = build_index(taps).retrieve_top1(frozenset({"zzz"}))
        assert (result.tap_id, result.score) == (1, 0.0)

    def test_payload_is_attached(self, toy_taps) -> None:
        result = build_index(toy_taps).retrieve_top1(frozenset(toy_taps[3].focal_test))
        assert result.retrieved_assertion == toy_taps[3].assertion
        assert result.retrieved_focal_test == toy_taps[3].focal_test

    def test_empty_corpus(self) -> None:
        with pytest.raises(RetrievalError):
            build_index([])

    def test_everything_excluded(self) -> None:
        index = build_index([make_tap(0, "a", "x")])
        with pytest.raises(RetrievalError):
            index.retrieve_top1(frozenset({"a"}), exclude_id=0)


class TestIndexFile:
    def test_round_trip(self, tmp_path, toy_taps) -> None:
        index = build_index(toy_taps, "dice")
        save_index(index, tmp_path / "toy.idx")
        loaded = load_index(tmp_path / "toy.idx", toy_taps)
        assert loaded.coefficient.name == "dice"
        assert loaded.entries == index.entries
        query = frozenset(toy_taps[2].focal_test)
        assert loaded.retrieve_top1(query, 2) == index.retrieve_top1(query, 2)

    def test_bad_magic(self, tmp_path, toy_taps) -> None:
        path = tmp_path / "toy.idx"
        save_index(build_index(toy_taps), path)
        data = bytearray(path.read_bytes())
        data[0:4] = b"XXXX"
        path.write_bytes(bytes(data))
        with pytest.raises(IndexFileError):
            load_index(path, toy_taps)

    def test_truncated(self, tmp_path, toy_taps) -> None:
        path = tmp_path / "toy.idx"
        save_index(build_index(toy_taps), path)
        path.write_bytes(path.read_bytes()[:-3])
        with pytest.raises(IndexFileError):
            load_index(path, toy_taps)

    def test_missing_corpus_entry(self, tmp_path, toy_taps) -> None:
        path = tmp_path / "toy.idx"
        save_index(build_index(toy_taps), path)
        with pytest.raises(IndexFileError):
            load_index(path, toy_taps[1:])
