from __future__ import annotations

from collections import Counter
from typing import Dict, Iterable, List, Optional

from ..core.corpus import TAP


class Vocabulary:
    """
    Token ids shared by focal-test and assertion tokens. Special tokens occupy the
    lowest ids.
    """

    __slots__ = ("itos", "stoi")

    PAD: int = 0
    UNK: int = 1
    SOS: int = 2
    EOS: int = 3
    EMPTY: int = 4
    SPECIALS: tuple = ("<pad>", "<unk>", "<s>", "</s>", "<empty>")

    def __init__(self, tokens: Iterable[str] = ()) -> None:
        self.itos: List[str] = list(Vocabulary.SPECIALS)
        self.stoi: Dict[str, int] = {token: i for i, token in enumerate(self.itos)}
        for token in tokens:
            if token not in self.stoi:
                self.stoi[token] = len(self.itos)
                self.itos.append(token)

    def __len__(self) -> int:
        return len(self.itos)

    def __contains__(self, token: str) -> bool:
        return token in self.stoi and self.stoi[token] >= len(Vocabulary.SPECIALS)

    def id(self, token: Optional[str]) -> int:
        if token is None:
            return Vocabulary.EMPTY
        return self.stoi.get(token, Vocabulary.UNK)

    def ids(self, tokens: Iterable[Optional[str]]) -> List[int]:
        return [self.id(token) for token in tokens]

    def token(self, index: int) -> str:
        return self.itos[index]

    def to_list(self) -> List[str]:
        return self.itos[len(Vocabulary.SPECIALS):]

    @classmethod
    def from_list(cls, tokens: List[str]) -> Vocabulary:
        return cls(tokens)


def build_vocab(taps: Iterable[TAP], max_size: int = 50000, min_count: int = 1) -> Vocabulary:
    """
    Ranks focal-test and assertion tokens by frequency, then lexicographically.
    """
    counts: Counter = Counter()
    for tap in taps:
        counts.update(tap.focal_test)
        counts.update(tap.assertion)

    specials = set(Vocabulary.SPECIALS)
    ranked = sorted((token for token, n in counts.items() if n >= min_count and token not in specials),
                    key=lambda token: (-counts[token], token))
    return Vocabulary(ranked[:max_size])


class ExtendedVocabulary:
    """
    Per-example extension of the vocabulary with copyable out-of-vocabulary tokens,
    numbered after the last vocabulary id in order of first appearance.
    """

    __slots__ = ("vocab", "oov", "_oov_ids")

    def __init__(self, vocab: Vocabulary, sources: Iterable[Iterable[Optional[str]]]) -> None:
        self.vocab: Vocabulary = vocab
        self.oov: List[str] = []
        self._oov_ids: Dict[str, int] = {}
        for source in sources:
            for token in source:
                if token is not None and token not in vocab and token not in self._oov_ids:
                    self._oov_ids[token] = len(vocab) + len(self.oov)
                    self.oov.append(token)

    def __len__(self) -> int:
        return len(self.vocab) + len(self.oov)

    def id(self, token: str) -> int:
        if token in self.vocab:
            return self.vocab.id(token)
        return self._oov_ids.get(token, Vocabulary.UNK)

    def token(self, index: int) -> str:
        if index < len(self.vocab):
            return self.vocab.token(index)
        return self.oov[index - len(self.vocab)]

    def input_id(self, index: int) -> int:
        """
        Maps an extended id to one the embedding table knows.
        """
        return index if index < len(self.vocab) else Vocabulary.UNK
