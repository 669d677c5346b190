from abc import ABCMeta, abstractmethod

from ..lexer import TokenBag


class Coefficient(metaclass=ABCMeta):
    """
    A set-similarity coefficient over token bags.
    """

    name: str = ""

    def similarity(self, a: TokenBag, b: TokenBag) -> float:
        return self.from_counts(len(a & b), len(a), len(b))

    @abstractmethod
    def from_counts(self, intersection: int, size_a: int, size_b: int) -> float:
        """
        Scores a pair from its intersection size and both bag sizes.
        """
        pass
