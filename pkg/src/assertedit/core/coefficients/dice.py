from .coefficient import Coefficient


class Dice(Coefficient):
    """
    Intersection over the summed bag sizes, without the usual factor of two.
    Ranks exactly like Jaccard, since the score equals J / (1 + J).
    """

    name: str = "dice"

    def from_counts(self, intersection: int, size_a: int, size_b: int) -> float:
        total: int = size_a + size_b
        return intersection / total if total else 0.0
