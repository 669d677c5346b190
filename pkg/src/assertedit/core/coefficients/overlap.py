from .coefficient import Coefficient


class Overlap(Coefficient):

    name: str = "overlap"

    def from_counts(self, intersection: int, size_a: int, size_b: int) -> float:
        smaller: int = min(size_a, size_b)
        return intersection / smaller if smaller else 0.0
