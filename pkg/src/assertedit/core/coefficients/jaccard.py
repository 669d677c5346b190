from .coefficient import Coefficient


class Jaccard(Coefficient):

    name: str = "jaccard"

    def from_counts(self, intersection: int, size_a: int, size_b: int) -> float:
        # |A ∪ B| = |A| + |B| - |A ∩ B|:
        union: int = size_a + size_b - intersection
        return intersection / union if union else 0.0
