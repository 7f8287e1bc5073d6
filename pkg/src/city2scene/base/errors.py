class ShapeError(ValueError):
    def __init__(self, what: str, expected, received):
        super().__init__(f"{what}: expected {expected}, received {received}.")


class VocabularyMismatchError(ValueError):
    def __init__(self, what: str, expected: list[str], received: list[str]):
        super().__init__(
            f"{what}: the vocabularies differ (expected {expected}, received"
            f" {received})."
        )
