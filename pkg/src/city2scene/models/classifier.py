import dataclasses
from typing import ClassVar

import torch

from city2scene.base.errors import ShapeError
from city2scene.base.settings import Settings


@dataclasses.dataclass
class ClassifierSpec(Settings):
    LoggerName: ClassVar[str] = "[city2scene::ClassifierSpec]"

    in_dim: int = dataclasses.field(default=None)
    n_classes: int = dataclasses.field(default=None)

    def problems(self) -> list[str]:
        problems = []
        if self.in_dim is None or self.in_dim < 1:
            problems.append(f"in_dim must be at least 1 (got {self.in_dim})")
        if self.n_classes is None or self.n_classes < 1:
            problems.append(f"n_classes must be at least 1 (got {self.n_classes})")
        return problems


class LinearClassifier(torch.nn.Module):
    """A single fully connected map from embeddings to raw logits."""

    def __init__(self, spec: ClassifierSpec):
        super().__init__()
        spec.validate()
        self.in_dim = spec.in_dim
        self.n_classes = spec.n_classes
        self.fc = torch.nn.Linear(spec.in_dim, spec.n_classes)

    def spec(self) -> ClassifierSpec:
        return ClassifierSpec(in_dim=self.in_dim, n_classes=self.n_classes)

    def forward(self, embeddings: torch.Tensor) -> torch.Tensor:
        if embeddings.ndim == 1:
            embeddings = embeddings.unsqueeze(0)
        if embeddings.ndim != 2 or embeddings.shape[1] != self.in_dim:
            raise ShapeError(
                "classifier input", f"(B, {self.in_dim})", tuple(embeddings.shape)
            )
        return self.fc(embeddings)
