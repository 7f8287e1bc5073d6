import torch

from city2scene.models.classifier import ClassifierSpec, LinearClassifier
from city2scene.models.encoder import Encoder, EncoderSpec, build_encoder


class City2SceneModel(torch.nn.Module):
    """Encoder followed by a single fully connected classifier."""

    def __init__(self, encoder: Encoder, classifier: LinearClassifier):
        super().__init__()
        if classifier.in_dim != encoder.embedding_dim:
            raise ValueError(
                f"The classifier expects {classifier.in_dim}-dimensional embeddings,"
                f" the encoder produces {encoder.embedding_dim}."
            )
        self.encoder = encoder
        self.classifier = classifier
        self._frozen_encoder = False

    @property
    def frozen_encoder(self) -> bool:
        return self._frozen_encoder

    def encode(self, x: torch.Tensor) -> torch.Tensor:
        return self.encoder(x)

    def classify(self, embeddings: torch.Tensor) -> torch.Tensor:
        return self.classifier(embeddings)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.classify(self.encode(x))

    def freeze_encoder(self) -> "City2SceneModel":
        for parameter in self.encoder.parameters():
            parameter.requires_grad_(False)
        self.encoder.eval()
        self._frozen_encoder = True
        return self

    def train(self, mode: bool = True) -> "City2SceneModel":
        super().train(mode)
        # Normalization statistics of a frozen encoder stay locked.
        if self._frozen_encoder:
            self.encoder.eval()
        return self

    def trainable_parameters(self) -> list[torch.nn.Parameter]:
        return [p for p in self.parameters() if p.requires_grad]

    def replace_classifier(self, classifier: LinearClassifier) -> "City2SceneModel":
        if classifier.in_dim != self.encoder.embedding_dim:
            raise ValueError("The new classifier does not match the embedding size.")
        self.classifier = classifier
        return self


def build_model(encoder_spec: EncoderSpec, n_classes: int) -> City2SceneModel:
    encoder = build_encoder(encoder_spec)
    classifier = LinearClassifier(
        ClassifierSpec(in_dim=encoder.embedding_dim, n_classes=n_classes)
    )
    return City2SceneModel(encoder, classifier)
