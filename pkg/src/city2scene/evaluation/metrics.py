import dataclasses
import json
import pathlib

import numpy as np
import torch

from city2scene.base.errors import VocabularyMismatchError
from city2scene.base.settings import save_json
from city2scene.data.manifest import Manifest, Split
from city2scene.models.checkpoint import Checkpoint, CheckpointRole
from city2scene.pipeline.data import ClipFeatureStore, predict_logits


@dataclasses.dataclass
class Metrics:
    """
    Accuracies of one evaluation. overall_accuracy is the clip-level accuracy;
    class_mean_accuracy() is the unweighted mean of the per-class accuracies.
    The confusion matrix is indexed [true, predicted] in vocabulary order.
    """

    overall_accuracy: float = dataclasses.field(default=None)
    per_class_accuracy: dict[str, float] = dataclasses.field(default=None)
    per_city_accuracy: dict[str, float] = dataclasses.field(default=None)
    confusion: np.ndarray | None = dataclasses.field(default=None)
    n_eval: int = dataclasses.field(default=None)
    classes: list[str] = dataclasses.field(default=None)

    def __post_init__(self) -> None:
        if self.per_class_accuracy is None:
            self.per_class_accuracy = {}

        if self.per_city_accuracy is None:
            self.per_city_accuracy = {}

        if self.classes is None:
            self.classes = list(self.per_class_accuracy)

        if self.confusion is not None:
            self.confusion = np.asarray(self.confusion, dtype=np.int64)
            if self.n_eval is None:
                self.n_eval = int(self.confusion.sum())
            if int(self.confusion.sum()) != self.n_eval:
                raise ValueError("The confusion matrix does not sum to n_eval.")

    def class_mean_accuracy(self) -> float:
        return float(np.mean(list(self.per_class_accuracy.values())))

    def to_dict(self) -> dict:
        return {
            "overall": self.overall_accuracy,
            "class_mean": self.class_mean_accuracy(),
            "per_class": dict(self.per_class_accuracy),
            "per_city": dict(self.per_city_accuracy),
            "confusion": (
                self.confusion.tolist() if self.confusion is not None else None
            ),
            "n_eval": self.n_eval,
            "classes": list(self.classes),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Metrics":
        return cls(
            overall_accuracy=data["overall"],
            per_class_accuracy=data["per_class"],
            per_city_accuracy=data.get("per_city", {}),
            confusion=data.get("confusion"),
            n_eval=data.get("n_eval"),
            classes=data.get("classes"),
        )

    def to_json(self, path: str | pathlib.Path, extra: dict | None = None) -> None:
        data = self.to_dict()
        if extra:
            data.update(extra)
        save_json(data, path)

    @classmethod
    def from_json(cls, path: str | pathlib.Path) -> "Metrics":
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_dict(json.load(f))


def metrics_from_predictions(
    predicted: np.ndarray | torch.Tensor,
    targets: np.ndarray | torch.Tensor,
    classes: list[str],
    cities: list[str] | None = None,
) -> Metrics:
    """
    :param predicted: Predicted class index per clip.
    :param targets: True class index per clip.
    :param classes: Class names in index order.
    :param cities: City label per clip, for the per-city accuracy.
    """
    predicted = np.asarray(predicted, dtype=np.int64)
    targets = np.asarray(targets, dtype=np.int64)
    if predicted.shape != targets.shape or predicted.ndim != 1:
        raise ValueError("predicted and targets must be vectors of the same length.")
    if len(targets) == 0:
        raise ValueError("Cannot compute metrics on zero clips.")

    number_of_classes = len(classes)
    confusion = np.zeros((number_of_classes, number_of_classes), dtype=np.int64)
    np.add.at(confusion, (targets, predicted), 1)

    row_sums = confusion.sum(axis=1)
    per_class = {
        classes[c]: float(confusion[c, c] / row_sums[c])
        for c in range(number_of_classes)
        if row_sums[c] > 0
    }

    per_city = {}
    if cities is not None:
        cities = np.asarray(cities)
        correct = predicted == targets
        for city in sorted(set(cities.tolist())):
            per_city[city] = float(correct[cities == city].mean())

    return Metrics(
        overall_accuracy=float(np.trace(confusion) / confusion.sum()),
        per_class_accuracy=per_class,
        per_city_accuracy=per_city,
        confusion=confusion,
        n_eval=int(confusion.sum()),
        classes=list(classes),
    )


def evaluate(
    checkpoint: Checkpoint,
    manifest: Manifest,
    split: Split | str = Split.test,
    store: ClipFeatureStore | None = None,
) -> Metrics:
    """
    Inference-mode accuracy of a checkpoint on one split. City models are scored
    on city labels, every other role on scene labels.
    """
    label = "city" if checkpoint.role is CheckpointRole.city_model else "scene"
    vocab = manifest.city_vocab if label == "city" else manifest.scene_vocab
    if checkpoint.classes() != vocab:
        raise VocabularyMismatchError(
            f"{label} classes of the checkpoint", vocab, checkpoint.classes()
        )

    if store is None:
        store = ClipFeatureStore.load(
            manifest, split, checkpoint.preprocessing.sample_rate_hz
        )
    logits = predict_logits(checkpoint.model, store.features(checkpoint.preprocessing))
    return metrics_from_predictions(
        predicted=logits.argmax(dim=-1).numpy(),
        targets=store.targets(label).numpy(),
        classes=vocab,
        cities=[r.city_label for r in store.records],
    )
