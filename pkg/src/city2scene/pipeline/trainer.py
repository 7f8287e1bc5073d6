import dataclasses
import logging

import torch

from city2scene.augment.augmenter import BatchAugmenter
from city2scene.features.spectrogram import log_mel
from city2scene.losses.classification import cross_entropy
from city2scene.losses.distillation import KDConfig, TeacherMode, combined_loss, kd_loss
from city2scene.models.model import City2SceneModel
from city2scene.pipeline.data import ClipFeatureStore, predict_logits
from city2scene.pipeline.schedulers import build_scheduler
from city2scene.pipeline.settings import OptimizerName, StageConfig
from city2scene.pipeline.teachers import TeacherEnsemble


@dataclasses.dataclass
class EpochRecord:
    epoch: int = dataclasses.field(default=None)
    lr: float = dataclasses.field(default=None)
    loss_total: float = dataclasses.field(default=None)
    loss_label: float = dataclasses.field(default=None)
    loss_distillation: float | None = dataclasses.field(default=None)
    train_accuracy: float = dataclasses.field(default=None)
    test_accuracy: float | None = dataclasses.field(default=None)


def accuracy(logits: torch.Tensor, targets: torch.Tensor) -> float:
    return float((logits.argmax(dim=-1) == targets).to(torch.float64).mean())


def build_optimizer(
    model: City2SceneModel, cfg: StageConfig
) -> torch.optim.Optimizer:
    parameters = model.trainable_parameters()
    match cfg.optimizer.name:
        case OptimizerName.adam:
            return torch.optim.Adam(
                parameters,
                lr=cfg.scheduler.peak_lr,
                weight_decay=cfg.optimizer.weight_decay,
            )
        case OptimizerName.adamw:
            return torch.optim.AdamW(
                parameters,
                lr=cfg.scheduler.peak_lr,
                weight_decay=cfg.optimizer.weight_decay,
            )
        case _:
            raise ValueError(f"Unknown optimizer {cfg.optimizer.name}.")


class Trainer:
    """
    One training run: augmentation, forward pass, label loss and optional
    distillation, one optimizer and scheduler step per batch.
    """

    def __init__(
        self,
        cfg: StageConfig,
        model: City2SceneModel,
        label: str,
        teachers: TeacherEnsemble | None = None,
        kd: KDConfig | None = None,
    ):
        if teachers is not None and kd is None:
            raise ValueError("Distillation needs a KDConfig.")
        self._cfg = cfg
        self._model = model
        self._label = label
        self._teachers = teachers
        self._kd = kd
        self._device = torch.device(cfg.device)
        self._logger = logging.getLogger("[city2scene::Trainer]")
        self._augmenter = BatchAugmenter(
            cfg.augment,
            cfg.preprocessing.sample_rate_hz,
            seed=[cfg.augment.seed, cfg.seed],
        )

    def _inputs(
        self, train: ClipFeatureStore, indices: torch.Tensor
    ) -> torch.Tensor:
        if self._augmenter.settings().uses_waveform_augmentation():
            waveforms = self._augmenter.waveforms(train.waveforms[indices])
            return log_mel(waveforms, self._cfg.preprocessing)
        return train.features(self._cfg.preprocessing)[indices]

    def fit(
        self, train: ClipFeatureStore, test: ClipFeatureStore | None = None
    ) -> list[EpochRecord]:
        cfg = self._cfg
        model = self._model.to(self._device)
        optimizer = build_optimizer(model, cfg)
        loader = train.batches(cfg.batch_size, shuffle=True, seed=cfg.seed)
        scheduler = build_scheduler(optimizer, cfg.scheduler, len(loader))

        targets = train.targets(self._label)
        number_of_classes = model.classifier.n_classes

        cached_teacher_logits = None
        if self._teachers is not None:
            self._teachers.to(self._device)
            if self._teachers.mode() is TeacherMode.cached:
                cached_teacher_logits = self._teachers.cached_logits(train)

        history = []
        for epoch in range(cfg.max_epochs):
            model.train()
            lr = optimizer.param_groups[0]["lr"]
            totals = {"total": 0.0, "label": 0.0, "distillation": 0.0}
            correct = 0.0
            seen = 0

            for indices in loader:
                x = self._inputs(train, indices)
                y = torch.nn.functional.one_hot(
                    targets[indices], number_of_classes
                ).to(torch.float32)
                x, y, draw = self._augmenter.spectrograms(x, y)
                x = x.to(self._device)
                y = y.to(self._device)

                logits = model(x)
                label_loss = cross_entropy(logits, y)
                loss = label_loss

                if self._teachers is not None:
                    if cached_teacher_logits is not None:
                        soft_target = cached_teacher_logits[indices]
                        if draw is not None:
                            soft_target = draw.apply(soft_target)
                        soft_target = soft_target.to(self._device)
                    else:
                        soft_target = self._teachers.logits(x).values
                    distillation = kd_loss(
                        logits,
                        soft_target,
                        self._kd.temperature,
                        self._kd.kl_direction,
                    )
                    loss = combined_loss(
                        label_loss, distillation, self._kd.lambda_weight
                    )
                    totals["distillation"] += float(distillation) * len(indices)

                optimizer.zero_grad()
                loss.backward()
                optimizer.step()
                scheduler.step()

                totals["total"] += float(loss) * len(indices)
                totals["label"] += float(label_loss) * len(indices)
                correct += accuracy(logits.detach().cpu(), targets[indices]) * len(
                    indices
                )
                seen += len(indices)

            record = EpochRecord(
                epoch=epoch,
                lr=lr,
                loss_total=totals["total"] / seen,
                loss_label=totals["label"] / seen,
                loss_distillation=(
                    totals["distillation"] / seen
                    if self._teachers is not None
                    else None
                ),
                train_accuracy=correct / seen,
                test_accuracy=(
                    self.evaluate_accuracy(test) if test is not None else None
                ),
            )
            history.append(record)
            self._logger.info(
                f"Epoch {epoch + 1}/{cfg.max_epochs}: lr={lr:.3g}"
                f" loss={record.loss_total:.4f} train_acc={record.train_accuracy:.3f}"
                + (
                    f" test_acc={record.test_accuracy:.3f}"
                    if record.test_accuracy is not None
                    else ""
                )
            )

        model.eval()
        return history

    def evaluate_accuracy(self, store: ClipFeatureStore) -> float:
        logits = predict_logits(
            self._model, store.features(self._cfg.preprocessing)
        )
        return accuracy(logits, store.targets(self._label))
