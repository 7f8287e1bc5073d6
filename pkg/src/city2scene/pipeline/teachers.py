import logging

import torch

from city2scene.base.errors import VocabularyMismatchError
from city2scene.base.settings import ConfigurationError
from city2scene.features.spectrogram import SpectrogramConfig
from city2scene.losses.distillation import TeacherMode
from city2scene.losses.ensemble import ensemble_logits
from city2scene.losses.logits import Logits
from city2scene.models.checkpoint import Checkpoint, CheckpointRole
from city2scene.pipeline.data import ClipFeatureStore, predict_logits


class MissingTeachersError(ValueError):
    def __init__(self):
        super().__init__(
            "Stage 3 needs at least one teacher checkpoint. Run stage2 first and pass"
            " its checkpoint with --teachers."
        )


class TeacherEnsemble:
    """
    Frozen city-to-scene teachers whose logits are averaged into one soft target.
    In online mode every teacher consumes the student's (augmented) batch, so all
    of them must share the student's preprocessing. In cached mode each teacher
    runs once on the clean clips with its own preprocessing.
    """

    def __init__(
        self,
        teachers: list[Checkpoint],
        scene_vocab: list[str] | None = None,
        mode: TeacherMode = TeacherMode.online,
        preprocessing: SpectrogramConfig | None = None,
    ):
        if len(teachers) == 0:
            raise MissingTeachersError()

        self._logger = logging.getLogger("[city2scene::TeacherEnsemble]")
        self._teachers = teachers
        self._mode = TeacherMode(mode)
        self._scene_vocab = (
            list(scene_vocab) if scene_vocab is not None else teachers[0].scene_vocab
        )

        for i, teacher in enumerate(teachers):
            if teacher.role is not CheckpointRole.teacher:
                raise ValueError(
                    f"Checkpoint {i} has role {teacher.role.value}, expected teacher."
                )
            if teacher.scene_vocab != self._scene_vocab:
                raise VocabularyMismatchError(
                    f"teacher {i}", self._scene_vocab, teacher.scene_vocab
                )
            if (
                self._mode is TeacherMode.online
                and preprocessing is not None
                and teacher.preprocessing.key() != preprocessing.key()
            ):
                raise ConfigurationError(
                    [
                        f"teacher {i} uses a different preprocessing than the"
                        " student; use kd.teacher_mode=cached for heterogeneous"
                        " ensembles"
                    ]
                )
            teacher.model.eval()

    def __len__(self) -> int:
        return len(self._teachers)

    def mode(self) -> TeacherMode:
        return self._mode

    def to(self, device: torch.device) -> "TeacherEnsemble":
        for teacher in self._teachers:
            teacher.model.to(device)
        return self

    def logits(self, batch: torch.Tensor) -> Logits:
        with torch.no_grad():
            outputs = [teacher.model(batch) for teacher in self._teachers]
        return ensemble_logits(outputs)

    def cached_logits(self, store: ClipFeatureStore) -> torch.Tensor:
        """(M, K) ensemble logits of every clip in the store, from clean audio."""
        outputs = []
        for teacher in self._teachers:
            features = store.features(teacher.preprocessing)
            outputs.append(predict_logits(teacher.model, features))
        self._logger.info(
            f"Cached the logits of {len(self)} teacher(s) on {len(store)} clips."
        )
        return ensemble_logits(outputs).values


def teacher_logits(teachers: list[Checkpoint], batch: torch.Tensor) -> Logits:
    return TeacherEnsemble(teachers).logits(batch)
