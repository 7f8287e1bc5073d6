import dataclasses
from enum import Enum
from typing import ClassVar

import torch

from city2scene.base.errors import ShapeError
from city2scene.base.settings import Settings
from city2scene.losses.classification import log_softmax
from city2scene.losses.logits import LogitsLike, as_tensor


class KLDirection(Enum):
    teacher_reference = "teacher_reference"
    student_reference = "student_reference"


class TeacherMode(Enum):
    online = "online"
    cached = "cached"


@dataclasses.dataclass
class KDConfig(Settings):
    LoggerName: ClassVar[str] = "[city2scene::KDConfig]"

    temperature: float = dataclasses.field(default=None)
    lambda_weight: float = dataclasses.field(default=None)
    kl_direction: KLDirection = dataclasses.field(default=None)
    teacher_mode: TeacherMode = dataclasses.field(default=None)

    def __post_init__(self) -> None:
        if self.temperature is None:
            self.temperature = 2.0

        if self.lambda_weight is None:
            self.lambda_weight = 0.5

        if self.kl_direction is None:
            self.kl_direction = KLDirection.teacher_reference

        if self.teacher_mode is None:
            self.teacher_mode = TeacherMode.online

    def problems(self) -> list[str]:
        problems = []
        if self.temperature <= 0:
            problems.append(f"temperature must be positive (got {self.temperature})")
        if not 0.0 <= self.lambda_weight <= 1.0:
            problems.append(
                f"lambda_weight must be in [0, 1] (got {self.lambda_weight})"
            )
        return problems


def kd_loss(
    student_z: LogitsLike,
    teacher_z: LogitsLike,
    temperature: float = 2.0,
    kl_direction: KLDirection = KLDirection.teacher_reference,
) -> torch.Tensor:
    """
    Temperature-scaled distillation loss, tau^2 * KL(teacher || student) averaged
    over the batch. The teacher logits never carry gradient.
    :param kl_direction: student_reference swaps the two distributions inside the
     divergence.
    """
    student_z = as_tensor(student_z)
    teacher_z = as_tensor(teacher_z).detach()
    if student_z.shape != teacher_z.shape:
        raise ShapeError(
            "teacher logits", tuple(student_z.shape), tuple(teacher_z.shape)
        )
    if student_z.ndim == 1:
        student_z = student_z.unsqueeze(0)
        teacher_z = teacher_z.unsqueeze(0)

    log_p_student = log_softmax(student_z, temperature)
    log_p_teacher = log_softmax(teacher_z.to(student_z.dtype), temperature)

    match KLDirection(kl_direction):
        case KLDirection.teacher_reference:
            reference, other = log_p_teacher, log_p_student
        case KLDirection.student_reference:
            reference, other = log_p_student, log_p_teacher

    divergence = (torch.exp(reference) * (reference - other)).sum(dim=-1)
    return divergence.mean() * temperature**2


def combined_loss(
    scene_loss: torch.Tensor, kd: torch.Tensor, lambda_weight: float
) -> torch.Tensor:
    if not 0.0 <= lambda_weight <= 1.0:
        raise ValueError(f"lambda must be in [0, 1] (got {lambda_weight}).")
    if lambda_weight == 1.0:
        return scene_loss
    if lambda_weight == 0.0:
        return kd
    return lambda_weight * scene_loss + (1.0 - lambda_weight) * kd
