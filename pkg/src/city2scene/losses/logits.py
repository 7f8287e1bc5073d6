import dataclasses
from enum import Enum

import torch


class LogitsKind(Enum):
    city = "city"
    scene = "scene"
    city_to_scene = "city_to_scene"
    ensemble = "ensemble"


@dataclasses.dataclass
class Logits:
    values: torch.Tensor = dataclasses.field(default=None)
    kind: LogitsKind = dataclasses.field(default=LogitsKind.scene)

    def __post_init__(self) -> None:
        if not bool(torch.isfinite(self.values).all()):
            raise ValueError(f"{self.kind.value} logits contain non-finite values.")

    @property
    def number_of_classes(self) -> int:
        return int(self.values.shape[-1])


LogitsLike = Logits | torch.Tensor


def as_tensor(z: LogitsLike) -> torch.Tensor:
    return z.values if isinstance(z, Logits) else z
