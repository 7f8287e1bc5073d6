import dataclasses
import pathlib
from typing import ClassVar

import torch

from city2scene.base.settings import Settings


@dataclasses.dataclass
class AugmentConfig(Settings):
    LoggerName: ClassVar[str] = "[city2scene::AugmentConfig]"

    enabled: bool = dataclasses.field(default=None)
    mixup_alpha: float = dataclasses.field(default=None)
    specaug_ratio_r: float = dataclasses.field(default=None)
    specaug_prob_p: float = dataclasses.field(default=None)
    fms_alpha: float = dataclasses.field(default=None)
    fms_prob_p: float = dataclasses.field(default=None)
    diraug_prob_p: float = dataclasses.field(default=None)
    ir_bank: str | None = dataclasses.field(default=None)
    seed: int = dataclasses.field(default=None)

    def __post_init__(self) -> None:
        if self.enabled is None:
            self.enabled = True

        if self.mixup_alpha is None:
            self.mixup_alpha = 0.0

        if self.specaug_ratio_r is None:
            self.specaug_ratio_r = 0.0

        if self.specaug_prob_p is None:
            self.specaug_prob_p = 0.0

        if self.fms_alpha is None:
            self.fms_alpha = 0.4

        if self.fms_prob_p is None:
            self.fms_prob_p = 0.0

        if self.diraug_prob_p is None:
            self.diraug_prob_p = 0.0

        if self.seed is None:
            self.seed = 0

    @classmethod
    def preset(cls, name: str) -> "AugmentConfig":
        # DirAug needs an impulse-response bank, so presets leave it disabled.
        match name:
            case "cp_resnet" | "bc_resnet" | "tf_sepnet":
                return cls(mixup_alpha=0.3, fms_alpha=0.4, fms_prob_p=0.8)
            case "passt":
                return cls(fms_alpha=0.4, fms_prob_p=0.4)
            case "beats":
                return cls(
                    mixup_alpha=0.3,
                    specaug_ratio_r=0.2,
                    specaug_prob_p=1.0,
                    fms_alpha=0.4,
                    fms_prob_p=0.4,
                )
            case "desk":
                return cls(mixup_alpha=0.3, fms_alpha=0.4, fms_prob_p=0.4)
            case "none":
                return cls(enabled=False)
            case _:
                raise ValueError(f"Unknown augmentation preset {name}.")

    def problems(self) -> list[str]:
        problems = []
        for name in (
            "specaug_ratio_r",
            "specaug_prob_p",
            "fms_prob_p",
            "diraug_prob_p",
        ):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                problems.append(f"{name} must be in [0, 1] (got {value})")
        for name in ("mixup_alpha", "fms_alpha"):
            value = getattr(self, name)
            if value < 0.0:
                problems.append(f"{name} must be non-negative (got {value})")
        if self.fms_prob_p > 0 and self.fms_alpha <= 0:
            problems.append("fms_alpha must be positive when fms_prob_p > 0")
        if self.diraug_prob_p > 0:
            if self.ir_bank is None:
                problems.append("diraug_prob_p > 0 requires an ir_bank directory")
            elif not any(pathlib.Path(self.ir_bank).glob("*.wav")):
                problems.append(f"ir_bank {self.ir_bank} contains no .wav files")
        return problems

    def uses_waveform_augmentation(self) -> bool:
        return self.enabled and self.diraug_prob_p > 0


@dataclasses.dataclass
class SoftLabel:
    distribution: torch.Tensor = dataclasses.field(default=None)

    def __post_init__(self) -> None:
        if bool((self.distribution < 0).any()):
            raise ValueError("A soft label cannot have negative entries.")
        total = self.distribution.sum(dim=-1).double()
        if not torch.allclose(total, torch.ones_like(total), atol=1e-6, rtol=0.0):
            raise ValueError("A soft label must sum to one.")

    @classmethod
    def one_hot(cls, index: int | torch.Tensor, number_of_classes: int) -> "SoftLabel":
        index = torch.as_tensor(index, dtype=torch.long)
        return cls(
            distribution=torch.nn.functional.one_hot(index, number_of_classes).to(
                torch.float32
            )
        )
