import dataclasses
from enum import Enum
from typing import ClassVar

from city2scene.augment.settings import AugmentConfig
from city2scene.base.settings import Settings, prefixed
from city2scene.features.spectrogram import SpectrogramConfig
from city2scene.losses.distillation import KDConfig
from city2scene.models.encoder import EncoderSpec


class OptimizerName(Enum):
    adam = "adam"
    adamw = "adamw"


class SchedulerKind(Enum):
    cosine_warm_restarts = "cosine_warm_restarts"
    warmup_linear_down = "warmup_linear_down"
    constant = "constant"


@dataclasses.dataclass
class OptimizerSpec(Settings):
    LoggerName: ClassVar[str] = "[city2scene::OptimizerSpec]"

    name: OptimizerName = dataclasses.field(default=None)
    weight_decay: float = dataclasses.field(default=None)

    def __post_init__(self) -> None:
        if self.name is None:
            self.name = OptimizerName.adam

        if self.weight_decay is None:
            self.weight_decay = 0.0

    def problems(self) -> list[str]:
        if self.weight_decay < 0:
            return [f"weight_decay must be non-negative (got {self.weight_decay})"]
        return []


@dataclasses.dataclass
class SchedulerSpec(Settings):
    """
    Learning-rate schedule, evaluated on fractional epochs. The optimizer's
    learning rate is always peak_lr scaled by the schedule.
    """

    LoggerName: ClassVar[str] = "[city2scene::SchedulerSpec]"

    kind: SchedulerKind = dataclasses.field(default=None)
    peak_lr: float = dataclasses.field(default=None)
    min_lr: float = dataclasses.field(default=None)
    t0: int = dataclasses.field(default=None)
    t_mult: int = dataclasses.field(default=None)
    warmup_epochs: int = dataclasses.field(default=None)
    down_epochs: int = dataclasses.field(default=None)

    def __post_init__(self) -> None:
        if self.kind is None:
            self.kind = SchedulerKind.cosine_warm_restarts

        if self.peak_lr is None:
            self.peak_lr = 1e-3

        if self.min_lr is None:
            self.min_lr = 0.0

        if self.t0 is None:
            self.t0 = 10

        if self.t_mult is None:
            self.t_mult = 2

        if self.warmup_epochs is None:
            self.warmup_epochs = 0

        if self.down_epochs is None:
            self.down_epochs = 0

    def problems(self) -> list[str]:
        problems = []
        if self.peak_lr <= 0:
            problems.append(f"peak_lr must be positive (got {self.peak_lr})")
        if self.min_lr < 0 or self.min_lr > self.peak_lr:
            problems.append(f"min_lr must be in [0, peak_lr] (got {self.min_lr})")
        match self.kind:
            case SchedulerKind.cosine_warm_restarts:
                if self.t0 < 1:
                    problems.append(f"t0 must be at least 1 (got {self.t0})")
                if self.t_mult < 1:
                    problems.append(f"t_mult must be at least 1 (got {self.t_mult})")
            case SchedulerKind.warmup_linear_down:
                if self.warmup_epochs < 0 or self.down_epochs < 0:
                    problems.append("warmup_epochs and down_epochs must be >= 0")
                if self.warmup_epochs + self.down_epochs == 0:
                    problems.append("warmup_epochs + down_epochs must be positive")
        return problems


@dataclasses.dataclass
class DatasetSettings(Settings):
    """
    Where the clips are and how they are split. Without explicit split files the
    TAU evaluation_setup folder next to the meta file is used when present,
    otherwise test_fraction drives a stratified split.
    """

    LoggerName: ClassVar[str] = "[city2scene::DatasetSettings]"

    meta_file: str = dataclasses.field(default=None)
    train_split_file: str | None = dataclasses.field(default=None)
    test_split_file: str | None = dataclasses.field(default=None)
    test_fraction: float = dataclasses.field(default=None)
    split_seed: int = dataclasses.field(default=None)
    validation_fraction: float = dataclasses.field(default=None)
    feature_cache_dir: str | None = dataclasses.field(default=None)
    default_duration_s: float = dataclasses.field(default=None)

    def __post_init__(self) -> None:
        if self.test_fraction is None:
            self.test_fraction = 0.3

        if self.split_seed is None:
            self.split_seed = 0

        if self.validation_fraction is None:
            self.validation_fraction = 0.0

        if self.default_duration_s is None:
            self.default_duration_s = 10.0

    def problems(self) -> list[str]:
        problems = []
        if self.meta_file is None:
            problems.append("meta_file is required")
        if not 0.0 < self.test_fraction < 1.0:
            problems.append(
                f"test_fraction must be in (0, 1) (got {self.test_fraction})"
            )
        if not 0.0 <= self.validation_fraction < 1.0:
            problems.append(
                "validation_fraction must be in [0, 1)"
                f" (got {self.validation_fraction})"
            )
        if self.default_duration_s <= 0:
            problems.append("default_duration_s must be positive")
        return problems


@dataclasses.dataclass
class StageConfig(Settings):
    """Everything one training run needs; JSON keys mirror the field names."""

    LoggerName: ClassVar[str] = "[city2scene::StageConfig]"

    stage: int = dataclasses.field(default=None)
    dataset: DatasetSettings = dataclasses.field(default=None)
    encoder: EncoderSpec = dataclasses.field(default=None)
    preprocessing: SpectrogramConfig = dataclasses.field(default=None)
    augment: AugmentConfig = dataclasses.field(default=None)
    optimizer: OptimizerSpec = dataclasses.field(default=None)
    scheduler: SchedulerSpec = dataclasses.field(default=None)
    max_epochs: int = dataclasses.field(default=None)
    batch_size: int = dataclasses.field(default=None)
    kd: KDConfig | None = dataclasses.field(default=None)
    teacher_checkpoints: list[str] = dataclasses.field(default=None)
    seed: int = dataclasses.field(default=None)
    device: str = dataclasses.field(default=None)

    def __post_init__(self) -> None:
        if self.stage is None:
            self.stage = 1

        if self.dataset is None:
            self.dataset = DatasetSettings()

        if self.preprocessing is None:
            self.preprocessing = SpectrogramConfig()

        if self.encoder is None:
            self.encoder = EncoderSpec(n_mels=self.preprocessing.n_mels)

        if self.augment is None:
            self.augment = AugmentConfig.preset("desk")

        if self.optimizer is None:
            self.optimizer = OptimizerSpec()

        if self.scheduler is None:
            self.scheduler = SchedulerSpec()

        if self.max_epochs is None:
            self.max_epochs = 30

        if self.batch_size is None:
            self.batch_size = 32

        if self.kd is None and self.stage == 3:
            self.kd = KDConfig()

        if self.teacher_checkpoints is None:
            self.teacher_checkpoints = []

        if self.seed is None:
            self.seed = 0

        if self.device is None:
            self.device = "cpu"

    @classmethod
    def preset(cls, name: str, stage: int = 1, **kwargs) -> "StageConfig":
        """
        Backbone presets. The encoder is always the reference CNN sized to the
        preset's mel bins; swap in a plugin through encoder.architecture.
        """
        preprocessing = SpectrogramConfig.preset(name)
        match name:
            case "cp_resnet" | "bc_resnet" | "tf_sepnet":
                optimizer = OptimizerSpec(name=OptimizerName.adam)
                scheduler = SchedulerSpec(
                    kind=SchedulerKind.cosine_warm_restarts,
                    peak_lr=0.04,
                    t0=10,
                    t_mult=2,
                )
                max_epochs = 150
            case "passt":
                optimizer = OptimizerSpec(name=OptimizerName.adam)
                scheduler = SchedulerSpec(
                    kind=SchedulerKind.warmup_linear_down,
                    peak_lr=1e-5,
                    warmup_epochs=3,
                    down_epochs=10,
                )
                max_epochs = 13
            case "beats":
                optimizer = OptimizerSpec(name=OptimizerName.adamw)
                scheduler = SchedulerSpec(
                    kind=SchedulerKind.warmup_linear_down,
                    peak_lr=1e-5,
                    warmup_epochs=4,
                    down_epochs=26,
                )
                max_epochs = 30
            case "desk":
                optimizer = OptimizerSpec(name=OptimizerName.adam)
                scheduler = SchedulerSpec(
                    kind=SchedulerKind.cosine_warm_restarts,
                    peak_lr=1e-3,
                    t0=10,
                    t_mult=2,
                )
                max_epochs = 30
            case _:
                raise ValueError(f"Unknown backbone preset {name}.")

        defaults = dict(
            stage=stage,
            encoder=EncoderSpec(n_mels=preprocessing.n_mels),
            preprocessing=preprocessing,
            augment=AugmentConfig.preset(name),
            optimizer=optimizer,
            scheduler=scheduler,
            max_epochs=max_epochs,
        )
        defaults.update(kwargs)
        return cls(**defaults)

    def problems(self) -> list[str]:
        problems = []
        if self.stage not in (1, 2, 3):
            problems.append(f"stage must be 1, 2 or 3 (got {self.stage})")
        if self.max_epochs < 1:
            problems.append(f"max_epochs must be at least 1 (got {self.max_epochs})")
        if self.batch_size < 1:
            problems.append(f"batch_size must be at least 1 (got {self.batch_size})")

        problems += prefixed("dataset.", self.dataset.problems())
        problems += prefixed("encoder.", self.encoder.problems())
        problems += prefixed("preprocessing.", self.preprocessing.problems())
        problems += prefixed("augment.", self.augment.problems())
        problems += prefixed("optimizer.", self.optimizer.problems())
        problems += prefixed("scheduler.", self.scheduler.problems())

        if self.encoder.n_mels != self.preprocessing.n_mels:
            problems.append(
                f"encoder.n_mels ({self.encoder.n_mels}) must equal"
                f" preprocessing.n_mels ({self.preprocessing.n_mels})"
            )
        if (
            self.scheduler.kind is SchedulerKind.warmup_linear_down
            and self.scheduler.warmup_epochs + self.scheduler.down_epochs
            != self.max_epochs
        ):
            problems.append(
                "scheduler.warmup_epochs + scheduler.down_epochs"
                f" ({self.scheduler.warmup_epochs} + {self.scheduler.down_epochs})"
                f" must equal max_epochs ({self.max_epochs})"
            )
        if self.stage == 3:
            if self.kd is None:
                problems.append("stage 3 needs a kd section")
            else:
                problems += prefixed("kd.", self.kd.problems())
        return problems
