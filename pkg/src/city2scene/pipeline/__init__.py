from . import data, schedulers, settings, stages, teachers, trainer
from .data import ClipFeatureStore, EmptySplitError, load_manifest, predict_logits
from .schedulers import (
    build_scheduler,
    learning_rate,
    lr_cosine_warm_restarts,
    lr_warmup_linear_down,
)
from .settings import (
    DatasetSettings,
    OptimizerName,
    OptimizerSpec,
    SchedulerKind,
    SchedulerSpec,
    StageConfig,
)
from .stages import (
    DegenerateTaskError,
    FreezeViolationError,
    train_baseline,
    train_stage1,
    train_stage2,
    train_stage3,
)
from .teachers import MissingTeachersError, TeacherEnsemble, teacher_logits
from .trainer import EpochRecord, Trainer
