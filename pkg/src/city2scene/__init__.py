from .base.errors import ShapeError, VocabularyMismatchError
from .base.settings import ConfigurationError, Settings
from .data.manifest import ClipRecord, Manifest, Split
from .data.synthetic import SyntheticConfig, generate_synthetic
from .evaluation.metrics import Metrics, evaluate
from .evaluation.report import ClasswiseReport, classwise_report
from .evaluation.sweep import SweepResult, lambda_sweep
from .features.spectrogram import SpectrogramConfig, log_mel
from .losses.distillation import KDConfig, combined_loss, kd_loss
from .losses.ensemble import ensemble_logits
from .models.checkpoint import (
    Checkpoint,
    CheckpointRole,
    load_checkpoint,
    save_checkpoint,
)
from .models.encoder import EncoderSpec
from .pipeline.data import load_manifest
from .pipeline.settings import StageConfig
from .pipeline.stages import train_baseline, train_stage1, train_stage2, train_stage3
