from . import checkpoint, classifier, encoder, model, reference_cnn
from .checkpoint import (
    Checkpoint,
    CheckpointLoadError,
    CheckpointRole,
    freeze_encoder,
    load_checkpoint,
    parameter_hash,
    save_checkpoint,
)
from .classifier import ClassifierSpec, LinearClassifier
from .encoder import Encoder, EncoderSpec, build_encoder, register_encoder
from .model import City2SceneModel, build_model
from .reference_cnn import ReferenceCNN
