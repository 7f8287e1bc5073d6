import dataclasses
import hashlib
import io
import json
import logging
import os
import pathlib
import zipfile
from enum import Enum

import torch

from city2scene.features.spectrogram import SpectrogramConfig
from city2scene.losses.logits import LogitsKind
from city2scene.models.encoder import EncoderSpec
from city2scene.models.model import City2SceneModel, build_model

CheckpointFormatVersion = 1
EncoderBlobName = "encoder.pt"
ClassifierBlobName = "classifier.pt"
MetadataName = "metadata.json"


class CheckpointRole(Enum):
    city_model = "city_model"
    teacher = "teacher"
    student = "student"
    baseline = "baseline"


class CheckpointLoadError(Exception):
    def __init__(self, path: str | pathlib.Path, reason: str):
        super().__init__(f"Cannot load the checkpoint {path}: {reason}")


def parameter_hash(module: torch.nn.Module) -> str:
    """SHA-256 over every state entry (parameters and buffers) in key order."""
    digest = hashlib.sha256()
    for name, tensor in sorted(module.state_dict().items()):
        value = tensor.detach().cpu().contiguous()
        digest.update(name.encode("utf-8"))
        digest.update(str(value.dtype).encode("utf-8"))
        digest.update(str(tuple(value.shape)).encode("utf-8"))
        digest.update(value.reshape(-1).view(torch.uint8).numpy().tobytes())
    return digest.hexdigest()


@dataclasses.dataclass
class Checkpoint:
    model: City2SceneModel = dataclasses.field(default=None)
    role: CheckpointRole = dataclasses.field(default=None)
    encoder_spec: EncoderSpec = dataclasses.field(default=None)
    preprocessing: SpectrogramConfig = dataclasses.field(default=None)
    scene_vocab: list[str] = dataclasses.field(default=None)
    city_vocab: list[str] = dataclasses.field(default=None)
    config_snapshot: dict = dataclasses.field(default=None)
    metrics: dict = dataclasses.field(default=None)
    frozen_encoder: bool = dataclasses.field(default=None)

    def __post_init__(self) -> None:
        if self.preprocessing is None:
            self.preprocessing = SpectrogramConfig()

        if self.city_vocab is None:
            self.city_vocab = []

        if self.config_snapshot is None:
            self.config_snapshot = {}

        if self.metrics is None:
            self.metrics = {}

        if self.frozen_encoder is None:
            self.frozen_encoder = self.role is CheckpointRole.teacher

        if self.role is CheckpointRole.teacher and not self.frozen_encoder:
            raise ValueError("A teacher checkpoint must have a frozen encoder.")

        if self.model.classifier.n_classes != len(self.classes()):
            raise ValueError(
                f"The classifier has {self.model.classifier.n_classes} outputs but"
                f" the {self.output_kind().value} vocabulary has"
                f" {len(self.classes())} entries."
            )

        if self.frozen_encoder:
            self.model.freeze_encoder()

    def output_kind(self) -> LogitsKind:
        match self.role:
            case CheckpointRole.city_model:
                return LogitsKind.city
            case CheckpointRole.teacher:
                return LogitsKind.city_to_scene
            case _:
                return LogitsKind.scene

    def classes(self) -> list[str]:
        if self.role is CheckpointRole.city_model:
            return self.city_vocab
        return self.scene_vocab

    def encoder_hash(self) -> str:
        return parameter_hash(self.model.encoder)

    def classifier_hash(self) -> str:
        return parameter_hash(self.model.classifier)

    def metadata(self) -> dict:
        return {
            "format_version": CheckpointFormatVersion,
            "role": self.role.value,
            "frozen_encoder": self.frozen_encoder,
            "encoder_hash": self.encoder_hash(),
            "classifier_hash": self.classifier_hash(),
            "encoder_spec": self.encoder_spec.to_dict(),
            "preprocessing": self.preprocessing.to_dict(),
            "scene_vocab": list(self.scene_vocab),
            "city_vocab": list(self.city_vocab),
            "config_snapshot": self.config_snapshot,
            "metrics": self.metrics,
        }


def freeze_encoder(checkpoint: Checkpoint) -> Checkpoint:
    return dataclasses.replace(checkpoint, frozen_encoder=True)


def _state_bytes(module: torch.nn.Module) -> bytes:
    buffer = io.BytesIO()
    torch.save(module.state_dict(), buffer)
    return buffer.getvalue()


def save_checkpoint(checkpoint: Checkpoint, path: str | pathlib.Path) -> pathlib.Path:
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    temporary = path.with_name(path.name + ".partial")
    with zipfile.ZipFile(temporary, "w", compression=zipfile.ZIP_DEFLATED) as archive:
        archive.writestr(EncoderBlobName, _state_bytes(checkpoint.model.encoder))
        archive.writestr(
            ClassifierBlobName, _state_bytes(checkpoint.model.classifier)
        )
        archive.writestr(
            MetadataName, json.dumps(checkpoint.metadata(), indent=2, sort_keys=True)
        )
    os.replace(temporary, path)
    logging.getLogger("[city2scene::Checkpoint]").info(
        f"Saved {checkpoint.role.value} checkpoint to {path}."
    )
    return path


def load_checkpoint(path: str | pathlib.Path) -> Checkpoint:
    """
    Rebuilds the model from the stored encoder specification and verifies the
    parameter hashes. Any failure raises CheckpointLoadError and no model is
    returned.
    """
    path = pathlib.Path(path)
    if not path.is_file():
        raise CheckpointLoadError(path, "file not found")

    try:
        with zipfile.ZipFile(path, "r") as archive:
            metadata = json.loads(archive.read(MetadataName).decode("utf-8"))
            encoder_state = torch.load(
                io.BytesIO(archive.read(EncoderBlobName)), weights_only=True
            )
            classifier_state = torch.load(
                io.BytesIO(archive.read(ClassifierBlobName)), weights_only=True
            )
    except (zipfile.BadZipFile, KeyError, EOFError, OSError, RuntimeError) as err:
        raise CheckpointLoadError(path, f"corrupt archive ({err})") from err
    except (json.JSONDecodeError, UnicodeDecodeError) as err:
        raise CheckpointLoadError(path, f"corrupt metadata ({err})") from err

    version = metadata.get("format_version")
    if version != CheckpointFormatVersion:
        raise CheckpointLoadError(
            path, f"format version {version}, expected {CheckpointFormatVersion}"
        )

    try:
        role = CheckpointRole(metadata["role"])
        encoder_spec = EncoderSpec.from_dict(metadata["encoder_spec"])
        preprocessing = SpectrogramConfig.from_dict(metadata["preprocessing"])
        vocab = (
            metadata["city_vocab"]
            if role is CheckpointRole.city_model
            else metadata["scene_vocab"]
        )
        model = build_model(encoder_spec, n_classes=len(vocab))
        model.encoder.load_state_dict(encoder_state, strict=True)
        model.classifier.load_state_dict(classifier_state, strict=True)
    except (KeyError, ValueError, RuntimeError) as err:
        raise CheckpointLoadError(path, str(err)) from err

    if parameter_hash(model.encoder) != metadata["encoder_hash"]:
        raise CheckpointLoadError(path, "encoder parameters do not match their hash")
    if parameter_hash(model.classifier) != metadata["classifier_hash"]:
        raise CheckpointLoadError(
            path, "classifier parameters do not match their hash"
        )

    model.eval()
    return Checkpoint(
        model=model,
        role=role,
        encoder_spec=encoder_spec,
        preprocessing=preprocessing,
        scene_vocab=list(metadata["scene_vocab"]),
        city_vocab=list(metadata["city_vocab"]),
        config_snapshot=metadata["config_snapshot"],
        metrics=metadata["metrics"],
        frozen_encoder=bool(metadata["frozen_encoder"]),
    )
