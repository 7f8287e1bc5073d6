import copy
import dataclasses
import logging

import torch

from city2scene.base.settings import ConfigurationError
from city2scene.data.manifest import Manifest, Split
from city2scene.features.cache import FeatureCache
from city2scene.models.checkpoint import Checkpoint, CheckpointRole
from city2scene.models.classifier import ClassifierSpec, LinearClassifier
from city2scene.models.model import City2SceneModel, build_model
from city2scene.pipeline.data import ClipFeatureStore
from city2scene.pipeline.settings import StageConfig
from city2scene.pipeline.teachers import MissingTeachersError, TeacherEnsemble
from city2scene.pipeline.trainer import EpochRecord, Trainer


class DegenerateTaskError(ValueError):
    def __init__(self, label: str, number_of_classes: int):
        super().__init__(
            f"The training split holds {number_of_classes} {label} class(es); at"
            " least two are needed."
        )


class FreezeViolationError(AssertionError):
    def __init__(self, before: str, after: str):
        super().__init__(
            f"The frozen encoder changed during training (hash {before[:12]} became"
            f" {after[:12]})."
        )


@dataclasses.dataclass
class _Stores:
    train: ClipFeatureStore = dataclasses.field(default=None)
    test: ClipFeatureStore | None = dataclasses.field(default=None)
    validation: ClipFeatureStore | None = dataclasses.field(default=None)


def _load_stores(cfg: StageConfig, manifest: Manifest) -> _Stores:
    cache = None
    if cfg.dataset.feature_cache_dir is not None:
        cache = FeatureCache(directory=cfg.dataset.feature_cache_dir)

    def load(split: Split) -> ClipFeatureStore | None:
        if len(manifest.records_in(split)) == 0:
            return None
        return ClipFeatureStore.load(
            manifest, split, cfg.preprocessing.sample_rate_hz, cache=cache
        )

    return _Stores(
        train=ClipFeatureStore.load(
            manifest, Split.train, cfg.preprocessing.sample_rate_hz, cache=cache
        ),
        test=load(Split.test),
        validation=load(Split.validation),
    )


def _check_stage(cfg: StageConfig, expected: int) -> None:
    cfg.validate()
    if cfg.stage != expected:
        raise ConfigurationError(
            [f"stage is {cfg.stage}, this run trains stage {expected}"]
        )


def _run_metrics(
    trainer: Trainer, stores: _Stores, history: list[EpochRecord]
) -> dict:
    metrics = {"train_accuracy": trainer.evaluate_accuracy(stores.train)}
    if stores.test is not None:
        metrics["test_accuracy"] = trainer.evaluate_accuracy(stores.test)
    if stores.validation is not None:
        metrics["validation_accuracy"] = trainer.evaluate_accuracy(stores.validation)
    metrics["history"] = [dataclasses.asdict(r) for r in history]
    return metrics


def train_stage1(cfg: StageConfig, manifest: Manifest) -> Checkpoint:
    """Train an encoder and a city classifier on the city labels."""
    _check_stage(cfg, 1)
    logger = logging.getLogger("[city2scene::train_stage1]")

    cities = {r.city_label for r in manifest.records_in(Split.train)}
    if len(cities) < 2:
        raise DegenerateTaskError("city", len(cities))

    stores = _load_stores(cfg, manifest)
    torch.manual_seed(cfg.seed)
    model = build_model(cfg.encoder, n_classes=len(manifest.city_vocab))
    trainer = Trainer(cfg, model, label="city")
    history = trainer.fit(stores.train, stores.test)
    metrics = _run_metrics(trainer, stores, history)
    logger.info(f"City model trained: test accuracy {metrics.get('test_accuracy')}.")

    return Checkpoint(
        model=model,
        role=CheckpointRole.city_model,
        encoder_spec=cfg.encoder,
        preprocessing=cfg.preprocessing,
        scene_vocab=list(manifest.scene_vocab),
        city_vocab=list(manifest.city_vocab),
        config_snapshot=cfg.to_dict(),
        metrics=metrics,
        frozen_encoder=False,
    )


def train_stage2(
    city_checkpoint: Checkpoint, cfg: StageConfig, manifest: Manifest
) -> Checkpoint:
    """
    Train a new scene classifier on the frozen city encoder. The result is a
    teacher checkpoint; the input checkpoint is left untouched.
    """
    _check_stage(cfg, 2)
    logger = logging.getLogger("[city2scene::train_stage2]")

    if city_checkpoint.role is not CheckpointRole.city_model:
        raise ValueError(
            f"Stage 2 starts from a city_model checkpoint, got"
            f" {city_checkpoint.role.value}."
        )
    if city_checkpoint.preprocessing.key() != cfg.preprocessing.key():
        raise ConfigurationError(
            ["preprocessing differs from the one the city encoder was trained with"]
        )

    stores = _load_stores(cfg, manifest)
    encoder = copy.deepcopy(city_checkpoint.model.encoder)
    torch.manual_seed(cfg.seed)
    classifier = LinearClassifier(
        ClassifierSpec(
            in_dim=encoder.embedding_dim, n_classes=len(manifest.scene_vocab)
        )
    )
    model = City2SceneModel(encoder, classifier).freeze_encoder()

    teacher = Checkpoint(
        model=model,
        role=CheckpointRole.teacher,
        encoder_spec=city_checkpoint.encoder_spec,
        preprocessing=city_checkpoint.preprocessing,
        scene_vocab=list(manifest.scene_vocab),
        city_vocab=list(manifest.city_vocab),
        config_snapshot=cfg.to_dict(),
        frozen_encoder=True,
    )
    hash_before = teacher.encoder_hash()

    trainer = Trainer(cfg, model, label="scene")
    history = trainer.fit(stores.train, stores.test)

    hash_after = teacher.encoder_hash()
    if hash_after != hash_before:
        raise FreezeViolationError(hash_before, hash_after)

    teacher.metrics = _run_metrics(trainer, stores, history)
    teacher.metrics["encoder_hash"] = hash_after
    logger.info(
        "Scene classifier trained on frozen city features: test accuracy"
        f" {teacher.metrics.get('test_accuracy')}."
    )
    return teacher


def _train_scene_model(
    cfg: StageConfig,
    manifest: Manifest,
    teachers: TeacherEnsemble | None,
    role: CheckpointRole,
) -> Checkpoint:
    stores = _load_stores(cfg, manifest)
    # Seeded after the teachers are built: student and baseline start equal.
    torch.manual_seed(cfg.seed)
    model = build_model(cfg.encoder, n_classes=len(manifest.scene_vocab))
    trainer = Trainer(
        cfg,
        model,
        label="scene",
        teachers=teachers,
        kd=cfg.kd if teachers is not None else None,
    )
    history = trainer.fit(stores.train, stores.test)
    metrics = _run_metrics(trainer, stores, history)
    if teachers is not None:
        metrics["lambda"] = cfg.kd.lambda_weight
        metrics["temperature"] = cfg.kd.temperature
        metrics["number_of_teachers"] = len(teachers)

    return Checkpoint(
        model=model,
        role=role,
        encoder_spec=cfg.encoder,
        preprocessing=cfg.preprocessing,
        scene_vocab=list(manifest.scene_vocab),
        city_vocab=list(manifest.city_vocab),
        config_snapshot=cfg.to_dict(),
        metrics=metrics,
        frozen_encoder=False,
    )


def train_stage3(
    cfg: StageConfig, teachers: list[Checkpoint], manifest: Manifest
) -> Checkpoint:
    """
    Train a fresh student on
    lambda * CE(z_s, y_s) + (1 - lambda) * tau^2 * KL(teacher || student).
    """
    _check_stage(cfg, 3)
    if teachers is None or len(teachers) == 0:
        raise MissingTeachersError()

    ensemble = TeacherEnsemble(
        teachers,
        scene_vocab=manifest.scene_vocab,
        mode=cfg.kd.teacher_mode,
        preprocessing=cfg.preprocessing,
    )
    logging.getLogger("[city2scene::train_stage3]").info(
        f"Distilling from {len(ensemble)} teacher(s) with"
        f" lambda={cfg.kd.lambda_weight}, tau={cfg.kd.temperature}."
    )
    return _train_scene_model(cfg, manifest, ensemble, CheckpointRole.student)


def train_baseline(cfg: StageConfig, manifest: Manifest) -> Checkpoint:
    """Scene model trained on labels only; same code path as stage 3."""
    cfg.validate()
    return _train_scene_model(cfg, manifest, None, CheckpointRole.baseline)
