import dataclasses
import logging
import pathlib

import torch

from city2scene.data.manifest import (
    ClipRecord,
    Manifest,
    Split,
    TestSplitFileName,
    TrainSplitFileName,
    parse_manifest,
)
from city2scene.data.splits import carve_validation, stratified_split
from city2scene.data.synthetic import SplitFolderName
from city2scene.features.audio import load_audio, resample
from city2scene.features.cache import FeatureCache
from city2scene.features.spectrogram import Spectrogram, SpectrogramConfig, log_mel
from city2scene.pipeline.settings import DatasetSettings


class EmptySplitError(ValueError):
    def __init__(self, split: Split | None):
        name = split.value if split is not None else "requested"
        super().__init__(f"The {name} split contains no clips.")


def load_manifest(settings: DatasetSettings) -> Manifest:
    """
    Parse the meta file and assign splits: explicit split files first, then a TAU
    evaluation_setup folder next to the meta file, then a stratified split.
    A validation split is carved from train when validation_fraction > 0.
    """
    logger = logging.getLogger("[city2scene::load_manifest]")
    settings.validate()
    meta_file = pathlib.Path(settings.meta_file)

    split_files = None
    if settings.train_split_file is not None or settings.test_split_file is not None:
        split_files = (settings.train_split_file, settings.test_split_file)
    else:
        folder = meta_file.parent / SplitFolderName
        train_file = folder / TrainSplitFileName
        test_file = folder / TestSplitFileName
        if train_file.is_file() and test_file.is_file():
            split_files = (train_file, test_file)

    manifest = parse_manifest(
        meta_file,
        split_files=split_files,
        default_duration_s=settings.default_duration_s,
    )
    if split_files is None:
        logger.info(
            f"No split files found; holding out {settings.test_fraction:.0%} of"
            " every (scene, city) pair for testing."
        )
        manifest = stratified_split(
            manifest, settings.test_fraction, settings.split_seed
        )

    if settings.validation_fraction > 0:
        manifest = carve_validation(
            manifest, settings.validation_fraction, settings.split_seed
        )
    return manifest


def _fit_length(samples: torch.Tensor, number_of_samples: int) -> torch.Tensor:
    if samples.shape[0] >= number_of_samples:
        return samples[:number_of_samples]
    return torch.nn.functional.pad(samples, (0, number_of_samples - samples.shape[0]))


@dataclasses.dataclass
class ClipFeatureStore:
    """
    The clips of one split held in memory as a (M, N) waveform matrix, zero padded
    or cropped to the longest clip, with their scene and city targets. Log-mel
    features are computed once per preprocessing configuration.
    """

    records: list[ClipRecord] = dataclasses.field(default=None)
    waveforms: torch.Tensor = dataclasses.field(default=None)
    sample_rate_hz: int = dataclasses.field(default=None)
    scene_targets: torch.Tensor = dataclasses.field(default=None)
    city_targets: torch.Tensor = dataclasses.field(default=None)

    _cache: FeatureCache | None = dataclasses.field(default=None)
    _features: dict[tuple, torch.Tensor] = dataclasses.field(default=None)

    def __post_init__(self) -> None:
        if self._features is None:
            self._features = {}

    @classmethod
    def load(
        cls,
        manifest: Manifest,
        split: Split | str | None,
        sample_rate_hz: int,
        cache: FeatureCache | None = None,
    ) -> "ClipFeatureStore":
        """Loads the clips of one split, or every clip when split is None."""
        split = Split(split) if split is not None else None
        records = manifest.records if split is None else manifest.records_in(split)
        if len(records) == 0:
            raise EmptySplitError(split)

        samples = [load_audio(r.path, sample_rate_hz).samples for r in records]
        number_of_samples = max(s.shape[0] for s in samples)
        waveforms = torch.stack([_fit_length(s, number_of_samples) for s in samples])
        logging.getLogger("[city2scene::ClipFeatureStore]").debug(
            f"Loaded {len(records)} clips ({split.value if split else 'all splits'})"
            f" of {number_of_samples} samples."
        )
        return cls(
            records=records,
            waveforms=waveforms,
            sample_rate_hz=sample_rate_hz,
            scene_targets=torch.tensor(
                [manifest.scene_index(r.scene_label) for r in records],
                dtype=torch.long,
            ),
            city_targets=torch.tensor(
                [manifest.city_index(r.city_label) for r in records],
                dtype=torch.long,
            ),
            _cache=cache,
        )

    def __len__(self) -> int:
        return len(self.records)

    def targets(self, label: str) -> torch.Tensor:
        match label:
            case "scene":
                return self.scene_targets
            case "city":
                return self.city_targets
            case _:
                raise ValueError(f"Unknown label {label}.")

    def waveforms_at(self, sample_rate_hz: int) -> torch.Tensor:
        return resample(self.waveforms, self.sample_rate_hz, sample_rate_hz)

    def features(self, cfg: SpectrogramConfig, chunk_size: int = 64) -> torch.Tensor:
        """(M, F, T) log-mel features of every clip, memoized per configuration."""
        key = cfg.key()
        if key in self._features:
            return self._features[key]

        waveforms = self.waveforms_at(cfg.sample_rate_hz)
        rows: list[torch.Tensor | None] = [None] * len(self)
        missing = []
        for i, record in enumerate(self.records):
            cached = None
            if self._cache is not None:
                cached = self._cache.get(record.clip_id, cfg)
            if cached is not None:
                rows[i] = cached.values
            else:
                missing.append(i)

        for start in range(0, len(missing), chunk_size):
            indices = missing[start : start + chunk_size]
            values = log_mel(waveforms[indices], cfg)
            for i, row in zip(indices, values):
                rows[i] = row
                if self._cache is not None:
                    self._cache.put(
                        Spectrogram(
                            values=row, config=cfg, clip_id=self.records[i].clip_id
                        )
                    )

        features = torch.stack(rows)
        self._features[key] = features
        return features

    def batches(
        self, batch_size: int, shuffle: bool, seed: int = 0
    ) -> torch.utils.data.DataLoader:
        """Index batches. The order only depends on the seed."""
        generator = torch.Generator()
        generator.manual_seed(seed)
        return torch.utils.data.DataLoader(
            torch.arange(len(self)),
            batch_size=batch_size,
            shuffle=shuffle,
            generator=generator,
        )


def predict_logits(
    model: torch.nn.Module, features: torch.Tensor, batch_size: int = 64
) -> torch.Tensor:
    """Inference-mode logits of a (M, F, T) feature tensor."""
    device = next(model.parameters()).device
    was_training = model.training
    model.eval()
    outputs = []
    with torch.no_grad():
        for start in range(0, features.shape[0], batch_size):
            outputs.append(model(features[start : start + batch_size].to(device)))
    model.train(was_training)
    return torch.cat(outputs).cpu()
