import dataclasses
import logging
import pathlib

import numpy as np
import torch

from city2scene.base.settings import save_json
from city2scene.features.spectrogram import Spectrogram, SpectrogramConfig


@dataclasses.dataclass
class FeatureCache:
    """
    On-disk spectrogram cache. Each entry is an .npy blob under a folder named after
    the configuration digest; the folder holds a config.json sidecar.
    """

    _directory: pathlib.Path = dataclasses.field(default=None)
    _logger: logging.Logger = dataclasses.field(default=None)
    directory: dataclasses.InitVar[str | pathlib.Path] = dataclasses.field(
        default=None
    )

    def __post_init__(self, directory: str | pathlib.Path) -> None:
        self._directory = pathlib.Path(directory)
        self._logger = logging.getLogger("[city2scene::FeatureCache]")

    def _ensure_folder(self, cfg: SpectrogramConfig) -> pathlib.Path:
        folder = self._directory / cfg.digest()
        if not (folder / "config.json").is_file():
            folder.mkdir(parents=True, exist_ok=True)
            save_json(cfg.to_dict(), folder / "config.json")
        return folder

    def path(self, clip_id: str, cfg: SpectrogramConfig) -> pathlib.Path:
        # Lookup only, nothing is created on disk.
        return self._directory / cfg.digest() / f"{clip_id}.npy"

    def get(self, clip_id: str, cfg: SpectrogramConfig) -> Spectrogram | None:
        path = self.path(clip_id, cfg)
        if not path.is_file():
            return None
        try:
            values = np.load(path, allow_pickle=False)
        except (OSError, ValueError) as err:
            self._logger.warning(f"Ignoring unreadable cache entry {path}: {err}")
            return None
        return Spectrogram(values=torch.from_numpy(values), config=cfg, clip_id=clip_id)

    def put(self, spectrogram: Spectrogram) -> None:
        self._ensure_folder(spectrogram.config)
        path = self.path(spectrogram.clip_id, spectrogram.config)
        temporary = path.with_suffix(".tmp.npy")
        np.save(temporary, spectrogram.values.cpu().numpy(), allow_pickle=False)
        temporary.replace(path)
        self._logger.debug(f"Cached {spectrogram.clip_id} in {path}.")
