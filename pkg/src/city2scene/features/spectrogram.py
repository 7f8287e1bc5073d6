import dataclasses
import functools
import hashlib
import json
import math
from typing import ClassVar

import numpy as np
import torch
import torchaudio

from city2scene.base.settings import Settings
from city2scene.features.audio import Waveform


class WaveformTooShortError(ValueError):
    def __init__(self, number_of_samples: int, window_samples: int):
        super().__init__(
            f"The waveform has {number_of_samples} samples, fewer than one analysis"
            f" window ({window_samples} samples)."
        )


@dataclasses.dataclass
class SpectrogramConfig(Settings):
    LoggerName: ClassVar[str] = "[city2scene::SpectrogramConfig]"

    sample_rate_hz: int = dataclasses.field(default=None)
    window_ms: float = dataclasses.field(default=None)
    hop_ms: float = dataclasses.field(default=None)
    n_mels: int = dataclasses.field(default=None)
    fmin_hz: float = dataclasses.field(default=None)
    fmax_hz: float = dataclasses.field(default=None)
    log_offset: float = dataclasses.field(default=None)

    def __post_init__(self) -> None:
        if self.sample_rate_hz is None:
            self.sample_rate_hz = 16000

        if self.window_ms is None:
            self.window_ms = 32.0

        if self.hop_ms is None:
            self.hop_ms = 10.0

        if self.n_mels is None:
            self.n_mels = 64

        if self.fmin_hz is None:
            self.fmin_hz = 0.0

        if self.fmax_hz is None:
            self.fmax_hz = self.sample_rate_hz / 2.0

        if self.log_offset is None:
            self.log_offset = 1e-5

    @classmethod
    def preset(cls, name: str) -> "SpectrogramConfig":
        match name:
            case "cp_resnet":
                # 23.25 ms is a 744-sample hop at 32 kHz.
                return cls(
                    sample_rate_hz=32000, window_ms=96, hop_ms=23.25, n_mels=256
                )
            case "bc_resnet":
                return cls(sample_rate_hz=32000, window_ms=96, hop_ms=16, n_mels=256)
            case "tf_sepnet":
                return cls(sample_rate_hz=32000, window_ms=96, hop_ms=16, n_mels=512)
            case "passt":
                return cls(sample_rate_hz=32000, window_ms=25, hop_ms=10, n_mels=128)
            case "beats":
                return cls(sample_rate_hz=16000, window_ms=25, hop_ms=10, n_mels=128)
            case "desk":
                return cls()
            case _:
                raise ValueError(f"Unknown preprocessing preset {name}.")

    def problems(self) -> list[str]:
        problems = []
        if self.sample_rate_hz <= 0:
            problems.append("sample_rate_hz must be positive")
        if self.window_ms <= 0:
            problems.append("window_ms must be positive")
        if self.hop_ms <= 0 or self.hop_ms > self.window_ms:
            problems.append(
                f"hop_ms must be in (0, window_ms] (got {self.hop_ms}"
                f" with window_ms={self.window_ms})"
            )
        if self.n_mels < 1:
            problems.append(f"n_mels must be at least 1 (got {self.n_mels})")
        if self.fmin_hz < 0 or self.fmin_hz >= self.fmax_hz:
            problems.append("fmin_hz must be in [0, fmax_hz)")
        if self.fmax_hz > self.sample_rate_hz / 2.0:
            problems.append(
                f"fmax_hz ({self.fmax_hz}) exceeds the Nyquist frequency"
                f" ({self.sample_rate_hz / 2.0})"
            )
        if self.log_offset <= 0:
            problems.append("log_offset must be positive")
        return problems

    def window_samples(self) -> int:
        return int(round(self.window_ms * self.sample_rate_hz / 1000.0))

    def hop_samples(self) -> int:
        return int(round(self.hop_ms * self.sample_rate_hz / 1000.0))

    def n_fft(self) -> int:
        return 1 << max(0, math.ceil(math.log2(self.window_samples())))

    def expected_frames(self, number_of_samples: int) -> int:
        return number_of_samples // self.hop_samples() + 1

    def key(self) -> tuple:
        return (
            self.sample_rate_hz,
            float(self.window_ms),
            float(self.hop_ms),
            self.n_mels,
            float(self.fmin_hz),
            float(self.fmax_hz),
            float(self.log_offset),
        )

    def digest(self) -> str:
        text = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha1(text.encode("utf-8")).hexdigest()[:16]


@dataclasses.dataclass
class Spectrogram:
    values: torch.Tensor = dataclasses.field(default=None)
    config: SpectrogramConfig = dataclasses.field(default=None)
    clip_id: str = dataclasses.field(default="")

    def __post_init__(self) -> None:
        if self.values.ndim != 2 or self.values.shape[0] != self.config.n_mels:
            raise ValueError(
                f"Expected a ({self.config.n_mels}, T) matrix, got"
                f" {tuple(self.values.shape)}."
            )
        if not bool(torch.isfinite(self.values).all()):
            raise ValueError(f"Spectrogram of {self.clip_id} has non-finite values.")

    @property
    def shape(self) -> tuple[int, int]:
        return int(self.values.shape[0]), int(self.values.shape[1])


@functools.lru_cache(maxsize=16)
def _mel_transform(key: tuple) -> torchaudio.transforms.MelSpectrogram:
    cfg = SpectrogramConfig(*key)
    return torchaudio.transforms.MelSpectrogram(
        sample_rate=cfg.sample_rate_hz,
        n_fft=cfg.n_fft(),
        win_length=cfg.window_samples(),
        hop_length=cfg.hop_samples(),
        f_min=cfg.fmin_hz,
        f_max=cfg.fmax_hz,
        n_mels=cfg.n_mels,
        window_fn=torch.hann_window,
        power=2.0,
        center=True,
        pad_mode="reflect",
        norm=None,
        mel_scale="htk",
    )


def log_mel(samples: torch.Tensor, cfg: SpectrogramConfig) -> torch.Tensor:
    """
    Log-mel energies of a (N,) or (B, N) float tensor sampled at
    cfg.sample_rate_hz. Returns (F, T) or (B, F, T).
    """
    if samples.shape[-1] < cfg.window_samples():
        raise WaveformTooShortError(int(samples.shape[-1]), cfg.window_samples())

    transform = _mel_transform(cfg.key())
    with torch.no_grad():
        power = transform(samples.to(torch.float32))
    return torch.log(power + cfg.log_offset)


def mel_spectrogram(
    waveform: Waveform | torch.Tensor | np.ndarray,
    cfg: SpectrogramConfig,
    clip_id: str = "",
) -> Spectrogram:
    if isinstance(waveform, Waveform):
        if waveform.sample_rate_hz != cfg.sample_rate_hz:
            raise ValueError(
                f"The waveform is sampled at {waveform.sample_rate_hz} Hz, the"
                f" configuration expects {cfg.sample_rate_hz} Hz."
            )
        samples = waveform.samples
    elif isinstance(waveform, np.ndarray):
        samples = torch.from_numpy(np.ascontiguousarray(waveform))
    else:
        samples = waveform

    if samples.ndim != 1:
        raise ValueError("mel_spectrogram expects a single mono waveform.")

    return Spectrogram(values=log_mel(samples, cfg), config=cfg, clip_id=clip_id)
