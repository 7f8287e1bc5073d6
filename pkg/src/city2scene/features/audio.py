import dataclasses
import pathlib

import numpy as np
import soundfile as sf
import torch
import torchaudio


class AudioDecodeError(IOError):
    def __init__(self, path: str | pathlib.Path, message: Exception | str):
        super().__init__(f"Failed to decode {path}. Message: {str(message)}")


class MultichannelAudioError(ValueError):
    def __init__(self, path: str | pathlib.Path, channels: int):
        super().__init__(
            f"{path} has {channels} channels. Only mono audio is supported;"
            " downmix it explicitly before use."
        )


@dataclasses.dataclass
class Waveform:
    samples: torch.Tensor = dataclasses.field(default=None)
    sample_rate_hz: int = dataclasses.field(default=None)

    def __post_init__(self) -> None:
        if isinstance(self.samples, np.ndarray):
            self.samples = torch.from_numpy(np.ascontiguousarray(self.samples))
        if self.samples is not None and self.samples.ndim != 1:
            raise ValueError(
                f"A waveform is a vector of samples (got shape"
                f" {tuple(self.samples.shape)})."
            )

    def __len__(self) -> int:
        return int(self.samples.shape[0])

    def duration_s(self) -> float:
        return len(self) / self.sample_rate_hz


def resample(samples: torch.Tensor, source_hz: int, target_hz: int) -> torch.Tensor:
    if source_hz == target_hz:
        return samples
    return torchaudio.functional.resample(
        samples, orig_freq=source_hz, new_freq=target_hz
    )


def load_audio(path: str | pathlib.Path, target_sample_rate_hz: int) -> Waveform:
    """
    Load a mono PCM file as float32 samples in [-1, 1], resampled to the target rate.
    Multichannel files are rejected instead of being downmixed.
    """
    try:
        data, sample_rate_hz = sf.read(str(path), dtype="float32", always_2d=True)
    except (RuntimeError, TypeError, ValueError) as err:  # LibsndfileError included
        raise AudioDecodeError(path, err) from err

    if data.shape[1] != 1:
        raise MultichannelAudioError(path, data.shape[1])

    samples = torch.from_numpy(np.ascontiguousarray(data[:, 0]))
    samples = resample(samples, sample_rate_hz, target_sample_rate_hz)
    return Waveform(samples=samples, sample_rate_hz=target_sample_rate_hz)
