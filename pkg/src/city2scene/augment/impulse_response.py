import logging
import pathlib

import numpy as np
import torch
import torchaudio

from city2scene.base.settings import ConfigurationError
from city2scene.features.audio import load_audio


def load_impulse_responses(
    directory: str | pathlib.Path, sample_rate_hz: int
) -> list[torch.Tensor]:
    files = sorted(pathlib.Path(directory).glob("*.wav"))
    if len(files) == 0:
        raise ConfigurationError([f"ir_bank {directory} contains no .wav files"])
    bank = [load_audio(f, sample_rate_hz).samples for f in files]
    logging.getLogger("[city2scene::load_impulse_responses]").info(
        f"Loaded {len(bank)} impulse responses from {directory}."
    )
    return bank


def dir_aug(
    waveforms: torch.Tensor,
    p: float,
    ir_bank: list[torch.Tensor],
    rng: np.random.Generator,
) -> torch.Tensor:
    """
    With probability p per item, convolve the waveform with a random device impulse
    response, keep the original length and restore the original peak. waveforms is
    (B, N).
    """
    output = waveforms.clone()
    if p == 0.0:
        return output
    if ir_bank is None or len(ir_bank) == 0:
        raise ConfigurationError(["DirAug with p > 0 needs a non-empty ir_bank"])

    number_of_samples = waveforms.shape[-1]
    for i in range(waveforms.shape[0]):
        if rng.random() >= p:
            continue
        response = ir_bank[int(rng.integers(0, len(ir_bank)))].to(waveforms.dtype)
        convolved = torchaudio.functional.fftconvolve(waveforms[i], response)
        convolved = convolved[:number_of_samples]
        peak_in = waveforms[i].abs().max()
        peak_out = convolved.abs().max()
        if peak_out > 0:
            convolved = convolved * (peak_in / peak_out)
        output[i] = convolved
    return output
