import math

import numpy as np
import pytest
import soundfile as sf
import torch
import torchaudio

from city2scene.features import (
    AudioDecodeError,
    FeatureCache,
    MultichannelAudioError,
    SpectrogramConfig,
    Waveform,
    WaveformTooShortError,
    load_audio,
    log_mel,
    mel_spectrogram,
)


def _tone(number_of_samples: int, sample_rate_hz: int, frequency_hz: float = 440.0):
    t = np.arange(number_of_samples) / sample_rate_hz
    return (0.5 * np.sin(2 * np.pi * frequency_hz * t)).astype(np.float32)


def test_load_audio_resamples(tmp_path):
    path = tmp_path / "clip.wav"
    sf.write(str(path), _tone(4000, 8000), 8000, subtype="PCM_16")

    waveform = load_audio(path, target_sample_rate_hz=16000)

    assert waveform.sample_rate_hz == 16000
    assert len(waveform) == 8000
    assert waveform.duration_s() == pytest.approx(0.5)
    assert waveform.samples.dtype == torch.float32
    assert float(waveform.samples.abs().max()) <= 1.0


def test_load_audio_rejects_stereo(tmp_path):
    path = tmp_path / "stereo.wav"
    sf.write(str(path), np.zeros((1000, 2), dtype=np.float32), 8000)
    with pytest.raises(MultichannelAudioError):
        load_audio(path, 8000)


def test_load_audio_rejects_garbage(tmp_path):
    path = tmp_path / "broken.wav"
    path.write_bytes(b"not a wav file at all")
    with pytest.raises(AudioDecodeError):
        load_audio(path, 8000)


@pytest.mark.parametrize(
    "preset, number_of_samples, expected",
    [
        ("bc_resnet", 32000, (256, 63)),
        ("passt", 32000, (128, 101)),
        ("beats", 16000, (128, 101)),
        ("desk", 16000, (64, 101)),
    ],
)
def test_preset_shapes(preset, number_of_samples, expected):
    cfg = SpectrogramConfig.preset(preset)
    samples = _tone(number_of_samples, cfg.sample_rate_hz)

    spectrogram = mel_spectrogram(samples, cfg, clip_id="tone")

    assert spectrogram.shape == expected
    assert cfg.expected_frames(number_of_samples) == expected[1]


def test_silence_is_finite():
    cfg = SpectrogramConfig()
    values = log_mel(torch.zeros(16000), cfg)

    assert bool(torch.isfinite(values).all())
    assert torch.allclose(values, torch.full_like(values, math.log(cfg.log_offset)))


def test_batched_log_mel():
    cfg = SpectrogramConfig()
    batch = torch.from_numpy(np.stack([_tone(8000, 16000, f) for f in (300, 900)]))
    values = log_mel(batch, cfg)

    assert values.shape == (2, 64, 51)
    assert torch.allclose(values[1], log_mel(batch[1], cfg), atol=1e-5)


def test_too_short_waveform():
    cfg = SpectrogramConfig()
    with pytest.raises(WaveformTooShortError):
        log_mel(torch.zeros(cfg.window_samples() - 1), cfg)


def test_sample_rate_mismatch():
    cfg = SpectrogramConfig(sample_rate_hz=16000)
    waveform = Waveform(samples=torch.zeros(16000), sample_rate_hz=8000)
    with pytest.raises(ValueError):
        mel_spectrogram(waveform, cfg)


def test_invalid_config():
    assert len(SpectrogramConfig(hop_ms=64.0).problems()) == 1
    assert len(SpectrogramConfig(sample_rate_hz=8000, fmax_hz=6000).problems()) == 1
    assert SpectrogramConfig().n_fft() == 512


def test_feature_cache(tmp_path):
    cfg = SpectrogramConfig()
    cache = FeatureCache(directory=tmp_path)
    spectrogram = mel_spectrogram(_tone(16000, 16000), cfg, clip_id="clip")

    assert cache.get("clip", cfg) is None
    cache.put(spectrogram)
    cached = cache.get("clip", cfg)

    assert cached is not None
    assert torch.equal(cached.values, spectrogram.values)
    assert (tmp_path / cfg.digest() / "config.json").is_file()
    assert cache.get("clip", SpectrogramConfig(n_mels=32)) is None


def test_feature_cache_lookup_does_not_write(tmp_path):
    cfg = SpectrogramConfig()
    directory = tmp_path / "cache"
    cache = FeatureCache(directory=directory)

    assert cache.get("clip", cfg) is None
    assert cache.path("clip", cfg).name == "clip.npy"
    assert not directory.exists()

    cache.put(mel_spectrogram(_tone(16000, 16000), cfg, clip_id="clip"))
    assert sorted(p.name for p in (directory / cfg.digest()).iterdir()) == [
        "clip.npy",
        "config.json",
    ]


@pytest.mark.parametrize(
    "source_hz, target_hz", [(8000, 16000), (44100, 16000), (16000, 32000)]
)
def test_resampled_tone_keeps_its_frequency(tmp_path, source_hz, target_hz):
    path = tmp_path / "tone.wav"
    sf.write(str(path), _tone(source_hz, source_hz), source_hz, subtype="PCM_16")

    waveform = load_audio(path, target_sample_rate_hz=target_hz)
    spectrum = np.abs(np.fft.rfft(waveform.samples.numpy()))
    frequencies = np.fft.rfftfreq(len(waveform), d=1.0 / target_hz)

    assert len(waveform) == target_hz
    assert frequencies[np.argmax(spectrum)] == pytest.approx(440.0)


def test_log_mel_energy_grows_with_amplitude():
    cfg = SpectrogramConfig()
    energies = [
        float(log_mel(torch.from_numpy(_tone(16000, 16000) * (a / 0.5)), cfg).mean())
        for a in (0.01, 0.1, 0.5, 1.0)
    ]
    assert all(low < high for low, high in zip(energies, energies[1:]))


def test_tone_only_raises_its_own_mel_band():
    cfg = SpectrogramConfig()
    rng = np.random.default_rng(0)
    noise = rng.normal(scale=0.01, size=16000).astype(np.float32)
    # 1000 Hz sits exactly on FFT bin 32 of the 512-point desk transform.
    tone = _tone(16000, 16000, frequency_hz=1000.0)

    # The outer frames see the reflect padding.
    quiet = log_mel(torch.from_numpy(noise), cfg)[:, 3:-3].mean(dim=-1)
    loud = log_mel(torch.from_numpy(noise + tone), cfg)[:, 3:-3].mean(dim=-1)
    difference = (loud - quiet).numpy()

    filterbank = torchaudio.functional.melscale_fbanks(
        cfg.n_fft() // 2 + 1,
        cfg.fmin_hz,
        cfg.fmax_hz,
        cfg.n_mels,
        cfg.sample_rate_hz,
        norm=None,
        mel_scale="htk",
    ).numpy()
    untouched = filterbank[29:36].sum(axis=0) == 0

    assert untouched.sum() > cfg.n_mels // 2
    assert np.all(np.abs(difference[untouched]) < 0.01)
    loudest = int(np.argmax(difference))
    assert difference[loudest] > 1.0
    assert filterbank[32, loudest] > 0
