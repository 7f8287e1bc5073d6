import hashlib

import numpy as np
import pytest
import soundfile as sf
from scipy import stats

from city2scene.base import ConfigurationError
from city2scene.data import (
    Split,
    SyntheticConfig,
    city_signature_hz,
    generate_synthetic,
    parse_manifest,
)
from city2scene.data.synthetic import synthesize_clip


def _small_config(**kwargs) -> SyntheticConfig:
    defaults = dict(
        n_scenes=2,
        n_cities=3,
        clips_per_pair=4,
        sample_rate_hz=8000,
        duration_s=0.5,
        test_fraction=0.25,
    )
    defaults.update(kwargs)
    return SyntheticConfig(**defaults)


def test_generate_synthetic(tmp_path):
    cfg = _small_config()
    manifest = generate_synthetic(cfg, tmp_path)

    assert len(manifest) == 2 * 3 * 4
    assert len(list((tmp_path / "audio").glob("*.wav"))) == 24
    assert manifest.scene_vocab == sorted(cfg.scene_names())
    assert manifest.city_vocab == sorted(cfg.city_names())
    assert len(manifest.records_in(Split.test)) == 6

    info = sf.info(str(manifest.records[0].path))
    assert info.samplerate == 8000
    assert info.channels == 1
    assert info.frames == 4000

    parsed = parse_manifest(
        tmp_path / "meta.csv",
        split_files=(
            tmp_path / "evaluation_setup" / "fold1_train.csv",
            tmp_path / "evaluation_setup" / "fold1_evaluate.csv",
        ),
    )
    assert parsed.split_assignment == manifest.split_assignment
    assert parsed.records[0].duration_s == pytest.approx(0.5)


def test_synthetic_is_deterministic():
    cfg = _small_config()
    first = synthesize_clip(cfg, scene=1, city=2, index=3)
    second = synthesize_clip(cfg, scene=1, city=2, index=3)
    other = synthesize_clip(_small_config(seed=1), scene=1, city=2, index=3)

    assert first.dtype == np.float32
    assert first.shape == (4000,)
    assert np.array_equal(first, second)
    assert not np.array_equal(first, other)
    assert np.max(np.abs(first)) <= 1.0


def test_city_cue_strength_removes_the_tones():
    with_cue = _small_config(city_cue_strength=1.0, noise_db=-120.0)
    without_cue = _small_config(city_cue_strength=0.0, noise_db=-120.0)
    a = synthesize_clip(with_cue, 0, 0, 0)
    b = synthesize_clip(without_cue, 0, 0, 0)

    assert np.std(a - b) > 0.01


def test_invalid_synthetic_config(tmp_path):
    with pytest.raises(ConfigurationError):
        generate_synthetic(_small_config(n_cities=1), tmp_path)
    assert not _small_config(city_cue_strength=1.5).is_valid()


def test_names_beyond_the_tau_vocabulary():
    cfg = _small_config(n_scenes=12, n_cities=2)
    assert cfg.scene_names()[0] == "scene00"
    assert len(set(cfg.scene_names())) == 12
    assert cfg.city_names() == ["barcelona", "helsinki"]


def _file_hashes(directory):
    return {
        str(p.relative_to(directory)): hashlib.sha256(p.read_bytes()).hexdigest()
        for p in sorted(directory.rglob("*"))
        if p.is_file()
    }


def test_generate_synthetic_is_byte_identical(tmp_path):
    cfg = _small_config()
    generate_synthetic(cfg, tmp_path / "first")
    generate_synthetic(cfg, tmp_path / "second")

    first = _file_hashes(tmp_path / "first")
    assert len(first) == 24 + 3
    assert first == _file_hashes(tmp_path / "second")

    generate_synthetic(_small_config(seed=1), tmp_path / "other")
    assert first != _file_hashes(tmp_path / "other")


def test_city_signatures_differ_in_spacing():
    signature = city_signature_hz(_small_config(n_cities=4))
    assert signature.shape == (4, 2)
    assert np.all(signature[:, 1] > signature[:, 0])
    assert signature.max() == pytest.approx(0.9 * 4000)
    assert signature.min() == pytest.approx(0.45 * 4000)

    to_mel = 2595.0 * np.log10(1.0 + signature / 700.0)
    gaps = to_mel[:, 1] - to_mel[:, 0]
    assert np.allclose(gaps / gaps[0], [1, 2, 3, 4])


def _band_log_energy(clip, sample_rate_hz, frequency_hz, half_width_hz=15.0):
    power = np.abs(np.fft.rfft(clip.astype(np.float64))) ** 2
    frequencies = np.fft.rfftfreq(len(clip), d=1.0 / sample_rate_hz)
    band = np.abs(frequencies - frequency_hz) <= half_width_hz
    return float(np.log(power[band].sum()))


def test_city_signature_bands_separate_the_cities():
    cfg = _small_config(clips_per_pair=20)
    signature = city_signature_hz(cfg)
    first, last = 0, cfg.n_cities - 1
    # The lowest tone belongs to the first city only, the highest to the last.
    bands = {first: signature[first, 0], last: signature[last, 1]}

    for city, frequency in bands.items():
        other = last if city == first else first
        energies = {
            c: [
                _band_log_energy(
                    synthesize_clip(cfg, s, c, k), cfg.sample_rate_hz, frequency
                )
                for s in range(cfg.n_scenes)
                for k in range(cfg.clips_per_pair)
            ]
            for c in (city, other)
        }
        result = stats.ttest_ind(energies[city], energies[other], alternative="greater")
        assert result.pvalue < 0.01
