import dataclasses
import logging
import pathlib
from typing import ClassVar

import numpy as np
import soundfile as sf

from city2scene.base.settings import Settings
from city2scene.data.manifest import ClipRecord, Manifest, write_manifest
from city2scene.data.splits import stratified_split

TauScenes = [
    "airport",
    "bus",
    "metro",
    "metro_station",
    "park",
    "public_square",
    "shopping_mall",
    "street_pedestrian",
    "street_traffic",
    "tram",
]

TauCities = [
    "barcelona",
    "helsinki",
    "lisbon",
    "london",
    "lyon",
    "milan",
    "paris",
    "prague",
    "stockholm",
    "vienna",
]

MetaFileName = "meta.csv"
AudioFolderName = "audio"
SplitFolderName = "evaluation_setup"


@dataclasses.dataclass
class SyntheticConfig(Settings):
    LoggerName: ClassVar[str] = "[city2scene::SyntheticConfig]"

    n_scenes: int = dataclasses.field(default=None)
    n_cities: int = dataclasses.field(default=None)
    clips_per_pair: int = dataclasses.field(default=None)
    sample_rate_hz: int = dataclasses.field(default=None)
    duration_s: float = dataclasses.field(default=None)
    city_cue_strength: float = dataclasses.field(default=None)
    noise_db: float = dataclasses.field(default=None)
    seed: int = dataclasses.field(default=None)
    test_fraction: float | None = dataclasses.field(default=None)

    def __post_init__(self) -> None:
        if self.n_scenes is None:
            self.n_scenes = 4

        if self.n_cities is None:
            self.n_cities = 3

        if self.clips_per_pair is None:
            self.clips_per_pair = 20

        if self.sample_rate_hz is None:
            self.sample_rate_hz = 16000

        if self.duration_s is None:
            self.duration_s = 1.0

        if self.city_cue_strength is None:
            self.city_cue_strength = 0.9

        if self.noise_db is None:
            self.noise_db = -30.0

        if self.seed is None:
            self.seed = 0

    def problems(self) -> list[str]:
        problems = []
        if self.n_scenes < 2:
            problems.append(f"n_scenes must be at least 2 (got {self.n_scenes})")
        if self.n_cities < 2:
            problems.append(f"n_cities must be at least 2 (got {self.n_cities})")
        if self.clips_per_pair < 1:
            problems.append(
                f"clips_per_pair must be at least 1 (got {self.clips_per_pair})"
            )
        if self.sample_rate_hz < 4000:
            problems.append(
                f"sample_rate_hz must be at least 4000 (got {self.sample_rate_hz})"
            )
        if self.duration_s <= 0:
            problems.append(f"duration_s must be positive (got {self.duration_s})")
        if not 0.0 <= self.city_cue_strength <= 1.0:
            problems.append(
                "city_cue_strength must be in [0, 1]"
                f" (got {self.city_cue_strength})"
            )
        if self.test_fraction is not None and not 0.0 < self.test_fraction < 1.0:
            problems.append(
                f"test_fraction must be in (0, 1) (got {self.test_fraction})"
            )
        return problems

    def scene_names(self) -> list[str]:
        return _names(TauScenes, "scene", self.n_scenes)

    def city_names(self) -> list[str]:
        return _names(TauCities, "city", self.n_cities)


def _names(known: list[str], radix: str, number: int) -> list[str]:
    if number <= len(known):
        return known[:number]
    return [f"{radix}{i:02d}" for i in range(number)]


def _to_mel(frequency_hz):
    return 2595.0 * np.log10(1.0 + np.asarray(frequency_hz) / 700.0)


def _to_hz(mel):
    return 700.0 * (10.0 ** (np.asarray(mel) / 2595.0) - 1.0)


def city_signature_hz(cfg: SyntheticConfig) -> np.ndarray:
    """
    Frequencies of the two signature tones of every city, shape (n_cities, 2).
    City c puts its lower tone c mel steps above the start of the signature band
    and its upper tone c + 1 steps above the lower one, so both the position and
    the spacing of the pair identify the city.
    """
    nyquist = cfg.sample_rate_hz / 2.0
    low, high = _to_mel(0.45 * nyquist), _to_mel(0.9 * nyquist)
    step = (high - low) / (2 * cfg.n_cities - 1)
    cities = np.arange(cfg.n_cities)
    lower = low + cities * step
    upper = lower + (cities + 1) * step
    return _to_hz(np.stack([lower, upper], axis=1))


@dataclasses.dataclass
class _SignalLayout:
    hump_centers_mel: np.ndarray
    hump_width_mel: float
    tone_frequencies_hz: np.ndarray
    tone_levels: np.ndarray

    @classmethod
    def create(cls, cfg: SyntheticConfig) -> "_SignalLayout":
        nyquist = cfg.sample_rate_hz / 2.0
        # Scene humps live below the signature band. Every scene uses the same
        # three humps, moved up by one mel step per scene.
        low, high = _to_mel(0.1 * nyquist), _to_mel(0.4 * nyquist)
        step = (high - low) / (3 * cfg.n_scenes - 1)
        first = low + step * np.arange(cfg.n_scenes)
        return cls(
            hump_centers_mel=first[:, None] + cfg.n_scenes * step * np.arange(3),
            hump_width_mel=0.25 * step,
            tone_frequencies_hz=city_signature_hz(cfg),
            tone_levels=np.linspace(0.25, 1.0, cfg.n_scenes),
        )


def _band_noise(
    rng: np.random.Generator,
    number_of_samples: int,
    sample_rate_hz: int,
    center_mel: float,
    width_mel: float,
) -> np.ndarray:
    spectrum = np.fft.rfft(rng.standard_normal(number_of_samples))
    frequencies = np.fft.rfftfreq(number_of_samples, d=1.0 / sample_rate_hz)
    spectrum *= np.exp(-0.5 * ((_to_mel(frequencies) - center_mel) / width_mel) ** 2)
    band = np.fft.irfft(spectrum, n=number_of_samples)
    rms = np.sqrt(np.mean(band**2))
    return band / rms if rms > 0 else band


def synthesize_clip(
    cfg: SyntheticConfig, scene: int, city: int, index: int
) -> np.ndarray:
    """
    Scene template (three band-noise humps under a slow amplitude modulation), plus
    the city signature (two pure tones whose level depends on the scene), plus
    Gaussian noise.
    """
    layout = _SignalLayout.create(cfg)
    rng = np.random.default_rng([cfg.seed, scene, city, index])
    number_of_samples = int(round(cfg.duration_s * cfg.sample_rate_hz))
    t = np.arange(number_of_samples) / cfg.sample_rate_hz

    modulation = 1.0 + 0.5 * np.sin(2.0 * np.pi * 0.5 * t + rng.uniform(0, 2 * np.pi))
    template = np.zeros(number_of_samples)
    for center in layout.hump_centers_mel[scene]:
        template += 0.1 * _band_noise(
            rng, number_of_samples, cfg.sample_rate_hz, center, layout.hump_width_mel
        )
    signal = modulation * template

    tone_amplitude = (
        0.1
        * cfg.city_cue_strength
        * layout.tone_levels[scene]
        * rng.uniform(0.9, 1.1)
    )
    for frequency in layout.tone_frequencies_hz[city]:
        phase = rng.uniform(0, 2 * np.pi)
        signal += tone_amplitude * np.sin(2.0 * np.pi * frequency * t + phase)

    signal += 10.0 ** (cfg.noise_db / 20.0) * rng.standard_normal(number_of_samples)
    return np.clip(signal, -1.0, 1.0).astype(np.float32)


def generate_synthetic(cfg: SyntheticConfig, out_dir: str | pathlib.Path) -> Manifest:
    """
    Write a TAU-convention corpus of n_scenes * n_cities * clips_per_pair mono
    16-bit WAV files plus meta.csv. The output is a pure function of cfg.
    """
    cfg.validate()
    logger = logging.getLogger("[city2scene::generate_synthetic]")
    out_dir = pathlib.Path(out_dir)
    audio_dir = out_dir / AudioFolderName
    audio_dir.mkdir(parents=True, exist_ok=True)

    scenes = cfg.scene_names()
    cities = cfg.city_names()
    records = []
    for s, scene in enumerate(scenes):
        for c, city in enumerate(cities):
            for k in range(cfg.clips_per_pair):
                clip_id = f"{scene}-{city}-{k}-0-a"
                path = audio_dir / f"{clip_id}.wav"
                sf.write(
                    str(path),
                    synthesize_clip(cfg, s, c, k),
                    cfg.sample_rate_hz,
                    subtype="PCM_16",
                )
                records.append(
                    ClipRecord(
                        clip_id=clip_id,
                        scene_label=scene,
                        city_label=city,
                        device_id="a",
                        duration_s=int(round(cfg.duration_s * cfg.sample_rate_hz))
                        / cfg.sample_rate_hz,
                        path=path,
                        identifier=f"{city}-{k}",
                    )
                )

    manifest = Manifest.from_records(records)
    split_dir = None
    if cfg.test_fraction is not None:
        manifest = stratified_split(manifest, cfg.test_fraction, cfg.seed)
        split_dir = out_dir / SplitFolderName
    write_manifest(manifest, out_dir / MetaFileName, split_dir=split_dir)
    logger.info(f"Wrote {len(records)} synthetic clips to {out_dir}.")
    return manifest
