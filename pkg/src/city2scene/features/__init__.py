from . import audio, cache, spectrogram
from .audio import (
    AudioDecodeError,
    MultichannelAudioError,
    Waveform,
    load_audio,
    resample,
)
from .cache import FeatureCache
from .spectrogram import (
    Spectrogram,
    SpectrogramConfig,
    WaveformTooShortError,
    log_mel,
    mel_spectrogram,
)
