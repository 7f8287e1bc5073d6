import logging

import numpy as np
import torch

from city2scene.augment.impulse_response import dir_aug, load_impulse_responses
from city2scene.augment.masking import spec_augment
from city2scene.augment.mixing import MixupDraw, mixup
from city2scene.augment.mixstyle import freq_mixstyle
from city2scene.augment.settings import AugmentConfig


class BatchAugmenter:
    """
    Applies the augmentation stack of one training run. The impulse-response bank is
    loaded once at construction and the random stream is owned by the instance.
    """

    def __init__(
        self,
        settings: AugmentConfig,
        sample_rate_hz: int,
        seed: int | list[int] | None = None,
    ):
        if not settings.is_valid():
            settings.validate()
        self._settings = settings
        self._logger = logging.getLogger("[city2scene::BatchAugmenter]")
        self._rng = np.random.default_rng(settings.seed if seed is None else seed)
        self._ir_bank = []
        if settings.uses_waveform_augmentation():
            self._ir_bank = load_impulse_responses(settings.ir_bank, sample_rate_hz)

    def settings(self) -> AugmentConfig:
        return self._settings

    def waveforms(self, waveforms: torch.Tensor) -> torch.Tensor:
        if not self._settings.uses_waveform_augmentation():
            return waveforms
        return dir_aug(
            waveforms, self._settings.diraug_prob_p, self._ir_bank, self._rng
        )

    def spectrograms(
        self, x: torch.Tensor, y: torch.Tensor
    ) -> tuple[torch.Tensor, torch.Tensor, MixupDraw | None]:
        """
        Mixup, then Freq-MixStyle, then SpecAugment masking on a (B, F, T) batch with
        soft labels y. Returns the draw used by mixup so that cached targets can be
        mixed the same way.
        """
        if not self._settings.enabled:
            return x, y, None

        draw = None
        if self._settings.mixup_alpha > 0:
            x, y, draw = mixup(x, y, self._settings.mixup_alpha, self._rng)
        if self._settings.fms_prob_p > 0:
            x = freq_mixstyle(
                x, self._settings.fms_alpha, self._settings.fms_prob_p, self._rng
            )
        if self._settings.specaug_prob_p > 0 and self._settings.specaug_ratio_r > 0:
            x = spec_augment(
                x,
                self._settings.specaug_ratio_r,
                self._settings.specaug_prob_p,
                self._rng,
            )
        return x, y, draw
