import numpy as np
import pytest
import torch

from city2scene.augment import (
    AugmentConfig,
    BatchAugmenter,
    SoftLabel,
    dir_aug,
    freq_mixstyle,
    mixup,
    spec_augment,
)
from city2scene.base import ConfigurationError


def _batch(batch_size: int = 4, bins: int = 8, frames: int = 20, seed: int = 0):
    generator = torch.Generator().manual_seed(seed)
    x = torch.randn(batch_size, bins, frames, generator=generator)
    y = SoftLabel.one_hot(torch.arange(batch_size) % 3, 3).distribution
    return x, y


def test_soft_label():
    label = SoftLabel.one_hot(2, 4)
    assert label.distribution.tolist() == [0.0, 0.0, 1.0, 0.0]
    with pytest.raises(ValueError):
        SoftLabel(distribution=torch.tensor([0.5, 0.6]))
    with pytest.raises(ValueError):
        SoftLabel(distribution=torch.tensor([1.5, -0.5]))


def test_mixup_identities():
    x, y = _batch()
    rng = np.random.default_rng(0)

    x_out, y_out, draw = mixup(x, y, alpha=0.0, rng=rng)
    assert draw is None
    assert torch.equal(x_out, x) and torch.equal(y_out, y)

    x_out, y_out, draw = mixup(x, y, alpha=0.3, rng=rng, gamma=1.0)
    assert torch.equal(x_out, x) and torch.equal(y_out, y)

    x_one, y_one, draw = mixup(x[:1], y[:1], alpha=0.3, rng=rng)
    assert draw is None
    assert torch.equal(x_one, x[:1])


def test_mixup_is_convex():
    x, y = _batch()
    x_out, y_out, draw = mixup(x, y, alpha=0.3, rng=np.random.default_rng(1))

    gamma = draw.gamma.reshape(-1, 1, 1)
    expected = gamma * x + (1 - gamma) * x[draw.permutation]
    assert torch.allclose(x_out, expected)
    assert torch.allclose(y_out.sum(dim=-1), torch.ones(4))
    assert bool(((draw.gamma >= 0) & (draw.gamma <= 1)).all())


def test_spec_augment():
    x, _ = _batch()
    rng = np.random.default_rng(0)

    assert torch.equal(spec_augment(x, r=0.5, p=0.0, rng=rng), x)
    assert torch.equal(spec_augment(x, r=0.0, p=1.0, rng=rng), x)

    masked = spec_augment(x, r=1.0, p=1.0, rng=rng)
    assert masked.shape == x.shape
    changed = masked != x
    assert bool((masked[changed] == 0).all())

    with pytest.raises(ValueError):
        spec_augment(x, r=1.5, p=0.5, rng=rng)


def test_freq_mixstyle():
    x, _ = _batch()
    rng = np.random.default_rng(0)

    assert torch.equal(freq_mixstyle(x, alpha=0.4, p=0.0, rng=rng), x)
    restored = freq_mixstyle(x, alpha=0.4, p=1.0, rng=rng, gamma=1.0)
    assert torch.allclose(restored, x, atol=1e-5)

    swapped = freq_mixstyle(
        x, alpha=0.4, p=1.0, rng=np.random.default_rng(3), gamma=0.0
    )
    replay = np.random.default_rng(3)
    replay.random()
    permutation = torch.from_numpy(replay.permutation(4))
    expected_mean = x.mean(dim=-1)[permutation]
    assert torch.allclose(swapped.mean(dim=-1), expected_mean, atol=1e-5)


def test_dir_aug():
    rng = np.random.default_rng(0)
    waveforms = torch.randn(3, 400, generator=torch.Generator().manual_seed(0))
    delta = torch.zeros(16)
    delta[0] = 1.0

    assert torch.equal(dir_aug(waveforms, 0.0, [], rng), waveforms)
    assert torch.allclose(dir_aug(waveforms, 1.0, [delta], rng), waveforms, atol=1e-5)

    echo = torch.tensor([1.0, 0.0, 0.0, 0.5])
    convolved = dir_aug(waveforms, 1.0, [echo], rng)
    assert convolved.shape == waveforms.shape
    assert torch.allclose(
        convolved.abs().amax(dim=-1), waveforms.abs().amax(dim=-1), atol=1e-5
    )

    with pytest.raises(ConfigurationError):
        dir_aug(waveforms, 0.5, [], rng)


@pytest.mark.parametrize("delay", [1, 5, 37])
def test_dir_aug_delayed_delta_shifts_the_waveform(delay):
    rng = np.random.default_rng(1)
    waveforms = 0.1 * torch.randn(2, 400, generator=torch.Generator().manual_seed(1))
    waveforms[:, 50] = 10.0
    delayed = torch.zeros(64)
    delayed[delay] = 1.0

    shifted = dir_aug(waveforms, 1.0, [delayed], rng)

    assert torch.allclose(shifted[:, delay:], waveforms[:, :-delay], atol=1e-4)
    assert torch.allclose(shifted[:, :delay], torch.zeros(2, delay), atol=1e-4)


def test_augment_config():
    assert not AugmentConfig(diraug_prob_p=0.5).is_valid()
    assert not AugmentConfig(mixup_alpha=-1.0).is_valid()
    assert AugmentConfig.preset("beats").specaug_prob_p == 1.0
    assert not AugmentConfig.preset("none").enabled
    with pytest.raises(ValueError):
        AugmentConfig.preset("unknown")


def test_batch_augmenter_is_reproducible():
    x, y = _batch()
    settings = AugmentConfig.preset("beats")

    first = BatchAugmenter(settings, 16000, seed=[0, 1]).spectrograms(x, y)
    second = BatchAugmenter(settings, 16000, seed=[0, 1]).spectrograms(x, y)

    assert torch.equal(first[0], second[0])
    assert torch.equal(first[1], second[1])
    assert torch.allclose(first[1].sum(dim=-1), torch.ones(4))


def test_disabled_augmenter_is_identity():
    x, y = _batch()
    augmenter = BatchAugmenter(AugmentConfig.preset("none"), 16000)
    x_out, y_out, draw = augmenter.spectrograms(x, y)

    assert x_out is x and y_out is y and draw is None
    waveforms = torch.zeros(2, 100)
    assert augmenter.waveforms(waveforms) is waveforms
