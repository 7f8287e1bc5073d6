import itertools
import math

import numpy as np
import pytest
import torch

from city2scene.augment import SoftLabel
from city2scene.base import ShapeError
from city2scene.losses import (
    KDConfig,
    KLDirection,
    Logits,
    LogitsKind,
    combined_loss,
    cross_entropy,
    ensemble_logits,
    kd_loss,
    log_softmax,
    softmax,
)


def _np_log_softmax(z: np.ndarray, temperature: float = 1.0) -> np.ndarray:
    scaled = z / temperature
    shifted = scaled - scaled.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def test_softmax_oracle():
    p = softmax(torch.tensor([1.0, 2.0, 3.0]))
    assert p.tolist() == pytest.approx([0.0900, 0.2447, 0.6652], abs=1e-4)
    assert float(p.sum()) == pytest.approx(1.0)


def test_softmax_does_not_overflow():
    p = softmax(torch.tensor([1000.0, 0.0]))
    assert p.tolist() == pytest.approx([1.0, 0.0])
    assert softmax(torch.tensor([5.0, 5.0, 5.0])).tolist() == pytest.approx(
        [1 / 3, 1 / 3, 1 / 3]
    )


def test_softmax_rejects_bad_inputs():
    with pytest.raises(ValueError):
        softmax(torch.tensor([1.0, 2.0]), temperature=0.0)
    with pytest.raises(ValueError):
        softmax(torch.tensor([1.0, float("nan")]))


def test_cross_entropy_oracles():
    assert float(cross_entropy(torch.zeros(10), 3)) == pytest.approx(math.log(10))
    assert float(cross_entropy(torch.tensor([2.0, 0.0, 0.0]), 0)) == pytest.approx(
        0.23954, abs=1e-4
    )


def test_cross_entropy_with_soft_labels():
    z = torch.tensor([[2.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    hard = cross_entropy(z, torch.tensor([0, 1]))
    soft = cross_entropy(z, SoftLabel.one_hot(torch.tensor([0, 1]), 3))
    assert float(soft) == pytest.approx(float(hard))

    uniform = torch.full((2, 3), 1 / 3)
    expected = -np.mean(
        (uniform.numpy() * _np_log_softmax(z.numpy().astype(np.float64))).sum(-1)
    )
    assert float(cross_entropy(z, uniform)) == pytest.approx(expected, rel=1e-5)


def test_cross_entropy_errors():
    z = torch.zeros(2, 3)
    with pytest.raises(IndexError):
        cross_entropy(z, torch.tensor([0, 3]))
    with pytest.raises(ShapeError):
        cross_entropy(z, torch.full((2, 4), 0.25))
    with pytest.raises(ShapeError):
        cross_entropy(z, torch.tensor([0, 1, 2]))


def test_kd_loss_oracle():
    value = kd_loss(torch.tensor([0.0, 0.0]), torch.tensor([2.0, 0.0]), temperature=2)
    assert float(value) == pytest.approx(0.4438, abs=2e-4)


def test_kd_loss_properties():
    z = torch.tensor([[0.3, -1.0, 2.0]])
    assert float(kd_loss(z, z.clone())) == pytest.approx(0.0, abs=1e-7)

    student = torch.tensor([[0.0, 1.0, 0.0]])
    teacher = torch.tensor([[3.0, 0.0, -1.0]])
    forward = kd_loss(student, teacher, kl_direction=KLDirection.teacher_reference)
    reverse = kd_loss(student, teacher, kl_direction=KLDirection.student_reference)
    assert float(forward) > 0 and float(reverse) > 0
    assert float(forward) != pytest.approx(float(reverse))

    with pytest.raises(ShapeError):
        kd_loss(torch.zeros(2, 3), torch.zeros(2, 4))


def test_kd_loss_gradient_stops_at_the_teacher():
    student = torch.tensor([[0.1, 0.2, 0.3]], requires_grad=True)
    teacher = torch.tensor([[1.0, 0.0, -1.0]], requires_grad=True)
    kd_loss(student, teacher).backward()
    assert student.grad is not None
    assert teacher.grad is None


def _oracle_log_softmax(z: np.ndarray, temperature: float = 1.0) -> np.ndarray:
    scaled = np.asarray(z, dtype=np.longdouble) / np.longdouble(temperature)
    shifted = scaled - scaled.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def _oracle_kd(student, teacher, temperature):
    log_ps = _oracle_log_softmax(student, temperature)
    log_pt = _oracle_log_softmax(teacher, temperature)
    divergence = (np.exp(log_pt) * (log_pt - log_ps)).sum(axis=-1)
    return np.longdouble(temperature) ** 2 * divergence.mean()


def _close(value: torch.Tensor, expected) -> bool:
    difference = np.abs(value.detach().numpy() - np.asarray(expected, np.float64))
    return float(np.max(difference)) < 1e-9


def test_losses_match_an_extended_precision_oracle():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        batch_size = int(rng.integers(1, 5))
        number_of_classes = int(rng.integers(2, 21))
        temperature = float(rng.uniform(0.5, 8.0))
        lambda_weight = float(rng.uniform(0.0, 1.0))
        shape = (batch_size, number_of_classes)
        student = rng.uniform(-50.0, 50.0, size=shape)
        teacher = rng.uniform(-50.0, 50.0, size=shape)
        targets = rng.integers(0, number_of_classes, size=batch_size)
        teachers = [
            rng.uniform(-50.0, 50.0, size=shape) for _ in range(rng.integers(1, 6))
        ]

        log_p = _oracle_log_softmax(student)
        expected_ce = -log_p[np.arange(batch_size), targets].mean()
        expected_kd = _oracle_kd(student, teacher, temperature)

        s = torch.from_numpy(student)
        t = torch.from_numpy(teacher)
        ce = cross_entropy(s, torch.from_numpy(targets))
        kd = kd_loss(s, t, temperature)
        expected_p = np.exp(_oracle_log_softmax(student, temperature))
        assert _close(softmax(s, temperature), expected_p)
        assert _close(ce, expected_ce)
        assert _close(kd, expected_kd)
        assert _close(
            combined_loss(ce, kd, lambda_weight),
            lambda_weight * expected_ce + (1.0 - lambda_weight) * expected_kd,
        )
        assert _close(
            ensemble_logits([torch.from_numpy(z) for z in teachers]).values,
            np.mean(np.asarray(teachers, dtype=np.longdouble), axis=0),
        )


@pytest.mark.parametrize("lambda_weight", [0.0, 0.3, 0.5, 1.0])
@pytest.mark.parametrize("temperature", [1.0, 2.0, 4.0])
def test_combined_loss_gradient_matches_central_differences(
    lambda_weight, temperature
):
    rng = np.random.default_rng(int(10 * lambda_weight + temperature))
    step = 1e-5

    def loss(student, teacher, target):
        return combined_loss(
            cross_entropy(student, target),
            kd_loss(student, teacher, temperature),
            lambda_weight,
        )

    for _ in range(100):
        student = torch.tensor(rng.normal(scale=2.0, size=(1, 10)), requires_grad=True)
        teacher = torch.tensor(rng.normal(scale=2.0, size=(1, 10)))
        target = torch.tensor([int(rng.integers(0, 10))])
        loss(student, teacher, target).backward()
        analytic = student.grad.numpy()[0]

        numeric = np.zeros(10)
        base = student.detach()
        for k in range(10):
            offset = torch.zeros_like(base)
            offset[0, k] = step
            numeric[k] = (
                float(loss(base + offset, teacher, target))
                - float(loss(base - offset, teacher, target))
            ) / (2.0 * step)

        scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric))
        assert np.linalg.norm(analytic - numeric) / scale < 1e-4


def test_kd_loss_ignores_constant_shifts():
    generator = torch.Generator().manual_seed(3)
    student = torch.randn(4, 7, dtype=torch.float64, generator=generator)
    teacher = torch.randn(4, 7, dtype=torch.float64, generator=generator)
    reference = float(kd_loss(student, teacher, 2.0))

    for constant in (-30.0, -1.5, 4.0, 25.0):
        assert float(kd_loss(student + constant, teacher, 2.0)) == pytest.approx(
            reference, rel=1e-9
        )
        assert float(kd_loss(student, teacher + constant, 2.0)) == pytest.approx(
            reference, rel=1e-9
        )


@pytest.mark.parametrize("temperature", [0.5, 1.0, 2.0, 4.0, 10.0])
def test_kd_loss_is_tau_squared_times_the_softened_divergence(temperature):
    generator = torch.Generator().manual_seed(4)
    student = torch.randn(5, 6, dtype=torch.float64, generator=generator) * 3
    teacher = torch.randn(5, 6, dtype=torch.float64, generator=generator) * 3

    p_teacher = softmax(teacher, temperature)
    log_ratio = log_softmax(teacher, temperature) - log_softmax(student, temperature)
    divergence = (p_teacher * log_ratio).sum(dim=-1).mean()

    value = float(kd_loss(student, teacher, temperature))
    assert value == pytest.approx(temperature**2 * float(divergence), rel=1e-12)
    unit = kd_loss(student / temperature, teacher / temperature, 1.0)
    assert value == pytest.approx(temperature**2 * float(unit), rel=1e-9)


def test_ensemble_ignores_the_teacher_order():
    generator = torch.Generator().manual_seed(5)
    teachers = [torch.randn(8, 10, generator=generator) for _ in range(4)]
    reference = ensemble_logits(teachers).values

    for order in itertools.permutations(range(4)):
        values = ensemble_logits([teachers[i] for i in order]).values
        assert torch.equal(values.argmax(dim=-1), reference.argmax(dim=-1))
        assert torch.allclose(values, reference, atol=1e-6)


@pytest.mark.parametrize("dtype", [torch.float32, torch.float64])
def test_softmax_is_finite_for_huge_logits(dtype):
    z = torch.tensor([1e4, 1e4 - 1.0, -1e4, 0.0], dtype=dtype)
    p = softmax(z)

    assert bool(torch.isfinite(p).all())
    assert float(p.sum()) == pytest.approx(1.0)
    e = math.e
    assert p.tolist() == pytest.approx([e / (e + 1), 1 / (e + 1), 0.0, 0.0], abs=1e-6)
    assert bool(torch.isfinite(log_softmax(z)).all())


def test_gradcheck():
    generator = torch.Generator().manual_seed(0)
    student = torch.randn(3, 5, dtype=torch.float64, generator=generator)
    teacher = torch.randn(3, 5, dtype=torch.float64, generator=generator)
    targets = torch.tensor([0, 4, 2])
    student.requires_grad_(True)

    assert torch.autograd.gradcheck(lambda s: kd_loss(s, teacher, 3.0), (student,))
    assert torch.autograd.gradcheck(lambda s: cross_entropy(s, targets), (student,))


def test_combined_loss():
    scene = torch.tensor(2.0)
    kd = torch.tensor(4.0)
    assert combined_loss(scene, kd, 1.0) is scene
    assert combined_loss(scene, kd, 0.0) is kd
    assert float(combined_loss(scene, kd, 0.25)) == pytest.approx(3.5)
    with pytest.raises(ValueError):
        combined_loss(scene, kd, 1.5)


def test_ensemble_oracles():
    pair = ensemble_logits([torch.tensor([0.0, 2.0]), torch.tensor([2.0, 0.0])])
    assert pair.kind is LogitsKind.ensemble
    assert pair.values.tolist() == pytest.approx([1.0, 1.0])

    triple = ensemble_logits(
        [torch.tensor([3.0, 0.0]), torch.tensor([0.0, 3.0]), torch.tensor([0.0, 0.0])]
    )
    assert triple.values.tolist() == pytest.approx([1.0, 1.0])


def test_ensemble_of_copies_is_the_teacher():
    z = torch.randn(4, 10, generator=torch.Generator().manual_seed(1))
    for copies in (1, 2, 3, 5):
        mean = ensemble_logits([Logits(values=z.clone())] * copies)
        assert torch.equal(mean.values, z)
        assert mean.values.dtype == z.dtype


def test_ensemble_errors():
    with pytest.raises(ValueError):
        ensemble_logits([])
    with pytest.raises(ShapeError):
        ensemble_logits([torch.zeros(2, 3), torch.zeros(2, 4)])


def test_kd_config():
    assert KDConfig().temperature == 2.0
    assert KDConfig().is_valid()
    assert len(KDConfig(temperature=0.0, lambda_weight=1.5).problems()) == 2
    restored = KDConfig.from_dict(KDConfig(kl_direction="student_reference").to_dict())
    assert restored.kl_direction is KLDirection.student_reference
