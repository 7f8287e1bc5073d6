import math

import torch

from city2scene.pipeline.settings import SchedulerKind, SchedulerSpec


def lr_cosine_warm_restarts(epoch: float, spec: SchedulerSpec) -> float:
    """
    Cosine annealing with warm restarts. Cycle i lasts t0 * t_mult^i epochs and
    the position inside the cycle resets to zero at every restart.
    """
    if epoch < 0:
        raise ValueError(f"The epoch must be non-negative (got {epoch}).")
    t_cur = float(epoch)
    t_i = float(spec.t0)
    while t_cur >= t_i:
        t_cur -= t_i
        t_i *= spec.t_mult
    return spec.min_lr + 0.5 * (spec.peak_lr - spec.min_lr) * (
        1.0 + math.cos(math.pi * t_cur / t_i)
    )


def lr_warmup_linear_down(epoch: float, spec: SchedulerSpec) -> float:
    """Linear ramp from 0 to peak over the warmup, then linear decay to min_lr."""
    if epoch < 0:
        raise ValueError(f"The epoch must be non-negative (got {epoch}).")
    if epoch < spec.warmup_epochs:
        return spec.peak_lr * epoch / spec.warmup_epochs
    if spec.down_epochs == 0:
        return spec.peak_lr
    fraction = min(1.0, (epoch - spec.warmup_epochs) / spec.down_epochs)
    return spec.peak_lr + (spec.min_lr - spec.peak_lr) * fraction


def learning_rate(epoch: float, spec: SchedulerSpec) -> float:
    match spec.kind:
        case SchedulerKind.cosine_warm_restarts:
            return lr_cosine_warm_restarts(epoch, spec)
        case SchedulerKind.warmup_linear_down:
            return lr_warmup_linear_down(epoch, spec)
        case SchedulerKind.constant:
            return spec.peak_lr
        case _:
            raise ValueError(f"Unknown scheduler kind {spec.kind}.")


def build_scheduler(
    optimizer: torch.optim.Optimizer, spec: SchedulerSpec, steps_per_epoch: int
) -> torch.optim.lr_scheduler.LambdaLR:
    """
    Steps once per batch. The optimizer must have been created with lr=peak_lr;
    the schedule is evaluated on the fractional epoch step / steps_per_epoch.
    """
    steps_per_epoch = max(1, steps_per_epoch)

    def scale(step: int) -> float:
        return learning_rate(step / steps_per_epoch, spec) / spec.peak_lr

    return torch.optim.lr_scheduler.LambdaLR(optimizer, lr_lambda=scale)
