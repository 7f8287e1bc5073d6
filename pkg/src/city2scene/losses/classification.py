import torch

from city2scene.augment.settings import SoftLabel
from city2scene.base.errors import ShapeError
from city2scene.losses.logits import LogitsLike, as_tensor


def _check_finite(z: torch.Tensor) -> None:
    if not bool(torch.isfinite(z).all()):
        raise ValueError("Logits contain non-finite values.")


def log_softmax(z: LogitsLike, temperature: float = 1.0) -> torch.Tensor:
    if temperature <= 0:
        raise ValueError(f"The temperature must be positive (got {temperature}).")
    z = as_tensor(z)
    _check_finite(z)
    scaled = z / temperature
    shifted = scaled - scaled.max(dim=-1, keepdim=True).values.detach()
    return shifted - torch.log(torch.exp(shifted).sum(dim=-1, keepdim=True))


def softmax(z: LogitsLike, temperature: float = 1.0) -> torch.Tensor:
    """
    Temperature-scaled softmax along the last dimension, computed after subtracting
    the maximum so that large logits do not overflow.
    """
    return torch.exp(log_softmax(z, temperature))


def cross_entropy(
    z: LogitsLike, target: int | torch.Tensor | SoftLabel
) -> torch.Tensor:
    """
    Mean over the batch of -sum_k target_k log softmax(z)_k.
    :param z: (K,) or (B, K) logits.
    :param target: Class indices (integer tensor or int) or soft labels
     (SoftLabel or floating tensor with the same shape as z).
    """
    z = as_tensor(z)
    if z.ndim == 1:
        z = z.unsqueeze(0)
    number_of_classes = z.shape[-1]
    log_probabilities = log_softmax(z)

    if isinstance(target, SoftLabel):
        target = target.distribution
    target = torch.as_tensor(target, device=z.device)

    if target.is_floating_point():
        if target.ndim == 1:
            target = target.unsqueeze(0)
        if target.shape != z.shape:
            raise ShapeError("soft target", tuple(z.shape), tuple(target.shape))
        per_item = -(target.to(z.dtype) * log_probabilities).sum(dim=-1)
        return per_item.mean()

    target = target.reshape(-1).long()
    if target.shape[0] != z.shape[0]:
        raise ShapeError("class targets", z.shape[0], target.shape[0])
    if bool((target < 0).any()) or bool((target >= number_of_classes).any()):
        raise IndexError(
            f"Class index out of range for {number_of_classes} classes:"
            f" {target.tolist()}"
        )
    per_item = -log_probabilities.gather(1, target.unsqueeze(1)).squeeze(1)
    return per_item.mean()
