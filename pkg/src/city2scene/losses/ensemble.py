import torch

from city2scene.base.errors import ShapeError
from city2scene.losses.logits import Logits, LogitsKind, LogitsLike, as_tensor


def ensemble_logits(teacher_logits: list[LogitsLike]) -> Logits:
    """
    Element-wise mean of the teachers' logits. The sum is accumulated in double
    precision so that N copies of one teacher average back to that teacher.
    """
    if len(teacher_logits) == 0:
        raise ValueError("At least one teacher is needed to build an ensemble.")

    tensors = [as_tensor(z) for z in teacher_logits]
    reference = tensors[0]
    for i, z in enumerate(tensors[1:], start=1):
        if z.shape != reference.shape:
            raise ShapeError(
                f"teacher {i} logits", tuple(reference.shape), tuple(z.shape)
            )

    total = torch.zeros_like(reference, dtype=torch.float64)
    for z in tensors:
        total = total + z.detach().to(torch.float64)
    mean = (total / len(tensors)).to(reference.dtype)
    return Logits(values=mean, kind=LogitsKind.ensemble)
