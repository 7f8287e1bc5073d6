import dataclasses
import logging

import numpy as np
import torch


@dataclasses.dataclass
class MixupDraw:
    """Mixing coefficient of each item and the partner it is mixed with."""

    gamma: torch.Tensor = dataclasses.field(default=None)
    permutation: torch.Tensor = dataclasses.field(default=None)

    @classmethod
    def draw(
        cls,
        batch_size: int,
        alpha: float,
        rng: np.random.Generator,
        gamma: float | None = None,
    ) -> "MixupDraw":
        permutation = torch.from_numpy(rng.permutation(batch_size))
        if gamma is None:
            values = rng.beta(alpha, alpha, size=batch_size)
        else:
            values = np.full(batch_size, gamma)
        return cls(
            gamma=torch.from_numpy(values.astype(np.float32)),
            permutation=permutation,
        )

    def apply(self, values: torch.Tensor) -> torch.Tensor:
        shape = (-1,) + (1,) * (values.ndim - 1)
        gamma = self.gamma.to(values.dtype).reshape(shape)
        return gamma * values + (1.0 - gamma) * values[self.permutation]


def mixup(
    x: torch.Tensor,
    y: torch.Tensor,
    alpha: float,
    rng: np.random.Generator,
    gamma: float | None = None,
) -> tuple[torch.Tensor, torch.Tensor, MixupDraw | None]:
    """
    Mix every item with a partner from one shared permutation of the batch.
    :param x: Batch of inputs, first dimension is the batch.
    :param y: Soft labels (B, K).
    :param alpha: Beta(alpha, alpha) parameter; 0 disables mixing.
    :param rng: Random generator owning the draw.
    :param gamma: Forces the mixing coefficient.
    :return: The mixed inputs, the mixed labels and the draw used (None when the
     batch is returned unchanged).
    """
    if alpha == 0.0 and gamma is None:
        return x.clone(), y.clone(), None

    if x.shape[0] < 2:
        logging.getLogger("[city2scene::mixup]").warning(
            "Mixup needs at least two items; the batch is left unchanged."
        )
        return x.clone(), y.clone(), None

    draw = MixupDraw.draw(x.shape[0], alpha, rng, gamma=gamma)
    return draw.apply(x), draw.apply(y), draw
