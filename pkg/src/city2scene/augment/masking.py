import math

import numpy as np
import torch


def _stripe(rng: np.random.Generator, size: int, ratio: float) -> tuple[int, int]:
    width = int(rng.integers(0, math.floor(ratio * size) + 1))
    start = int(rng.integers(0, size - width + 1))
    return start, width


def spec_augment(
    x: torch.Tensor, r: float, p: float, rng: np.random.Generator
) -> torch.Tensor:
    """
    With probability p per item, zero one frequency stripe and one time stripe whose
    widths are drawn uniformly in [0, r * size]. x is (B, F, T).
    """
    if not (0.0 <= r <= 1.0 and 0.0 <= p <= 1.0):
        raise ValueError(f"r and p must be in [0, 1] (got r={r}, p={p}).")

    output = x.clone()
    if p == 0.0 or r == 0.0:
        return output

    number_of_bins, number_of_frames = x.shape[-2], x.shape[-1]
    for i in range(x.shape[0]):
        if rng.random() >= p:
            continue
        f0, f_width = _stripe(rng, number_of_bins, r)
        t0, t_width = _stripe(rng, number_of_frames, r)
        output[i, ..., f0 : f0 + f_width, :] = 0.0
        output[i, ..., t0 : t0 + t_width] = 0.0
    return output
