import numpy as np
import torch

SigmaFloor = 1e-6


def freq_mixstyle(
    x: torch.Tensor,
    alpha: float,
    p: float,
    rng: np.random.Generator,
    gamma: float | None = None,
) -> torch.Tensor:
    """
    Frequency-wise statistics mixing. With probability p for the whole batch, each
    item is normalized with its per-bin mean and std over time and de-normalized
    with statistics mixed with a shuffled partner. x is (B, F, T).
    """
    if p == 0.0 or x.shape[0] < 2 or rng.random() >= p:
        return x.clone()

    batch_size = x.shape[0]
    mu = x.mean(dim=-1, keepdim=True).detach()
    sigma = x.std(dim=-1, keepdim=True, unbiased=False).clamp_min(SigmaFloor).detach()
    x_normalized = (x - mu) / sigma

    if gamma is None:
        values = rng.beta(alpha, alpha, size=batch_size)
    else:
        values = np.full(batch_size, gamma)
    lmda = torch.from_numpy(values).to(x.dtype).reshape((-1,) + (1,) * (x.ndim - 1))
    permutation = torch.from_numpy(rng.permutation(batch_size))

    mu_mixed = lmda * mu + (1 - lmda) * mu[permutation]
    sigma_mixed = lmda * sigma + (1 - lmda) * sigma[permutation]
    return x_normalized * sigma_mixed + mu_mixed
