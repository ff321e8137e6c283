"""Array conventions and boundary validators.

Layout is channels-first throughout, matching torch:

  image   (3, H1, W1)  float, values in [0, 1]
  latent  (4, H2, W2)  float, unbounded, H2 = H1/f, W2 = W1/f
  mask    (1, H, W)    float, every element exactly 0.0 or 1.0
  probs   (K,)         float, nonnegative, sums to 1

Batched variants prepend a batch axis. The validators below are used at
module boundaries; inner loops trust their inputs.
"""

import torch

from .errors import DomainError, ShapeError

LATENT_CHANNELS = 4


def check_image(image: torch.Tensor, name: str = "image") -> torch.Tensor:
    if image.ndim != 3 or image.shape[0] != 3:
        raise ShapeError(f"{name}: expected (3, H, W), got {tuple(image.shape)}")
    if not torch.isfinite(image).all():
        raise DomainError(f"{name}: non-finite values")
    lo, hi = float(image.min()), float(image.max())
    if lo < -1e-6 or hi > 1 + 1e-6:
        raise DomainError(f"{name}: values outside [0, 1] (min {lo:.4g}, max {hi:.4g})")
    return image


def check_latent(latent: torch.Tensor, name: str = "latent") -> torch.Tensor:
    if latent.ndim != 3 or latent.shape[0] != LATENT_CHANNELS:
        raise ShapeError(
            f"{name}: expected ({LATENT_CHANNELS}, H, W), got {tuple(latent.shape)}"
        )
    return latent


def check_mask(mask: torch.Tensor, name: str = "mask") -> torch.Tensor:
    """Binary (1, H, W) mask; every entry must be exactly 0 or 1."""
    if mask.ndim != 3 or mask.shape[0] != 1:
        raise ShapeError(f"{name}: expected (1, H, W), got {tuple(mask.shape)}")
    if not torch.logical_or(mask == 0, mask == 1).all():
        raise DomainError(f"{name}: entries must be exactly 0 or 1")
    return mask


def check_same_shape(a: torch.Tensor, b: torch.Tensor, what: str) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{what}: shape mismatch {tuple(a.shape)} vs {tuple(b.shape)}")


def check_probs(probs: torch.Tensor, name: str = "probs") -> torch.Tensor:
    if probs.ndim != 1:
        raise ShapeError(f"{name}: expected 1-D probability vector")
    total = float(probs.sum())
    if abs(total - 1.0) > 1e-6 or float(probs.min()) < -1e-9:
        raise DomainError(f"{name}: not a probability vector (sum {total:.8f})")
    return probs
