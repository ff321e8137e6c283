"""Procedural toy dataset.

Each image is a soft-edged ellipse ("the animal") over a smooth gradient
background. Class identity is carried only by the texture painted inside
the ellipse: stripes (class 0), spots (class 1), rings (2), checks (3).
Backgrounds and shapes are drawn from class-independent distributions, so
a faithful counterfactual edit has to change the texture, not the scene.

Every sample is rendered from its own child seed (dataset seed, index),
which makes regeneration bit-exact regardless of batch order.
"""

from dataclasses import dataclass

import numpy as np
import torch

from .errors import ConfigError
from .seeding import numpy_generator

TEXTURES = ("stripes", "spots", "rings", "checks")


@dataclass
class ToyDataset:
    images: torch.Tensor    # (N, 3, H, W) float32 in [0, 1]
    labels: torch.Tensor    # (N,) int64
    fg_masks: torch.Tensor  # (N, 1, H, W) bool, ground-truth ellipse support
    seed: int
    image_size: int
    num_classes: int

    def __len__(self):
        return self.images.shape[0]


def _soft_step(x, softness):
    return 1.0 / (1.0 + np.exp(-x / softness))


def _render(rng: np.random.Generator, size: int, texture: str) -> np.ndarray:
    ys, xs = np.mgrid[0:size, 0:size].astype(np.float64) / size

    # Background: tinted linear gradient from a narrow shared gray band.
    base = rng.uniform(0.40, 0.52)
    gx, gy = rng.uniform(-0.10, 0.10, size=2)
    tint = rng.uniform(-0.03, 0.03, size=3)
    bg = base + gx * (xs - 0.5) + gy * (ys - 0.5)
    img = bg[None, :, :] + tint[:, None, None]

    # Shared foreground shape: rotated soft ellipse.
    cx, cy = rng.uniform(0.38, 0.62, size=2)
    rx, ry = rng.uniform(0.20, 0.30, size=2)
    theta = rng.uniform(0.0, np.pi)
    dx, dy = xs - cx, ys - cy
    u = dx * np.cos(theta) + dy * np.sin(theta)
    v = -dx * np.sin(theta) + dy * np.cos(theta)
    dist = np.sqrt((u / rx) ** 2 + (v / ry) ** 2)
    alpha = _soft_step(1.0 - dist, 0.06)

    body = rng.uniform(0.62, 0.74) + rng.uniform(-0.04, 0.04, size=3)

    # Class texture: a dark pattern multiplying the body tone. Scales are
    # coarse (8+ px) so they survive the f=8 latent bottleneck.
    px = xs * size
    py = ys * size
    period = rng.uniform(10.0, 14.0)
    phase = rng.uniform(0.0, 2 * np.pi)
    if texture == "stripes":
        # Duty cycle trimmed to roughly match the spots' dark coverage so
        # class identity is not recoverable from mean brightness alone.
        ang = rng.uniform(0.0, np.pi)
        wave = np.sin(2 * np.pi * (px * np.cos(ang) + py * np.sin(ang)) / period + phase)
        dark = _soft_step(wave - 0.55, 0.2)
    elif texture == "spots":
        period = rng.uniform(11.0, 15.0)
        ox, oy = rng.uniform(0.0, period, size=2)
        mx = (px - ox) % period - period / 2
        my = (py - oy) % period - period / 2
        r = rng.uniform(3.2, 4.6)
        dark = _soft_step(r - np.sqrt(mx ** 2 + my ** 2), 1.2)
    elif texture == "rings":
        rr = np.sqrt((px - cx * size) ** 2 + (py - cy * size) ** 2)
        dark = _soft_step(np.sin(2 * np.pi * rr / period + phase), 0.25)
    elif texture == "checks":
        ang = rng.uniform(0.0, np.pi)
        w1 = np.sin(2 * np.pi * (px * np.cos(ang) + py * np.sin(ang)) / period + phase)
        w2 = np.sin(2 * np.pi * (-px * np.sin(ang) + py * np.cos(ang)) / period)
        dark = _soft_step(w1 * w2, 0.15)
    else:
        raise ConfigError(f"unknown texture {texture!r}")

    shade = 1.0 - 0.38 * dark
    fg = body[:, None, None] * shade[None, :, :]
    img = img * (1.0 - alpha[None]) + fg * alpha[None]

    img = img + rng.normal(0.0, 0.008, size=img.shape)
    return np.clip(img, 0.02, 0.98).astype(np.float32), alpha > 0.5


def generate_dataset(n: int, seed: int, image_size: int = 64,
                     num_classes: int = 2) -> ToyDataset:
    """Render n images with balanced, interleaved labels (label = i mod K)."""
    if not 2 <= num_classes <= len(TEXTURES):
        raise ConfigError(
            f"num_classes must be in [2, {len(TEXTURES)}], got {num_classes}"
        )
    if n < num_classes:
        raise ConfigError(f"need at least {num_classes} samples, got {n}")
    images = np.empty((n, 3, image_size, image_size), dtype=np.float32)
    fg = np.empty((n, 1, image_size, image_size), dtype=bool)
    labels = np.empty(n, dtype=np.int64)
    for i in range(n):
        label = i % num_classes
        rng = numpy_generator(seed, i)
        images[i], fg[i, 0] = _render(rng, image_size, TEXTURES[label])
        labels[i] = label
    return ToyDataset(images=torch.from_numpy(images), labels=torch.from_numpy(labels),
                      fg_masks=torch.from_numpy(fg), seed=seed,
                      image_size=image_size, num_classes=num_classes)
