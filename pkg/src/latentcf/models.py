"""Desk-scale trainable models.

Four components, mirroring the stages of the pipeline:

  VaeModel        encoder/decoder between (3, H, W) images and (4, H/f, W/f)
                  latents; posterior mean at encode time, sigmoid decode.
  Denoiser        small UNet predicting noise on latents, class-conditional
                  through cross-attention at the lowest resolution.
  ConditionEmbedder
                  learned per-class token table producing (O, d) embeddings.
  ClassifierModel conv net with named activation taps and a penultimate
                  feature vector reused as the metric feature extractor.

Every activation on a gradient path is smooth (SiLU / sigmoid / softmax) so
finite-difference checks of end-to-end gradients are meaningful.
"""

import math
from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from .arrays import LATENT_CHANNELS
from .errors import DomainError, LayerLookupError, ShapeError


def _group_norm(channels: int) -> nn.GroupNorm:
    groups = 8
    while channels % groups:
        groups //= 2
    return nn.GroupNorm(max(groups, 1), channels)


def _with_batch(x: torch.Tensor):
    """Promote (C, H, W) to (1, C, H, W); report whether we did."""
    if x.ndim == 3:
        return x.unsqueeze(0), True
    return x, False


# ---------------------------------------------------------------------------
# VAE


@dataclass(frozen=True)
class VaeArch:
    widths: tuple = (16, 32, 48)
    latent_channels: int = LATENT_CHANNELS

    @property
    def f(self) -> int:
        return 2 ** len(self.widths)


class VaeEncoder(nn.Module):
    def __init__(self, arch: VaeArch):
        super().__init__()
        layers = []
        prev = 3
        for w in arch.widths:
            layers += [nn.Conv2d(prev, w, 3, stride=2, padding=1), _group_norm(w), nn.SiLU()]
            prev = w
        layers += [nn.Conv2d(prev, prev, 3, padding=1), nn.SiLU()]
        self.body = nn.Sequential(*layers)
        self.head = nn.Conv2d(prev, 2 * arch.latent_channels, 1)

    def forward(self, x):
        h = self.body(x)
        mu, logvar = self.head(h).chunk(2, dim=1)
        return mu, logvar


class VaeDecoder(nn.Module):
    def __init__(self, arch: VaeArch):
        super().__init__()
        widths = list(reversed(arch.widths))
        self.proj = nn.Conv2d(arch.latent_channels, widths[0], 1)
        self.mid = nn.Sequential(nn.Conv2d(widths[0], widths[0], 3, padding=1),
                                 _group_norm(widths[0]), nn.SiLU())
        ups = []
        prev = widths[0]
        for w in widths[1:] + [widths[-1]]:
            ups += [nn.Upsample(scale_factor=2, mode="nearest"),
                    nn.Conv2d(prev, w, 3, padding=1), _group_norm(w), nn.SiLU()]
            prev = w
        self.ups = nn.Sequential(*ups)
        self.out = nn.Conv2d(prev, 3, 3, padding=1)

    def forward(self, z):
        h = self.mid(self.proj(z))
        h = self.ups(h)
        return torch.sigmoid(self.out(h))


class VaeModel(nn.Module):
    """Image <-> latent autoencoder with a deterministic encode contract."""

    def __init__(self, arch: VaeArch = VaeArch()):
        super().__init__()
        self.arch = arch
        self.encoder = VaeEncoder(arch)
        self.decoder = VaeDecoder(arch)

    @property
    def f(self) -> int:
        return self.arch.f

    def posterior(self, images):
        return self.encoder(images)

    def encode(self, image: torch.Tensor) -> torch.Tensor:
        """Posterior mean. Accepts (3, H, W) or a batch; shape must divide f."""
        x, single = _with_batch(image)
        if x.shape[-1] % self.f or x.shape[-2] % self.f:
            raise ShapeError(
                f"image size {tuple(x.shape[-2:])} not divisible by f={self.f}"
            )
        mu, _ = self.encoder(x)
        return mu[0] if single else mu

    def decode(self, latent: torch.Tensor) -> torch.Tensor:
        z, single = _with_batch(latent)
        if z.shape[1] != self.arch.latent_channels:
            raise ShapeError(f"latent has {z.shape[1]} channels, expected "
                             f"{self.arch.latent_channels}")
        img = self.decoder(z)
        return img[0] if single else img


# ---------------------------------------------------------------------------
# Denoiser


@dataclass(frozen=True)
class DenoiserArch:
    latent_channels: int = LATENT_CHANNELS
    base: int = 48
    mid: int = 64
    cond_tokens: int = 4
    cond_dim: int = 64
    time_dim: int = 64
    T1: int = 1000


def sinusoidal_embedding(t: torch.Tensor, dim: int) -> torch.Tensor:
    """Standard transformer-style timestep features, shape (B, dim)."""
    half = dim // 2
    freqs = torch.exp(
        -math.log(10000.0) * torch.arange(half, dtype=torch.float64) / max(half - 1, 1)
    ).to(device=t.device)
    args = t.to(torch.float64)[:, None] * freqs[None, :]
    emb = torch.cat([torch.sin(args), torch.cos(args)], dim=1)
    return emb


class ResBlock(nn.Module):
    def __init__(self, cin, cout, temb_dim):
        super().__init__()
        self.norm1 = _group_norm(cin)
        self.conv1 = nn.Conv2d(cin, cout, 3, padding=1)
        self.temb = nn.Linear(temb_dim, cout)
        self.norm2 = _group_norm(cout)
        self.conv2 = nn.Conv2d(cout, cout, 3, padding=1)
        self.skip = nn.Conv2d(cin, cout, 1) if cin != cout else nn.Identity()

    def forward(self, x, temb):
        h = self.conv1(F.silu(self.norm1(x)))
        h = h + self.temb(F.silu(temb))[:, :, None, None]
        h = self.conv2(F.silu(self.norm2(h)))
        return h + self.skip(x)


class SelfAttention(nn.Module):
    def __init__(self, channels):
        super().__init__()
        self.norm = _group_norm(channels)
        self.qkv = nn.Conv2d(channels, 3 * channels, 1)
        self.proj = nn.Conv2d(channels, channels, 1)
        self.scale = channels ** -0.5

    def forward(self, x):
        b, c, h, w = x.shape
        q, k, v = self.qkv(self.norm(x)).reshape(b, 3, c, h * w).unbind(1)
        attn = torch.softmax(q.transpose(1, 2) @ k * self.scale, dim=-1)
        out = (attn @ v.transpose(1, 2)).transpose(1, 2).reshape(b, c, h, w)
        return x + self.proj(out)


class CrossAttention(nn.Module):
    """Latent queries attend over the (O, d) condition tokens."""

    def __init__(self, channels, cond_tokens, cond_dim):
        super().__init__()
        self.cond_shape = (cond_tokens, cond_dim)
        self.norm = _group_norm(channels)
        self.q = nn.Conv2d(channels, channels, 1)
        self.kv = nn.Linear(cond_dim, 2 * channels)
        self.proj = nn.Conv2d(channels, channels, 1)
        self.scale = channels ** -0.5

    def forward(self, x, cond):
        if tuple(cond.shape[-2:]) != self.cond_shape:
            raise ShapeError(
                f"condition shape {tuple(cond.shape[-2:])} does not match the "
                f"denoiser's (O, d) = {self.cond_shape}"
            )
        b, c, h, w = x.shape
        q = self.q(self.norm(x)).reshape(b, c, h * w).transpose(1, 2)
        k, v = self.kv(cond).chunk(2, dim=-1)
        attn = torch.softmax(q @ k.transpose(1, 2) * self.scale, dim=-1)
        out = (attn @ v).transpose(1, 2).reshape(b, c, h, w)
        return x + self.proj(out)


class Denoiser(nn.Module):
    """Noise predictor eps(z_t, cond, t) on the latent grid.

    One downsampling level; self- plus cross-attention sit at the lowest
    resolution. The output conv is zero-initialized so the untrained model
    predicts zero noise (training loss starts at E|eps|^2 = 1).
    """

    def __init__(self, arch: DenoiserArch = DenoiserArch()):
        super().__init__()
        self.arch = arch
        c, base, mid = arch.latent_channels, arch.base, arch.mid
        tdim = arch.time_dim
        self.time_mlp = nn.Sequential(nn.Linear(tdim, 2 * tdim), nn.SiLU(),
                                      nn.Linear(2 * tdim, tdim))
        self.conv_in = nn.Conv2d(c, base, 3, padding=1)
        self.res_in = ResBlock(base, base, tdim)
        self.down = nn.Conv2d(base, mid, 3, stride=2, padding=1)
        self.res_mid1 = ResBlock(mid, mid, tdim)
        self.self_attn = SelfAttention(mid)
        self.cross_attn = CrossAttention(mid, arch.cond_tokens, arch.cond_dim)
        self.res_mid2 = ResBlock(mid, mid, tdim)
        self.up = nn.Conv2d(mid, base, 3, padding=1)
        self.res_out = ResBlock(2 * base, base, tdim)
        self.norm_out = _group_norm(base)
        self.conv_out = nn.Conv2d(base, c, 3, padding=1)
        nn.init.zeros_(self.conv_out.weight)
        nn.init.zeros_(self.conv_out.bias)

    def forward(self, z, cond, t):
        z, single = _with_batch(z)
        if cond.ndim == 2:
            cond = cond.unsqueeze(0)
        if cond.shape[0] == 1 and z.shape[0] > 1:
            cond = cond.expand(z.shape[0], -1, -1)
        if not torch.is_tensor(t):
            t = torch.full((z.shape[0],), int(t), device=z.device)
        t = t.reshape(-1).expand(z.shape[0])
        temb = self.time_mlp(sinusoidal_embedding(t, self.arch.time_dim).to(z.dtype))

        h0 = self.conv_in(z)
        h0 = self.res_in(h0, temb)
        h = self.down(h0)
        h = self.res_mid1(h, temb)
        h = self.self_attn(h)
        h = self.cross_attn(h, cond)
        h = self.res_mid2(h, temb)
        h = self.up(F.interpolate(h, scale_factor=2, mode="nearest"))
        h = self.res_out(torch.cat([h, h0], dim=1), temb)
        out = self.conv_out(F.silu(self.norm_out(h)))
        return out[0] if single else out


# ---------------------------------------------------------------------------
# Condition embedder


@dataclass(frozen=True)
class EmbedderArch:
    num_classes: int = 2
    tokens: int = 4
    dim: int = 64


class ConditionEmbedder(nn.Module):
    """Learned class-token table; the stand-in for a text encoder."""

    def __init__(self, arch: EmbedderArch = EmbedderArch()):
        super().__init__()
        self.arch = arch
        self.table = nn.Embedding(arch.num_classes, arch.tokens * arch.dim)

    def embed(self, label) -> torch.Tensor:
        """(O, d) embedding for one label, or (B, O, d) for a label tensor."""
        if torch.is_tensor(label) and label.ndim > 0:
            if int(label.min()) < 0 or int(label.max()) >= self.arch.num_classes:
                raise DomainError(f"label outside [0, {self.arch.num_classes})")
            return self.table(label).reshape(-1, self.arch.tokens, self.arch.dim)
        label = int(label)
        if not 0 <= label < self.arch.num_classes:
            raise DomainError(f"label {label} outside [0, {self.arch.num_classes})")
        idx = torch.tensor(label, device=self.table.weight.device)
        return self.table(idx).reshape(self.arch.tokens, self.arch.dim)


def embed_condition(embedder: ConditionEmbedder, label) -> torch.Tensor:
    return embedder.embed(label)


# ---------------------------------------------------------------------------
# Classifier


@dataclass(frozen=True)
class ClassifierArch:
    widths: tuple = (24, 48, 64)
    num_classes: int = 2


class ClassifierModel(nn.Module):
    """Small conv classifier with named, side-effect-free activation taps.

    Blocks are named conv1..convN; `activations` reruns the stem up to the
    requested block, so there are no hooks and no cached state. The pooled
    penultimate vector (`features`) doubles as the metric feature extractor.
    """

    def __init__(self, arch: ClassifierArch = ClassifierArch()):
        super().__init__()
        self.arch = arch
        blocks = []
        prev = 3
        for i, w in enumerate(arch.widths):
            blocks.append((f"conv{i + 1}", nn.Sequential(
                nn.Conv2d(prev, w, 3, stride=2, padding=1), _group_norm(w), nn.SiLU())))
            prev = w
        self.blocks = nn.ModuleDict(dict(blocks))
        self.head = nn.Linear(prev, arch.num_classes)
        self.feature_dim = prev

    def layer_names(self):
        return list(self.blocks.keys())

    def _stem(self, x, upto=None):
        for name, block in self.blocks.items():
            x = block(x)
            if name == upto:
                return x
        return x

    def activations(self, image: torch.Tensor, layer: str) -> torch.Tensor:
        """Activation stack (K_l, h, w) at the named block, (B, K_l, h, w) batched."""
        if layer not in self.blocks:
            raise LayerLookupError(
                f"unknown layer {layer!r}; available: {', '.join(self.layer_names())}"
            )
        x, single = _with_batch(image)
        out = self._stem(x, upto=layer)
        return out[0] if single else out

    def features(self, image: torch.Tensor) -> torch.Tensor:
        x, single = _with_batch(image)
        h = self._stem(x).mean(dim=(2, 3))
        return h[0] if single else h

    def logits(self, image: torch.Tensor) -> torch.Tensor:
        x, single = _with_batch(image)
        out = self.head(self._stem(x).mean(dim=(2, 3)))
        return out[0] if single else out

    def predict_proba(self, image: torch.Tensor) -> torch.Tensor:
        return torch.softmax(self.logits(image), dim=-1)

    forward = logits


def classify(model: ClassifierModel, image: torch.Tensor) -> torch.Tensor:
    """Probability vector over classes; differentiable with respect to image."""
    if image.ndim != 3 or image.shape[0] != 3:
        raise ShapeError(f"expected (3, H, W) image, got {tuple(image.shape)}")
    return model.predict_proba(image)


# ---------------------------------------------------------------------------
# Bundle


@dataclass
class ModelBundle:
    """The four trained components the explanation pipeline consumes."""

    vae: VaeModel
    denoiser: Denoiser
    embedder: ConditionEmbedder
    classifier: ClassifierModel

    def eval(self):
        for m in (self.vae, self.denoiser, self.embedder, self.classifier):
            m.eval()
        return self
