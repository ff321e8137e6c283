"""Linear diffusion noise schedule and its derived sampler coefficients.

The schedule holds the beta sequence, per-step alphas, cumulative products
alpha_bar, and the evenly spaced subsequence of timesteps the sampler walks.
All closed-form noising and denoising arithmetic in the library reads the
cumulative alpha_bar values; the convention alpha_bar(-1) = 1 marks the
clean end of the chain, so a step whose destination is -1 is exact.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError, NumericalError

# Radicand slack for direction_coefficient: tiny negative values from float
# cancellation are clamped, anything worse is a schedule inconsistency.
_RADICAND_TOL = 1e-9


@dataclass(frozen=True)
class NoiseSchedule:
    """Immutable container for {beta_t}, {alpha_t}, {alpha_bar_t} and sampler steps."""

    T1: int
    betas: np.ndarray
    alphas: np.ndarray
    alpha_bars: np.ndarray
    sampler_steps: np.ndarray

    @property
    def S(self) -> int:
        return len(self.sampler_steps)

    def alpha_bar(self, t: int) -> float:
        """Cumulative product at step t, with alpha_bar(t) = 1 for t < 0."""
        if t < 0:
            return 1.0
        if t >= self.T1:
            raise DomainError(f"timestep {t} outside [0, {self.T1})")
        return float(self.alpha_bars[t])


def build_schedule(
    T1: int = 1000,
    beta_start: float = 0.00085,
    beta_end: float = 0.012,
    S: int = 50,
) -> NoiseSchedule:
    """Linear beta schedule plus an S-step sampler subsequence of [0, T1).

    The sampler steps are evenly spaced integers with first entry 0 and last
    entry T1 - 1, strictly increasing (requires S <= T1).
    """
    if T1 < 1:
        raise ConfigError(f"T1 must be >= 1, got {T1}")
    if not (0.0 < beta_start < beta_end < 1.0):
        raise ConfigError(
            f"need 0 < beta_start < beta_end < 1, got ({beta_start}, {beta_end})"
        )
    if not (0 < S <= T1):
        raise ConfigError(f"need 0 < S <= T1, got S={S}, T1={T1}")

    betas = np.linspace(beta_start, beta_end, T1, dtype=np.float64)
    alphas = 1.0 - betas
    alpha_bars = np.cumprod(alphas)
    if not (alpha_bars[-1] > 0.0 and alpha_bars[0] <= 1.0):
        raise ConfigError("alpha_bars left (0, 1]; betas out of range")

    steps = np.round(np.linspace(0, T1 - 1, S)).astype(np.int64)
    if len(np.unique(steps)) != S:
        raise ConfigError(f"S={S} sampler steps are not distinct over [0, {T1})")

    for arr in (betas, alphas, alpha_bars, steps):
        arr.flags.writeable = False
    return NoiseSchedule(T1=T1, betas=betas, alphas=alphas, alpha_bars=alpha_bars,
                         sampler_steps=steps)


def ddim_sigma(schedule: NoiseSchedule, t: int, t_prev: int) -> float:
    """Stochastic step width sigma_t for the jump t -> t_prev.

    sigma_t = sqrt((1 - abar_prev) / (1 - abar_t)) * sqrt(1 - abar_t / abar_prev)

    Zero when t_prev = -1 (clean destination) and in the degenerate case
    abar_t = abar_prev.
    """
    if t <= t_prev:
        raise DomainError(f"need t > t_prev, got t={t}, t_prev={t_prev}")
    if t_prev < -1:
        raise DomainError(f"t_prev must be >= -1, got {t_prev}")
    abar_t = schedule.alpha_bar(t)
    abar_prev = schedule.alpha_bar(t_prev)
    if abar_prev >= 1.0:
        return 0.0
    ratio = max(0.0, 1.0 - abar_t / abar_prev)
    return float(np.sqrt((1.0 - abar_prev) / (1.0 - abar_t)) * np.sqrt(ratio))


def direction_coefficient(schedule: NoiseSchedule, t_prev: int, sigma: float) -> float:
    """Coefficient on the predicted noise in the sampler update.

    sqrt(1 - abar_prev - sigma^2), clamped at 0 against float cancellation.
    """
    abar_prev = schedule.alpha_bar(t_prev)
    radicand = 1.0 - abar_prev - float(sigma) ** 2
    if radicand < -_RADICAND_TOL:
        raise NumericalError(
            "inconsistent schedule: 1 - alpha_bar(t_prev) - sigma^2 < 0",
            {"t_prev": t_prev, "sigma": sigma, "radicand": radicand},
        )
    return float(np.sqrt(max(0.0, radicand)))
