"""Deterministic seed derivation.

All randomness in the library flows through torch.Generator or
numpy.random.Generator objects seeded here. Library code never touches the
global RNG state, so independent runs with distinct seeds are reproducible
and non-interfering.

Child seeds are derived with numpy's SeedSequence, which gives
well-distributed streams for structured keys like (run_seed, iteration).
"""

import numpy as np
import torch


def derive_seed(*parts: int) -> int:
    """Collapse a tuple of integer key parts into a single 32-bit seed."""
    if not parts:
        raise ValueError("need at least one key part")
    ss = np.random.SeedSequence([int(p) & 0xFFFFFFFF for p in parts])
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def torch_generator(*parts: int) -> torch.Generator:
    gen = torch.Generator(device="cpu")
    gen.manual_seed(derive_seed(*parts))
    return gen


def numpy_generator(*parts: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(p) & 0xFFFFFFFF for p in parts]))
