"""Latent-space wrapping of a prior sampler.

An encoder/decoder pair moves slices into a latent field where the inner
prior samples. Because the codecs are generally nonlinear, sampling the
latent posterior at a mapped noise level only approximates the image-space
denoising posterior; the mapping from rho to the latent starting level is
caller-supplied since no principled closed form exists.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..exceptions import PriorStepError
from .base import PriorSampler, checked_sample


@dataclass
class LatentAdapter:
    encode: Callable[[np.ndarray], np.ndarray]
    decode: Callable[[np.ndarray], np.ndarray]
    start_noise_schedule: Callable[[float], float] = field(default=lambda rho: rho)


class LatentPrior(PriorSampler):
    def __init__(self, inner: PriorSampler, adapter: LatentAdapter):
        self.inner = inner
        self.adapter = adapter

    def sample(self, x: np.ndarray, rho: float, seed: int) -> np.ndarray:
        latent = np.asarray(self.adapter.encode(x))
        rho_latent = float(self.adapter.start_noise_schedule(rho))
        drawn = checked_sample(self.inner, latent.astype(np.float32), rho_latent, seed)
        out = np.asarray(self.adapter.decode(drawn))
        if out.shape != x.shape:
            raise PriorStepError(
                f"decoder returned shape {out.shape}, expected {x.shape}")
        return out.astype(np.float32)


def wrap_latent(prior: PriorSampler, adapter: LatentAdapter) -> PriorSampler:
    """Prior that encodes, samples in latent space at a mapped level, decodes."""
    return LatentPrior(prior, adapter)
