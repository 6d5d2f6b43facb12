"""Denoising-posterior prior interface.

A prior sampler draws from p(z) * N(x; z, rho^2 I) given the noisy slice
x and the noise level rho. Implementations must be deterministic in the
integer seed so chains are reproducible and remote implementations can be
swapped in bit-for-bit.
"""

from __future__ import annotations

import abc
import logging

import numpy as np

from ..exceptions import PriorStepError

log = logging.getLogger("sg3d.priors")


class PriorSampler(abc.ABC):
    """Samples the denoising posterior of one 2D slice at noise level rho."""

    @abc.abstractmethod
    def sample(self, x: np.ndarray, rho: float, seed: int) -> np.ndarray:
        """Return one draw given the noisy slice x; float32, same shape."""


def checked_sample(prior: PriorSampler, x: np.ndarray, rho: float, seed: int) -> np.ndarray:
    """Call a prior with output validation (shape, finiteness, degeneracy)."""
    out = prior.sample(x, rho, seed)
    out = np.asarray(out)
    if out.shape != x.shape:
        raise PriorStepError(
            f"prior returned shape {out.shape}, expected {x.shape}")
    if not np.isfinite(out).all():
        raise PriorStepError("prior returned non-finite values")
    if out.size > 1 and np.ptp(out) == 0.0 and np.ptp(x) > 0.0:
        log.warning("prior returned a constant slice for a varying input "
                    "(degenerate sampler or decoder?)")
    return out.astype(np.float32, copy=False)
