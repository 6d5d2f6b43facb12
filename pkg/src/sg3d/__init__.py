"""Split-Gibbs plug-and-play sampler for large 3D linear inverse problems.

The sampler alternates an exact SVD-based likelihood draw, a pluggable
slice-wise denoising-posterior prior, and a stochastic 1D total-variation
prior along the slice axis, over randomized contiguous slice batches with
guaranteed multi-coverage.
"""

from .chain import AnnealSchedule, ChainConfig, ChainState, posterior_mean_sd, run_chain
from .exceptions import (ChainAborted, DataError, DimensionMismatch,
                         InfeasibleCoverError, NonFiniteError, PriorStepError,
                         Sg3dError, UnsupportedOperatorError)
from .forward import ForwardModel, apply_adjoint, apply_forward, degrade, upsample_nearest
from .likelihood import LikelihoodStepParams, likelihood_mean, likelihood_sample
from .scheduler import BatchCover, CoverSpec, merge_multicovered, sample_cover
from .tv import TvParams, tv1d_prox, tv_prior_sample
from .volume import Slice, Volume

__version__ = "0.1.0"

__all__ = [
    "AnnealSchedule", "ChainConfig", "ChainState", "posterior_mean_sd", "run_chain",
    "ChainAborted", "DataError", "DimensionMismatch", "InfeasibleCoverError",
    "NonFiniteError", "PriorStepError", "Sg3dError", "UnsupportedOperatorError",
    "ForwardModel", "apply_adjoint", "apply_forward", "degrade", "upsample_nearest",
    "LikelihoodStepParams", "likelihood_mean", "likelihood_sample",
    "BatchCover", "CoverSpec", "merge_multicovered", "sample_cover",
    "TvParams", "tv1d_prox", "tv_prior_sample",
    "Slice", "Volume",
]
