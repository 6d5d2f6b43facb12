from .base import PriorSampler, checked_sample
from .gaussian import GaussianAnalyticPrior, SeparableGaussianPrior
from .latent import LatentAdapter, wrap_latent
from .remote import RemotePrior
from .score import EdmParams, ScorePrior, isotropic_gaussian_score

__all__ = [
    "PriorSampler",
    "checked_sample",
    "GaussianAnalyticPrior",
    "SeparableGaussianPrior",
    "LatentAdapter",
    "wrap_latent",
    "RemotePrior",
    "EdmParams",
    "ScorePrior",
    "isotropic_gaussian_score",
]
