from .priors import GaussianMixturePrior, ReferenceGaussianPrior
from .server import PriorServer

__version__ = "0.1.0"

__all__ = ["GaussianMixturePrior", "ReferenceGaussianPrior", "PriorServer"]
