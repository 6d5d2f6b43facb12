"""Analytic Gaussian priors with exact conjugate denoising posteriors.

These are the correctness oracles of the sampling stack: with a Gaussian
prior N(m, P^{-1}) the denoising posterior at level rho is
N((P + I/rho^2)^{-1} (P m + x/rho^2), (P + I/rho^2)^{-1}) in closed form.
"""

from __future__ import annotations

import numpy as np

from ..exceptions import DataError
from .base import PriorSampler


class GaussianAnalyticPrior(PriorSampler):
    """Gaussian prior with scalar, diagonal or dense precision.

    For scalar and diagonal precisions the draw follows the wire-stable
    recipe (float64 arithmetic on the float32 input)::

        rng = np.random.default_rng(seed)
        post_prec = precision + 1/rho**2
        post_mean = (precision * mean + x / rho**2) / post_prec
        out = post_mean + noise_scale * rng.standard_normal(x.shape) / sqrt(post_prec)

    A remote prior server reproducing this expression with the same seed
    returns bit-identical float32 slices, which is what makes in-process
    and bridged chains interchangeable.
    """

    def __init__(self, mean, precision, noise_scale: float = 1.0):
        self.mean = np.asarray(mean, dtype=np.float64)
        self.noise_scale = float(noise_scale)
        prec = np.asarray(precision, dtype=np.float64)
        n = self.mean.size
        if prec.ndim == 0:
            if prec < 0:
                raise DataError("precision must be >= 0")
            self.kind = "scalar"
            self.precision = float(prec)
        elif prec.shape == self.mean.shape:
            if np.any(prec < 0):
                raise DataError("diagonal precision entries must be >= 0")
            self.kind = "diag"
            self.precision = prec
        elif prec.ndim == 2 and prec.shape == (n, n):
            sym_err = np.max(np.abs(prec - prec.T))
            if sym_err > 1e-10 * max(1.0, np.max(np.abs(prec))):
                raise DataError("dense precision must be symmetric")
            evals, evecs = np.linalg.eigh(prec)
            if evals.min() <= 0:
                raise DataError("dense precision must be positive definite")
            self.kind = "dense"
            self.precision = prec
            self._evals = evals
            self._evecs = evecs
        else:
            raise DataError(f"precision shape {prec.shape} matches neither the "
                            f"mean shape {self.mean.shape} nor ({n}, {n})")

    def sample(self, x: np.ndarray, rho: float, seed: int) -> np.ndarray:
        if rho <= 0:
            raise DataError("rho must be > 0")
        rng = np.random.default_rng(seed)
        x64 = np.asarray(x, dtype=np.float64)
        if self.kind in ("scalar", "diag"):
            post_prec = self.precision + 1.0 / rho**2
            post_mean = (self.precision * self.mean + x64 / rho**2) / post_prec
            out = post_mean + self.noise_scale * rng.standard_normal(x64.shape) / np.sqrt(post_prec)
        else:
            n = x64.size
            if self.precision.shape != (n, n):
                raise DataError("dense precision does not match slice size")
            coef_prec = self._evals + 1.0 / rho**2
            rhs = self.precision @ self.mean.ravel() + x64.ravel() / rho**2
            coef = (self._evecs.T @ rhs) / coef_prec
            coef = coef + self.noise_scale * rng.standard_normal(n) / np.sqrt(coef_prec)
            out = (self._evecs @ coef).reshape(x64.shape)
        return out.astype(np.float32)

    def posterior_moments(self, x: np.ndarray, rho: float):
        """(mean, covariance) of the exact denoising posterior (oracle use)."""
        x64 = np.asarray(x, dtype=np.float64)
        if self.kind in ("scalar", "diag"):
            post_prec = self.precision + 1.0 / rho**2
            mean = (self.precision * self.mean + x64 / rho**2) / post_prec
            return mean, 1.0 / post_prec
        coef_prec = self._evals + 1.0 / rho**2
        cov = (self._evecs / coef_prec) @ self._evecs.T
        mean = cov @ (self.precision @ self.mean.ravel() + x64.ravel() / rho**2)
        return mean.reshape(x64.shape), cov


class SeparableGaussianPrior(PriorSampler):
    """Stationary Gaussian prior with Kronecker covariance s^2 * Cy (x) Cx.

    The per-axis eigendecompositions make the conjugate posterior
    diagonal in the (Qy (x) Qx) basis for any rho, so exact draws on an
    (H, W) slice cost four small matrix products. Suited to smoothness
    priors fitted from phantom ensembles.
    """

    def __init__(self, mean: np.ndarray, variance: float,
                 corr_y: np.ndarray, corr_x: np.ndarray, noise_scale: float = 1.0):
        self.mean = np.asarray(mean, dtype=np.float64)
        if self.mean.ndim != 2:
            raise DataError("mean must be a 2D slice")
        if variance <= 0:
            raise DataError("variance must be > 0")
        self.variance = float(variance)
        self.noise_scale = float(noise_scale)
        ey, Qy = np.linalg.eigh(np.asarray(corr_y, dtype=np.float64))
        ex, Qx = np.linalg.eigh(np.asarray(corr_x, dtype=np.float64))
        if ey.min() <= 0 or ex.min() <= 0:
            raise DataError("correlation factors must be positive definite")
        self._ey, self._Qy = ey, Qy
        self._ex, self._Qx = ex, Qx
        # prior precision eigenvalues on the (H, W) grid
        self._prior_prec = 1.0 / (self.variance * np.outer(ey, ex))

    @classmethod
    def squared_exponential(cls, mean: np.ndarray, variance: float,
                            length_scale: float, jitter: float = 1e-6,
                            noise_scale: float = 1.0):
        mean = np.asarray(mean, dtype=np.float64)
        h, w = mean.shape

        def corr(m):
            t = np.arange(m)
            c = np.exp(-((t[:, None] - t[None, :]) ** 2) / (2.0 * length_scale**2))
            return c + jitter * np.eye(m)

        return cls(mean, variance, corr(h), corr(w), noise_scale=noise_scale)

    @classmethod
    def from_ensemble(cls, slabs: np.ndarray, jitter: float = 1e-3,
                      noise_scale: float = 1.0):
        """Fit mean and separable covariance from a stack of example slices.

        ``slabs`` is (N, H, W). Row/column covariances of the residuals give
        flip-flop style Kronecker correlation factors; the y-axis variance
        profile is folded into the y factor (layered structures concentrate
        variance around interfaces). ``jitter`` shrinks toward the identity
        to keep the factors well conditioned for small ensembles.
        """
        slabs = np.asarray(slabs, dtype=np.float64)
        if slabs.ndim != 3 or slabs.shape[0] < 2:
            raise DataError("ensemble must be (N >= 2, H, W)")
        mean = slabs.mean(axis=0)
        resid = slabs - mean
        n, h, w = resid.shape
        variance = float(resid.var())
        if variance <= 0:
            raise DataError("ensemble has zero variance")
        cy = np.einsum("nij,nkj->ik", resid, resid) / (n * w)
        cx = np.einsum("nij,nik->jk", resid, resid) / (n * h)

        def corr(c):
            d = np.sqrt(np.clip(np.diag(c), 1e-12, None))
            r = c / np.outer(d, d)
            return (1.0 - jitter) * r + jitter * np.eye(c.shape[0])

        ry, rx = corr(cy), corr(cx)
        sy = np.sqrt(np.clip(np.diag(cy), 1e-12, None))
        sy /= np.sqrt((sy**2).mean())
        return cls(mean, variance, ry * np.outer(sy, sy), rx,
                   noise_scale=noise_scale)

    def _encode(self, arr):
        return self._Qy.T @ arr @ self._Qx

    def _decode(self, coef):
        return self._Qy @ coef @ self._Qx.T

    def sample(self, x: np.ndarray, rho: float, seed: int) -> np.ndarray:
        if rho <= 0:
            raise DataError("rho must be > 0")
        rng = np.random.default_rng(seed)
        x64 = np.asarray(x, dtype=np.float64)
        if x64.shape != self.mean.shape:
            raise DataError(f"slice shape {x64.shape} does not match prior "
                            f"{self.mean.shape}")
        post_prec = self._prior_prec + 1.0 / rho**2
        rhs = self._encode(self.mean) * self._prior_prec + self._encode(x64) / rho**2
        coef = rhs / post_prec
        coef = coef + self.noise_scale * rng.standard_normal(coef.shape) / np.sqrt(post_prec)
        return self._decode(coef).astype(np.float32)

    def dense_covariance(self) -> np.ndarray:
        """Materialized prior covariance (small shapes; oracle tests)."""
        cy = (self._Qy * self._ey) @ self._Qy.T
        cx = (self._Qx * self._ex) @ self._Qx.T
        return self.variance * np.kron(cy, cx)
