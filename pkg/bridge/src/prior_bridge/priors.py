"""Reference denoising-posterior priors served over the bridge.

``ReferenceGaussianPrior`` follows the shared scalar-Gaussian recipe
(float64 arithmetic on the float32 slice, noise from
``np.random.default_rng(seed)``), so a core-side analytic Gaussian prior
with the same parameters produces bit-identical draws, which is what the
conformance suite checks.
"""

from __future__ import annotations

import numpy as np


class ReferenceGaussianPrior:
    """Conjugate sampler for a scalar-parameter Gaussian prior N(mean, 1/precision)."""

    def __init__(self, mean: float = 0.0, precision: float = 1.0):
        if precision < 0:
            raise ValueError("precision must be >= 0")
        self.mean = float(mean)
        self.precision = float(precision)

    def sample(self, slice_data: np.ndarray, rho: float, seed: int) -> np.ndarray:
        if rho <= 0:
            raise ValueError("rho must be > 0")
        rng = np.random.default_rng(seed)
        x64 = np.asarray(slice_data, dtype=np.float64)
        post_prec = self.precision + 1.0 / rho**2
        post_mean = (self.precision * self.mean + x64 / rho**2) / post_prec
        out = post_mean + rng.standard_normal(x64.shape) / np.sqrt(post_prec)
        return out.astype(np.float32)


class GaussianMixturePrior:
    """Per-pixel i.i.d. Gaussian-mixture prior with exact posterior sampling.

    Each pixel independently follows sum_k w_k N(m_k, tau_k^2). The
    denoising posterior at level rho is again a mixture with analytic
    responsibilities, so draws are exact: pick a component per pixel, then
    sample the conjugate Gaussian. A stand-in for a learned prior that is
    genuinely non-Gaussian yet fully testable.
    """

    def __init__(self, weights, means, taus):
        w = np.asarray(weights, dtype=np.float64)
        if w.ndim != 1 or np.any(w <= 0):
            raise ValueError("weights must be a positive 1D vector")
        self.weights = w / w.sum()
        self.means = np.asarray(means, dtype=np.float64)
        self.taus = np.asarray(taus, dtype=np.float64)
        if self.means.shape != w.shape or self.taus.shape != w.shape:
            raise ValueError("weights, means and taus must align")
        if np.any(self.taus <= 0):
            raise ValueError("component scales must be > 0")

    def sample(self, slice_data: np.ndarray, rho: float, seed: int) -> np.ndarray:
        if rho <= 0:
            raise ValueError("rho must be > 0")
        rng = np.random.default_rng(seed)
        x = np.asarray(slice_data, dtype=np.float64)[..., None]  # (H, W, 1)
        tau2 = self.taus**2
        marg_var = tau2 + rho**2
        log_resp = (np.log(self.weights)
                    - 0.5 * np.log(2 * np.pi * marg_var)
                    - 0.5 * (x - self.means) ** 2 / marg_var)
        log_resp -= log_resp.max(axis=-1, keepdims=True)
        resp = np.exp(log_resp)
        resp /= resp.sum(axis=-1, keepdims=True)
        cdf = np.cumsum(resp, axis=-1)
        u = rng.uniform(size=x.shape[:-1] + (1,))
        comp = (u > cdf).sum(axis=-1)  # (H, W) component indices
        post_prec = 1.0 / tau2[comp] + 1.0 / rho**2
        post_mean = (self.means[comp] / tau2[comp] + x[..., 0] / rho**2) / post_prec
        out = post_mean + rng.standard_normal(post_mean.shape) / np.sqrt(post_prec)
        return out.astype(np.float32)


def make_prior(spec: str):
    """Build a prior from a CLI spec string.

    ``gaussian:<mean>,<precision>`` or
    ``mixture:<w:m:tau>[,<w:m:tau>...]``, e.g. ``mixture:0.5:0.2:0.05,0.5:0.8:0.05``.
    """
    kind, _, rest = spec.partition(":")
    if kind == "gaussian":
        mean, precision = (float(v) for v in rest.split(","))
        return ReferenceGaussianPrior(mean, precision)
    if kind == "mixture":
        comps = [tuple(float(v) for v in part.split(":"))
                 for part in rest.split(",")]
        if not comps or any(len(c) != 3 for c in comps):
            raise ValueError("mixture spec must be w:m:tau[,w:m:tau...]")
        w, m, t = zip(*comps)
        return GaussianMixturePrior(w, m, t)
    raise ValueError(f"unknown prior spec {spec!r}")
