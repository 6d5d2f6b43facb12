"""Total-variation prior step along the slice axis.

The prior couples voxels only along z, so each (y, x) column is an
independent 1D problem. The proximal operator of ``weight * TV`` is
computed exactly by a taut-string construction: the solution's running
sum is the shortest path through a tube of half-width ``weight`` around
the cumulative sum of the input, pinned at both ends. Stochasticity is
added by injecting white Gaussian noise around the proximal point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .exceptions import DataError, NonFiniteError
from .rngkeys import substream
from .volume import Volume, as_volume


@dataclass
class TvParams:
    """Weight of the z-axis TV energy and the coupling noise scale."""

    lam: float
    rho_tv: float

    def __post_init__(self):
        if self.lam < 0:
            raise DataError("TV weight lambda must be >= 0")
        if self.rho_tv <= 0:
            raise DataError("rho_tv must be > 0")

    @property
    def prox_weight(self) -> float:
        # prox_{rho^2 * g}(x) with g = lam * TV  =>  effective TV weight rho^2 * lam
        return self.rho_tv**2 * self.lam


@njit(cache=True)
def _taut_string(y, lam, r, x):
    """Exact minimizer of 0.5||x - y||^2 + lam * sum |x_{i+1} - x_i|.

    r is an (n+1)-scratch buffer; the result is written to x. Walks the
    cumulative-sum tube greedily, restarting from each fixed knot.
    """
    n = y.shape[0]
    r[0] = 0.0
    for i in range(n):
        r[i + 1] = r[i] + y[i]
    i0 = 0
    s0 = 0.0
    while i0 < n:
        mlo = -np.inf
        mhi = np.inf
        klo = i0
        khi = i0
        j = i0 + 1
        while True:
            if j == n:
                blo = r[n]
                bhi = r[n]
            else:
                blo = r[j] - lam
                bhi = r[j] + lam
            slo = (blo - s0) / (j - i0)
            shi = (bhi - s0) / (j - i0)
            if slo > mlo:
                mlo = slo
                klo = j
            if shi < mhi:
                mhi = shi
                khi = j
            if mlo > mhi:
                if slo > mhi:
                    # lower bound overtook: string bends on the upper bound
                    for t in range(i0, khi):
                        x[t] = mhi
                    i0 = khi
                    s0 = r[khi] + lam if khi < n else r[n]
                else:
                    # upper bound dipped below: bends on the lower bound
                    for t in range(i0, klo):
                        x[t] = mlo
                    i0 = klo
                    s0 = r[klo] - lam if klo < n else r[n]
                break
            if j == n:
                m = (r[n] - s0) / (n - i0)
                for t in range(i0, n):
                    x[t] = m
                i0 = n
                break
            j += 1


@njit(cache=True)
def _prox_columns(data, lam):
    """In-place taut-string prox along axis 0 for every (y, x) column."""
    b, h, w = data.shape
    r = np.empty(b + 1)
    x = np.empty(b)
    col = np.empty(b)
    for iy in range(h):
        for ix in range(w):
            for t in range(b):
                col[t] = data[t, iy, ix]
            _taut_string(col, lam, r, x)
            for t in range(b):
                data[t, iy, ix] = x[t]


def tv1d_prox(signal: np.ndarray, weight: float) -> np.ndarray:
    """Exact 1D TV proximal operator (taut string, float64)."""
    sig = np.asarray(signal, dtype=np.float64)
    if sig.ndim != 1:
        raise DataError("tv1d_prox expects a 1D signal")
    if not np.isfinite(sig).all():
        raise NonFiniteError("tv1d_prox input contains NaN/Inf")
    if weight < 0:
        raise DataError("TV prox weight must be >= 0")
    n = sig.shape[0]
    if n <= 1 or weight == 0.0:
        return sig.copy()
    out = np.empty(n)
    _taut_string(sig, float(weight), np.empty(n + 1), out)
    return out


def tv1d_kkt_residual(signal: np.ndarray, weight: float, solution: np.ndarray) -> float:
    """Max KKT violation of a claimed TV-prox solution (0 means optimal).

    Reconstructs the dual variables q from u = y - weight * D^T q and
    checks |q| <= 1, sign agreement on active jumps, and the terminal
    consistency condition.
    """
    y = np.asarray(signal, dtype=np.float64)
    u = np.asarray(solution, dtype=np.float64)
    n = y.shape[0]
    if n <= 1 or weight == 0.0:
        return float(np.max(np.abs(u - y))) if n else 0.0
    v = (y - u) / weight
    # (D^T q)_0 = -q_0, (D^T q)_i = q_{i-1} - q_i, (D^T q)_{n-1} = q_{n-2}
    q = np.empty(n - 1)
    q[0] = -v[0]
    for i in range(1, n - 1):
        q[i] = q[i - 1] - v[i]
    # all components expressed in solution units (scaled by the weight)
    res = abs(q[n - 2] - v[n - 1]) * weight  # terminal consistency
    res = max(res, float(np.max(np.maximum(np.abs(q) - 1.0, 0.0))) * weight)
    jumps = np.diff(u)
    active = np.abs(jumps) > 1e-12
    if active.any():
        res = max(res, float(np.max(np.abs(q[active] - np.sign(jumps[active])))) * weight)
    return float(res)


def tv_prior_sample(x, p: TvParams, key, noise_scale: float = 1.0,
                    z_indices=None):
    """Proximal point along z plus white noise of scale rho_tv.

    ``key`` is an int or tuple of ints; the noise for column (iy, ix) is
    drawn from the substream (key..., iy, ix), so permuting columns
    commutes with this function. ``z_indices``, when given, must be
    consecutive (the batch has to be contiguous in z).
    """
    vol_in = isinstance(x, Volume)
    arr = (x.data if vol_in else np.asarray(x)).astype(np.float64)
    if arr.ndim != 3:
        raise DataError("tv_prior_sample expects a (B, H, W) batch")
    if z_indices is not None:
        zi = np.asarray(z_indices)
        if zi.shape[0] != arr.shape[0] or (zi.shape[0] > 1 and np.any(np.diff(zi) != 1)):
            raise DataError("batch must be contiguous in z")
    if not np.isfinite(arr).all():
        raise NonFiniteError("tv_prior_sample input contains NaN/Inf")
    if p.prox_weight > 0 and arr.shape[0] > 1:
        _prox_columns(arr, p.prox_weight)
    if noise_scale != 0.0:
        arr += (noise_scale * p.rho_tv) * _column_noise(key, arr.shape)
    if vol_in:
        return Volume(arr.astype(np.float32), peak=x.peak)
    return arr


def _column_noise(key, shape) -> np.ndarray:
    b, h, w = shape
    base = key if isinstance(key, tuple) else (int(key),)
    noise = np.empty((b, h, w))
    for iy in range(h):
        for ix in range(w):
            noise[:, iy, ix] = substream(*base, iy, ix).standard_normal(b)
    return noise
