"""Synthetic volumes for desk-scale experiments.

Three kinds: "layered" mimics a stack of tissue-like strata with smooth
curved interfaces and multiplicative speckle, "gaussian_field" gives an
analytically tractable stationary random field, and
"piecewise_constant_z" produces per-column step signals that exercise the
z-axis TV machinery.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate1d

from .exceptions import DataError
from .rngkeys import TAG_PHANTOM, substream
from .volume import Volume

KINDS = ("layered", "gaussian_field", "piecewise_constant_z")
MIN_DIMS = (4, 8, 8)


@dataclass
class PhantomSpec:
    dims: tuple[int, int, int]
    kind: str = "layered"
    seed: int = 0
    # layered
    layers: int = 4
    roughness: float = 0.15
    speckle: float = 0.1
    # gaussian_field
    mean: float = 0.5
    variance: float = 0.01
    length_scale: float = 2.0
    # piecewise_constant_z
    segments: int = 2

    def __post_init__(self):
        self.dims = tuple(int(v) for v in self.dims)
        if len(self.dims) != 3 or any(d < m for d, m in zip(self.dims, MIN_DIMS)):
            raise DataError(f"dims must be at least {MIN_DIMS}, got {self.dims}")
        if self.kind not in KINDS:
            raise DataError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.kind == "layered" and not 2 <= self.layers <= 16:
            raise DataError("layers must be in [2, 16]")
        if not 0 <= self.speckle <= 1:
            raise DataError("speckle must be in [0, 1]")
        if self.roughness < 0 or self.variance <= 0 or self.length_scale < 0:
            raise DataError("roughness >= 0, variance > 0, length_scale >= 0 required")
        if self.segments < 1:
            raise DataError("segments must be >= 1")


def generate(spec: PhantomSpec) -> Volume:
    rng = substream(TAG_PHANTOM, spec.seed)
    if spec.kind == "gaussian_field":
        data = _gaussian_field(spec, rng)
    elif spec.kind == "piecewise_constant_z":
        data = _piecewise_constant_z(spec, rng)
    else:
        data = _layered(spec, rng)
    return Volume(data.astype(np.float32))


def _gauss_kernel_1d(sigma: float) -> np.ndarray:
    radius = max(1, int(np.ceil(4.0 * sigma)))
    t = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(t**2) / (2.0 * sigma**2))
    return k / k.sum()


def _gaussian_field(spec: PhantomSpec, rng) -> np.ndarray:
    """Stationary field: filtered white noise with exact target variance.

    Wrap-around filtering keeps the field stationary, so the output
    variance is the input variance times the squared kernel norm, which we
    normalize analytically (no per-volume empirical rescaling).
    """
    d, h, w = spec.dims
    field = rng.standard_normal((d, h, w))
    if spec.length_scale > 0:
        k = _gauss_kernel_1d(spec.length_scale)
        norm = 1.0
        for axis in range(3):
            field = correlate1d(field, k, axis=axis, mode="wrap")
            norm *= float(np.sum(k**2))
        field /= np.sqrt(norm)
    return spec.mean + np.sqrt(spec.variance) * field


def _smooth_surface(shape, rng, sigma) -> np.ndarray:
    """Zero-mean smooth 2D field with unit-ish amplitude."""
    field = rng.standard_normal(shape)
    k = _gauss_kernel_1d(sigma)
    field = correlate1d(field, k, axis=0, mode="wrap")
    field = correlate1d(field, k, axis=1, mode="wrap")
    field /= np.sqrt(np.sum(k**2) ** 2)
    return field


def _layered(spec: PhantomSpec, rng) -> np.ndarray:
    d, h, w = spec.dims
    n_layers = spec.layers
    # interfaces as fractions of the slice height, smoothly varying in (z, x)
    base = np.linspace(0.0, 1.0, n_layers + 1)[1:-1]
    sigma = max(2.0, min(d, w) / 6.0)
    surfaces = []
    for frac in base:
        wobble = spec.roughness * _smooth_surface((d, w), rng, sigma) / n_layers
        surfaces.append(np.clip(frac + wobble, 0.0, 1.0) * h)
    levels = np.linspace(0.2, 0.9, n_layers)
    levels = np.clip(levels + 0.05 * rng.standard_normal(n_layers), 0.05, 0.95)
    yy = np.arange(h, dtype=np.float64)[None, :, None]
    vol = np.full((d, h, w), levels[0])
    for surf, level in zip(surfaces, levels[1:]):
        vol = np.where(yy >= surf[:, None, :], level, vol)
    if spec.speckle > 0:
        # crude multiplicative speckle, mean-preserving before clipping
        ray = rng.rayleigh(scale=1.0, size=vol.shape) / np.sqrt(np.pi / 2.0)
        vol = vol * ((1.0 - spec.speckle) + spec.speckle * ray)
    return np.clip(vol, 0.0, 1.0)


def _piecewise_constant_z(spec: PhantomSpec, rng) -> np.ndarray:
    d, h, w = spec.dims
    vals = rng.uniform(0.0, 1.0, size=(spec.segments, h, w))
    if spec.segments == 1:
        return np.broadcast_to(vals[0], (d, h, w)).copy()
    # change points per column; collisions just merge segments
    cuts = rng.integers(1, d, size=(spec.segments - 1, h, w))
    zz = np.arange(d)[:, None, None, None]
    seg_idx = (cuts[None, :, :, :] <= zz).sum(axis=1)
    return np.take_along_axis(vals, seg_idx, axis=0)
