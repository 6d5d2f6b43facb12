"""Linear forward operators acting independently on each z slice.

Every shipped operator is separable across the in-slice axes:
``A = Ay (x) Ax`` acting on a slice X as ``Ay @ X @ Ax.T``. Each axis
factor carries a full orthonormal SVD with the singular spectrum padded
to the domain length, so the likelihood sampler can work in the V basis
of the whole per-slice domain (null space included).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import DataError, DimensionMismatch
from .rngkeys import TAG_DEGRADE, substream
from .volume import Volume, as_volume, check_finite

KIND_IDENTITY = "identity"
KIND_DOWNSAMPLE = "downsample"
KIND_SEPARABLE = "separable"


@dataclass
class AxisFactor:
    """SVD factors of a 1D operator M (m_out x m_in): M = U @ diag_rect(s) @ V.T.

    U is (m_out, m_out) orthonormal, V is (m_in, m_in) orthonormal and s
    has length m_in with zeros past the operator rank.
    """

    U: np.ndarray
    s: np.ndarray
    V: np.ndarray
    trivial: bool = False  # identity factor: transforms can be skipped

    @property
    def m_out(self) -> int:
        return self.U.shape[0]

    @property
    def m_in(self) -> int:
        return self.V.shape[0]

    def dense(self) -> np.ndarray:
        rect = np.zeros((self.m_out, self.m_in))
        r = min(self.m_out, self.m_in)
        rect[:r, :r] = np.diag(self.s[:r])
        return self.U @ rect @ self.V.T


def identity_factor(m: int) -> AxisFactor:
    eye = np.eye(m)
    return AxisFactor(U=eye, s=np.ones(m), V=eye.copy(), trivial=True)


def block_average_factor(m: int, k: int) -> AxisFactor:
    """Analytic SVD of k-sample block averaging on a length-m axis.

    Singular values are 1/sqrt(k) for the m/k kept block modes and exactly
    zero for the in-block detail modes. V's null-space columns are the
    higher DCT-II modes of each block (any orthonormal completion works;
    DCT keeps the factor deterministic).
    """
    if k == 1:
        return identity_factor(m)
    if m % k != 0:
        raise DataError(f"axis length {m} not divisible by downsample factor {k}")
    mb = m // k
    V = np.zeros((m, m))
    t = np.arange(k)
    for b in range(mb):
        rows = slice(b * k, (b + 1) * k)
        V[rows, b] = 1.0 / np.sqrt(k)
        for j in range(1, k):
            V[rows, mb + b * (k - 1) + (j - 1)] = (
                np.sqrt(2.0 / k) * np.cos(np.pi * (2 * t + 1) * j / (2 * k))
            )
    s = np.zeros(m)
    s[:mb] = 1.0 / np.sqrt(k)
    return AxisFactor(U=np.eye(mb), s=s, V=V)


def dense_factor(M: np.ndarray) -> AxisFactor:
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2:
        raise DataError("separable factor must be a 2D matrix")
    U, sv, Vh = np.linalg.svd(M, full_matrices=True)
    s = np.zeros(M.shape[1])
    s[: sv.shape[0]] = sv
    return AxisFactor(U=U, s=s, V=Vh.T)


@dataclass
class ForwardModel:
    """Slice-separable linear operator plus measurement noise level."""

    kind: str
    y_factor: AxisFactor
    x_factor: AxisFactor
    noise_sigma: float
    factors: tuple[int, int] = (1, 1)  # (ky, kx) for downsample kinds
    y_matrix: np.ndarray | None = None
    x_matrix: np.ndarray | None = None

    def __post_init__(self):
        if self.noise_sigma < 0:
            raise DataError("noise_sigma must be >= 0")

    @property
    def domain_slice_shape(self) -> tuple[int, int]:
        return (self.y_factor.m_in, self.x_factor.m_in)

    @property
    def range_slice_shape(self) -> tuple[int, int]:
        return (self.y_factor.m_out, self.x_factor.m_out)

    def singular_values_2d(self) -> np.ndarray:
        """Per-slice singular spectrum on the (H, W) V-basis grid."""
        return np.outer(self.y_factor.s, self.x_factor.s)

    # ---- constructors -------------------------------------------------

    @classmethod
    def identity(cls, slice_shape: tuple[int, int], noise_sigma: float = 0.0):
        h, w = slice_shape
        return cls(KIND_IDENTITY, identity_factor(h), identity_factor(w), noise_sigma)

    @classmethod
    def downsample(cls, slice_shape: tuple[int, int], factor: int,
                   noise_sigma: float = 0.0, axes: str = "yx"):
        """Block-average downsampling of each slice.

        ``axes`` selects which in-slice axes are reduced ("yx" both, "y" or
        "x" single-axis). Block averaging (not decimation) is used because
        it has a clean separable SVD.
        """
        if factor < 1:
            raise DataError("downsample factor must be >= 1")
        if axes not in ("yx", "y", "x"):
            raise DataError(f"axes must be 'yx', 'y' or 'x', got {axes!r}")
        h, w = slice_shape
        ky = factor if "y" in axes else 1
        kx = factor if "x" in axes else 1
        return cls(KIND_DOWNSAMPLE, block_average_factor(h, ky),
                   block_average_factor(w, kx), noise_sigma, factors=(ky, kx))

    @classmethod
    def separable(cls, y_matrix: np.ndarray, x_matrix: np.ndarray,
                  noise_sigma: float = 0.0):
        Ay = np.asarray(y_matrix, dtype=np.float64)
        Ax = np.asarray(x_matrix, dtype=np.float64)
        return cls(KIND_SEPARABLE, dense_factor(Ay), dense_factor(Ax),
                   noise_sigma, y_matrix=Ay, x_matrix=Ax)


def _check_dims(shape: tuple[int, int, int], slice_shape: tuple[int, int], what: str):
    if shape[1:] != slice_shape:
        raise DimensionMismatch(
            f"{what}: volume slices {shape[1:]} do not match operator {slice_shape}")


def apply_forward(model: ForwardModel, vol: Volume | np.ndarray) -> Volume:
    """Apply the operator slice by slice: out = Ay @ X @ Ax.T per slice."""
    vol = as_volume(vol)
    _check_dims(vol.dims, model.domain_slice_shape, "apply_forward")
    data = vol.data.astype(np.float64)
    if model.kind == KIND_IDENTITY:
        out = data
    elif model.kind == KIND_DOWNSAMPLE:
        d, h, w = data.shape
        ky, kx = model.factors
        out = data.reshape(d, h // ky, ky, w // kx, kx).mean(axis=(2, 4))
    elif model.kind == KIND_SEPARABLE:
        out = np.matmul(np.matmul(model.y_matrix, data), model.x_matrix.T)
    else:
        raise DataError(f"unknown forward model kind {model.kind!r}")
    return Volume(out.astype(np.float32), peak=vol.peak)


def apply_adjoint(model: ForwardModel, meas: Volume | np.ndarray) -> Volume:
    """Apply the adjoint slice by slice: out = Ay.T @ Y @ Ax."""
    meas = as_volume(meas)
    _check_dims(meas.dims, model.range_slice_shape, "apply_adjoint")
    data = meas.data.astype(np.float64)
    if model.kind == KIND_IDENTITY:
        out = data
    elif model.kind == KIND_DOWNSAMPLE:
        ky, kx = model.factors
        out = np.repeat(np.repeat(data, ky, axis=1), kx, axis=2) / (ky * kx)
    elif model.kind == KIND_SEPARABLE:
        out = np.matmul(np.matmul(model.y_matrix.T, data), model.x_matrix)
    else:
        raise DataError(f"unknown forward model kind {model.kind!r}")
    return Volume(out.astype(np.float32), peak=meas.peak)


def degrade(model: ForwardModel, vol: Volume | np.ndarray, seed: int) -> Volume:
    """Forward-apply then add N(0, sigma^2) noise; deterministic given seed."""
    clean = apply_forward(model, vol)
    if model.noise_sigma == 0:
        return clean
    rng = substream(TAG_DEGRADE, seed)
    noisy = clean.data + model.noise_sigma * rng.standard_normal(clean.dims)
    return Volume(check_finite(noisy, "degraded volume").astype(np.float32),
                  peak=clean.peak)


def upsample_nearest(vol: Volume | np.ndarray, factor: int, axes: str = "yx") -> Volume:
    """Nearest-neighbour in-slice upsampling (right inverse of block average)."""
    vol = as_volume(vol)
    ky = factor if "y" in axes else 1
    kx = factor if "x" in axes else 1
    out = np.repeat(np.repeat(vol.data, ky, axis=1), kx, axis=2)
    return Volume(out, peak=vol.peak)
