"""Dense 3D scalar volumes with fixed (z, y, x) axis order.

The z axis is the slice-concatenation axis: a volume is a stack of D
slices of shape (H, W). Data is float32 in C order, matching the on-disk
format in :mod:`sg3d.volio`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import DataError, DimensionMismatch, NonFiniteError

AXIS_ORDER = ("z", "y", "x")


@dataclass
class Volume:
    """A (D, H, W) float32 scalar field; intensities nominally in [0, 1]."""

    data: np.ndarray
    peak: float = 1.0

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 3:
            raise DataError(f"volume data must be 3D (z,y,x), got shape {arr.shape}")
        if arr.dtype != np.float32:
            arr = arr.astype(np.float32)
        if not np.isfinite(arr).all():
            raise NonFiniteError("volume contains NaN or Inf")
        self.data = np.ascontiguousarray(arr)

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.data.shape

    @property
    def depth(self) -> int:
        return self.data.shape[0]

    def slice_at(self, index: int) -> "Slice":
        if not 0 <= index < self.depth:
            raise DimensionMismatch(f"slice index {index} out of range for depth {self.depth}")
        return Slice(data=self.data[index], index=index)

    def copy(self) -> "Volume":
        return Volume(self.data.copy(), peak=self.peak)


@dataclass
class Slice:
    """A single (H, W) slice and its z position in the parent volume."""

    data: np.ndarray
    index: int = 0

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 2:
            raise DataError(f"slice data must be 2D, got shape {arr.shape}")
        self.data = arr

    @property
    def dims(self) -> tuple[int, int]:
        return self.data.shape


def as_volume(x, peak: float = 1.0) -> Volume:
    """Coerce an array or Volume to a Volume (no copy when already valid)."""
    if isinstance(x, Volume):
        return x
    return Volume(np.asarray(x), peak=peak)


def check_finite(arr: np.ndarray, what: str = "array") -> np.ndarray:
    if not np.isfinite(arr).all():
        raise NonFiniteError(f"{what} contains NaN or Inf")
    return arr
