"""Randomized batch selection: contiguous slice windows covering the volume.

Window starts are first drawn i.i.d. from a boundary-corrected
distribution (randomized rounding of the fractional cover), then a greedy
alteration swaps windows until every slice is covered at least ``r``
times. Swapping keeps the budget exact. Multi-covered slices are merged
by plain averaging.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import DataError, InfeasibleCoverError
from .volume import Volume


@dataclass(frozen=True)
class CoverSpec:
    """Cover geometry: D slices, windows of B, coverage r, budget K."""

    depth: int
    batch_size: int
    coverage: int = 1
    budget: int = 1

    def __post_init__(self):
        d, b, r, k = self.depth, self.batch_size, self.coverage, self.budget
        if d < 1 or b < 1 or r < 1 or k < 1:
            raise DataError("cover spec fields must be positive")
        if b > d:
            raise InfeasibleCoverError(f"batch size {b} exceeds depth {d}")
        if k * b < r * d:
            raise InfeasibleCoverError(
                f"budget too small: {k} windows of {b} cannot cover "
                f"{d} slices {r} times")
        # edge slices are only reachable from edge-anchored windows, so the
        # K*B >= r*D volume bound alone is not sufficient
        min_windows = r * ((d + b - 1) // b)
        if k < min_windows:
            raise InfeasibleCoverError(
                f"budget {k} below the {min_windows} windows any r={r} cover needs")

    @property
    def n_starts(self) -> int:
        return self.depth - self.batch_size + 1


@dataclass
class BatchCover:
    """A realized cover: window start indices plus per-slice multiplicity."""

    windows: list[int]
    batch_size: int
    depth: int
    coverage_count: np.ndarray
    rounding_starts: list[int] = field(default_factory=list)
    used_fallback: bool = False

    def window_slices(self, w: int) -> range:
        s = self.windows[w]
        return range(s, s + self.batch_size)


def start_distribution(depth: int, batch: int) -> np.ndarray:
    """Fractional-cover start distribution.

    Uniform over valid starts away from the boundary; starts whose window
    touches edge slices are up-weighted by the inverse of how many windows
    can cover those slices. With this weighting every slice at distance
    >= 2B-2 from both edges has expected coverage exactly B/D per draw,
    and the total mass telescopes to one.
    """
    idx = np.arange(depth)
    n_covering = (np.minimum(idx, depth - batch)
                  - np.maximum(0, idx - batch + 1) + 1).astype(np.float64)
    inv_csum = np.concatenate([[0.0], np.cumsum(1.0 / n_covering)])
    starts = np.arange(depth - batch + 1)
    return (inv_csum[starts + batch] - inv_csum[starts]) / depth


def _multiplicity(starts, depth: int, batch: int) -> np.ndarray:
    mult = np.zeros(depth, dtype=np.int64)
    for s in starts:
        mult[s:s + batch] += 1
    return mult


def _alteration(starts: list[int], spec: CoverSpec) -> tuple[list[int], bool]:
    """Greedy repair: swap min-loss windows for max-gain ones until covered.

    Loss counts slices a removal would push to or keep below coverage r;
    gain counts currently under-covered slices a window would reach. Ties
    break toward the lowest start index. Returns (windows, converged).
    """
    d, b, r = spec.depth, spec.batch_size, spec.coverage
    starts = list(starts)
    all_starts = np.arange(spec.n_starts)
    for _ in range(8 * (spec.budget + d)):
        mult = _multiplicity(starts, d, b)
        under = mult < r
        if not under.any():
            return starts, True
        at_risk = np.concatenate([[0], np.cumsum((mult <= r).astype(np.int64))])
        best = None
        best_j = 0
        for j, s in enumerate(starts):
            loss = at_risk[s + b] - at_risk[s]
            if best is None or (loss, s) < best:
                best, best_j = (loss, s), j
        cum_u = np.concatenate([[0], np.cumsum(under.astype(np.int64))])
        gains = cum_u[all_starts + b] - cum_u[all_starts]
        add = int(np.argmax(gains))  # argmax picks the lowest start on ties
        if starts[best_j] == add:
            return starts, False  # swap would be a no-op; bail to fallback
        starts.pop(best_j)
        starts.append(add)
    return starts, False


def _fallback_cover(stage1: list[int], spec: CoverSpec) -> list[int]:
    """Deterministic repair when the greedy swap stalls: r-fold tiling."""
    d, b = spec.depth, spec.batch_size
    tile = list(range(0, d - b + 1, b))
    if tile[-1] != d - b:
        tile.append(d - b)
    windows = tile * spec.coverage
    windows += list(stage1)[: spec.budget - len(windows)]
    return windows


def sample_cover(spec: CoverSpec, rng: np.random.Generator) -> BatchCover:
    """Draw a cover: randomized rounding then alteration.

    The returned cover always satisfies multiplicity >= r with at most
    ``budget`` windows. The pre-alteration draws are kept in
    ``rounding_starts`` (their distribution is the calibrated one; the
    repair step necessarily distorts edge-start frequencies).
    """
    q = start_distribution(spec.depth, spec.batch_size)
    stage1 = [int(s) for s in rng.choice(spec.n_starts, size=spec.budget, p=q)]
    windows, ok = _alteration(stage1, spec)
    used_fallback = False
    if not ok:
        windows = _fallback_cover(stage1, spec)
        used_fallback = True
    windows = sorted(windows)
    mult = _multiplicity(windows, spec.depth, spec.batch_size)
    if mult.min() < spec.coverage or len(windows) > spec.budget:
        raise DataError("internal error: alteration produced an invalid cover")
    return BatchCover(windows=windows, batch_size=spec.batch_size,
                      depth=spec.depth, coverage_count=mult,
                      rounding_starts=stage1, used_fallback=used_fallback)


def merge_multicovered(window_results, cover: BatchCover, base: np.ndarray | None = None):
    """Average per-slice results of all windows containing each slice.

    ``window_results`` must hold one (B, H, W) array per cover window.
    Slices outside every window keep their ``base`` values; without a
    base they are an error.
    """
    if len(window_results) != len(cover.windows):
        raise DataError(f"expected {len(cover.windows)} window results, "
                        f"got {len(window_results)}")
    first = np.asarray(window_results[0])
    if first.ndim != 3 or first.shape[0] != cover.batch_size:
        raise DataError("window results must be (B, H, W) stacks")
    d = cover.depth
    acc = np.zeros((d,) + first.shape[1:], dtype=np.float64)
    counts = np.zeros(d, dtype=np.int64)
    for w, res in enumerate(window_results):
        res = np.asarray(res)
        if res.shape != first.shape:
            raise DataError("window results disagree in shape")
        s = cover.windows[w]
        acc[s:s + cover.batch_size] += res
        counts[s:s + cover.batch_size] += 1
    covered = counts > 0
    if not covered.all():
        if base is None:
            raise DataError("cover leaves slices unassigned and no base given")
        acc[~covered] = np.asarray(base, dtype=np.float64)[~covered]
        counts[~covered] = 1
    acc /= counts[:, None, None]
    return acc


def coverage_histogram(cover: BatchCover, width: int = 50) -> str:
    """Plain-text per-slice multiplicity histogram for the CLI preview."""
    mult = cover.coverage_count
    peak = max(int(mult.max()), 1)
    lines = [f"windows (start indices): {cover.windows}",
             f"multiplicity: min={mult.min()} max={mult.max()} "
             f"mean={mult.mean():.3f}"]
    for i, m in enumerate(mult):
        bar = "#" * int(round(width * m / peak))
        lines.append(f"slice {i:4d} |{bar} {m}")
    return "\n".join(lines)
