"""Reconstruction quality metrics and uncertainty calibration.

PSNR is computed on whole volumes. SSIM and MS-SSIM use the standard
constants (K1=0.01, K2=0.03, 11x11 Gaussian window with sigma=1.5,
five-scale weights) and are computed per 2D slice then averaged along z;
that convention is flagged in the report since 3D windowing is a choice.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import correlate1d

from .exceptions import DataError, DimensionMismatch
from .volume import Volume, as_volume

SSIM_K1 = 0.01
SSIM_K2 = 0.03
SSIM_SIGMA = 1.5
SSIM_RADIUS = 5  # 11x11 window
MSSSIM_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)
SD_FLOOR = 1e-12

PSNR_INF = math.inf


def _pair(ref, test):
    ref, test = as_volume(ref), as_volume(test)
    if ref.dims != test.dims:
        raise DimensionMismatch(f"volume dims differ: {ref.dims} vs {test.dims}")
    return ref.data.astype(np.float64), test.data.astype(np.float64)


def psnr(ref, test, peak: float = 1.0) -> float:
    """10 log10(peak^2 / MSE); +inf for identical volumes."""
    if peak <= 0:
        raise DataError("peak must be > 0")
    a, b = _pair(ref, test)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return PSNR_INF
    return 10.0 * math.log10(peak * peak / mse)


def _gauss_kernel():
    t = np.arange(-SSIM_RADIUS, SSIM_RADIUS + 1, dtype=np.float64)
    k = np.exp(-(t**2) / (2.0 * SSIM_SIGMA**2))
    return k / k.sum()


def _filter2(img, kern):
    out = correlate1d(img, kern, axis=0, mode="constant")
    out = correlate1d(out, kern, axis=1, mode="constant")
    r = SSIM_RADIUS
    return out[r:-r, r:-r]


def _ssim_slice(a, b, peak):
    """(mean ssim, mean contrast*structure) of one slice pair."""
    if min(a.shape) < 2 * SSIM_RADIUS + 1:
        raise DataError(f"slice {a.shape} smaller than the "
                        f"{2 * SSIM_RADIUS + 1}x{2 * SSIM_RADIUS + 1} SSIM window")
    kern = _gauss_kernel()
    c1 = (SSIM_K1 * peak) ** 2
    c2 = (SSIM_K2 * peak) ** 2
    mu_a = _filter2(a, kern)
    mu_b = _filter2(b, kern)
    var_a = _filter2(a * a, kern) - mu_a**2
    var_b = _filter2(b * b, kern) - mu_b**2
    cov = _filter2(a * b, kern) - mu_a * mu_b
    lum = (2 * mu_a * mu_b + c1) / (mu_a**2 + mu_b**2 + c1)
    cs = (2 * cov + c2) / (var_a + var_b + c2)
    return float(np.mean(lum * cs)), float(np.mean(cs))


def ssim(ref, test, peak: float = 1.0, per_slice: bool = False):
    """Mean SSIM over z slices (optionally also the per-slice values)."""
    a, b = _pair(ref, test)
    vals = np.array([_ssim_slice(a[i], b[i], peak)[0] for i in range(a.shape[0])])
    return (float(vals.mean()), vals) if per_slice else float(vals.mean())


def _downsample2(img):
    h, w = (img.shape[0] // 2) * 2, (img.shape[1] // 2) * 2
    c = img[:h, :w]
    return 0.25 * (c[0::2, 0::2] + c[1::2, 0::2] + c[0::2, 1::2] + c[1::2, 1::2])


def ms_ssim(ref, test, peak: float = 1.0) -> float:
    """Multi-scale SSIM, five scales with the standard weights."""
    a, b = _pair(ref, test)
    need = (2 * SSIM_RADIUS + 1) * 2 ** (len(MSSSIM_WEIGHTS) - 1)
    if min(a.shape[1:]) < need:
        raise DataError(f"slices {a.shape[1:]} too small for the "
                        f"{len(MSSSIM_WEIGHTS)}-scale pyramid (need >= {need})")
    per_slice = []
    for i in range(a.shape[0]):
        sa, sb = a[i], b[i]
        score = 1.0
        for level, weight in enumerate(MSSSIM_WEIGHTS):
            lum, cs = _ssim_slice(sa, sb, peak)
            last = level == len(MSSSIM_WEIGHTS) - 1
            term = lum if last else cs
            score *= max(term, 0.0) ** weight
            if not last:
                sa, sb = _downsample2(sa), _downsample2(sb)
        per_slice.append(score)
    return float(np.mean(per_slice))


def credible_coverage(truth, mean, sd, k: float, subsample: int | None = None,
                      seed: int = 0) -> float:
    """Fraction of voxels with |truth - mean| <= k * sd (sd floored at 1e-12)."""
    if k < 0:
        raise DataError("k must be >= 0")
    t, m = _pair(truth, mean)
    s = as_volume(sd).data.astype(np.float64)
    if s.shape != t.shape:
        raise DimensionMismatch("sd dims do not match")
    t, m, s = t.ravel(), m.ravel(), np.maximum(s.ravel(), SD_FLOOR)
    if subsample is not None and subsample < t.size:
        idx = np.random.default_rng(seed).choice(t.size, size=subsample, replace=False)
        t, m, s = t[idx], m[idx], s[idx]
    return float(np.mean(np.abs(t - m) <= k * s))


def gaussian_nll(truth, mean, sd) -> float:
    """Mean negative log-likelihood under voxelwise independent Gaussians."""
    t, m = _pair(truth, mean)
    s = np.maximum(as_volume(sd).data.astype(np.float64), SD_FLOOR)
    if s.shape != t.shape:
        raise DimensionMismatch("sd dims do not match")
    return float(np.mean(0.5 * np.log(2.0 * np.pi * s**2) + (t - m) ** 2 / (2.0 * s**2)))


@dataclass
class MetricReport:
    psnr_db: float
    ssim: float
    ms_ssim: float | None = None
    coverage_3sd: float | None = None
    nll: float | None = None
    lpips: str = "not computed"
    ssim_convention: str = "per-slice 2D SSIM averaged along z"
    per_slice_psnr: list = field(default_factory=list)
    per_slice_ssim: list = field(default_factory=list)

    def to_json(self) -> str:
        d = dict(self.__dict__)
        d["psnr_db"] = "inf" if math.isinf(self.psnr_db) else self.psnr_db
        return json.dumps(d)

    def csv_row(self, method: str) -> str:
        def fmt(v):
            if v is None:
                return ""
            if isinstance(v, float):
                return "inf" if math.isinf(v) else f"{v:.4f}"
            return str(v)
        return ",".join([method, fmt(self.psnr_db), fmt(self.ssim),
                         fmt(self.ms_ssim), self.lpips])

    CSV_HEADER = "method,psnr,ssim,ms_ssim,lpips"


def compute_report(truth, recon, sd=None, peak: float = 1.0,
                   k: float = 3.0, subsample: int | None = None) -> MetricReport:
    truth, recon = as_volume(truth), as_volume(recon)
    mean_ssim, slice_ssim = ssim(truth, recon, peak=peak, per_slice=True)
    t, r = _pair(truth, recon)
    slice_psnr = []
    for i in range(t.shape[0]):
        mse = float(np.mean((t[i] - r[i]) ** 2))
        slice_psnr.append(PSNR_INF if mse == 0 else 10 * math.log10(peak**2 / mse))
    try:
        msv = ms_ssim(truth, recon, peak=peak)
    except DataError:
        msv = None
    report = MetricReport(
        psnr_db=psnr(truth, recon, peak=peak),
        ssim=mean_ssim,
        ms_ssim=msv,
        per_slice_psnr=[("inf" if math.isinf(v) else round(v, 4)) for v in slice_psnr],
        per_slice_ssim=[round(float(v), 6) for v in slice_ssim],
    )
    if sd is not None:
        report.coverage_3sd = credible_coverage(truth, recon, sd, k, subsample=subsample)
        report.nll = gaussian_nll(truth, recon, sd)
    return report
