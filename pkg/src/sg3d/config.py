"""Run configuration: a JSON document mirroring the chain settings.

Defaults follow the published OCT setup: rho_d annealed 5.0 -> 0.025,
rho_tv annealed 5.0 -> 2.0, 12 batches of 16 slices, 20 collected samples
two iterations apart. Schedules reach their floor exactly when sample
collection starts unless a step count is pinned explicitly.
"""

from __future__ import annotations

from typing import Literal, Union

import numpy as np
from pydantic import BaseModel, Field, model_validator

from .chain import AnnealSchedule, ChainConfig
from .exceptions import DataError
from .priors import (EdmParams, GaussianAnalyticPrior, PriorSampler,
                     RemotePrior, ScorePrior, SeparableGaussianPrior,
                     isotropic_gaussian_score)
from .scheduler import CoverSpec


class ScheduleSection(BaseModel):
    start: float = Field(gt=0)
    end: float = Field(gt=0)
    steps: int | None = Field(default=None, ge=1)


class CoverSection(BaseModel):
    batch_size: int = 16
    coverage: int = 1
    budget: int = 12


class TvSection(BaseModel):
    lam: float = Field(default=0.0, ge=0)


class GaussianPriorSection(BaseModel):
    kind: Literal["gaussian"] = "gaussian"
    mean: float = 0.0
    precision: float = Field(default=1.0, ge=0)


class SeparableGaussianPriorSection(BaseModel):
    kind: Literal["separable_gaussian"] = "separable_gaussian"
    mean: float = 0.5
    mean_file: str | None = None      # per-pixel mean slice from a volume file
    ensemble_file: str | None = None  # fit mean+covariance from this volume's slices
    variance: float = Field(default=0.01, gt=0)
    length_scale: float = Field(default=2.0, gt=0)
    jitter: float = Field(default=1e-3, gt=0)


class ScoreGaussianPriorSection(BaseModel):
    """Score-driven sampler with the analytic isotropic-Gaussian score."""

    kind: Literal["score_gaussian"] = "score_gaussian"
    mean: float = 0.5
    tau: float = Field(default=0.3, gt=0)
    steps: int = 32
    sigma_min: float = 0.002
    sigma_max: float = 80.0
    s_noise: float = 1.0
    churn: Union[float, Literal["reversal"]] = "reversal"


class RemotePriorSection(BaseModel):
    kind: Literal["remote"] = "remote"
    address: str
    timeout: float = 30.0
    retries: int = 2


PriorSection = Union[GaussianPriorSection, SeparableGaussianPriorSection,
                     ScoreGaussianPriorSection, RemotePriorSection]


class RunConfig(BaseModel):
    """Everything `reconstruct` needs besides the measurement itself."""

    iterations: int = 100
    burn_in: int | None = None       # default: iterations - collect*sample_every
    sample_every: int = 2
    collect: int = 20
    workers: int = 1
    seed: int = 0
    cover_refresh: Literal["every-iter", "once"] = "every-iter"
    checkpoint_every: int = 0
    keep_samples: bool = False
    rho_d: ScheduleSection = ScheduleSection(start=5.0, end=0.025)
    rho_tv: ScheduleSection = ScheduleSection(start=5.0, end=2.0)
    cover: CoverSection = CoverSection()
    tv: TvSection = TvSection()
    prior: PriorSection = Field(default_factory=GaussianPriorSection,
                                discriminator="kind")
    forward_factor: int = 2
    forward_axes: Literal["yx", "y", "x"] = "yx"
    sigma: float = Field(default=0.05, ge=0)

    @model_validator(mode="after")
    def _check(self):
        tail = self.collect * self.sample_every
        burn = self.burn_in if self.burn_in is not None else self.iterations - tail
        if burn < 0 or burn + tail > self.iterations:
            raise ValueError("burn_in + collect*sample_every must fit in iterations")
        return self

    # ---- builders ------------------------------------------------------

    def resolved_burn_in(self) -> int:
        if self.burn_in is not None:
            return self.burn_in
        return self.iterations - self.collect * self.sample_every

    def _schedule(self, section: ScheduleSection) -> AnnealSchedule:
        steps = section.steps
        if steps is None:
            steps = max(self.resolved_burn_in(), 1)
        if steps == 1 and section.start != section.end:
            steps = 2
        return AnnealSchedule(start=section.start, end=section.end, steps=steps)

    def chain_config(self, depth: int, checkpoint_path=None) -> ChainConfig:
        return ChainConfig(
            iterations=self.iterations,
            cover=CoverSpec(depth=depth, batch_size=self.cover.batch_size,
                            coverage=self.cover.coverage, budget=self.cover.budget),
            rho_d=self._schedule(self.rho_d),
            rho_tv=self._schedule(self.rho_tv),
            tv_lambda=self.tv.lam,
            burn_in=self.resolved_burn_in(),
            sample_every=self.sample_every,
            collect=self.collect,
            workers=self.workers,
            cover_refresh=self.cover_refresh,
            keep_samples=self.keep_samples,
            checkpoint_every=self.checkpoint_every,
            checkpoint_path=str(checkpoint_path) if checkpoint_path else None,
        )

    def build_prior(self, slice_shape: tuple[int, int]) -> PriorSampler:
        p = self.prior
        if p.kind == "gaussian":
            return GaussianAnalyticPrior(mean=p.mean, precision=p.precision)
        if p.kind == "separable_gaussian":
            from .volio import read_volume
            if p.ensemble_file is not None:
                slabs = read_volume(p.ensemble_file).data
                if slabs.shape[1:] != slice_shape:
                    raise DataError(f"ensemble slices {slabs.shape[1:]} do not "
                                    f"match domain {slice_shape}")
                return SeparableGaussianPrior.from_ensemble(slabs, jitter=p.jitter)
            if p.mean_file is not None:
                vol = read_volume(p.mean_file)
                mean = vol.data.mean(axis=0).astype(np.float64)
                if mean.shape != slice_shape:
                    raise DataError(f"prior mean slice {mean.shape} does not match "
                                    f"domain {slice_shape}")
            else:
                mean = np.full(slice_shape, p.mean)
            return SeparableGaussianPrior.squared_exponential(
                mean, p.variance, p.length_scale)
        if p.kind == "score_gaussian":
            params = EdmParams(steps=p.steps, sigma_min=p.sigma_min,
                               sigma_max=p.sigma_max, s_noise=p.s_noise,
                               churn=p.churn)
            return ScorePrior(isotropic_gaussian_score(p.mean, p.tau), params)
        if p.kind == "remote":
            return RemotePrior.from_address(p.address, timeout=p.timeout,
                                            retries=p.retries)
        raise DataError(f"unknown prior kind {p.kind!r}")


def load_config(path) -> RunConfig:
    from pathlib import Path
    text = Path(path).read_text()
    return RunConfig.model_validate_json(text)


def dump_config(cfg: RunConfig) -> str:
    return cfg.model_dump_json(indent=2)
