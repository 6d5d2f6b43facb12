"""Outer sampling loop: likelihood, slice prior and TV prior over batches.

Each iteration draws a window cover, runs the three conditional updates on
every window from the same pre-iteration state, then merges multi-covered
slices by averaging. All randomness is keyed by
(master seed, tag, iteration, window, slice/column), so a chain is a pure
function of (problem, config, seed) and collected samples are bit-identical
for any worker count.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import ChainAborted, DataError
from .forward import ForwardModel, apply_forward
from .likelihood import LikelihoodStepParams, window_mean_sample
from .priors.base import PriorSampler, checked_sample
from .rngkeys import (TAG_COVER, TAG_LIKELIHOOD, TAG_PRIOR, TAG_TV, seed64,
                      substream)
from .scheduler import BatchCover, CoverSpec, merge_multicovered, sample_cover
from .tv import TvParams, tv_prior_sample
from .volume import Volume, as_volume

log = logging.getLogger("sg3d.chain")

COVER_REFRESH_EVERY = "every-iter"
COVER_REFRESH_ONCE = "once"


@dataclass
class AnnealSchedule:
    """Geometric interpolation from start to end over a fixed step count.

    value(t) = start * (end/start)^(t / (steps-1)); t past the last step
    stays at the floor, which is where sample collection happens.
    """

    start: float
    end: float
    steps: int

    def __post_init__(self):
        if self.start <= 0 or self.end <= 0:
            raise DataError("schedule endpoints must be > 0")
        if self.steps < 1:
            raise DataError("schedule needs at least one step")
        if self.steps == 1 and self.start != self.end:
            raise DataError("a one-step schedule must have start == end")

    def value(self, t: int) -> float:
        if self.steps == 1:
            return self.start
        tt = min(max(t, 0), self.steps - 1)
        if tt == 0:
            return self.start
        if tt == self.steps - 1:
            return self.end  # endpoints hit exactly, no float round trip
        return self.start * (self.end / self.start) ** (tt / (self.steps - 1))

    @classmethod
    def constant(cls, value: float):
        return cls(start=value, end=value, steps=1)


@dataclass
class ChainConfig:
    iterations: int
    cover: CoverSpec
    rho_d: AnnealSchedule
    rho_tv: AnnealSchedule
    tv_lambda: float = 0.0
    burn_in: int = 0
    sample_every: int = 1
    collect: int = 0
    workers: int = 1
    cover_refresh: str = COVER_REFRESH_EVERY
    keep_samples: bool = False
    checkpoint_every: int = 0
    checkpoint_path: str | None = None
    noise_scale: float = 1.0  # test hook: 0 silences likelihood and TV noise

    def __post_init__(self):
        if self.iterations < 1:
            raise DataError("need at least one iteration")
        if self.burn_in < 0 or self.sample_every < 1 or self.collect < 0:
            raise DataError("invalid collection settings")
        if self.burn_in + self.collect * self.sample_every > self.iterations:
            raise DataError(
                f"burn_in + collect*sample_every = "
                f"{self.burn_in + self.collect * self.sample_every} exceeds "
                f"T = {self.iterations}")
        if self.cover_refresh not in (COVER_REFRESH_EVERY, COVER_REFRESH_ONCE):
            raise DataError(f"cover_refresh must be '{COVER_REFRESH_EVERY}' or "
                            f"'{COVER_REFRESH_ONCE}'")
        if self.workers < 1:
            raise DataError("workers must be >= 1")
        if self.tv_lambda < 0:
            raise DataError("tv_lambda must be >= 0")


@dataclass
class ChainState:
    x: np.ndarray
    z: np.ndarray
    w: np.ndarray
    t: int
    master_seed: int
    n_collected: int = 0
    moment1: np.ndarray | None = None
    moment2: np.ndarray | None = None
    samples: list = field(default_factory=list)

    def save(self, path):
        np.savez_compressed(
            path, x=self.x, z=self.z, w=self.w, t=self.t,
            master_seed=self.master_seed, n_collected=self.n_collected,
            moment1=self.moment1 if self.moment1 is not None else np.zeros(0),
            moment2=self.moment2 if self.moment2 is not None else np.zeros(0),
            samples=np.stack(self.samples) if self.samples else np.zeros(0, np.float32))

    @classmethod
    def load(cls, path):
        with np.load(path) as f:
            samples = f["samples"]
            return cls(
                x=f["x"], z=f["z"], w=f["w"], t=int(f["t"]),
                master_seed=int(f["master_seed"]),
                n_collected=int(f["n_collected"]),
                moment1=f["moment1"] if f["moment1"].size else None,
                moment2=f["moment2"] if f["moment2"].size else None,
                samples=list(samples) if samples.size else [])


def _init_state(model: ForwardModel, y: Volume, seed: int, init) -> ChainState:
    d = y.dims[0]
    h, w = model.domain_slice_shape
    if init is not None:
        x0, z0, w0 = (np.asarray(a, dtype=np.float32).copy() for a in init)
        for name, a in (("x", x0), ("z", z0), ("w", w0)):
            if a.shape != (d, h, w):
                raise DataError(f"init {name} has shape {a.shape}, expected {(d, h, w)}")
    else:
        # adjoint back-projection is a cheap, data-informed starting point
        from .forward import apply_adjoint
        x0 = apply_adjoint(model, y).data.copy()
        z0 = x0.copy()
        w0 = x0.copy()
    shape = (d, h, w)
    return ChainState(x=x0, z=z0, w=w0, t=0, master_seed=seed,
                      moment1=np.zeros(shape), moment2=np.zeros(shape))


def _window_task(model, prior, y64, z64, w64, params, tv_params,
                 master, t, w_ord, start, batch, noise_scale):
    sl = slice(start, start + batch)
    rng = substream(master, TAG_LIKELIHOOD, t, w_ord)
    xw = window_mean_sample(model, y64[sl], z64[sl], w64[sl], params, rng,
                            noise_scale=noise_scale)
    xw32 = xw.astype(np.float32)
    zw = np.empty_like(xw32)
    for i in range(batch):
        zw[i] = checked_sample(prior, xw32[i], params.rho_d,
                               seed64(master, TAG_PRIOR, t, w_ord, start + i))
    ww = tv_prior_sample(xw32, tv_params, key=(master, TAG_TV, t, w_ord),
                         noise_scale=noise_scale)
    return xw32, zw, ww.astype(np.float32)


def run_chain(model: ForwardModel, y: Volume, prior: PriorSampler,
              cfg: ChainConfig, seed: int, init=None, state: ChainState | None = None,
              on_sample=None, on_progress=None) -> ChainState:
    """Run (or resume) the three-step Gibbs chain; returns the final state.

    ``init`` optionally provides (x0, z0, w0) arrays. ``state`` resumes a
    checkpointed chain. ``on_sample(t, x)`` fires for every collected
    sample; ``on_progress(line)`` receives one structured text record per
    iteration.
    """
    y = as_volume(y)
    if y.dims[1:] != model.range_slice_shape:
        raise DataError(f"measurement slices {y.dims[1:]} do not match the "
                        f"operator range {model.range_slice_shape}")
    if cfg.cover.depth != y.dims[0]:
        raise DataError(f"cover depth {cfg.cover.depth} != volume depth {y.dims[0]}")
    if state is None:
        state = _init_state(model, y, seed, init)
    y64 = y.data.astype(np.float64)

    cover0: BatchCover | None = None
    if cfg.cover_refresh == COVER_REFRESH_ONCE:
        cover0 = sample_cover(cfg.cover, substream(seed, TAG_COVER, 0))

    pool = ThreadPoolExecutor(max_workers=cfg.workers) if cfg.workers > 1 else None
    try:
        for t in range(state.t, cfg.iterations):
            t0 = time.perf_counter()
            rho_d = cfg.rho_d.value(t)
            rho_tv = cfg.rho_tv.value(t)
            try:
                cover = cover0 if cover0 is not None else sample_cover(
                    cfg.cover, substream(seed, TAG_COVER, t))
                params = LikelihoodStepParams(rho_d=rho_d, rho_tv=rho_tv,
                                              sigma=model.noise_sigma)
                tv_params = TvParams(lam=cfg.tv_lambda, rho_tv=rho_tv)
                z64 = state.z.astype(np.float64)
                w64 = state.w.astype(np.float64)
                args = [(model, prior, y64, z64, w64, params, tv_params,
                         seed, t, w_ord, s, cfg.cover.batch_size, cfg.noise_scale)
                        for w_ord, s in enumerate(cover.windows)]
                if pool is not None:
                    results = list(pool.map(lambda a: _window_task(*a), args))
                else:
                    results = [_window_task(*a) for a in args]
                state.x = merge_multicovered([r[0] for r in results], cover,
                                             base=state.x).astype(np.float32)
                state.z = merge_multicovered([r[1] for r in results], cover,
                                             base=state.z).astype(np.float32)
                state.w = merge_multicovered([r[2] for r in results], cover,
                                             base=state.w).astype(np.float32)
            except Exception as err:
                path = _emergency_checkpoint(state, cfg)
                raise ChainAborted(f"chain aborted at iteration {t}: {err}",
                                   checkpoint_path=path, cause=err) from err

            if (t >= cfg.burn_in and state.n_collected < cfg.collect
                    and (t - cfg.burn_in) % cfg.sample_every == 0):
                x64 = state.x.astype(np.float64)
                state.moment1 += x64
                state.moment2 += x64 * x64
                state.n_collected += 1
                if cfg.keep_samples:
                    state.samples.append(state.x.copy())
                if on_sample is not None:
                    on_sample(t, state.x)

            state.t = t + 1
            if on_progress is not None:
                resid = _data_residual(model, y64, state.x)
                secs = time.perf_counter() - t0
                on_progress(f"iter={t} rho_d={rho_d:.6g} rho_tv={rho_tv:.6g} "
                            f"resid={resid:.6g} secs={secs:.3f}")
            if (cfg.checkpoint_every and cfg.checkpoint_path
                    and state.t % cfg.checkpoint_every == 0):
                state.save(cfg.checkpoint_path)
    finally:
        if pool is not None:
            pool.shutdown(wait=True)
    return state


def _data_residual(model, y64, x32) -> float:
    pred = apply_forward(model, Volume(x32)).data.astype(np.float64)
    return float(np.sqrt(np.mean((y64 - pred) ** 2)))


def _emergency_checkpoint(state: ChainState, cfg: ChainConfig):
    if not cfg.checkpoint_path:
        return None
    try:
        state.save(cfg.checkpoint_path)
        return cfg.checkpoint_path
    except Exception:
        log.exception("failed to write emergency checkpoint")
        return None


def posterior_mean_sd(state: ChainState) -> tuple[Volume, Volume]:
    """Per-voxel mean and unbiased SD over the collected samples."""
    n = state.n_collected
    if n < 2:
        raise DataError(f"need at least 2 collected samples, have {n}")
    mean = state.moment1 / n
    var = (state.moment2 - n * mean * mean) / (n - 1)
    sd = np.sqrt(np.maximum(var, 0.0))
    return Volume(mean.astype(np.float32)), Volume(sd.astype(np.float32))
