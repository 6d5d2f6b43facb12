"""Operation handlers: the single implementation behind HTTP and the CLI."""

from __future__ import annotations

import json
from pathlib import Path

from .. import baselines as bl
from ..chain import ChainState, posterior_mean_sd, run_chain
from ..exceptions import DataError
from ..forward import ForwardModel, degrade
from ..metrics import compute_report
from ..phantom import PhantomSpec, generate
from ..scheduler import CoverSpec, coverage_histogram, sample_cover
from ..volio import read_volume, write_volume
from ..rngkeys import substream, TAG_COVER
from .models import (BaselineRequest, DegradeRequest, MetricsRequest,
                     PhantomRequest, ReconstructRequest, ReconstructResult,
                     SchedulePreviewRequest, VolumeInfo)


def handle_phantom(req: PhantomRequest) -> VolumeInfo:
    spec = PhantomSpec(dims=req.dims, kind=req.kind, seed=req.seed,
                       layers=req.layers, roughness=req.roughness,
                       speckle=req.speckle, mean=req.mean,
                       variance=req.variance, length_scale=req.length_scale,
                       segments=req.segments)
    vol = generate(spec)
    write_volume(req.out, vol, provenance={"generator": "phantom",
                                           "kind": req.kind, "seed": req.seed})
    return VolumeInfo(path=req.out, dims=vol.dims, peak=vol.peak)


def _degradation_model(slice_shape, factor, sigma, axes) -> ForwardModel:
    if factor == 1:
        return ForwardModel.identity(slice_shape, noise_sigma=sigma)
    return ForwardModel.downsample(slice_shape, factor, noise_sigma=sigma,
                                   axes=axes)


def handle_degrade(req: DegradeRequest) -> VolumeInfo:
    vol = read_volume(req.in_path)
    model = _degradation_model(vol.dims[1:], req.factor, req.sigma, req.axes)
    out = degrade(model, vol, seed=req.seed)
    write_volume(req.out, out, provenance={"generator": "degrade",
                                           "factor": req.factor,
                                           "sigma": req.sigma, "seed": req.seed,
                                           "source": req.in_path})
    return VolumeInfo(path=req.out, dims=out.dims, peak=out.peak)


def handle_reconstruct(req: ReconstructRequest, on_progress=None) -> ReconstructResult:
    cfg = req.config
    meas = read_volume(req.meas)
    depth = meas.dims[0]
    h, w = meas.dims[1:]
    ky = cfg.forward_factor if "y" in cfg.forward_axes else 1
    kx = cfg.forward_factor if "x" in cfg.forward_axes else 1
    domain_shape = (h * ky, w * kx)
    model = _degradation_model(domain_shape, cfg.forward_factor, cfg.sigma,
                               cfg.forward_axes)
    prior = cfg.build_prior(domain_shape)

    out_dir = Path(req.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ckpt = out_dir / "checkpoint.npz"
    chain_cfg = cfg.chain_config(depth, checkpoint_path=ckpt)

    state = None
    if req.resume:
        state = ChainState.load(req.resume)
        if state.x.shape != (depth,) + domain_shape:
            raise DataError(f"resume state shape {state.x.shape} does not match "
                            f"problem {(depth,) + domain_shape}")

    progress_path = out_dir / "progress.log"
    with progress_path.open("a") as log_file:
        def progress(line):
            log_file.write(line + "\n")
            log_file.flush()
            if on_progress is not None:
                on_progress(line)

        state = run_chain(model, meas, prior, chain_cfg, seed=cfg.seed,
                          state=state, on_progress=progress)

    state.save(ckpt)
    mean, sd = posterior_mean_sd(state)
    mean_info = write_volume(out_dir / "mean.raw", mean,
                             provenance={"generator": "reconstruct",
                                         "seed": cfg.seed})
    sd_info = write_volume(out_dir / "sd.raw", sd,
                           provenance={"generator": "reconstruct-sd",
                                       "seed": cfg.seed})
    sample_paths = []
    if cfg.keep_samples:
        from ..volume import Volume
        sdir = out_dir / "samples"
        for i, s in enumerate(state.samples):
            p = sdir / f"sample_{i:04d}.raw"
            write_volume(p, Volume(s), provenance={"sample_index": i})
            sample_paths.append(str(p))
    return ReconstructResult(
        mean=VolumeInfo(path=str(mean_info), dims=mean.dims, peak=mean.peak),
        sd=VolumeInfo(path=str(sd_info), dims=sd.dims, peak=sd.peak),
        progress_log=str(progress_path),
        checkpoint=str(ckpt),
        samples=sample_paths,
        iterations_run=state.t,
        collected=state.n_collected)


def handle_metrics(req: MetricsRequest) -> dict:
    truth = read_volume(req.truth)
    recon = read_volume(req.recon)
    sd = read_volume(req.sd) if req.sd else None
    peak = req.peak if req.peak is not None else truth.peak
    report = compute_report(truth, recon, sd=sd, peak=peak, k=req.coverage_k,
                            subsample=req.subsample)
    payload = json.loads(report.to_json())
    if req.out:
        Path(req.out).parent.mkdir(parents=True, exist_ok=True)
        Path(req.out).write_text(report.to_json() + "\n")
    return payload


def handle_schedule_preview(req: SchedulePreviewRequest) -> str:
    spec = CoverSpec(depth=req.depth, batch_size=req.batch,
                     coverage=req.coverage, budget=req.budget)
    cover = sample_cover(spec, substream(req.seed, TAG_COVER, 0))
    return coverage_histogram(cover)


def handle_baseline(req: BaselineRequest) -> VolumeInfo:
    vol = read_volume(req.in_path)
    if req.method == "bilinear":
        out = bl.bilinear(vol, req.factor, axes=req.axes)
    elif req.method == "bicubic":
        out = bl.bicubic(vol, req.factor, axes=req.axes)
    else:
        out = bl.tv3d_denoise(vol, req.weight)
    write_volume(req.out, out, provenance={"generator": f"baseline-{req.method}",
                                           "source": req.in_path})
    return VolumeInfo(path=req.out, dims=out.dims, peak=out.peak)
