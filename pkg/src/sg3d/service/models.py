"""Request/response schemas shared by the HTTP service and the CLI client.

All volume payloads are exchanged as server-side file paths (raw +
sidecar), never inline: half-gigabyte volumes do not belong in JSON.
"""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field

from ..config import RunConfig


class VolumeInfo(BaseModel):
    path: str
    dims: tuple[int, int, int]
    peak: float = 1.0


class PhantomRequest(BaseModel):
    out: str
    dims: tuple[int, int, int] = (16, 64, 64)
    kind: Literal["layered", "gaussian_field", "piecewise_constant_z"] = "layered"
    seed: int = 0
    layers: int = 4
    roughness: float = 0.15
    speckle: float = 0.1
    mean: float = 0.5
    variance: float = 0.01
    length_scale: float = 2.0
    segments: int = 2


class DegradeRequest(BaseModel):
    in_path: str = Field(alias="in")
    out: str
    factor: int = 2
    sigma: float = 0.0
    seed: int = 0
    axes: Literal["yx", "y", "x"] = "yx"

    model_config = {"populate_by_name": True}


class ReconstructRequest(BaseModel):
    meas: str
    out_dir: str
    config: RunConfig = Field(default_factory=RunConfig)
    resume: Optional[str] = None


class ReconstructResult(BaseModel):
    mean: VolumeInfo
    sd: VolumeInfo
    progress_log: str
    checkpoint: str
    samples: list[str] = []
    iterations_run: int
    collected: int


class JobInfo(BaseModel):
    job_id: str
    status: Literal["pending", "running", "done", "failed"]
    progress: Optional[str] = None
    error: Optional[str] = None
    exit_code: int = 0
    result: Optional[ReconstructResult] = None


class MetricsRequest(BaseModel):
    truth: str
    recon: str
    sd: Optional[str] = None
    out: Optional[str] = None
    peak: Optional[float] = None
    coverage_k: float = 3.0
    subsample: Optional[int] = None


class SchedulePreviewRequest(BaseModel):
    depth: int = 128
    batch: int = 16
    coverage: int = 1
    budget: int = 12
    seed: int = 0


class BaselineRequest(BaseModel):
    method: Literal["bilinear", "bicubic", "tv3d"]
    in_path: str = Field(alias="in")
    out: str
    factor: int = 2
    axes: Literal["yx", "y", "x"] = "yx"
    weight: float = 0.1

    model_config = {"populate_by_name": True}
