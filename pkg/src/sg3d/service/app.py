"""FastAPI service wrapping the reconstruction stack.

Quick operations answer synchronously; reconstructions run as background
jobs polled via /v1/jobs/{id}. Paths in requests refer to the server's
filesystem.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from .. import __version__
from ..exceptions import Sg3dError
from . import handlers
from .jobs import JobManager
from .models import (BaselineRequest, DegradeRequest, JobInfo, MetricsRequest,
                     PhantomRequest, ReconstructRequest, SchedulePreviewRequest,
                     VolumeInfo)


class HealthInfo(BaseModel):
    status: str = "ok"
    version: str = __version__


class JobHandle(BaseModel):
    job_id: str


class PreviewText(BaseModel):
    text: str


def _http_error(err: Sg3dError) -> HTTPException:
    status = 400 if err.exit_code == 3 else 500
    return HTTPException(status_code=status,
                         detail=f"{type(err).__name__}: {err}")


def create_app() -> FastAPI:
    app = FastAPI(title="sg3d", version=__version__,
                  description="Split-Gibbs plug-and-play volumetric sampler")
    jobs = JobManager()
    app.state.jobs = jobs

    @app.exception_handler(Sg3dError)
    async def _sg3d_error(request, err):  # pragma: no cover - thin shim
        raise _http_error(err)

    @app.get("/health", response_model=HealthInfo)
    def health():
        return HealthInfo()

    @app.post("/v1/phantom", response_model=VolumeInfo)
    def phantom(req: PhantomRequest):
        try:
            return handlers.handle_phantom(req)
        except Sg3dError as err:
            raise _http_error(err)

    @app.post("/v1/degrade", response_model=VolumeInfo)
    def degrade(req: DegradeRequest):
        try:
            return handlers.handle_degrade(req)
        except Sg3dError as err:
            raise _http_error(err)

    @app.post("/v1/reconstruct", response_model=JobHandle)
    def reconstruct(req: ReconstructRequest):
        job_id = jobs.submit(lambda progress:
                             handlers.handle_reconstruct(req, on_progress=progress))
        return JobHandle(job_id=job_id)

    @app.get("/v1/jobs/{job_id}", response_model=JobInfo)
    def job_info(job_id: str):
        info = jobs.info(job_id)
        if info is None:
            raise HTTPException(status_code=404, detail=f"no such job {job_id}")
        return info

    @app.post("/v1/metrics")
    def metrics(req: MetricsRequest):
        try:
            return handlers.handle_metrics(req)
        except Sg3dError as err:
            raise _http_error(err)

    @app.post("/v1/schedule-preview", response_model=PreviewText)
    def schedule_preview(req: SchedulePreviewRequest):
        try:
            return PreviewText(text=handlers.handle_schedule_preview(req))
        except Sg3dError as err:
            raise _http_error(err)

    @app.post("/v1/baseline", response_model=VolumeInfo)
    def baseline(req: BaselineRequest):
        try:
            return handlers.handle_baseline(req)
        except Sg3dError as err:
            raise _http_error(err)

    return app
