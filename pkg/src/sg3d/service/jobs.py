"""Minimal in-process job registry for long-running reconstructions."""

from __future__ import annotations

import threading
import traceback
import uuid
from dataclasses import dataclass, field

from ..exceptions import Sg3dError
from .models import JobInfo


@dataclass
class _Job:
    job_id: str
    status: str = "pending"
    progress: str | None = None
    error: str | None = None
    exit_code: int = 0
    result: object = None
    thread: threading.Thread | None = None


class JobManager:
    def __init__(self):
        self._jobs: dict[str, _Job] = {}
        self._lock = threading.Lock()

    def submit(self, fn) -> str:
        """Run fn(progress_callback) on a worker thread; returns the job id."""
        job = _Job(job_id=uuid.uuid4().hex[:12])

        def progress(line: str):
            with self._lock:
                job.progress = line

        def run():
            with self._lock:
                job.status = "running"
            try:
                result = fn(progress)
            except Sg3dError as err:
                with self._lock:
                    job.status = "failed"
                    job.error = f"{type(err).__name__}: {err}"
                    job.exit_code = err.exit_code
            except Exception as err:
                with self._lock:
                    job.status = "failed"
                    job.error = f"{type(err).__name__}: {err}"
                    job.exit_code = 4
                traceback.print_exc()
            else:
                with self._lock:
                    job.status = "done"
                    job.result = result

        job.thread = threading.Thread(target=run, daemon=True)
        with self._lock:
            self._jobs[job.job_id] = job
        job.thread.start()
        return job.job_id

    def info(self, job_id: str) -> JobInfo | None:
        with self._lock:
            job = self._jobs.get(job_id)
            if job is None:
                return None
            return JobInfo(job_id=job.job_id, status=job.status,
                           progress=job.progress, error=job.error,
                           exit_code=job.exit_code, result=job.result)

    def wait(self, job_id: str, timeout: float | None = None) -> JobInfo | None:
        with self._lock:
            job = self._jobs.get(job_id)
        if job is None:
            return None
        if job.thread is not None:
            job.thread.join(timeout)
        return self.info(job_id)
