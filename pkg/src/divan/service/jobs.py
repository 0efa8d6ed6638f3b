"""Single-writer job queue: aggregation jobs are resource-heavy, so they
run one at a time on a worker thread while the service keeps answering
reads. Finished jobs are discovered from their on-disk manifests, so a
restarted service still knows them."""

from __future__ import annotations

import queue
import threading
from dataclasses import dataclass, field
from pathlib import Path

from ..pipeline import JobRequest, job_id_for, run_pipeline


@dataclass
class JobRecord:
    job_id: str
    status: str  # queued | running | done | error
    error: str | None = None


@dataclass
class JobManager:
    root: Path
    records: dict[str, JobRecord] = field(default_factory=dict)
    _lock: threading.Lock = field(default_factory=threading.Lock)
    _queue: "queue.Queue[tuple[str, JobRequest]]" = field(default_factory=queue.Queue)
    _worker: threading.Thread | None = None

    def __post_init__(self):
        self.root = Path(self.root)
        jobs_dir = self.root / "jobs"
        if jobs_dir.exists():
            for manifest in jobs_dir.glob("*/manifest.json"):
                job_id = manifest.parent.name
                self.records[job_id] = JobRecord(job_id, "done")

    def _ensure_worker(self):
        if self._worker is None or not self._worker.is_alive():
            self._worker = threading.Thread(target=self._drain, daemon=True)
            self._worker.start()

    def _drain(self):
        while True:
            try:
                job_id, req = self._queue.get(timeout=1.0)
            except queue.Empty:
                return
            with self._lock:
                self.records[job_id].status = "running"
            try:
                run_pipeline(req, self.root)
                status, error = "done", None
            except Exception as exc:  # surfaced to the client, not fatal
                status, error = "error", str(exc)
            with self._lock:
                self.records[job_id].status = status
                self.records[job_id].error = error
            self._queue.task_done()

    def submit(self, req: JobRequest) -> JobRecord:
        req.validate()
        job_id = job_id_for(req)
        with self._lock:
            existing = self.records.get(job_id)
            if existing and existing.status in ("queued", "running", "done"):
                return existing
            record = JobRecord(job_id, "queued")
            self.records[job_id] = record
        self._queue.put((job_id, req))
        self._ensure_worker()
        return record

    def status(self, job_id: str) -> JobRecord | None:
        with self._lock:
            record = self.records.get(job_id)
        if record is None and (self.root / "jobs" / job_id / "manifest.json").exists():
            record = JobRecord(job_id, "done")
            with self._lock:
                self.records[job_id] = record
        return record
