"""HTTP surface of the gallery: manifests, images, bin boundaries, jobs.

All payloads are JSON except the PNG image bytes. Reads are served straight
off the job directories, so anything a served manifest references is
fetchable as long as the directory exists.
"""

from __future__ import annotations

import json
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import FileResponse, JSONResponse
from fastapi.staticfiles import StaticFiles

from ..dataset import load_preprocessed
from ..pipeline import JobRequest
from .jobs import JobManager
from .models import (
    DatasetInfo,
    DimensionInfo,
    JobRequestModel,
    JobStatusModel,
    JobSubmitResponse,
)


def create_app(root: str | Path, ui_dir: str | Path | None = None) -> FastAPI:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    manager = JobManager(root)
    app = FastAPI(title="divan gallery service")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    app.state.root = root
    app.state.jobs = manager

    def job_dir(job_id: str) -> Path:
        d = root / "jobs" / job_id
        if not (d / "manifest.json").exists():
            raise HTTPException(status_code=404, detail=f"unknown job {job_id}")
        return d

    @app.get("/api/jobs")
    def list_jobs():
        return sorted(
            ({"job_id": r.job_id, "status": r.status} for r in manager.records.values()),
            key=lambda r: r["job_id"],
        )

    @app.get("/api/manifest/{job_id}")
    def get_manifest(job_id: str):
        manifest = job_dir(job_id) / "manifest.json"
        return JSONResponse(json.loads(manifest.read_text()))

    @app.get("/api/images/{image_id}")
    def get_image(image_id: str):
        # Image ids are "<job_id>-<seq>"; the job id never contains a dash.
        job_id = image_id.split("-", 1)[0]
        png = job_dir(job_id) / "images" / f"{image_id}.png"
        if not png.exists():
            raise HTTPException(status_code=404, detail=f"unknown image {image_id}")
        return FileResponse(png, media_type="image/png")

    @app.get("/api/images/{image_id}/meta")
    def get_image_meta(image_id: str):
        job_id = image_id.split("-", 1)[0]
        sidecar = job_dir(job_id) / "images" / f"{image_id}.json"
        if not sidecar.exists():
            raise HTTPException(status_code=404, detail=f"unknown image {image_id}")
        return JSONResponse(json.loads(sidecar.read_text()))

    @app.get("/api/bins/{job_id}/{dim}")
    def get_bins(job_id: str, dim: int):
        path = job_dir(job_id) / "bins" / f"dim_{dim}.json"
        if not path.exists():
            raise HTTPException(status_code=404, detail=f"no boundaries for dimension {dim}")
        return JSONResponse(json.loads(path.read_text()))

    @app.get("/api/stats/{job_id}")
    def get_stats(job_id: str):
        path = job_dir(job_id) / "stats.json"
        if not path.exists():
            raise HTTPException(status_code=404, detail="job has no run stats")
        return JSONResponse(json.loads(path.read_text()))

    @app.post("/api/jobs", response_model=JobSubmitResponse)
    def submit_job(body: JobRequestModel):
        req = JobRequest(**body.model_dump())
        try:
            record = manager.submit(req)
        except Exception as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return JobSubmitResponse(job_id=record.job_id, status=record.status)

    @app.get("/api/jobs/{job_id}", response_model=JobStatusModel)
    def job_status(job_id: str):
        record = manager.status(job_id)
        if record is None:
            raise HTTPException(status_code=404, detail=f"unknown job {job_id}")
        manifest_url = f"/api/manifest/{job_id}" if record.status == "done" else None
        return JobStatusModel(
            job_id=job_id, status=record.status, error=record.error, manifest_url=manifest_url
        )

    @app.get("/api/dataset-info", response_model=DatasetInfo)
    def dataset_info(dir: str):
        try:
            ds = load_preprocessed(dir, verify=False)
        except Exception as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        return DatasetInfo(
            dataset_dir=dir,
            row_count=ds.row_count,
            dims=[
                DimensionInfo(id=d.id, label=d.label(), source=list(d.source)) for d in ds.dims
            ],
            value_columns=ds.value_columns,
        )

    if ui_dir is not None and Path(ui_dir).exists():
        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
