"""Request/response schemas for the gallery service."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field


class JobRequestModel(BaseModel):
    dataset_dir: str
    dims: list[int] = Field(min_length=3)
    agg: str = "count"
    bins: int = 128
    backend: Literal["cpu", "pim-sim"] = "cpu"
    partitions: int = 1
    dpus: int = 2048
    mode: Literal["sync", "async"] = "sync"
    k: int = 4
    top_groups: int = 10
    per_group: int = 1
    penalty: float = 0.5
    row_filter: list[list] = Field(default_factory=list)
    exact_binning: bool = False


class JobSubmitResponse(BaseModel):
    job_id: str
    status: str


class JobStatusModel(BaseModel):
    job_id: str
    status: Literal["queued", "running", "done", "error"]
    error: Optional[str] = None
    manifest_url: Optional[str] = None


class DimensionInfo(BaseModel):
    id: int
    label: str
    source: list[str]


class DatasetInfo(BaseModel):
    dataset_dir: str
    row_count: int
    dims: list[DimensionInfo]
    value_columns: dict[str, int]
