"""The end-to-end job: bin -> aggregate -> render -> rank -> manifest.

A job is content-addressed: its id is a digest of the normalized request
plus the dataset fingerprint, so resubmitting an identical request finds
the finished gallery instead of recomputing it. Each stage failure is
re-raised tagged with the stage name.

Job directory layout under <root>/jobs/<job_id>/:

    manifest.json     catalog of all images, scores, ranking, references
    images/*.png      one raster per image, plus *.json sidecars
    bins/dim_<i>.json per-dimension bin boundaries (tooltip source)
    stats.json        simulator run stats (pim-sim backend only)
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import aggregate as agg
from . import binning, pimsim, plan as planning, rank as ranking, viz
from .dataset import Dataset, dataset_fingerprint, load_preprocessed
from .errors import DivanError, PipelineError

ALLOWED_BINS = (32, 64, 128, 256)

_FILTER_OPS = {
    "==": np.equal,
    "!=": np.not_equal,
    "<": np.less,
    "<=": np.less_equal,
    ">": np.greater,
    ">=": np.greater_equal,
}


@dataclass
class JobRequest:
    dataset_dir: str
    dims: list[int]
    agg: str = "count"
    bins: int = 128
    backend: str = "cpu"
    partitions: int = 1
    dpus: int = 2048
    mode: str = "sync"
    k: int = 4
    top_groups: int = 10
    per_group: int = 1
    penalty: float = 0.5
    row_filter: list = field(default_factory=list)  # [column, op, value] triples
    exact_binning: bool = False

    def validate(self) -> None:
        if len(self.dims) < 3:
            raise PipelineError("validate", f"need at least 3 dimensions, got {len(self.dims)}")
        if len(set(self.dims)) != len(self.dims):
            raise PipelineError("validate", "duplicate dimension ids in request")
        if self.bins not in ALLOWED_BINS:
            raise PipelineError("validate", f"bins must be one of {ALLOWED_BINS}")
        if self.backend not in ("cpu", "pim-sim"):
            raise PipelineError("validate", f"unknown backend {self.backend!r}")
        if self.k < 1 or self.bins % self.k != 0:
            raise PipelineError("validate", f"k={self.k} must divide bins={self.bins}")
        agg.AggSpec.parse(self.agg)

    def normalized(self) -> dict:
        d = asdict(self)
        d["dims"] = list(self.dims)
        d["row_filter"] = [list(f) for f in self.row_filter]
        return d


def job_id_for(req: JobRequest) -> str:
    payload = json.dumps(req.normalized(), sort_keys=True)
    digest = hashlib.sha256(
        (payload + dataset_fingerprint(req.dataset_dir)).encode()
    ).hexdigest()
    return digest[:16]


def apply_row_filter(dataset: Dataset, filters: list) -> np.ndarray | None:
    """Conjunction of simple column predicates; None keeps all rows.

    Null cells never satisfy a predicate. Text compares against the literal
    string; timestamps accept ISO strings.
    """
    if not filters:
        return None
    keep = np.ones(dataset.row_count, dtype=bool)
    for item in filters:
        if len(item) != 3:
            raise DivanError(f"filter {item!r} must be [column, op, value]")
        col_name, op, value = item
        if op not in _FILTER_OPS:
            raise DivanError(f"unknown filter op {op!r}")
        col = dataset.column(col_name)
        if col.schema.kind == "text":
            mask = _text_mask(col, op, str(value))
        else:
            if col.schema.kind == "timestamp" and isinstance(value, str):
                from .dataset import _parse_timestamp

                value = _parse_timestamp(value)
            mask = _FILTER_OPS[op](col.values, value)
        if col.null_mask is not None:
            mask &= ~col.null_mask
        keep &= mask
    rows = np.flatnonzero(keep)
    if len(rows) == 0:
        raise DivanError("row filter matched no rows")
    return rows


def _text_mask(col, op: str, value: str) -> np.ndarray:
    """Predicate over a text column's codes; the vocab is sorted, so code
    order is lexicographic order."""
    import bisect

    n = len(col.values)
    pos = bisect.bisect_left(col.vocab, value)
    exact = pos < len(col.vocab) and col.vocab[pos] == value
    if op == "==":
        return col.values == pos if exact else np.zeros(n, dtype=bool)
    if op == "!=":
        return col.values != pos if exact else np.ones(n, dtype=bool)
    if op == "<":
        return col.values < pos
    if op == "<=":
        return col.values < pos + (1 if exact else 0)
    if op == ">":
        return col.values >= pos + (1 if exact else 0)
    return col.values >= pos  # >=


def _stage(name: str):
    class _Ctx:
        def __enter__(self):
            return self

        def __exit__(self, exc_type, exc, tb):
            if exc is not None and not isinstance(exc, PipelineError):
                raise PipelineError(name, str(exc)) from exc
            return False

    return _Ctx()


@dataclass
class Manifest:
    job_id: str
    request: dict
    dims: list[dict]
    bins: int
    k: int
    images: list[dict]
    ranking: list[str]
    bin_boundaries: dict[str, str]
    stats_file: str | None = None
    created: float = 0.0
    cache_hit: bool = False

    def to_jsonable(self) -> dict:
        d = asdict(self)
        d.pop("cache_hit")
        return d

    @staticmethod
    def from_jsonable(d: dict) -> "Manifest":
        return Manifest(**{**d, "cache_hit": False})


def _aggregate_stage(req: JobRequest, spec, bins_matrix, values, triples):
    stats = None
    if req.backend == "cpu":
        partitions = req.partitions
        binned_cols = [bins_matrix[:, i] for i in range(bins_matrix.shape[1])]
        if partitions == 0:  # 0 = autotune
            partitions = agg.autotune_partitions(binned_cols, values, spec, triples, req.bins)
        cubes = agg.aggregate_scan_major(
            binned_cols, values, spec, triples, req.bins, partitions=partitions
        )
    else:
        job_plan = planning.dpu_dist(bins_matrix.shape[1], req.bins, req.dpus)
        config = pimsim.PimConfig(dpu_count=req.dpus, mode=req.mode)
        cubes, stats = pimsim.run(bins_matrix, values, spec, job_plan, req.bins, config)
        cubes.sort(key=lambda c: c.triple)
    return cubes, stats


def run_pipeline(req: JobRequest, root: str | Path) -> Manifest:
    """Run a job end to end under `root`; reuses a finished identical job."""
    req.validate()
    root = Path(root)
    job_id = job_id_for(req)
    job_dir = root / "jobs" / job_id
    manifest_path = job_dir / "manifest.json"
    if manifest_path.exists():
        manifest = Manifest.from_jsonable(json.loads(manifest_path.read_text()))
        manifest.cache_hit = True
        return manifest

    with _stage("load"):
        dataset = load_preprocessed(req.dataset_dir)
        for d in req.dims:
            dataset.dim(d)

    with _stage("filter"):
        rows = apply_row_filter(dataset, req.row_filter)

    # Selected dimensions are renumbered 0..N'-1 for cubes and images; the
    # manifest records the mapping back to dataset dimension ids.
    with _stage("bin"):
        (job_dir / "bins").mkdir(parents=True, exist_ok=True)
        n_rows = len(rows) if rows is not None else dataset.row_count
        bins_matrix = np.empty((n_rows, len(req.dims)), dtype=np.uint8)
        boundary_files: dict[str, str] = {}
        for local, dim_id in enumerate(req.dims):
            binned, _ = binning.bin_column(
                dataset, dim_id, req.bins, rows=rows, exact=req.exact_binning
            )
            bins_matrix[:, local] = binned.bins
            bounds = binning.bin_boundaries(dataset, dim_id, binned)
            fname = f"bins/dim_{local}.json"
            (job_dir / fname).write_text(json.dumps(bounds.to_jsonable(), indent=1))
            boundary_files[str(local)] = fname

    with _stage("aggregate"):
        spec = agg.AggSpec.parse(req.agg)
        values = None
        if spec.function == "sum":
            col = dataset.column(spec.value_column)
            vals = col.values.astype(np.float64)
            values = vals[rows] if rows is not None else vals
        triples = agg.enumerate_triples(len(req.dims))
        cubes, stats = _aggregate_stage(req, spec, bins_matrix, values, triples)
        stats_file = None
        if stats is not None:
            stats_file = "stats.json"
            (job_dir / stats_file).write_text(json.dumps(stats.to_jsonable(), indent=1))

    with _stage("render"):
        img_dir = job_dir / "images"
        img_dir.mkdir(parents=True, exist_ok=True)
        entries: list[ranking.RankEntry] = []
        image_records: list[dict] = []
        seq = 0
        for cube in cubes:
            for image in viz.image_group(cube, req.k):
                image_id = f"{job_id}-{seq:05d}"
                seq += 1
                fname = f"images/{image_id}.png"
                s0 = image.spec
                refs = {
                    "x": boundary_files[str(s0.x_dim)],
                    "y": boundary_files[str(s0.y_dim)],
                    "z": boundary_files[str(s0.z_dim)],
                }
                viz.encode(image, job_dir / fname, job_dir / f"images/{image_id}.json", refs)
                entries.append(ranking.entry_for(image_id, image))
                s = image.spec
                image_records.append(
                    {
                        "id": image_id,
                        "file": fname,
                        "triple": list(s.triple),
                        "x_dim": s.x_dim,
                        "y_dim": s.y_dim,
                        "z_dim": s.z_dim,
                        "z_range": [s.z_lo, s.z_hi],
                        "score": entries[-1].score,
                        "group": [s.x_dim, s.y_dim],
                        "degenerate": image.degenerate,
                        "total": image.total,
                        "expected": image.expected,
                        "rank": None,
                    }
                )

    with _stage("rank"):
        selected = ranking.select(entries, n=req.per_group, m=req.top_groups)
        ordered = ranking.diversity_penalty(selected, req.penalty)
        by_id = {rec["id"]: rec for rec in image_records}
        ranking_ids = []
        for pos, e in enumerate(ordered):
            by_id[e.image_id]["rank"] = pos
            ranking_ids.append(e.image_id)

    with _stage("manifest"):
        manifest = Manifest(
            job_id=job_id,
            request=req.normalized(),
            dims=[
                {"index": i, "id": d, "label": dataset.dim(d).label()}
                for i, d in enumerate(req.dims)
            ],
            bins=req.bins,
            k=req.k,
            images=image_records,
            ranking=ranking_ids,
            bin_boundaries=boundary_files,
            stats_file=stats_file,
            created=time.time(),
        )
        manifest_path.write_text(json.dumps(manifest.to_jsonable(), indent=1))
    return manifest


def load_manifest(root: str | Path, job_id: str) -> Manifest:
    path = Path(root) / "jobs" / job_id / "manifest.json"
    if not path.exists():
        raise DivanError(f"no manifest for job {job_id}")
    return Manifest.from_jsonable(json.loads(path.read_text()))
