"""Command-line front end. Each subcommand is a thin shim over the core
package (or, for submit/status, over a running service's HTTP API)."""

from __future__ import annotations

import json
import re
import sys
from pathlib import Path

import click
import numpy as np

from . import aggregate as agg
from . import binning, pimsim, pipeline as pipe, plan as planning, rank as ranking, viz
from .dataset import (
    ColumnSchema,
    ingest_delimited,
    load_preprocessed,
    make_composite,
    declare_dimension,
    preprocess,
    save_preprocessed,
    set_value_column,
)

_FILTER_RE = re.compile(r"^\s*([\w.]+)\s*(==|!=|<=|>=|<|>)\s*(.+?)\s*$")


def _parse_filters(exprs: tuple[str, ...]) -> list:
    filters = []
    for expr in exprs:
        m = _FILTER_RE.match(expr)
        if not m:
            raise click.BadParameter(f"cannot parse filter {expr!r} (want col OP value)")
        col, op, raw = m.groups()
        try:
            value = int(raw)
        except ValueError:
            try:
                value = float(raw)
            except ValueError:
                value = raw
        filters.append([col, op, value])
    return filters


def _load_schema(path: str):
    doc = json.loads(Path(path).read_text())
    columns = [
        ColumnSchema(c["name"], c["kind"], c.get("nulls_first", True)) for c in doc["columns"]
    ]
    return doc, columns


@click.group()
def main():
    """Equidepth-binned 3D aggregation cubes, heatmaps, and a gallery."""


@main.command("preprocess")
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--schema", "schema_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--delimiter", default=",")
@click.option("--no-header", is_flag=True, default=False)
def preprocess_cmd(input_path, schema_path, out_dir, delimiter, no_header):
    """Ingest a delimited file, argsort every dimension, persist the result."""
    doc, columns = _load_schema(schema_path)
    ds = ingest_delimited(input_path, columns, delimiter=delimiter, header=not no_header)
    dim_sources = doc.get("dimensions") or [[c.name] for c in columns]
    for source in dim_sources:
        if len(source) == 1:
            declare_dimension(ds, source[0])
        elif len(source) == 2:
            make_composite(ds, source[0], source[1])
        else:
            raise click.BadParameter(f"dimension source {source} must have 1 or 2 columns")
    for name, width in (doc.get("value_columns") or {}).items():
        set_value_column(ds, name, int(width))
    preprocess(ds)
    save_preprocessed(ds, out_dir)
    click.echo(f"preprocessed {ds.row_count} rows, {len(ds.dims)} dimensions -> {out_dir}")


def _bin_dataset(dataset_dir, dims, bins, exact, subset):
    ds = load_preprocessed(dataset_dir)
    rows = pipe.apply_row_filter(ds, _parse_filters(subset))
    dim_ids = [int(d) for d in dims.split(",")]
    matrix = np.empty(
        (len(rows) if rows is not None else ds.row_count, len(dim_ids)), dtype=np.uint8
    )
    boundaries = {}
    for local, dim_id in enumerate(dim_ids):
        binned, _ = binning.bin_column(ds, dim_id, bins, rows=rows, exact=exact)
        matrix[:, local] = binned.bins
        boundaries[local] = binning.bin_boundaries(ds, dim_id, binned)
    return ds, rows, dim_ids, matrix, boundaries


@main.command("bin")
@click.option("--dataset", "dataset_dir", required=True, type=click.Path(exists=True))
@click.option("--dims", required=True, help="comma-separated dimension ids")
@click.option("--bins", "bins", type=int, default=128)
@click.option("--exact", is_flag=True, default=False)
@click.option("--subset", multiple=True, help="row filter, e.g. 'fare>=10' (repeatable)")
@click.option("--out", "out_dir", required=True, type=click.Path())
def bin_cmd(dataset_dir, dims, bins, exact, subset, out_dir):
    """Bin dimensions; write one byte per tuple per dimension + boundaries."""
    _, _, dim_ids, matrix, boundaries = _bin_dataset(dataset_dir, dims, bins, exact, subset)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for local, dim_id in enumerate(dim_ids):
        (out / f"binned_{local}.bin").write_bytes(matrix[:, local].tobytes())
        (out / f"dim_{local}.json").write_text(
            json.dumps(boundaries[local].to_jsonable(), indent=1)
        )
    (out / "binned.json").write_text(
        json.dumps({"dims": dim_ids, "bins": bins, "rows": int(matrix.shape[0])}, indent=1)
    )
    click.echo(f"binned {matrix.shape[0]} rows x {len(dim_ids)} dims at B={bins} -> {out}")


@main.command("aggregate")
@click.option("--dataset", "dataset_dir", required=True, type=click.Path(exists=True))
@click.option("--dims", required=True)
@click.option("--bins", type=int, default=128)
@click.option("--agg", "agg_text", default="count", help="count | sum:<col> | sum64:<col>")
@click.option("--backend", type=click.Choice(["cpu", "pim-sim"]), default="cpu")
@click.option("--partitions", type=int, default=1, help="cpu: slabs per cube (0 = autotune)")
@click.option("--dpus", type=int, default=2048)
@click.option("--mode", type=click.Choice(["sync", "async"]), default="sync")
@click.option("--stats", "stats_path", type=click.Path(), default=None)
@click.option("--subset", multiple=True)
@click.option("--exact", is_flag=True, default=False)
@click.option("--out", "out_dir", required=True, type=click.Path())
def aggregate_cmd(dataset_dir, dims, bins, agg_text, backend, partitions, dpus, mode,
                  stats_path, subset, exact, out_dir):
    """Compute all C(N,3) cubes over the selected dimensions."""
    ds, rows, dim_ids, matrix, _ = _bin_dataset(dataset_dir, dims, bins, exact, subset)
    spec = agg.AggSpec.parse(agg_text)
    values = None
    if spec.function == "sum":
        vals = ds.column(spec.value_column).values.astype(np.float64)
        values = vals[rows] if rows is not None else vals
    triples = agg.enumerate_triples(len(dim_ids))
    if backend == "cpu":
        cols = [matrix[:, i] for i in range(matrix.shape[1])]
        if partitions == 0:
            partitions = agg.autotune_partitions(cols, values, spec, triples, bins)
            click.echo(f"autotuned partitions = {partitions}")
        cubes = agg.aggregate_scan_major(cols, values, spec, triples, bins, partitions=partitions)
    else:
        job_plan = planning.dpu_dist(len(dim_ids), bins, dpus)
        config = pimsim.PimConfig(dpu_count=dpus, mode=mode)
        cubes, stats = pimsim.run(matrix, values, spec, job_plan, bins, config)
        cubes.sort(key=lambda c: c.triple)
        if stats_path:
            Path(stats_path).write_text(json.dumps(stats.to_jsonable(), indent=1))
            click.echo(f"run stats -> {stats_path}")
    agg.save_cube_dir(cubes, out_dir, extra={"dims": dim_ids})
    click.echo(f"{len(cubes)} cubes of {bins}^3 cells -> {out_dir}")


@main.command("plan")
@click.option("--dims", "n", type=int, required=True)
@click.option("--bins", type=int, default=128)
@click.option("--dpus", type=int, required=True)
@click.option("--elem-size", type=int, default=4)
@click.option("--dump", "dump_path", type=click.Path(), default=None)
def plan_cmd(n, bins, dpus, elem_size, dump_path):
    """Plan triple distribution across DPUs and report balance/footprints."""
    iterations = planning.dpu_dist(n, bins, dpus)
    assignment = planning.assign_dpus(iterations, bins, dpus, elem_size=elem_size)
    report = planning.plan_report(iterations, assignment)
    if dump_path:
        Path(dump_path).write_text(json.dumps(report, indent=1))
        click.echo(f"plan -> {dump_path}")
    for it in report["iterations"]:
        sizes = it["group_sizes"]
        click.echo(
            f"iteration {it['index']}: {it['num_groups']} groups, "
            f"sizes {min(sizes)}..{max(sizes)}, replication x{it['replication']}, "
            f"max footprint {max(it['footprint_bytes_per_dpu']) / 2**20:.2f} MB"
        )


@main.command("render")
@click.option("--cubes", "cube_dir", required=True, type=click.Path(exists=True))
@click.option("--partitions", "k", type=int, default=4)
@click.option("--out", "out_dir", required=True, type=click.Path())
def render_cmd(cube_dir, k, out_dir):
    """Render every cube into 3k heatmaps plus sidecars and a manifest."""
    cubes = agg.load_cube_dir(cube_dir)
    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    records = []
    seq = 0
    for cube in cubes:
        for image in viz.image_group(cube, k):
            image_id = f"img-{seq:05d}"
            seq += 1
            viz.encode(image, out / f"images/{image_id}.png", out / f"images/{image_id}.json")
            s = image.spec
            records.append(
                {
                    "id": image_id,
                    "file": f"images/{image_id}.png",
                    "triple": list(s.triple),
                    "x_dim": s.x_dim,
                    "y_dim": s.y_dim,
                    "z_dim": s.z_dim,
                    "z_range": [s.z_lo, s.z_hi],
                    "score": ranking.score(image),
                    "group": [s.x_dim, s.y_dim],
                    "degenerate": image.degenerate,
                    "total": image.total,
                    "expected": image.expected,
                    "rank": None,
                }
            )
    manifest = {"bins": cubes[0].B if cubes else 0, "k": k, "images": records, "ranking": []}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1))
    click.echo(f"{len(records)} images -> {out}")


@main.command("rank")
@click.option("--gallery", "gallery_dir", required=True, type=click.Path(exists=True))
@click.option("--top-groups", "m", type=int, default=10)
@click.option("--per-group", "n", type=int, default=1)
@click.option("--penalty", type=float, default=0.5)
@click.option("--reverse", is_flag=True, default=False, help="surface the weakest groups")
def rank_cmd(gallery_dir, m, n, penalty, reverse):
    """Order a rendered gallery and write the ranking into its manifest."""
    gallery = Path(gallery_dir)
    manifest = json.loads((gallery / "manifest.json").read_text())
    entries = [
        ranking.RankEntry(
            image_id=rec["id"],
            triple=tuple(rec["triple"]),
            x_dim=rec["x_dim"],
            y_dim=rec["y_dim"],
            z_dim=rec["z_dim"],
            z_lo=rec["z_range"][0],
            score=rec["score"],
            degenerate=rec.get("degenerate", False),
        )
        for rec in manifest["images"]
    ]
    ordered = ranking.diversity_penalty(ranking.select(entries, n=n, m=m, reverse=reverse), penalty)
    by_id = {rec["id"]: rec for rec in manifest["images"]}
    for rec in manifest["images"]:
        rec["rank"] = None
    for pos, e in enumerate(ordered):
        by_id[e.image_id]["rank"] = pos
    manifest["ranking"] = [e.image_id for e in ordered]
    (gallery / "manifest.json").write_text(json.dumps(manifest, indent=1))
    click.echo(f"ranked {len(ordered)} images across <= {m} groups")


@main.command("pipeline")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--root", default="gallery", type=click.Path())
def pipeline_cmd(config_path, root):
    """Run bin -> aggregate -> render -> rank from a job config JSON."""
    req = pipe.JobRequest(**json.loads(Path(config_path).read_text()))
    manifest = pipe.run_pipeline(req, root)
    hit = " (cache hit)" if manifest.cache_hit else ""
    click.echo(f"job {manifest.job_id}{hit}: {len(manifest.images)} images")
    click.echo(f"manifest: {Path(root) / 'jobs' / manifest.job_id / 'manifest.json'}")


@main.command("serve")
@click.option("--root", required=True, type=click.Path())
@click.option("--port", type=int, default=8000)
@click.option("--host", default="127.0.0.1")
@click.option("--ui", "ui_dir", type=click.Path(), default=None)
def serve_cmd(root, port, host, ui_dir):
    """Serve galleries and accept jobs over HTTP."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(root, ui_dir), host=host, port=port)


@main.command("submit")
@click.option("--server", required=True, help="service base URL")
@click.argument("config_path", type=click.Path(exists=True))
@click.option("--wait/--no-wait", default=True)
def submit_cmd(server, config_path, wait):
    """Submit a job config to a running service and poll it to completion."""
    import time

    import httpx

    body = json.loads(Path(config_path).read_text())
    resp = httpx.post(f"{server.rstrip('/')}/api/jobs", json=body, timeout=30)
    resp.raise_for_status()
    job = resp.json()
    click.echo(f"job {job['job_id']}: {job['status']}")
    if not wait:
        return
    while True:
        status = httpx.get(f"{server.rstrip('/')}/api/jobs/{job['job_id']}", timeout=30).json()
        if status["status"] in ("done", "error"):
            click.echo(f"job {job['job_id']}: {status['status']}"
                       + (f" ({status['error']})" if status.get("error") else ""))
            sys.exit(0 if status["status"] == "done" else 1)
        time.sleep(0.5)


@main.command("status")
@click.option("--server", required=True)
@click.argument("job_id")
def status_cmd(server, job_id):
    """Poll a job on a running service."""
    import httpx

    resp = httpx.get(f"{server.rstrip('/')}/api/jobs/{job_id}", timeout=30)
    click.echo(resp.text)


@main.command("bench-partitions")
@click.option("--dataset", "dataset_dir", required=True, type=click.Path(exists=True))
@click.option("--dims", required=True)
@click.option("--bins", type=int, default=128)
@click.option("--agg", "agg_text", default="count")
@click.option("--candidates", default="1,2,4")
@click.option("--repeats", type=int, default=3)
def bench_cmd(dataset_dir, dims, bins, agg_text, candidates, repeats):
    """Time scan-major aggregation at several partition counts.

    Output is informational: the payoff depends on this machine's cache
    sizes, so nothing asserts these numbers.
    """
    ds, rows, dim_ids, matrix, _ = _bin_dataset(dataset_dir, dims, bins, False, ())
    spec = agg.AggSpec.parse(agg_text)
    values = None
    if spec.function == "sum":
        values = ds.column(spec.value_column).values.astype(np.float64)
    cols = [matrix[:, i] for i in range(matrix.shape[1])]
    triples = agg.enumerate_triples(len(dim_ids))
    cand = tuple(int(c) for c in candidates.split(","))
    timings = agg.bench_partitions(cols, values, spec, triples, bins, cand, repeats)
    for P, seconds in sorted(timings.items()):
        click.echo(f"partitions={P}: {seconds:.3f}s")
    best = min(timings, key=timings.get)
    click.echo(f"best: partitions={best}")


if __name__ == "__main__":
    main()
