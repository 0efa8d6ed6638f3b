"""Synthetic datasets for tests, benchmarks, and demos."""

from __future__ import annotations

from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .dataset import Column, ColumnSchema, Dataset, declare_dimension, preprocess, set_value_column


def dataset_from_arrays(cols: dict[str, np.ndarray], value_widths: dict[str, int] | None = None,
                        do_preprocess: bool = True) -> Dataset:
    """Build an in-memory Dataset from numpy arrays, one dimension per column."""
    columns: dict[str, Column] = {}
    n = None
    for name, arr in cols.items():
        arr = np.asarray(arr)
        if n is None:
            n = len(arr)
        kind = "float64" if arr.dtype.kind == "f" else "integer"
        dtype = np.float64 if kind == "float64" else np.int64
        columns[name] = Column(ColumnSchema(name, kind), arr.astype(dtype))
    ds = Dataset(columns=columns, row_count=n or 0)
    for name in cols:
        declare_dimension(ds, name)
    for name, width in (value_widths or {}).items():
        set_value_column(ds, name, width)
    if do_preprocess:
        preprocess(ds)
    return ds


def uniform_dataset(n: int, num_dims: int, seed: int = 0, value_widths=None) -> Dataset:
    """Independent uniform float columns d0..d{k-1}; near-black heatmaps."""
    rng = np.random.default_rng(seed)
    cols = {f"d{i}": rng.random(n) for i in range(num_dims)}
    return dataset_from_arrays(cols, value_widths)


def random_binned(n: int, num_dims: int, B: int, seed: int = 0) -> np.ndarray:
    """Uniform random bin matrix (rows x dims, uint8), skipping the binning
    stage entirely; for aggregation-level tests."""
    rng = np.random.default_rng(seed)
    return rng.integers(0, B, size=(n, num_dims), dtype=np.uint8)


def random_values(n: int, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.random(n) * 10.0


def correlated_pair(n: int, B: int, seed: int = 0) -> dict[str, np.ndarray]:
    """Two columns whose equidepth bins coincide row-by-row (plus a third
    independent one); renders as a red diagonal."""
    rng = np.random.default_rng(seed)
    base = rng.random(n)
    jitter = (rng.random(n) - 0.5) * (0.2 / B)
    return {"a": base, "b": np.clip(base + jitter, 0.0, 1.0), "c": rng.random(n)}


def zero_inflated_tips(n: int, zero_fraction: float = 0.3, seed: int = 0) -> np.ndarray:
    """Tip amounts where a fixed fraction of riders give exactly zero."""
    rng = np.random.default_rng(seed)
    tips = np.round(rng.gamma(2.0, 1.5, size=n), 2)
    zeros = rng.random(n) < zero_fraction
    tips[zeros] = 0.0
    return tips


def write_taxi_like_csv(path: str | Path, rows: int, seed: int = 0) -> Path:
    """A trips table in the flavor of a city taxi feed: 8 columns, with a
    zero-inflated tip column and a few discrete favorites ($1/$3/$5 tips).

    Written through pandas so million-row fixtures stay cheap.
    """
    import pandas as pd

    rng = np.random.default_rng(seed)
    path = Path(path)
    zones = np.array([f"Z{z:03d}" for z in range(40)])
    t0 = int(datetime(2023, 1, 1, tzinfo=timezone.utc).timestamp())
    distance = np.round(rng.gamma(2.0, 2.5, size=rows), 2)
    fare = np.round(3.0 + distance * 2.5 + rng.normal(0, 1.0, rows).clip(-2, 4), 2)
    tip = zero_inflated_tips(rows, 0.3, seed + 1)
    favorite = rng.random(rows) < 0.15
    tip[favorite] = rng.choice([1.0, 3.0, 5.0], size=int(favorite.sum()))
    pickup = (t0 + rng.integers(0, 365 * 24 * 3600, size=rows)).astype("datetime64[s]")
    frame = pd.DataFrame(
        {
            "pickup_time": pd.Series(pickup).astype(str),  # "YYYY-MM-DD HH:MM:SS"
            "pickup_zone": zones[rng.integers(0, len(zones), size=rows)],
            "dropoff_zone": zones[rng.integers(0, len(zones), size=rows)],
            "passenger_count": rng.integers(1, 7, size=rows),
            "trip_distance": distance,
            "fare": fare,
            "tip": tip,
            "tolls": np.where(rng.random(rows) < 0.1, 6.55, 0.0),
        }
    )
    frame.to_csv(path, index=False, float_format="%.2f")
    return path


def taxi_like_schema():
    return [
        ColumnSchema("pickup_time", "timestamp"),
        ColumnSchema("pickup_zone", "text"),
        ColumnSchema("dropoff_zone", "text"),
        ColumnSchema("passenger_count", "integer"),
        ColumnSchema("trip_distance", "float64"),
        ColumnSchema("fare", "float64"),
        ColumnSchema("tip", "float64"),
        ColumnSchema("tolls", "float64"),
    ]
