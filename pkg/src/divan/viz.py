"""Rendering aggregate cubes as over/under-representation heatmaps.

One image shows two of a cube's dimensions (x horizontal, y vertical)
restricted to a contiguous bin range of the third (z), summed away. Because
the axes are equidepth-binned, independent dimensions give every cell
roughly the same subtotal; the expected value S is the region total divided
by B^2. Cells are colored by departure from S: red over-represented, blue
under-represented, black neutral. Red saturates at twice the expected
value; green is never used, so the palette stays readable for red-green
colorblind viewers and brightness always means "interesting".
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .aggregate import AggregateCube, Triple
from .errors import RenderError


def intensity(value, expected):
    """Map aggregate value(s) to (r, g, b) in [0, 1].

    (0, 0, 1 - v/S) at or below the expected value, (min(1, v/S - 1), 0, 0)
    above it; so v=0 is pure blue, v=S black, and red saturates for
    v >= 2S. Requires expected > 0; degenerate regions never get here.
    """
    v = np.asarray(value, dtype=np.float64)
    ratio = v / float(expected)
    under = ratio <= 1.0
    r = np.where(under, 0.0, np.minimum(1.0, ratio - 1.0))
    b = np.where(under, np.clip(1.0 - ratio, 0.0, 1.0), 0.0)
    rgb = np.stack([r, np.zeros_like(r), b], axis=-1)
    return rgb if rgb.ndim > 1 else tuple(rgb)


@dataclass(frozen=True)
class ImageSpec:
    triple: Triple
    z_dim: int
    z_lo: int
    z_hi: int  # exclusive
    B: int

    def __post_init__(self):
        if self.z_dim not in self.triple:
            raise RenderError(f"z dimension {self.z_dim} not in triple {self.triple}")
        if not (0 <= self.z_lo < self.z_hi <= self.B):
            raise RenderError(f"bad z range [{self.z_lo}, {self.z_hi}) for B={self.B}")

    @property
    def x_dim(self) -> int:
        return min(d for d in self.triple if d != self.z_dim)

    @property
    def y_dim(self) -> int:
        return max(d for d in self.triple if d != self.z_dim)


@dataclass
class RenderedImage:
    """A B x B heatmap with its provenance.

    `intensities` is (B, B, 3) float in [0, 1], indexed [y_bin, x_bin];
    row 0 is y bin 0, which sits at the *bottom* of the displayed image.
    `cells` carries the raw per-cell subtotals in the same orientation.
    """

    spec: ImageSpec
    intensities: np.ndarray
    cells: np.ndarray
    total: float
    expected: float  # region total / B^2; the neutral level
    cube_total: float  # whole-cube total, for re-normalizing if wanted
    degenerate: bool = False
    score: float | None = None

    def red_mean(self) -> float:
        return float(self.intensities[:, :, 0].mean())

    def quantized(self) -> np.ndarray:
        """8-bit pixels, round-half-up."""
        return np.floor(self.intensities * 255.0 + 0.5).astype(np.uint8)


def render(cube: AggregateCube, spec: ImageSpec) -> RenderedImage:
    """Collapse the cube over the spec's z range and color each (x, y) cell.

    An empty region (total <= 0) renders all black and is flagged
    degenerate so ranking scores it zero.
    """
    if spec.B != cube.B:
        raise RenderError(f"spec bins {spec.B} != cube bins {cube.B}")
    if tuple(spec.triple) != tuple(cube.triple):
        raise RenderError(f"spec triple {spec.triple} != cube triple {cube.triple}")
    grid = cube.grid
    axis = cube.triple.index(spec.z_dim)
    region = grid.take(range(spec.z_lo, spec.z_hi), axis=axis).sum(axis=axis)
    # After removing the z axis the remaining axes are (x, y) in dimension
    # order, because x is defined as the smaller remaining dimension id.
    cells_xy = region.astype(np.float64)
    total = float(cells_xy.sum())
    cube_total = float(cube.cells.sum())
    B = cube.B
    if total <= 0:
        return RenderedImage(
            spec=spec,
            intensities=np.zeros((B, B, 3), dtype=np.float64),
            cells=cells_xy.T.copy(),
            total=total,
            expected=0.0,
            cube_total=cube_total,
            degenerate=True,
        )
    expected = total / (B * B)
    rgb = intensity(cells_xy, expected)  # indexed [x, y, ch]
    return RenderedImage(
        spec=spec,
        intensities=np.transpose(rgb, (1, 0, 2)),
        cells=cells_xy.T.copy(),
        total=total,
        expected=expected,
        cube_total=cube_total,
    )


def image_group(cube: AggregateCube, k: int) -> list[RenderedImage]:
    """All 3k images of a cube: each dimension takes a turn as z, split
    into k equal contiguous bin ranges."""
    if k < 1 or cube.B % k != 0:
        raise RenderError(f"k={k} must divide B={cube.B}")
    step = cube.B // k
    out = []
    for z_dim in cube.triple:
        for i in range(k):
            spec = ImageSpec(cube.triple, z_dim, i * step, (i + 1) * step, cube.B)
            out.append(render(cube, spec))
    return out


def encode(
    image: RenderedImage,
    png_path: str | Path,
    sidecar_path: str | Path | None = None,
    boundary_refs: dict | None = None,
) -> None:
    """Write a lossless PNG plus a JSON sidecar with the render context.

    The PNG is flipped so y bin 0 lands at the bottom of the file's raster.
    `boundary_refs` names the bin-boundary files for the image's axes.
    """
    pixels = image.quantized()
    Image.fromarray(pixels[::-1], mode="RGB").save(png_path, format="PNG")
    if sidecar_path is not None:
        Path(sidecar_path).write_text(json.dumps(sidecar(image, boundary_refs), indent=1))


def sidecar(image: RenderedImage, boundary_refs: dict | None = None) -> dict:
    s = image.spec
    doc = {
        "triple": list(s.triple),
        "x_dim": s.x_dim,
        "y_dim": s.y_dim,
        "z_dim": s.z_dim,
        "z_range": [s.z_lo, s.z_hi],
        "bins": s.B,
        "total": image.total,
        "expected": image.expected,
        "cube_total": image.cube_total,
        "expected_whole_cube": image.cube_total / (s.B * s.B),
        "degenerate": image.degenerate,
        "red_mean": image.red_mean(),
    }
    if boundary_refs:
        doc["bin_boundaries"] = boundary_refs
    return doc


def decode(png_path: str | Path) -> np.ndarray:
    """Read a PNG back into raster orientation (row 0 = y bin 0)."""
    with Image.open(png_path) as im:
        arr = np.asarray(im.convert("RGB"))
    return arr[::-1].copy()
