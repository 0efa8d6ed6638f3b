"""Scoring and ordering rendered images for presentation.

An image's score is the mean of its red channel (computed from unquantized
intensities), so images with large over-represented areas float up and
all-black or all-blue images score zero. Images sharing the same (x, y)
axis pair form a group; groups are ordered by the sum of member scores and
the viewer sees the top n images of the top m groups. A configurable
penalty can then demote images that repeat an already-shown axis pair under
a different partitioning dimension, trading redundancy for diversity.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .aggregate import Triple
from .viz import RenderedImage


@dataclass(frozen=True)
class RankEntry:
    """The ranking-relevant slice of one rendered image."""

    image_id: str
    triple: Triple
    x_dim: int
    y_dim: int
    z_dim: int
    z_lo: int
    score: float
    degenerate: bool = False
    effective_score: float | None = None

    @property
    def group_key(self) -> tuple[int, int]:
        return (self.x_dim, self.y_dim)

    def sort_key(self):
        # Deterministic tie-break: identical scores order by provenance.
        s = self.score if self.effective_score is None else self.effective_score
        return (-s, self.triple, self.z_dim, self.z_lo)


def score(image: RenderedImage) -> float:
    """Mean red component over all pixels; degenerate images score 0."""
    if image.degenerate:
        return 0.0
    return image.red_mean()


def entry_for(image_id: str, image: RenderedImage) -> RankEntry:
    s = image.spec
    image.score = score(image)
    return RankEntry(
        image_id=image_id,
        triple=tuple(s.triple),
        x_dim=s.x_dim,
        y_dim=s.y_dim,
        z_dim=s.z_dim,
        z_lo=s.z_lo,
        score=image.score,
        degenerate=image.degenerate,
    )


def group_images(entries: list[RankEntry]) -> dict[tuple[int, int], list[RankEntry]]:
    """Partition entries by shared (x, y) axes. Total and disjoint."""
    groups: dict[tuple[int, int], list[RankEntry]] = {}
    for e in entries:
        groups.setdefault(e.group_key, []).append(e)
    return groups


def group_score(members: list[RankEntry]) -> float:
    """Sum of member scores; degenerate members contribute nothing."""
    return sum(e.score for e in members if not e.degenerate)


def select(
    entries: list[RankEntry], n: int, m: int, reverse: bool = False
) -> list[RankEntry]:
    """Top n images of the top m groups, group-major.

    Groups order by descending total score, members by descending image
    score; all ties break deterministically, so the output is invariant
    under permutation of the input. `reverse=True` surfaces the weakest
    groups instead, under the same score.
    """
    if n < 1 or m < 1:
        raise ValueError("n and m must be >= 1")
    groups = group_images(entries)
    sign = 1 if reverse else -1
    ordered_keys = sorted(groups, key=lambda k: (sign * group_score(groups[k]), k))
    out: list[RankEntry] = []
    for key in ordered_keys[:m]:
        members = sorted(groups[key], key=RankEntry.sort_key)
        out.extend(members[:n])
    return out


def diversity_penalty(selection: list[RankEntry], factor: float) -> list[RankEntry]:
    """Demote repeat partitionings of an axis pair within its group block.

    The first image of each group fixes the group's primary z dimension;
    members with any other z dimension have their effective score
    multiplied by `factor` and the group block is re-sorted. factor=1.0 is
    the identity.
    """
    if not 0.0 <= factor <= 1.0:
        raise ValueError("penalty factor must be in [0, 1]")
    out: list[RankEntry] = []
    i = 0
    while i < len(selection):
        j = i
        while j < len(selection) and selection[j].group_key == selection[i].group_key:
            j += 1
        block = selection[i:j]
        primary_z = block[0].z_dim
        penalized = [
            replace(e, effective_score=e.score * (factor if e.z_dim != primary_z else 1.0))
            for e in block
        ]
        out.extend(sorted(penalized, key=RankEntry.sort_key))
        i = j
    return out
