"""Square-cell partition of UTM space and the non-adjacent group schedule.

Cells are half-open M-meter squares indexed by floor division; cells sharing
(col mod N, row mod N) form a group, and with N >= 2 no two cells of a group
are edge- or corner-adjacent. Groups rotate in row-major order across epochs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import DuplicateId, InvalidInput

DEFAULT_CELL_SIDE_M = 15.0
DEFAULT_GROUP_SPACING_N = 3


@dataclass(frozen=True)
class UtmPoint:
    """Planar metric position: east and north in meters."""

    east: float
    north: float


@dataclass(frozen=True)
class ImageRecord:
    """One geotagged image: unique id, UTM position, optional compass heading.

    `heading` is degrees clockwise from north in [0, 360), or None when the
    source provides no orientation (e.g. panoramas handled downstream).
    """

    id: str
    position: UtmPoint
    heading: float | None = None


@dataclass(frozen=True, order=True)
class CellIndex:
    col: int
    row: int


@dataclass(frozen=True)
class GroupId:
    gcol: int
    grow: int


@dataclass(frozen=True)
class GridConfig:
    cell_side_m: float = DEFAULT_CELL_SIDE_M
    group_spacing_n: int = DEFAULT_GROUP_SPACING_N
    origin: UtmPoint = field(default_factory=lambda: UtmPoint(0.0, 0.0))

    def __post_init__(self):
        if not (self.cell_side_m > 0):
            raise InvalidInput(f"cell_side_m must be > 0, got {self.cell_side_m}")
        if self.group_spacing_n < 2:
            raise InvalidInput(
                f"group_spacing_n must be >= 2, got {self.group_spacing_n}"
            )


def assign_cell(p: UtmPoint, cfg: GridConfig) -> CellIndex:
    """Map a point to its cell via floor division; intervals are [kM, (k+1)M)."""
    if not (math.isfinite(p.east) and math.isfinite(p.north)):
        raise InvalidInput(f"non-finite coordinate: ({p.east}, {p.north})")
    m = cfg.cell_side_m
    col = math.floor((p.east - cfg.origin.east) / m)
    row = math.floor((p.north - cfg.origin.north) / m)
    return CellIndex(col=col, row=row)


def group_of(cell: CellIndex, cfg: GridConfig) -> GroupId:
    """Component-wise non-negative modulo by the group spacing N."""
    n = cfg.group_spacing_n
    return GroupId(gcol=cell.col % n, grow=cell.row % n)


def group_for_epoch(epoch: int, cfg: GridConfig) -> GroupId:
    """Cycle through all N^2 groups in row-major order (gcol fastest)."""
    if epoch < 0:
        raise InvalidInput(f"epoch must be >= 0, got {epoch}")
    n = cfg.group_spacing_n
    return GroupId(gcol=epoch % n, grow=(epoch // n) % n)


def bucket_images(
    images: list[ImageRecord], cfg: GridConfig
) -> dict[CellIndex, list[ImageRecord]]:
    """Group images by cell.

    The returned dict iterates cells sorted by (row, col) and each bucket is
    sorted by image id, so identical inputs yield bit-identical bucket maps.
    Raises DuplicateId on repeated identifiers.
    """
    seen: set[str] = set()
    buckets: dict[CellIndex, list[ImageRecord]] = {}
    for img in images:
        if img.id in seen:
            raise DuplicateId(f"duplicate image id: {img.id!r}")
        seen.add(img.id)
        buckets.setdefault(assign_cell(img.position, cfg), []).append(img)
    ordered: dict[CellIndex, list[ImageRecord]] = {}
    for cell in sorted(buckets, key=lambda c: (c.row, c.col)):
        ordered[cell] = sorted(buckets[cell], key=lambda im: im.id)
    return ordered
