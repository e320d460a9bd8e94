"""Per-cell principal axes, focal points, and bearing-based class mining.

For each cell the member positions are centered and the 2x2 covariance is
eigen-decomposed in closed form. The first axis estimates the road; the
second points to its side. A focal point is placed at distance d along one
of the axes, and the class keeps the images whose heading faces it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateCloud,
    InvalidInput,
    MissingHeading,
    TooFewPoints,
    UndefinedBearing,
)
from .geo import CellIndex, ImageRecord, UtmPoint

LATERAL = "lateral"
FRONTAL = "frontal"
ROLES = (LATERAL, FRONTAL)

# pc_first is flipped so its east component is non-negative; below this the
# east component counts as zero and the north component decides the sign.
_SIGN_EPS = 1e-12

# lambda2/lambda1 above this marks a cell as isotropic (crossroads-like).
ISOTROPY_RATIO = 0.95


@dataclass(frozen=True)
class PrincipalFrame:
    """Centroid plus orthonormal principal axes of a 2D point cloud.

    `pc_first` spans the direction of maximum variance (the road axis),
    `pc_second` is its +90 degree counter-clockwise rotation (the facade
    axis). Eigenvalues are in square meters, lam1 >= lam2 >= 0.
    """

    mean: UtmPoint
    pc_first: np.ndarray
    pc_second: np.ndarray
    lam1: float
    lam2: float


@dataclass(frozen=True)
class FocalPoint:
    """Target point class members are oriented towards.

    `distance_d` is None for focal points loaded from a class manifest,
    which stores only the position.
    """

    position: UtmPoint
    role: str
    distance_d: float | None


@dataclass(frozen=True)
class ClassMember:
    """One image admitted to a class, with its bearing towards the focal point.

    `heading_error` is None for members loaded from a class manifest.
    """

    image_id: str
    target_bearing: float
    heading_error: float | None


@dataclass(frozen=True)
class MinedClass:
    cell: CellIndex
    role: str
    focal: FocalPoint
    members: tuple[ClassMember, ...]
    class_id: int


@dataclass(frozen=True)
class MiningConfig:
    focal_distance_d: float = 10.0
    heading_tolerance: float = 30.0
    min_images_per_class: int = 2
    emit_lateral: bool = True
    emit_frontal: bool = True
    panorama_mode: bool = False
    mirror_lateral: bool = False

    def __post_init__(self):
        if self.focal_distance_d < 0:
            raise InvalidInput(
                f"focal_distance_d must be >= 0, got {self.focal_distance_d}"
            )
        if not (0 < self.heading_tolerance <= 180):
            raise InvalidInput(
                f"heading_tolerance must be in (0, 180], got {self.heading_tolerance}"
            )
        if self.min_images_per_class < 1:
            raise InvalidInput(
                f"min_images_per_class must be >= 1, got {self.min_images_per_class}"
            )


@dataclass
class MiningReport:
    """Per-run mining diagnostics; accumulates non-fatal per-cell failures."""

    heading_tolerance: float
    focal_distance_d: float
    cells_total: int = 0
    cells_mined: int = 0
    cells_too_few_points: list[CellIndex] = field(default_factory=list)
    cells_degenerate: list[CellIndex] = field(default_factory=list)
    cells_isotropic: list[CellIndex] = field(default_factory=list)
    classes_emitted: dict[str, int] = field(
        default_factory=lambda: {LATERAL: 0, FRONTAL: 0}
    )
    classes_dropped_small: dict[str, int] = field(
        default_factory=lambda: {LATERAL: 0, FRONTAL: 0}
    )

    def to_dict(self) -> dict:
        return {
            "heading_tolerance": self.heading_tolerance,
            "focal_distance_d": self.focal_distance_d,
            "cells_total": self.cells_total,
            "cells_mined": self.cells_mined,
            "cells_too_few_points": [[c.col, c.row] for c in self.cells_too_few_points],
            "cells_degenerate": [[c.col, c.row] for c in self.cells_degenerate],
            "cells_isotropic": [[c.col, c.row] for c in self.cells_isotropic],
            "classes_emitted": dict(self.classes_emitted),
            "classes_dropped_small": dict(self.classes_dropped_small),
        }


@dataclass
class MiningResult:
    classes: list[MinedClass]
    report: MiningReport


def principal_frame(points) -> PrincipalFrame:
    """Closed-form eigen-decomposition of the covariance of a point cloud.

    Accepts a list of UtmPoint or an (n, 2) array of (east, north) rows.
    Raises TooFewPoints for n < 2 and DegenerateCloud when the cloud has
    zero total variance (all points identical).
    """
    if len(points) > 0 and isinstance(points[0], UtmPoint):
        arr = np.array([(p.east, p.north) for p in points], dtype=np.float64)
    else:
        arr = np.asarray(points, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise InvalidInput(f"expected (n, 2) coordinates, got shape {arr.shape}")
    n = arr.shape[0]
    if n < 2:
        raise TooFewPoints(f"need at least 2 points, got {n}")

    mean = arr.mean(axis=0)
    centered = arr - mean
    # Population covariance; the eigenvalues are variances in m^2.
    a = float(centered[:, 0] @ centered[:, 0]) / n
    c = float(centered[:, 1] @ centered[:, 1]) / n
    b = float(centered[:, 0] @ centered[:, 1]) / n
    if a + c == 0.0:
        raise DegenerateCloud("all points identical: zero total variance")

    half_sum = 0.5 * (a + c)
    half_diff = 0.5 * (a - c)
    disc = math.hypot(half_diff, b)
    lam1 = half_sum + disc
    lam2 = max(half_sum - disc, 0.0)

    if disc == 0.0:
        # Isotropic covariance: every direction is principal; pick east.
        v = np.array([1.0, 0.0])
    elif half_diff >= 0.0:
        v = np.array([disc + half_diff, b])  # (lam1 - c, b), well conditioned
    else:
        v = np.array([b, disc - half_diff])  # (b, lam1 - a)
    v = v / math.hypot(v[0], v[1])

    if v[0] < -_SIGN_EPS or (abs(v[0]) <= _SIGN_EPS and v[1] < 0.0):
        v = -v
    pc_first = v
    pc_second = np.array([-v[1], v[0]])  # +90 deg counter-clockwise

    return PrincipalFrame(
        mean=UtmPoint(east=float(mean[0]), north=float(mean[1])),
        pc_first=pc_first,
        pc_second=pc_second,
        lam1=lam1,
        lam2=lam2,
    )


def focal_point(
    frame: PrincipalFrame, role: str, d: float, mirror_lateral: bool = False
) -> FocalPoint:
    """Place the focal point at distance d from the centroid.

    Lateral focal points go along pc_second (towards the road side),
    frontal ones along pc_first (along the road). `mirror_lateral` flips
    the lateral side, since either side of the road is an equally valid
    canonical choice.
    """
    if role == LATERAL:
        axis = -frame.pc_second if mirror_lateral else frame.pc_second
    elif role == FRONTAL:
        axis = frame.pc_first
    else:
        raise InvalidInput(f"unknown role: {role!r}")
    pos = UtmPoint(
        east=frame.mean.east + d * float(axis[0]),
        north=frame.mean.north + d * float(axis[1]),
    )
    return FocalPoint(position=pos, role=role, distance_d=d)


def bearing_to(image_pos: UtmPoint, focal: UtmPoint) -> float:
    """Bearing in degrees from an image position to the focal point.

    Measured clockwise from north in [0, 360), via the two-argument
    arctangent of (delta_east, delta_north).
    """
    de = focal.east - image_pos.east
    dn = focal.north - image_pos.north
    if de == 0.0 and dn == 0.0:
        raise UndefinedBearing(f"image coincides with focal point at {focal}")
    deg = math.degrees(math.atan2(de, dn)) % 360.0
    return 0.0 if deg == 360.0 else deg


def circular_distance_deg(a: float, b: float) -> float:
    """Angular distance on the circle, in [0, 180]."""
    d = abs(a - b) % 360.0
    return min(d, 360.0 - d)


def select_members(
    images: list[ImageRecord], focal: FocalPoint, cfg: MiningConfig
) -> list[ClassMember]:
    """Keep the images whose heading faces the focal point within tolerance.

    In panorama mode every image is admitted with heading_error 0 (the crop
    with the target bearing is assumed available downstream). An image with
    no heading outside panorama mode raises MissingHeading naming it; an
    image exactly at the focal point has no defined bearing and is skipped.
    """
    members: list[ClassMember] = []
    missing: list[str] = []
    for img in images:
        if (
            img.position.east == focal.position.east
            and img.position.north == focal.position.north
        ):
            continue
        tb = bearing_to(img.position, focal.position)
        if cfg.panorama_mode:
            members.append(ClassMember(img.id, tb, 0.0))
            continue
        if img.heading is None:
            missing.append(img.id)
            continue
        err = circular_distance_deg(img.heading, tb)
        if err <= cfg.heading_tolerance:
            members.append(ClassMember(img.id, tb, err))
    if missing:
        raise MissingHeading(
            f"{len(missing)} image(s) without heading (panorama_mode off): "
            + ", ".join(missing)
        )
    members.sort(key=lambda m: m.image_id)
    return members


def mine_classes(
    buckets: dict[CellIndex, list[ImageRecord]], cfg: MiningConfig
) -> MiningResult:
    """Build one lateral and/or one frontal class per cell.

    Cells whose point cloud is too small or has zero variance are skipped
    and counted in the report; classes below min_images_per_class are
    dropped. class_id is dense and assigned separately per role, following
    cell (row, col) order. The returned class list is sorted by
    (role, class_id).
    """
    report = MiningReport(
        heading_tolerance=cfg.heading_tolerance,
        focal_distance_d=cfg.focal_distance_d,
    )
    roles = [r for r, on in ((LATERAL, cfg.emit_lateral), (FRONTAL, cfg.emit_frontal)) if on]
    kept: dict[str, list[tuple[CellIndex, FocalPoint, tuple[ClassMember, ...]]]] = {
        r: [] for r in roles
    }

    for cell in sorted(buckets, key=lambda idx: (idx.row, idx.col)):
        images = buckets[cell]
        report.cells_total += 1
        try:
            frame = principal_frame([img.position for img in images])
        except TooFewPoints:
            report.cells_too_few_points.append(cell)
            continue
        except DegenerateCloud:
            report.cells_degenerate.append(cell)
            continue
        report.cells_mined += 1
        if frame.lam1 > 0 and frame.lam2 / frame.lam1 > ISOTROPY_RATIO:
            report.cells_isotropic.append(cell)

        for role in roles:
            focal = focal_point(
                frame, role, cfg.focal_distance_d, mirror_lateral=cfg.mirror_lateral
            )
            members = select_members(images, focal, cfg)
            if len(members) < cfg.min_images_per_class:
                report.classes_dropped_small[role] += 1
                continue
            kept[role].append((cell, focal, tuple(members)))

    classes: list[MinedClass] = []
    for role in roles:
        for class_id, (cell, focal, members) in enumerate(kept[role]):
            classes.append(
                MinedClass(
                    cell=cell, role=role, focal=focal, members=members, class_id=class_id
                )
            )
            report.classes_emitted[role] += 1
    classes.sort(key=lambda mc: (mc.role, mc.class_id))
    return MiningResult(classes=classes, report=report)
