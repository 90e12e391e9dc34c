# =======================================================================
# Project:      SeqPack Solver
# File:         Independent placement certifier
# =======================================================================

"""
Exact re-check of a placement without the SMT solver.

For every ordered pair printed i before j, the translated hull of i must not
overlap the translated extruder envelope of j. Keeping that envelope clear
also keeps vertical access for the extruder clear, so there is no separate
traversability check. Every hull must lie in the sigma-scaled plate and
print times must be separated by more than epsilon_t.
"""
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from math import ceil, floor
from typing import Any, Dict, List, Tuple
import logging

from geometry import (
    ConvexPolygon,
    Location,
    Overlap,
    Point2,
    Segment,
    Vec2,
    point_in_convex_polygon,
    polygons_disjoint,
    scale_about,
    segments_cross_properly,
    segments_intersect,
    to_rat,
    translate,
)
from model import Instance, Placement
from exceptions import InvalidScale, MissingPlacement

logger = logging.getLogger(__name__)


class ViolationKind(str, Enum):
    SEQ_OVERLAP = "seq_overlap"
    PLATE_ESCAPE = "plate_escape"
    TEMPORAL_TIE = "temporal_tie"


@dataclass(frozen=True)
class Violation:
    kind: ViolationKind
    object_ids: Tuple[str, ...]
    witness: str

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind.value, "object_ids": list(self.object_ids), "witness": self.witness}


@dataclass
class VerifyReport:
    sigma: Fraction
    violations: List[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def of_kind(self, kind: ViolationKind) -> List[Violation]:
        return [v for v in self.violations if v.kind == kind]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "ok": self.ok,
            "sigma": str(self.sigma),
            "violations": [v.to_dict() for v in self.violations],
        }


def _overlap_witness(hull: ConvexPolygon, env: ConvexPolygon, overlap: Overlap) -> str:
    for a, (sa, ea) in enumerate(hull.edges()):
        for b, (sb, eb) in enumerate(env.edges()):
            if segments_cross_properly(Segment(sa, ea), Segment(sb, eb)):
                return f"edges {a},{b} cross"
    if overlap == Overlap.TOUCHING:
        return "boundary contact"
    for a, (sa, ea) in enumerate(hull.edges()):
        for b, (sb, eb) in enumerate(env.edges()):
            if segments_intersect(Segment(sa, ea), Segment(sb, eb)):
                return f"edges {a},{b} meet"
    return "containment"


def verify_solution(
    instance: Instance,
    placement: Placement,
    sigma=1,
    allow_touching: bool = True,
) -> VerifyReport:
    """
    Certify a placement against the instance.

    Args:
        instance: Problem the placement claims to solve
        placement: X, Y, T per object id
        sigma: Plate scale the placement must respect, in (0, 1]
        allow_touching: When False, boundary contact between a hull and a
            later envelope is reported as SEQ_OVERLAP

    Returns:
        VerifyReport whose ok flag is True exactly when no violation was found

    Raises:
        MissingPlacement: If an object has no position or an unknown id is placed
    """
    sigma = to_rat(sigma)
    if not 0 < sigma <= 1:
        raise InvalidScale(f"Plate scale must lie in (0, 1], got {sigma}")

    ids = [obj.id for obj in instance.objects]
    missing = [oid for oid in ids if oid not in placement]
    if missing:
        raise MissingPlacement(f"No position for objects: {', '.join(missing)}")
    unknown = sorted(set(placement.positions) - set(ids))
    if unknown:
        raise MissingPlacement(f"Placement names objects not in the instance: {', '.join(unknown)}")

    report = VerifyReport(sigma=sigma)
    eps = instance.params.epsilon_t
    hulls = []
    envs = []
    for obj, env in zip(instance.objects, instance.envelopes):
        pos = placement[obj.id]
        offset = Vec2(pos.x, pos.y)
        hulls.append(translate(obj.footprint, offset))
        envs.append(translate(env.polygon, offset))

    # Print times
    timed = sorted((placement[oid].t, oid) for oid in ids)
    for (t1, id1), (t2, id2) in zip(timed, timed[1:]):
        if t2 - t1 <= eps:
            report.violations.append(Violation(
                ViolationKind.TEMPORAL_TIE, (id1, id2), f"gap {t2 - t1} <= {eps}"
            ))

    # Earlier hull against later envelope
    for i, id_i in enumerate(ids):
        for j, id_j in enumerate(ids):
            if i == j or not placement[id_i].t < placement[id_j].t:
                continue
            overlap = polygons_disjoint(hulls[i], envs[j])
            if overlap == Overlap.OVERLAPPING or (overlap == Overlap.TOUCHING and not allow_touching):
                report.violations.append(Violation(
                    ViolationKind.SEQ_OVERLAP, (id_i, id_j), _overlap_witness(hulls[i], envs[j], overlap)
                ))

    # Plate containment
    scaled_plate = scale_about(instance.plate.polygon, sigma, instance.plate.center)
    for i, oid in enumerate(ids):
        for n, vertex in enumerate(hulls[i].vertices):
            if point_in_convex_polygon(vertex, scaled_plate) == Location.OUTSIDE:
                report.violations.append(Violation(
                    ViolationKind.PLATE_ESCAPE, (oid,), f"vertex {n} at ({vertex.x}, {vertex.y})"
                ))
                break

    if report.ok:
        logger.debug(f"Placement for {instance.name} certified at sigma={sigma}")
    else:
        logger.info(f"Placement for {instance.name} has {len(report.violations)} violations at sigma={sigma}")
    return report


def sample_overlap_oracle(a: ConvexPolygon, b: ConvexPolygon, grid_step) -> bool:
    """True if some grid point lies strictly inside both polygons"""
    step = to_rat(grid_step)
    if step <= 0:
        raise ValueError(f"grid_step must be positive, got {step}")
    ax0, ay0, ax1, ay1 = a.bounds()
    bx0, by0, bx1, by1 = b.bounds()
    x0, y0 = max(ax0, bx0), max(ay0, by0)
    x1, y1 = min(ax1, bx1), min(ay1, by1)
    if x0 >= x1 or y0 >= y1:
        return False
    for ix in range(ceil(x0 / step), floor(x1 / step) + 1):
        for iy in range(ceil(y0 / step), floor(y1 / step) + 1):
            p = Point2(ix * step, iy * step)
            if point_in_convex_polygon(p, a) == Location.INSIDE and point_in_convex_polygon(p, b) == Location.INSIDE:
                return True
    return False
