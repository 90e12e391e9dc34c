# =======================================================================
# Project:      SeqPack Solver
# File:         Problem and solution data model
# =======================================================================

"""
Instances, derived polygons and solutions.

All values are immutable after construction and safe to share between
concurrent solves.
"""
from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction
from functools import cached_property
from typing import Dict, List, Optional, Sequence, Tuple
import logging

from geometry import (
    ConvexPolygon,
    Location,
    Point2,
    RatLike,
    convex_hull,
    minkowski_sum,
    point_in_convex_polygon,
    polygon_centroid,
    to_rat,
)
from exceptions import DegenerateInput, InvalidInstance, TieError

logger = logging.getLogger(__name__)


class SolverMode(str, Enum):
    """How sequential constraints are handed to the solver"""
    CEGAR = "cegar"
    EAGER = "eager"


class SolveStatus(str, Enum):
    """Result of a solve"""
    SAT = "sat"
    UNSAT = "unsat"
    TIMEOUT = "timeout"


@dataclass(frozen=True)
class PrintObject:
    id: str
    footprint: ConvexPolygon
    source_points: Optional[Tuple[Tuple[Fraction, Fraction, Fraction], ...]] = None
    height: Optional[Fraction] = None


@dataclass(frozen=True)
class Extruder:
    footprint: ConvexPolygon

    def __post_init__(self):
        if point_in_convex_polygon(Point2(0, 0), self.footprint) == Location.OUTSIDE:
            raise InvalidInstance("Extruder footprint must contain the nozzle point (0, 0)")

    @classmethod
    def square(cls, half_size: RatLike) -> "Extruder":
        h = to_rat(half_size)
        return cls(ConvexPolygon.rectangle(2 * h, 2 * h, -h, -h))


@dataclass(frozen=True)
class Plate:
    polygon: ConvexPolygon
    center: Optional[Point2] = None

    def __post_init__(self):
        if self.center is None:
            object.__setattr__(self, "center", polygon_centroid(self.polygon))
        if point_in_convex_polygon(self.center, self.polygon) != Location.INSIDE:
            raise InvalidInstance(f"Plate center {self.center} is not inside the plate")

    @classmethod
    def rectangle(cls, width: RatLike, height: RatLike) -> "Plate":
        return cls(ConvexPolygon.rectangle(width, height))


@dataclass(frozen=True)
class SolverParams:
    epsilon_t: Fraction = Fraction(1)
    epsilon_xy: Fraction = Fraction(1, 128)
    timeout_ms: int = 8000
    mode: SolverMode = SolverMode.CEGAR
    optimize_sigma: bool = True

    def __post_init__(self):
        object.__setattr__(self, "epsilon_t", to_rat(self.epsilon_t))
        object.__setattr__(self, "epsilon_xy", to_rat(self.epsilon_xy))
        object.__setattr__(self, "mode", SolverMode(self.mode))
        if self.epsilon_t <= 0:
            raise InvalidInstance(f"epsilon_t must be positive, got {self.epsilon_t}")
        if not 0 < self.epsilon_xy < 1:
            raise InvalidInstance(f"epsilon_xy must lie in (0, 1), got {self.epsilon_xy}")
        if self.timeout_ms <= 0:
            raise InvalidInstance(f"timeout_ms must be positive, got {self.timeout_ms}")


@dataclass(frozen=True)
class Envelope:
    object_id: str
    polygon: ConvexPolygon


@dataclass(frozen=True, eq=False)
class Instance:
    plate: Plate
    extruder: Extruder
    objects: Tuple[PrintObject, ...]
    params: SolverParams = field(default_factory=SolverParams)
    name: str = "instance"

    def __post_init__(self):
        object.__setattr__(self, "objects", tuple(self.objects))
        if not self.objects:
            raise InvalidInstance("An instance needs at least one object")
        ids = [o.id for o in self.objects]
        duplicates = sorted({i for i in ids if ids.count(i) > 1})
        if duplicates:
            raise InvalidInstance(f"Duplicate object ids: {', '.join(duplicates)}")

    def __eq__(self, other) -> bool:
        if not isinstance(other, Instance):
            return NotImplemented
        return (self.plate, self.extruder, self.objects, self.params, self.name) == \
            (other.plate, other.extruder, other.objects, other.params, other.name)

    __hash__ = object.__hash__

    @property
    def k(self) -> int:
        return len(self.objects)

    @cached_property
    def envelopes(self) -> Tuple[Envelope, ...]:
        return tuple(build_envelope(obj, self.extruder) for obj in self.objects)

    def index_of(self, object_id: str) -> int:
        for i, obj in enumerate(self.objects):
            if obj.id == object_id:
                return i
        raise KeyError(object_id)

    def subset(self, indices: Sequence[int], **param_changes) -> "Instance":
        """Instance restricted to the given objects, optionally with changed params"""
        params = replace(self.params, **param_changes) if param_changes else self.params
        return Instance(
            plate=self.plate,
            extruder=self.extruder,
            objects=tuple(self.objects[i] for i in indices),
            params=params,
            name=self.name,
        )

    def with_params(self, **param_changes) -> "Instance":
        return self.subset(range(self.k), **param_changes)


@dataclass(frozen=True)
class ObjectPosition:
    x: Fraction
    y: Fraction
    t: Fraction

    def __post_init__(self):
        object.__setattr__(self, "x", to_rat(self.x))
        object.__setattr__(self, "y", to_rat(self.y))
        object.__setattr__(self, "t", to_rat(self.t))


@dataclass(frozen=True)
class Placement:
    """Per-object (X, Y, T) keyed by object id, in instance order"""
    positions: Dict[str, ObjectPosition]

    def __getitem__(self, object_id: str) -> ObjectPosition:
        return self.positions[object_id]

    def __contains__(self, object_id: str) -> bool:
        return object_id in self.positions

    def order(self) -> List[str]:
        """Object ids sorted by ascending print time"""
        return [oid for oid, _ in sorted(self.positions.items(), key=lambda kv: kv[1].t)]


@dataclass
class SolveStats:
    refinement_rounds: int = 0
    constraints_added: int = 0
    solver_calls: int = 0
    sigma_iterations: int = 0
    wall_ms: int = 0
    search_complete: bool = True


@dataclass
class SolveOutcome:
    status: SolveStatus
    placement: Optional[Placement] = None
    sigma_star: Optional[Fraction] = None
    sigma_lower: Optional[Fraction] = None
    stats: SolveStats = field(default_factory=SolveStats)
    solver_name: str = ""
    solver_version: str = ""

    def __post_init__(self):
        if (self.placement is not None) != (self.status == SolveStatus.SAT):
            raise ValueError("A placement is present exactly when the status is SAT")


# -----------------------------------------------------------------------
# Operations
# -----------------------------------------------------------------------

def build_envelope(obj: PrintObject, ext: Extruder) -> Envelope:
    """Region swept by the extruder while printing obj: footprint (+) extruder footprint"""
    return Envelope(object_id=obj.id, polygon=minkowski_sum(obj.footprint, ext.footprint))


def permutation_of(placement: Placement, epsilon_t: RatLike = 1, ids: Optional[Sequence[str]] = None) -> List[int]:
    """
    Print order as 1-based object numbers sorted by ascending T.

    ids fixes the numbering (defaults to placement insertion order). Raises
    TieError when two times are not more than epsilon_t apart.
    """
    eps = to_rat(epsilon_t)
    ids = list(ids) if ids is not None else list(placement.positions)
    times = sorted((placement[oid].t, n + 1) for n, oid in enumerate(ids))
    for (t1, n1), (t2, n2) in zip(times, times[1:]):
        if t2 - t1 <= eps:
            raise TieError(
                f"Print times of objects {n1} and {n2} differ by {t2 - t1}, not more than {eps}",
                details="temporal separation constraint was not honoured"
            )
    return [n for _, n in times]


def footprint_from_points(points: Sequence[Point2]) -> Tuple[ConvexPolygon, bool]:
    """
    Hull of a footprint outline. Returns (hull, was_convex) where was_convex
    is False when the outline had to be changed to become convex.
    """
    hull = convex_hull(points)
    try:
        given = ConvexPolygon(points)
        return hull, given == hull
    except DegenerateInput:
        return hull, False
