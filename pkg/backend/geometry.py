# =======================================================================
# Project:      SeqPack Solver
# File:         Exact rational 2D geometry
# =======================================================================

"""
Exact 2D computational geometry over rationals.

Every coordinate is a ``fractions.Fraction``; no operation in this module
rounds. Polygons are convex, counterclockwise, free of collinear and
duplicate vertices and have positive area.
"""
from dataclasses import dataclass
from decimal import Decimal
from enum import Enum
from fractions import Fraction
from functools import cmp_to_key
from typing import Iterable, List, Sequence, Tuple, Union
import logging

from exceptions import DegenerateInput, InvalidScale, GeometryError

logger = logging.getLogger(__name__)

Rat = Fraction
RatLike = Union[Fraction, int, str, Decimal]


def to_rat(value: RatLike) -> Fraction:
    """
    Convert a number to an exact rational.

    Strings may be integers, decimals ("2.5") or fractions ("7/2"). Floats are
    converted through their shortest decimal repr so that 0.1 means 1/10.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise GeometryError(f"Not a number: {value!r}")
    if isinstance(value, float):
        return Fraction(repr(value))
    try:
        return Fraction(value)
    except (ValueError, TypeError, ZeroDivisionError) as e:
        raise GeometryError(f"Not a rational number: {value!r}", details=str(e))


class Location(str, Enum):
    """Position of a point relative to a closed convex polygon"""
    INSIDE = "inside"
    ON_BOUNDARY = "on_boundary"
    OUTSIDE = "outside"


class Overlap(str, Enum):
    """Relation between two convex polygons"""
    DISJOINT = "disjoint"
    TOUCHING = "touching"
    OVERLAPPING = "overlapping"


@dataclass(frozen=True, order=True)
class Point2:
    x: Fraction
    y: Fraction

    def __post_init__(self):
        object.__setattr__(self, "x", to_rat(self.x))
        object.__setattr__(self, "y", to_rat(self.y))

    def __add__(self, other: "Vec2") -> "Point2":
        return Point2(self.x + other.dx, self.y + other.dy)

    def __sub__(self, other: "Point2") -> "Vec2":
        return Vec2(self.x - other.x, self.y - other.y)

    def as_vec(self) -> "Vec2":
        return Vec2(self.x, self.y)

    def __repr__(self) -> str:
        return f"Point2({self.x}, {self.y})"


@dataclass(frozen=True)
class Vec2:
    dx: Fraction
    dy: Fraction

    def __post_init__(self):
        object.__setattr__(self, "dx", to_rat(self.dx))
        object.__setattr__(self, "dy", to_rat(self.dy))

    def __add__(self, other: "Vec2") -> "Vec2":
        return Vec2(self.dx + other.dx, self.dy + other.dy)

    def __neg__(self) -> "Vec2":
        return Vec2(-self.dx, -self.dy)

    def __mul__(self, k: RatLike) -> "Vec2":
        k = to_rat(k)
        return Vec2(self.dx * k, self.dy * k)

    __rmul__ = __mul__

    def cross(self, other: "Vec2") -> Fraction:
        return self.dx * other.dy - self.dy * other.dx

    def dot(self, other: "Vec2") -> Fraction:
        return self.dx * other.dx + self.dy * other.dy

    def is_zero(self) -> bool:
        return self.dx == 0 and self.dy == 0


@dataclass(frozen=True)
class Segment:
    p: Point2
    q: Point2

    def __post_init__(self):
        if self.p == self.q:
            raise DegenerateInput(f"Segment endpoints coincide: {self.p}")

    @property
    def direction(self) -> Vec2:
        return self.q - self.p


def orientation(o: Point2, a: Point2, b: Point2) -> Fraction:
    """Twice the signed area of triangle (o, a, b); > 0 means counterclockwise"""
    return (a - o).cross(b - o)


def _sign(value: Fraction) -> int:
    return (value > 0) - (value < 0)


class ConvexPolygon:
    """Counterclockwise strictly convex polygon with exact vertices."""

    __slots__ = ("_vertices",)

    def __init__(self, vertices: Iterable[Point2]):
        verts = tuple(v if isinstance(v, Point2) else Point2(*v) for v in vertices)
        if len(verts) < 3:
            raise DegenerateInput(f"Polygon needs at least 3 vertices, got {len(verts)}")
        n = len(verts)
        for i in range(n):
            if orientation(verts[i], verts[(i + 1) % n], verts[(i + 2) % n]) <= 0:
                raise DegenerateInput(
                    "Vertices are not strictly convex and counterclockwise",
                    details=f"turn at {verts[(i + 1) % n]}"
                )
        # A strictly left-turning closed chain may still wind more than once.
        if _signed_area2(verts) <= 0 or _winding_turns(verts) != 1:
            raise DegenerateInput("Vertex chain is not a simple convex polygon")
        self._vertices = verts

    @property
    def vertices(self) -> Tuple[Point2, ...]:
        return self._vertices

    def __len__(self) -> int:
        return len(self._vertices)

    def __iter__(self):
        return iter(self._vertices)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ConvexPolygon):
            return NotImplemented
        return canonical_vertices(self) == canonical_vertices(other)

    def __hash__(self) -> int:
        return hash(canonical_vertices(self))

    def __repr__(self) -> str:
        inner = ", ".join(f"({v.x}, {v.y})" for v in self._vertices)
        return f"ConvexPolygon([{inner}])"

    def edges(self) -> List[Tuple[Point2, Point2]]:
        """Edges (A_a, A_{a+1}) in vertex order, closing back to the first vertex"""
        n = len(self._vertices)
        return [(self._vertices[i], self._vertices[(i + 1) % n]) for i in range(n)]

    def edge(self, index: int) -> Tuple[Point2, Point2]:
        n = len(self._vertices)
        return self._vertices[index % n], self._vertices[(index + 1) % n]

    def area(self) -> Fraction:
        return _signed_area2(self._vertices) / 2

    def bounds(self) -> Tuple[Fraction, Fraction, Fraction, Fraction]:
        xs = [v.x for v in self._vertices]
        ys = [v.y for v in self._vertices]
        return min(xs), min(ys), max(xs), max(ys)

    @classmethod
    def rectangle(cls, width: RatLike, height: RatLike, x0: RatLike = 0, y0: RatLike = 0) -> "ConvexPolygon":
        w, h, x, y = to_rat(width), to_rat(height), to_rat(x0), to_rat(y0)
        return cls([Point2(x, y), Point2(x + w, y), Point2(x + w, y + h), Point2(x, y + h)])


def _signed_area2(verts: Sequence[Point2]) -> Fraction:
    n = len(verts)
    return sum((verts[i].x * verts[(i + 1) % n].y - verts[(i + 1) % n].x * verts[i].y for i in range(n)), Fraction(0))


def _half(v: Vec2) -> int:
    """0 for directions in [0, pi), 1 for [pi, 2*pi)"""
    return 0 if (v.dy > 0 or (v.dy == 0 and v.dx > 0)) else 1


def _winding_turns(verts: Sequence[Point2]) -> int:
    # Count how many times edge directions wrap from the upper to the lower half-plane.
    n = len(verts)
    dirs = [verts[(i + 1) % n] - verts[i] for i in range(n)]
    wraps = sum(1 for i in range(n) if _half(dirs[i]) == 1 and _half(dirs[(i + 1) % n]) == 0)
    return wraps


def canonical_vertices(poly: ConvexPolygon) -> Tuple[Point2, ...]:
    """Vertex tuple rotated to start at the lowest, then leftmost, vertex"""
    verts = poly.vertices
    start = min(range(len(verts)), key=lambda i: (verts[i].y, verts[i].x))
    return verts[start:] + verts[:start]


# -----------------------------------------------------------------------
# Hulls and sums
# -----------------------------------------------------------------------

def convex_hull(points: Iterable[Point2]) -> ConvexPolygon:
    """
    Convex hull by Andrew's monotone chain, exact.

    Collinear boundary points are dropped, so every hull vertex is an input
    point and the result is strictly convex.

    Raises:
        DegenerateInput: fewer than 3 distinct points, or all collinear
    """
    pts = sorted(set(p if isinstance(p, Point2) else Point2(*p) for p in points))
    if len(pts) < 3:
        raise DegenerateInput(f"Convex hull needs 3 distinct points, got {len(pts)}")

    lower: List[Point2] = []
    for p in pts:
        while len(lower) > 1 and orientation(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)

    upper: List[Point2] = []
    for p in reversed(pts):
        while len(upper) > 1 and orientation(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)

    hull = lower[:-1] + upper[:-1]
    if len(hull) < 3:
        raise DegenerateInput("All points are collinear", details=f"{len(pts)} distinct points")
    return ConvexPolygon(hull)


def _edge_angle_cmp(u: Vec2, v: Vec2) -> int:
    hu, hv = _half(u), _half(v)
    if hu != hv:
        return -1 if hu < hv else 1
    c = u.cross(v)
    return -1 if c > 0 else (1 if c < 0 else 0)


def minkowski_sum(a: ConvexPolygon, b: ConvexPolygon) -> ConvexPolygon:
    """
    Minkowski sum {p + q | p in a, q in b} of two convex polygons.

    Merges the two counterclockwise edge sequences by direction angle, both
    starting at their lowest-leftmost vertex. When an edge of one polygon has
    the same direction as an edge of the other, falls back to the hull of all
    pairwise vertex sums.
    """
    pa, pb = canonical_vertices(a), canonical_vertices(b)
    ea = [pa[(i + 1) % len(pa)] - pa[i] for i in range(len(pa))]
    eb = [pb[(i + 1) % len(pb)] - pb[i] for i in range(len(pb))]

    result: List[Point2] = []
    current = pa[0] + pb[0].as_vec()
    i = j = 0
    while i < len(ea) or j < len(eb):
        result.append(current)
        if i < len(ea) and j < len(eb):
            order = _edge_angle_cmp(ea[i], eb[j])
            if order == 0:
                return _pairwise_sum_hull(a, b)
            if order < 0:
                step = ea[i]
                i += 1
            else:
                step = eb[j]
                j += 1
        elif i < len(ea):
            step = ea[i]
            i += 1
        else:
            step = eb[j]
            j += 1
        current = current + step

    return ConvexPolygon(result)


def _pairwise_sum_hull(a: ConvexPolygon, b: ConvexPolygon) -> ConvexPolygon:
    return convex_hull(p + q.as_vec() for p in a.vertices for q in b.vertices)


# -----------------------------------------------------------------------
# Predicates
# -----------------------------------------------------------------------

def point_in_convex_polygon(p: Point2, poly: ConvexPolygon) -> Location:
    """Classify p against the closed polygon; exact, no tolerance"""
    on_edge = False
    for start, end in poly.edges():
        side = orientation(start, end, p)
        if side < 0:
            return Location.OUTSIDE
        if side == 0:
            on_edge = True
    return Location.ON_BOUNDARY if on_edge else Location.INSIDE


def _on_segment(p: Point2, q: Point2, r: Point2) -> bool:
    """r collinear with p-q assumed; true if r lies within the bounding box of p-q"""
    return min(p.x, q.x) <= r.x <= max(p.x, q.x) and min(p.y, q.y) <= r.y <= max(p.y, q.y)


def segments_intersect(s1: Segment, s2: Segment) -> bool:
    """Closed segment intersection (endpoint touching and collinear overlap count)"""
    p1, q1, p2, q2 = s1.p, s1.q, s2.p, s2.q
    d1 = _sign(orientation(p1, q1, p2))
    d2 = _sign(orientation(p1, q1, q2))
    d3 = _sign(orientation(p2, q2, p1))
    d4 = _sign(orientation(p2, q2, q1))

    if d1 * d2 < 0 and d3 * d4 < 0:
        return True
    if d1 == 0 and _on_segment(p1, q1, p2):
        return True
    if d2 == 0 and _on_segment(p1, q1, q2):
        return True
    if d3 == 0 and _on_segment(p2, q2, p1):
        return True
    if d4 == 0 and _on_segment(p2, q2, q1):
        return True
    return False


def segments_cross_properly(s1: Segment, s2: Segment) -> bool:
    """True if the segments cross at a single point interior to both"""
    d1 = _sign(orientation(s1.p, s1.q, s2.p))
    d2 = _sign(orientation(s1.p, s1.q, s2.q))
    d3 = _sign(orientation(s2.p, s2.q, s1.p))
    d4 = _sign(orientation(s2.p, s2.q, s1.q))
    return d1 * d2 < 0 and d3 * d4 < 0


def edges_parallel(u: Vec2, v: Vec2) -> bool:
    return u.cross(v) == 0


def _weakly_separated(a: ConvexPolygon, b: ConvexPolygon) -> Tuple[bool, bool]:
    """
    Separating-axis test over the edge normals of both polygons.

    Returns (weak, strict): weak if some axis leaves the projections meeting in
    at most one value, strict if some axis leaves a gap.
    """
    weak = strict = False
    for poly in (a, b):
        for start, end in poly.edges():
            u = end - start
            normal = Vec2(u.dy, -u.dx)
            pa = [v.as_vec().dot(normal) for v in a.vertices]
            pb = [v.as_vec().dot(normal) for v in b.vertices]
            gap = max(min(pb) - max(pa), min(pa) - max(pb))
            if gap > 0:
                return True, True
            if gap == 0:
                weak = True
    return weak, strict


def polygons_disjoint(a: ConvexPolygon, b: ConvexPolygon) -> Overlap:
    """
    Classify two convex polygons as DISJOINT, TOUCHING or OVERLAPPING.

    Uses the two vertex-containment directions and pairwise edge
    intersection. Boundary-only contacts (shared or collinear edges) are
    settled with an exact separating-axis test.
    """
    a_in_b = [point_in_convex_polygon(v, b) for v in a.vertices]
    b_in_a = [point_in_convex_polygon(v, a) for v in b.vertices]
    if Location.INSIDE in a_in_b or Location.INSIDE in b_in_a:
        return Overlap.OVERLAPPING

    any_contact = False
    for sa, ea in a.edges():
        seg_a = Segment(sa, ea)
        for sb, eb in b.edges():
            seg_b = Segment(sb, eb)
            if segments_cross_properly(seg_a, seg_b):
                return Overlap.OVERLAPPING
            if not any_contact and segments_intersect(seg_a, seg_b):
                any_contact = True

    # Containment: every vertex of one on the boundary of the other
    if Location.OUTSIDE not in a_in_b or Location.OUTSIDE not in b_in_a:
        return Overlap.OVERLAPPING

    if not any_contact:
        return Overlap.DISJOINT

    weak, _ = _weakly_separated(a, b)
    return Overlap.TOUCHING if weak else Overlap.OVERLAPPING


def polygon_inside_polygon(inner: ConvexPolygon, outer: ConvexPolygon) -> bool:
    """Closed containment: every vertex of inner is inside or on the boundary of outer"""
    return all(point_in_convex_polygon(v, outer) != Location.OUTSIDE for v in inner.vertices)


# -----------------------------------------------------------------------
# Transformations
# -----------------------------------------------------------------------

def scale_about(poly: ConvexPolygon, sigma: RatLike, center: Point2) -> ConvexPolygon:
    """Map each vertex v to center + sigma * (v - center)"""
    sigma = to_rat(sigma)
    if sigma <= 0:
        raise InvalidScale(f"Scale factor must be positive, got {sigma}")
    return ConvexPolygon(center + (v - center) * sigma for v in poly.vertices)


def translate(poly: ConvexPolygon, offset: Vec2) -> ConvexPolygon:
    return ConvexPolygon(v + offset for v in poly.vertices)


def project_xy(points: Iterable[Sequence[RatLike]]) -> List[Point2]:
    """Drop the z coordinate and remove duplicates, keeping first-seen order"""
    seen = set()
    projected: List[Point2] = []
    for point in points:
        p = Point2(point[0], point[1])
        if p not in seen:
            seen.add(p)
            projected.append(p)
    if not projected:
        raise DegenerateInput("Cannot project an empty point list")
    return projected


def polygon_centroid(poly: ConvexPolygon) -> Point2:
    """Exact area-weighted centroid"""
    verts = poly.vertices
    n = len(verts)
    area2 = Fraction(0)
    cx = Fraction(0)
    cy = Fraction(0)
    for i in range(n):
        p, q = verts[i], verts[(i + 1) % n]
        w = p.x * q.y - q.x * p.y
        area2 += w
        cx += (p.x + q.x) * w
        cy += (p.y + q.y) * w
    return Point2(cx / (3 * area2), cy / (3 * area2))


def sort_by_angle(vectors: Sequence[Vec2]) -> List[Vec2]:
    """Order direction vectors counterclockwise starting from the +x axis"""
    return sorted(vectors, key=cmp_to_key(_edge_angle_cmp))
