# =======================================================================
# Project:      SeqPack Solver
# File:         Synthetic convex polygon instances
# =======================================================================

import logging
from fractions import Fraction
from typing import List, Tuple

import numpy as np

from .base import BaseGenerator
from geometry import ConvexPolygon, Point2, Vec2, convex_hull, sort_by_angle, translate
from model import Instance, PrintObject
from constants import COMPLEX_MAX_DIAMETER, COMPLEX_MIN_DIAMETER, COMPLEX_VERTEX_RANGE, COORDINATE_GRID
from exceptions import DegenerateInput, InvalidInstance

logger = logging.getLogger(__name__)

MAX_ATTEMPTS = 50


class ComplexGenerator(BaseGenerator):
    """
    Convex polygons with vertex counts in vertex_range and diameters in
    [COMPLEX_MIN_DIAMETER, COMPLEX_MAX_DIAMETER] mm.

    Coordinates are integer multiples of 1/COORDINATE_GRID mm drawn without
    floating point, so a seed gives the same polygons on every platform.
    Random integer edge steps are walked in angle order to close a convex loop.
    """

    def __init__(self, *args, vertex_range: Tuple[int, int] = COMPLEX_VERTEX_RANGE, **kwargs):
        super().__init__(*args, **kwargs)
        lo, hi = vertex_range
        if not 3 <= lo <= hi:
            raise InvalidInstance(f"Bad vertex range {vertex_range}")
        self.vertex_range = (lo, hi)

    def _edge_steps(self, rng: np.random.Generator, n: int, span: int) -> List[int]:
        """
        n integer steps summing to zero: n distinct values in [0, span] split
        into a rising and a falling chain between their minimum and maximum
        """
        values = sorted(int(v) for v in rng.choice(span + 1, size=n, replace=False))
        lo, hi = values[0], values[-1]
        steps = []
        last_up = last_down = lo
        for value, up in zip(values[1:-1], rng.integers(0, 2, size=n - 2)):
            if up:
                steps.append(value - last_up)
                last_up = value
            else:
                steps.append(last_down - value)
                last_down = value
        steps.append(hi - last_up)
        steps.append(last_down - hi)
        return steps

    def _polygon(self, rng: np.random.Generator) -> ConvexPolygon:
        lo, hi = self.vertex_range
        for _ in range(MAX_ATTEMPTS):
            n = int(rng.integers(lo, hi + 1))
            span = int(rng.integers(COMPLEX_MIN_DIAMETER * COORDINATE_GRID, COMPLEX_MAX_DIAMETER * COORDINATE_GRID + 1))
            dxs = self._edge_steps(rng, n, span)
            dys = [int(dy) for dy in rng.permutation(self._edge_steps(rng, n, span))]
            # walking the steps in angle order closes a convex loop
            x = y = 0
            points = []
            for step in sort_by_angle([Vec2(dx, dy) for dx, dy in zip(dxs, dys)]):
                x += int(step.dx)
                y += int(step.dy)
                points.append(Point2(Fraction(x, COORDINATE_GRID), Fraction(y, COORDINATE_GRID)))
            try:
                hull = convex_hull(points)
            except DegenerateInput:
                continue
            x0, y0, x1, y1 = hull.bounds()
            # parallel steps merge into one edge; redraw those and undersized shapes
            if len(hull) == n and max(x1 - x0, y1 - y0) >= COMPLEX_MIN_DIAMETER:
                return translate(hull, Vec2(-x0, -y0))
        raise InvalidInstance(f"Could not draw a {lo}-{hi} vertex polygon in {MAX_ATTEMPTS} attempts")

    def generate(self, k: int, seed: int) -> Instance:
        if k < 1:
            raise InvalidInstance(f"k must be at least 1, got {k}")
        rng = np.random.default_rng(seed)
        objects = tuple(
            PrintObject(id=f"part-{n}", footprint=self._polygon(rng))
            for n in range(k)
        )
        logger.debug(f"Generated {k} complex polygons with seed {seed}")
        return Instance(
            plate=self.plate,
            extruder=self.extruder,
            objects=objects,
            params=self.params,
            name=f"complex-k{k}-s{seed}",
        )
