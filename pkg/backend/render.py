# =======================================================================
# Project:      SeqPack Solver
# File:         SVG rendering of placements
# =======================================================================

"""
Static SVG picture of one plate: plate outline, the sigma-scaled plate
(dashed) when sigma < 1, filled object hulls, outlined extruder envelopes
and print-order numbers at the hull centroids. Plate y grows upward.
"""
import logging
from fractions import Fraction
from typing import List, Tuple

import svgwrite

from geometry import ConvexPolygon, Point2, Vec2, polygon_centroid, scale_about, to_rat, translate
from model import Instance, Placement

logger = logging.getLogger(__name__)

MARGIN = 10
STYLE = """
    .plate { fill: #f4f4f0; stroke: #333333; stroke-width: 0.6; }
    .scaled { fill: none; stroke: #777777; stroke-width: 0.4; stroke-dasharray: 3,2; }
    .hull { fill: #6d9dc5; fill-opacity: 0.85; stroke: #1f4e79; stroke-width: 0.4; }
    .envelope { fill: none; stroke: #c0504d; stroke-width: 0.3; stroke-dasharray: 1.5,1; }
    .order { font-family: sans-serif; font-size: 6px; text-anchor: middle; dominant-baseline: central; fill: #111111; }
"""


def _num(value: Fraction) -> float:
    return round(float(value), 4)


def render_svg(instance: Instance, placement: Placement, sigma=1) -> str:
    """
    SVG text for a placement; identical inputs give identical bytes.

    Args:
        instance: Instance the placement belongs to
        placement: Positions and print times of every object
        sigma: Plate scale to draw as the inner (dashed) plate

    Returns:
        SVG 1.1 document as a string
    """
    sigma = to_rat(sigma)
    x0, y0, x1, y1 = instance.plate.polygon.bounds()

    hulls: List[ConvexPolygon] = []
    envelopes: List[ConvexPolygon] = []
    for obj, env in zip(instance.objects, instance.envelopes):
        pos = placement[obj.id]
        hulls.append(translate(obj.footprint, Vec2(pos.x, pos.y)))
        envelopes.append(translate(env.polygon, Vec2(pos.x, pos.y)))
    for poly in envelopes:
        bx0, by0, bx1, by1 = poly.bounds()
        x0, y0, x1, y1 = min(x0, bx0), min(y0, by0), max(x1, bx1), max(y1, by1)

    width = _num(x1 - x0) + 2 * MARGIN
    height = _num(y1 - y0) + 2 * MARGIN

    def flip(p: Point2) -> Tuple[float, float]:
        return _num(p.x - x0) + MARGIN, _num(y1 - p.y) + MARGIN

    dwg = svgwrite.Drawing(size=(f"{width}mm", f"{height}mm"), viewBox=f"0 0 {width} {height}")
    dwg.defs.add(dwg.style(STYLE))

    plate_group = dwg.g(id="plate")
    plate_group.add(dwg.polygon([flip(v) for v in instance.plate.polygon.vertices], class_="plate"))
    if sigma < 1:
        scaled = scale_about(instance.plate.polygon, sigma, instance.plate.center)
        plate_group.add(dwg.polygon([flip(v) for v in scaled.vertices], class_="scaled"))
    dwg.add(plate_group)

    hull_group = dwg.g(id="hulls")
    for hull in hulls:
        hull_group.add(dwg.polygon([flip(v) for v in hull.vertices], class_="hull"))
    dwg.add(hull_group)

    envelope_group = dwg.g(id="envelopes")
    for env in envelopes:
        envelope_group.add(dwg.polygon([flip(v) for v in env.vertices], class_="envelope"))
    dwg.add(envelope_group)

    order_group = dwg.g(id="order")
    index = {obj.id: n for n, obj in enumerate(instance.objects)}
    for rank, oid in enumerate(placement.order(), start=1):
        cx, cy = flip(polygon_centroid(hulls[index[oid]]))
        order_group.add(dwg.text(str(rank), insert=(cx, cy), class_="order"))
    dwg.add(order_group)

    logger.debug(f"Rendered {instance.k} objects of {instance.name} at sigma={sigma}")
    return dwg.tostring()
