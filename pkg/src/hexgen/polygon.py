"""Convex polygon clipping and area."""
from __future__ import annotations

from typing import Sequence

Point = tuple[float, float]


def polygon_area(poly: Sequence[Point]) -> float:
    """Unsigned shoelace area."""
    n = len(poly)
    if n < 3:
        return 0.0
    acc = 0.0
    for k in range(n):
        x0, y0 = poly[k]
        x1, y1 = poly[(k + 1) % n]
        acc += x0 * y1 - x1 * y0
    return abs(acc) * 0.5


def _clip_halfplane(poly: list[Point], axis: int, bound: float, keep_below: bool) -> list[Point]:
    out: list[Point] = []
    n = len(poly)
    if n == 0:
        return out

    def inside(p: Point) -> bool:
        return p[axis] <= bound if keep_below else p[axis] >= bound

    prev = poly[-1]
    prev_in = inside(prev)
    for cur in poly:
        cur_in = inside(cur)
        if cur_in != prev_in:
            t = (bound - prev[axis]) / (cur[axis] - prev[axis])
            x = prev[0] + t * (cur[0] - prev[0])
            y = prev[1] + t * (cur[1] - prev[1])
            pt = (bound, y) if axis == 0 else (x, bound)
            out.append(pt)
        if cur_in:
            out.append(cur)
        prev, prev_in = cur, cur_in
    return out


def clip_to_box(poly: Sequence[Point], xmin: float, ymin: float, xmax: float, ymax: float) -> list[Point]:
    """Sutherland-Hodgman clip of a convex polygon against an axis-aligned box."""
    out = list(poly)
    out = _clip_halfplane(out, 0, xmin, keep_below=False)
    out = _clip_halfplane(out, 0, xmax, keep_below=True)
    out = _clip_halfplane(out, 1, ymin, keep_below=False)
    out = _clip_halfplane(out, 1, ymax, keep_below=True)
    return out


def box_intersection_area(poly: Sequence[Point], xmin: float, ymin: float, xmax: float, ymax: float) -> float:
    return polygon_area(clip_to_box(poly, xmin, ymin, xmax, ymax))
