"""Exact planar helpers over concrete rectangle values.

Used to produce witness candidates for the existential points of
``partially_overlaps`` so that ground evaluation of quantified encodings is
decided rather than left open, and by the SVG renderer.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .model import ObjectKind, SpatialObject, Var

Point = tuple


def rect_values(o: SpatialObject, config: Mapping[str, object]) -> tuple:
    vals = []
    for p in o.params:
        vals.append(config[p.name] if isinstance(p, Var) else p.value)
    return tuple(vals)


def rect_corners(x, y, xv, yv, w, h) -> list[Point]:
    """Vertices in counter-clockwise order (base direction v, left normal v')."""
    p1 = (x, y)
    p2 = (x + w * xv, y + w * yv)
    p4 = (x - h * yv, y + h * xv)
    p3 = (p2[0] - h * yv, p2[1] + h * xv)
    return [p1, p2, p3, p4]


def _side(p: Point, a: Point, b: Point):
    return (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])


def clip_convex(subject: Sequence[Point], clip: Sequence[Point]) -> list[Point]:
    """Intersection of two convex counter-clockwise polygons (closed sets)."""
    out = list(subject)
    n = len(clip)
    for i in range(n):
        a, b = clip[i], clip[(i + 1) % n]
        src, out = out, []
        if not src:
            break
        for j, cur in enumerate(src):
            prev = src[j - 1]
            sc, sp = _side(cur, a, b), _side(prev, a, b)
            if sc >= 0:
                if sp < 0:
                    out.append(_cut(prev, cur, sp, sc))
                out.append(cur)
            elif sp >= 0:
                out.append(_cut(prev, cur, sp, sc))
    return out


def _cut(p, q, sp, sq) -> Point:
    t = sp / (sp - sq)
    return (p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1]))


def area(poly: Sequence[Point]):
    n = len(poly)
    total = 0
    for i in range(n):
        (x1, y1), (x2, y2) = poly[i], poly[(i + 1) % n]
        total += x1 * y2 - x2 * y1
    return total / 2


def vertex_average(poly: Sequence[Point]) -> Point:
    n = len(poly)
    return (sum(p[0] for p in poly) / n, sum(p[1] for p in poly) / n)


def in_closed(p: Point, poly: Sequence[Point]) -> bool:
    n = len(poly)
    return all(_side(p, poly[i], poly[(i + 1) % n]) >= 0 for i in range(n))


def _escape_point(v: Point, centre: Point, other: Sequence[Point]) -> Point:
    """A point on the open segment ``v -> centre`` outside closed ``other``.

    ``v`` itself must lie outside ``other``.
    """
    lo, hi = Fraction(0), Fraction(1)
    n = len(other)
    for i in range(n):
        a, b = other[i], other[(i + 1) % n]
        f0 = _side(v, a, b)
        f1 = _side(centre, a, b)
        # f(t) = f0 + t (f1 - f0) >= 0 on the part of the segment inside ``other``
        if f1 == f0:
            if f0 < 0:
                lo, hi = Fraction(1), Fraction(0)
            continue
        t = f0 / (f0 - f1)
        if f1 > f0:
            lo = max(lo, t)
        else:
            hi = min(hi, t)
    t = Fraction(1, 2) if lo > hi else min(lo / 2, Fraction(1, 2))
    if any(isinstance(c, float) for c in (*v, *centre)):
        t = float(t)
    return (v[0] + t * (centre[0] - v[0]), v[1] + t * (centre[1] - v[1]))


def overlap_witnesses(a: Sequence[Point], b: Sequence[Point]) -> list[Point]:
    """Points that witness each of the three parts of a partial overlap, when they exist.

    The vertex average of a positive-area intersection is interior to both
    rectangles; a vertex of ``a`` outside ``b`` can be pulled into the interior
    of ``a`` while staying outside ``b``. If no vertex of ``a`` is outside
    ``b``, convexity puts ``a`` inside ``b`` and no such point exists.
    """
    out = []
    inter = clip_convex(a, b)
    if len(inter) >= 3 and area(inter) > 0:
        out.append(vertex_average(inter))
    for first, second in ((a, b), (b, a)):
        centre = vertex_average(first)
        for v in first:
            if not in_closed(v, second):
                out.append(_escape_point(v, centre, second))
                break
    return out


def overlap_candidates(objects: Iterable[SpatialObject], config: Mapping[str, object]) -> list[tuple]:
    """Witness candidates for every ordered pair of rectangles with known values."""
    rects = []
    for o in objects:
        if o.kind is ObjectKind.RECTANGLE2:
            try:
                rects.append(rect_corners(*rect_values(o, config)))
            except KeyError:
                continue
    out: list[tuple] = []
    seen = set()
    for i, a in enumerate(rects):
        for j, b in enumerate(rects):
            if i < j:
                for p in overlap_witnesses(a, b):
                    if p not in seen:
                        seen.add(p)
                        out.append(p)
    return out
