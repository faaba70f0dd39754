"""Static SVG pictures of witnesses.

3D objects are drawn as their xy-projection. Output is deterministic: the
same witness always yields the same bytes.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Iterable, Mapping
from xml.sax.saxutils import escape

from .geometry import rect_corners
from .model import ObjectKind, SpatialObject, Var

STROKE = "#1f4e79"
FILL = "#9dc3e6"
MARGIN = 0.10


def _values(o: SpatialObject, witness: Mapping[str, object]) -> dict[str, float]:
    out = {}
    for name, p in zip(o.kind.param_names, o.params):
        raw = witness.get(p.name, 0) if isinstance(p, Var) else p.value
        v = float(raw)
        if not math.isfinite(v):
            raise ValueError(f"non-finite value for {p}: {raw!r}")
        out[name] = v
    return out


def _shape(o: SpatialObject, v: dict[str, float]) -> tuple[str, list[tuple[float, float]], tuple[float, float]]:
    """(kind of mark, extreme points for the viewBox, label anchor)."""
    k = o.kind
    if k in (ObjectKind.POINT2, ObjectKind.POINT3):
        return "point", [(v["x"], v["y"])], (v["x"], v["y"])
    if k is ObjectKind.SEGMENT2:
        a, b = (v["xa"], v["ya"]), (v["xb"], v["yb"])
        return "segment", [a, b], ((a[0] + b[0]) / 2, (a[1] + b[1]) / 2)
    if k in (ObjectKind.CIRCLE2, ObjectKind.SPHERE3):
        x, y, r = v["x"], v["y"], abs(v["r"])
        return "circle", [(x - r, y - r), (x + r, y + r)], (x, y)
    if k is ObjectKind.RECTANGLE2:
        pts = rect_corners(v["x"], v["y"], v["xv"], v["yv"], v["w"], v["h"])
        cx = sum(p[0] for p in pts) / 4
        cy = sum(p[1] for p in pts) / 4
        return "polygon", pts, (cx, cy)
    if k is ObjectKind.BOX3:
        x, y, w, d = v["x"], v["y"], v["w"], v["d"]
        pts = [(x, y), (x + w, y), (x + w, y + d), (x, y + d)]
        return "polygon", pts, (x + w / 2, y + d / 2)
    raise ValueError(f"cannot render {k}")


def _fmt(x: float) -> str:
    s = f"{x:.6f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


def render_svg(witness: Mapping[str, object], objects: Iterable[SpatialObject]) -> str:
    shapes = []
    for o in objects:
        v = _values(o, witness)
        shapes.append((o, v, *_shape(o, v)))
    xs = [p[0] for s in shapes for p in s[3]] or [0.0]
    ys = [p[1] for s in shapes for p in s[3]] or [0.0]
    lo_x, hi_x, lo_y, hi_y = min(xs), max(xs), min(ys), max(ys)
    span = max(hi_x - lo_x, hi_y - lo_y, 1e-9)
    if hi_x - lo_x < 1e-12 and hi_y - lo_y < 1e-12:
        span = 1.0
    # pad to a square box so single points end up centred
    cx, cy = (lo_x + hi_x) / 2, (lo_y + hi_y) / 2
    half = span / 2 * (1 + 2 * MARGIN)
    min_x, min_y, size = cx - half, cy - half, 2 * half
    line = size / 400
    dot = size / 120

    def flip(y: float) -> float:
        # SVG y grows downwards
        return 2 * cy - y

    body = []
    for o, v, mark, pts, (lx, ly) in shapes:
        oid = escape(o.id)
        if mark == "point":
            body.append(f'<circle id="{oid}" cx="{_fmt(lx)}" cy="{_fmt(flip(ly))}" r="{_fmt(dot)}" fill="{STROKE}"/>')
        elif mark == "segment":
            (ax, ay), (bx, by) = pts
            body.append(f'<line id="{oid}" x1="{_fmt(ax)}" y1="{_fmt(flip(ay))}" x2="{_fmt(bx)}" '
                        f'y2="{_fmt(flip(by))}" stroke="{STROKE}" stroke-width="{_fmt(line)}"/>')
        elif mark == "circle":
            body.append(f'<circle id="{oid}" cx="{_fmt(v["x"])}" cy="{_fmt(flip(v["y"]))}" r="{_fmt(abs(v["r"]))}" '
                        f'fill="{FILL}" fill-opacity="0.3" stroke="{STROKE}" stroke-width="{_fmt(line)}"/>')
        else:
            coords = " ".join(f"{_fmt(x)},{_fmt(flip(y))}" for x, y in pts)
            body.append(f'<polygon id="{oid}" points="{coords}" fill="{FILL}" fill-opacity="0.3" '
                        f'stroke="{STROKE}" stroke-width="{_fmt(line)}"/>')
        body.append(f'<text x="{_fmt(lx + dot)}" y="{_fmt(flip(ly) - dot)}" font-size="{_fmt(size / 30)}" '
                    f'font-family="sans-serif">{oid}</text>')
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
            f'viewBox="{_fmt(min_x)} {_fmt(2 * cy - (min_y + size))} {_fmt(size)} {_fmt(size)}">')
    return "\n".join([head, *body, "</svg>"]) + "\n"


def render_witness(witness: Mapping[str, object], objects: Iterable[SpatialObject], path) -> Path:
    out = Path(path)
    out.write_text(render_svg(witness, objects), encoding="utf-8")
    return out
