"""Direct geometric decisions for every relation, written independently of the encoder.

Everything works on exact :class:`fractions.Fraction` values taken from a
configuration dict. Rectangles are handled through their corner polygons and
the separating-axis theorem rather than through frame projections.
"""

from __future__ import annotations

from fractions import Fraction

from qsp.model import ObjectKind, SpatialObject, Var

K = ObjectKind


def values(o: SpatialObject, config) -> dict[str, Fraction]:
    out = {}
    for name, p in zip(o.kind.param_names, o.params):
        raw = config[p.name] if isinstance(p, Var) else p.value
        out[name] = Fraction(int(raw.numerator), int(raw.denominator))
    return out


def corners(v) -> list[tuple[Fraction, Fraction]]:
    x, y, ux, uy, w, h = v["x"], v["y"], v["xv"], v["yv"], v["w"], v["h"]
    nx, ny = -uy, ux
    return [(x, y), (x + w * ux, y + w * uy), (x + w * ux + h * nx, y + w * uy + h * ny), (x + h * nx, y + h * ny)]


def orient(a, b, c) -> Fraction:
    """Twice the signed area of triangle abc."""
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _edges(poly):
    return [(poly[i], poly[(i + 1) % len(poly)]) for i in range(len(poly))]


def in_closed(p, poly) -> bool:
    return all(orient(a, b, p) >= 0 for a, b in _edges(poly))


def in_open(p, poly) -> bool:
    return all(orient(a, b, p) > 0 for a, b in _edges(poly))


def _axes(*polys):
    for poly in polys:
        for a, b in _edges(poly):
            yield (-(b[1] - a[1]), b[0] - a[0])


def _project(poly, axis):
    vals = [p[0] * axis[0] + p[1] * axis[1] for p in poly]
    return min(vals), max(vals)


def interiors_meet(p, q) -> bool:
    """Open convex polygons intersect iff no edge normal separates them (touching counts as separated)."""
    for axis in _axes(p, q):
        lo1, hi1 = _project(p, axis)
        lo2, hi2 = _project(q, axis)
        if hi1 <= lo2 or hi2 <= lo1:
            return False
    return True


def contained(p, q) -> bool:
    return all(in_closed(v, q) for v in p)


def _centre(poly):
    return (sum(v[0] for v in poly) / 4, sum(v[1] for v in poly) / 4)


def _sq(a, b):
    return sum((x - y) ** 2 for x, y in zip(a, b))


def _pt(v):
    return tuple(v[k] for k in ("x", "y", "z") if k in v)


def _seg(v):
    return (v["xa"], v["ya"]), (v["xb"], v["yb"])


def _on_segment(p, a, b) -> bool:
    if orient(a, b, p) != 0:
        return False
    t = (p[0] - a[0]) * (b[0] - a[0]) + (p[1] - a[1]) * (b[1] - a[1])
    return 0 <= t <= _sq(a, b)


def _orientation_triple(objs, vals):
    p = _pt(vals[0])
    if len(objs) == 2:
        a, b = _seg(vals[1])
    else:
        a, b = _pt(vals[1]), _pt(vals[2])
    return p, a, b


def _box_ranges(v):
    return [(v["x"], v["x"] + v["w"]), (v["y"], v["y"] + v["d"]), (v["z"], v["z"] + v["h"])]


def _aligned_intersection_square(va, vb) -> bool:
    """Same frame direction: is the (positive-area) overlap a square?"""
    ca, cb = corners(va), corners(vb)
    u = (va["xv"], va["yv"])
    n = (-u[1], u[0])

    def span(poly, axis):
        return _project(poly, axis)

    la, ha = span(ca, u)
    lb, hb = span(cb, u)
    ma, na = span(ca, n)
    mb, nb = span(cb, n)
    return min(ha, hb) - max(la, lb) == min(na, nb) - max(ma, mb)


def decide(name: str, objs, config) -> bool:
    vals = [values(o, config) for o in objs]
    kinds = tuple(o.kind for o in objs)

    if name in ("left_of", "collinear", "right_or_collinear"):
        p, a, b = _orientation_triple(objs, vals)
        s = orient(a, b, p)
        return {"left_of": s > 0, "collinear": s == 0, "right_or_collinear": s <= 0}[name]
    if name in ("parallel", "perpendicular"):
        (a, b), (c, d) = _seg(vals[0]), _seg(vals[1])
        u = (b[0] - a[0], b[1] - a[1])
        w = (d[0] - c[0], d[1] - c[1])
        if name == "parallel":
            return u[0] * w[1] - u[1] * w[0] == 0
        return u[0] * w[0] + u[1] * w[1] == 0
    if name == "coincident":
        p = _pt(vals[0])
        if kinds[1] is K.SEGMENT2:
            return _on_segment(p, *_seg(vals[1]))
        return _sq(p, _pt(vals[1])) == vals[1]["r"] ** 2
    if name in ("inside", "intersects", "boundary", "outside"):
        p, poly = _pt(vals[0]), corners(vals[1])
        closed, open_ = in_closed(p, poly), in_open(p, poly)
        return {"inside": open_, "intersects": closed, "boundary": closed and not open_,
                "outside": not closed}[name]
    if kinds == (K.RECTANGLE2, K.RECTANGLE2):
        va, vb = vals
        pa, pb = corners(va), corners(vb)
        same_dir = (va["xv"], va["yv"]) == (vb["xv"], vb["yv"])
        if name == "concentric":
            return _centre(pa) == _centre(pb)
        if name == "concentric_geo":
            return _centre(pa) == _centre(pb) and same_dir
        if name == "part_of":
            return contained(pa, pb)
        if name == "proper_part":
            return contained(pa, pb) and va != vb
        if name == "boundary_part_of":
            return all(in_closed(v, pb) and not in_open(v, pb) for v in pa)
        if name == "discrete_from":
            return not interiors_meet(pa, pb)
        if name == "equals":
            return va == vb
        if name == "covertex":
            return same_dir and any(p == q for p in pa for q in pb)
        partial = interiors_meet(pa, pb) and not contained(pa, pb) and not contained(pb, pa)
        if name == "partially_overlaps":
            return partial
        if name == "nonsquare_intersection":
            return partial and (not same_dir or not _aligned_intersection_square(va, vb))
    if name == "equals":
        return vals[0] == vals[1]
    if name == "bisects":
        a, b = _seg(vals[0])
        m = tuple((s + t) / 2 for s, t in zip(_pt(vals[1]), _pt(vals[2])))
        return orient(a, b, m) == 0
    if name in ("touches", "disconnected", "inside_region") and kinds[0] is K.BOX3:
        ra, rb = _box_ranges(vals[0]), _box_ranges(vals[1])
        if name == "inside_region":
            return all(lb <= la and ha <= hb for (la, ha), (lb, hb) in zip(ra, rb))
        closed_meet = all(la <= hb and lb <= ha for (la, ha), (lb, hb) in zip(ra, rb))
        open_meet = all(la < hb and lb < ha for (la, ha), (lb, hb) in zip(ra, rb))
        return (closed_meet and not open_meet) if name == "touches" else not closed_meet
    if name in ("touches", "disconnected", "inside_region"):
        d2 = _sq(_pt(vals[0]), _pt(vals[1]))
        ra, rb = vals[0]["r"], vals[1]["r"]
        if name == "touches":
            return d2 == (ra + rb) ** 2
        if name == "disconnected":
            return d2 > (ra + rb) ** 2
        # |ca - cb| + ra <= rb
        return rb >= ra and d2 <= (rb - ra) ** 2
    if name == "same_size":
        return vals[0]["r"] == vals[1]["r"]
    if name == "equal_length":
        if len(objs) == 2:
            return _sq(*_seg(vals[0])) == _sq(*_seg(vals[1]))
        return _sq(_pt(vals[0]), _pt(vals[1])) == _sq(*_seg(vals[2]))
    if name == "centred_on":
        return _pt(vals[0]) == _pt(vals[1])
    if name == "starts_at":
        return _seg(vals[0])[0] == _pt(vals[1])
    if name == "ends_at":
        return _seg(vals[0])[1] == _pt(vals[1])
    raise KeyError(f"no direct decision for {name} over {kinds}")
