"""Polynomial encodings of spatial relations and an exact ground evaluator.

Relations compile to :class:`PolyFormula` trees whose leaves compare a
polynomial against zero. Witness points needed by ``partially_overlaps`` are
bound by explicit quantifiers with deterministic names ``w_<atom>_<k>_x``.
"""

from __future__ import annotations

import enum
import itertools
import operator
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Iterator, Mapping, Optional, Sequence, Union

from .model import (
    And, ConstraintGraph, Const, Exists, Forall, Formula, Not, ObjectKind, Or,
    RELATIONS, RelationAtom, SpatialObject, Var, to_nnf,
)
from .poly import Poly, const, poly_sum


class Rel(enum.Enum):
    EQ = "="
    NE = "!="
    LT = "<"
    LE = "<="


@dataclass(frozen=True)
class PAtom:
    """``lhs rel 0``."""

    lhs: Poly
    rel: Rel

    def __str__(self) -> str:
        return f"{self.lhs} {self.rel.value} 0"


@dataclass(frozen=True)
class PAnd:
    children: tuple["PolyFormula", ...]


@dataclass(frozen=True)
class POr:
    children: tuple["PolyFormula", ...]


@dataclass(frozen=True)
class PNot:
    child: "PolyFormula"


@dataclass(frozen=True)
class PExists:
    vars: tuple[str, ...]
    body: "PolyFormula"


@dataclass(frozen=True)
class PForall:
    vars: tuple[str, ...]
    body: "PolyFormula"


PolyFormula = Union[PAtom, PAnd, POr, PNot, PExists, PForall]

TRUE = PAnd(())
FALSE = POr(())


def conj(*items) -> PolyFormula:
    flat = []
    for f in _flatten(items):
        if isinstance(f, PAnd):
            flat.extend(f.children)
        else:
            flat.append(f)
    return flat[0] if len(flat) == 1 else PAnd(tuple(flat))


def disj(*items) -> PolyFormula:
    flat = []
    for f in _flatten(items):
        if isinstance(f, POr):
            flat.extend(f.children)
        else:
            flat.append(f)
    return flat[0] if len(flat) == 1 else POr(tuple(flat))


def _flatten(items):
    for it in items:
        if isinstance(it, (list, tuple)):
            yield from _flatten(it)
        else:
            yield it


def eq(a, b=0) -> PAtom:
    return PAtom(Poly.lift(a) - b, Rel.EQ)


def ne(a, b=0) -> PAtom:
    return PAtom(Poly.lift(a) - b, Rel.NE)


def lt(a, b) -> PAtom:
    return PAtom(Poly.lift(a) - b, Rel.LT)


def le(a, b) -> PAtom:
    return PAtom(Poly.lift(a) - b, Rel.LE)


def gt(a, b) -> PAtom:
    return lt(b, a)


def ge(a, b) -> PAtom:
    return le(b, a)


def complement(a: PAtom) -> PAtom:
    if a.rel is Rel.EQ:
        return PAtom(a.lhs, Rel.NE)
    if a.rel is Rel.NE:
        return PAtom(a.lhs, Rel.EQ)
    if a.rel is Rel.LT:
        return PAtom(-a.lhs, Rel.LE)
    return PAtom(-a.lhs, Rel.LT)


def nnf(f: PolyFormula) -> PolyFormula:
    """Eliminate ``PNot`` by pushing it to atoms and complementing them."""
    if isinstance(f, PAtom):
        return f
    if isinstance(f, PAnd):
        return PAnd(tuple(nnf(c) for c in f.children))
    if isinstance(f, POr):
        return POr(tuple(nnf(c) for c in f.children))
    if isinstance(f, PExists):
        return PExists(f.vars, nnf(f.body))
    if isinstance(f, PForall):
        return PForall(f.vars, nnf(f.body))
    g = f.child
    if isinstance(g, PAtom):
        return complement(g)
    if isinstance(g, PNot):
        return nnf(g.child)
    if isinstance(g, PAnd):
        return POr(tuple(nnf(PNot(c)) for c in g.children))
    if isinstance(g, POr):
        return PAnd(tuple(nnf(PNot(c)) for c in g.children))
    if isinstance(g, PExists):
        return PForall(g.vars, nnf(PNot(g.body)))
    return PExists(g.vars, nnf(PNot(g.body)))


def poly_atoms(f: PolyFormula) -> Iterator[PAtom]:
    if isinstance(f, PAtom):
        yield f
    elif isinstance(f, (PAnd, POr)):
        for c in f.children:
            yield from poly_atoms(c)
    elif isinstance(f, PNot):
        yield from poly_atoms(f.child)
    else:
        yield from poly_atoms(f.body)


def formula_vars(f: PolyFormula) -> frozenset[str]:
    """Free variables of a polynomial formula."""
    if isinstance(f, PAtom):
        return f.lhs.variables()
    if isinstance(f, (PAnd, POr)):
        return frozenset().union(*(formula_vars(c) for c in f.children))
    if isinstance(f, PNot):
        return formula_vars(f.child)
    return formula_vars(f.body) - set(f.vars)


def has_quantifiers(f: PolyFormula) -> bool:
    if isinstance(f, PAtom):
        return False
    if isinstance(f, (PAnd, POr)):
        return any(has_quantifiers(c) for c in f.children)
    if isinstance(f, PNot):
        return has_quantifiers(f.child)
    return True


def skolemize(f: PolyFormula) -> PolyFormula:
    """Drop existential binders that are not under a universal (NNF input).

    Bound names are fresh, so the lifted variables become free constants.
    """
    if isinstance(f, PExists):
        return skolemize(f.body)
    if isinstance(f, PAnd):
        return PAnd(tuple(skolemize(c) for c in f.children))
    if isinstance(f, POr):
        return POr(tuple(skolemize(c) for c in f.children))
    return f


def substitute(f: PolyFormula, mapping: Mapping[str, object]) -> PolyFormula:
    if not mapping:
        return f
    if isinstance(f, PAtom):
        return PAtom(f.lhs.subs(mapping), f.rel)
    if isinstance(f, PAnd):
        return PAnd(tuple(substitute(c, mapping) for c in f.children))
    if isinstance(f, POr):
        return POr(tuple(substitute(c, mapping) for c in f.children))
    if isinstance(f, PNot):
        return PNot(substitute(f.child, mapping))
    inner = {k: v for k, v in mapping.items() if k not in f.vars}
    return type(f)(f.vars, substitute(f.body, inner))


def simplify(f: PolyFormula) -> PolyFormula:
    """Fold constant atoms and flatten/short-circuit connectives."""
    if isinstance(f, PAtom):
        if f.lhs.is_constant():
            return TRUE if _compare(f.rel, f.lhs.constant_value()) else FALSE
        return f
    if isinstance(f, PAnd):
        out = []
        for c in f.children:
            c = simplify(c)
            if c == FALSE:
                return FALSE
            if isinstance(c, PAnd):
                out.extend(c.children)
            else:
                out.append(c)
        out = list(dict.fromkeys(out))
        return out[0] if len(out) == 1 else PAnd(tuple(out))
    if isinstance(f, POr):
        out = []
        for c in f.children:
            c = simplify(c)
            if c == TRUE:
                return TRUE
            if isinstance(c, POr):
                out.extend(c.children)
            else:
                out.append(c)
        out = list(dict.fromkeys(out))
        return out[0] if len(out) == 1 else POr(tuple(out))
    if isinstance(f, PNot):
        c = simplify(f.child)
        if c == TRUE:
            return FALSE
        if c == FALSE:
            return TRUE
        return PNot(c)
    body = simplify(f.body)
    used = formula_vars(body)
    keep = tuple(v for v in f.vars if v in used)
    if not keep:
        return body
    return type(f)(keep, body)


def _compare(rel: Rel, value) -> bool:
    if rel is Rel.EQ:
        return value == 0
    if rel is Rel.NE:
        return value != 0
    if rel is Rel.LT:
        return value < 0
    return value <= 0


# object geometry as polynomials


def P(o: SpatialObject, name: str) -> Poly:
    p = o.param(name)
    return Poly.var(p.name) if isinstance(p, Var) else const(p.value)


Vec = tuple[Poly, ...]


def point_of(o: SpatialObject) -> Vec:
    if o.kind is ObjectKind.POINT3:
        return (P(o, "x"), P(o, "y"), P(o, "z"))
    return (P(o, "x"), P(o, "y"))


def segment_of(o: SpatialObject) -> tuple[Vec, Vec]:
    return (P(o, "xa"), P(o, "ya")), (P(o, "xb"), P(o, "yb"))


def centre_of(o: SpatialObject) -> Vec:
    if o.kind is ObjectKind.SPHERE3:
        return (P(o, "x"), P(o, "y"), P(o, "z"))
    return (P(o, "x"), P(o, "y"))


def rect_frame(o: SpatialObject) -> tuple[Vec, Vec, Vec, Poly, Poly]:
    """Corner, unit base direction, its left normal, width, height."""
    p = (P(o, "x"), P(o, "y"))
    v = (P(o, "xv"), P(o, "yv"))
    vp = (-v[1], v[0])
    return p, v, vp, P(o, "w"), P(o, "h")


def rect_vertices(o: SpatialObject) -> list[Vec]:
    p, v, vp, w, h = rect_frame(o)
    p2 = add(p, scale(v, w))
    p4 = add(p, scale(vp, h))
    p3 = add(p2, scale(vp, h))
    return [p, p2, p3, p4]


def add(a: Vec, b: Vec) -> Vec:
    return tuple(x + y for x, y in zip(a, b))


def sub(a: Vec, b: Vec) -> Vec:
    return tuple(x - y for x, y in zip(a, b))


def scale(a: Vec, k) -> Vec:
    return tuple(x * k for x in a)


def dot(a: Vec, b: Vec) -> Poly:
    return poly_sum(x * y for x, y in zip(a, b))


def cross(p: Vec, a: Vec, b: Vec) -> Poly:
    """Positive when ``p`` lies left of the directed line ``a -> b``."""
    return (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])


def sqdist(a: Vec, b: Vec) -> Poly:
    d = sub(a, b)
    return dot(d, d)


def in_interval(v: Poly, i: Poly, j: Poly) -> PolyFormula:
    return disj(conj(le(i, v), le(v, j)), conj(le(j, v), le(v, i)))


def vec_eq(a: Vec, b: Vec) -> PolyFormula:
    return conj([eq(x, y) for x, y in zip(a, b)])


def inside_pt(p: Vec, rect: SpatialObject) -> PolyFormula:
    p1, v, vp, w, h = rect_frame(rect)
    d = sub(p, p1)
    a, b = dot(d, v), dot(d, vp)
    return conj(lt(0, a), lt(a, w), lt(0, b), lt(b, h))


def intersects_pt(p: Vec, rect: SpatialObject) -> PolyFormula:
    p1, v, vp, w, h = rect_frame(rect)
    d = sub(p, p1)
    a, b = dot(d, v), dot(d, vp)
    return conj(le(0, a), le(a, w), le(0, b), le(b, h))


def boundary_pt(p: Vec, rect: SpatialObject) -> PolyFormula:
    return conj(intersects_pt(p, rect), nnf(PNot(inside_pt(p, rect))))


def outside_pt(p: Vec, rect: SpatialObject) -> PolyFormula:
    return nnf(PNot(intersects_pt(p, rect)))


def rect_centre(o: SpatialObject) -> Vec:
    p1 = rect_vertices(o)[0]
    p3 = rect_vertices(o)[2]
    return add(scale(sub(p3, p1), Fraction(1, 2)), p1)


def wellformed(o: SpatialObject) -> PolyFormula:
    k = o.kind
    if k is ObjectKind.SEGMENT2:
        a, b = segment_of(o)
        return disj(ne(a[0], b[0]), ne(a[1], b[1]))
    if k is ObjectKind.RECTANGLE2:
        parts = [lt(0, P(o, "w")), lt(0, P(o, "h")), eq(P(o, "xv") ** 2 + P(o, "yv") ** 2, 1)]
        if o.equal_sides:
            parts.append(eq(P(o, "w"), P(o, "h")))
        return conj(parts)
    if k in (ObjectKind.CIRCLE2, ObjectKind.SPHERE3):
        return lt(0, P(o, "r"))
    if k is ObjectKind.BOX3:
        parts = [lt(0, P(o, n)) for n in ("w", "d", "h")]
        if o.equal_sides:
            parts += [eq(P(o, "w"), P(o, "d")), eq(P(o, "d"), P(o, "h"))]
        return conj(parts)
    return TRUE


# relation encodings


class UnsupportedRelation(ValueError):
    pass


class Fresh:
    """Deterministic witness names ``w_<atom>_<k>``."""

    def __init__(self, atom_index: int = 0):
        self.atom_index = atom_index
        self._k = itertools.count()

    def point(self) -> tuple[str, str]:
        k = next(self._k)
        base = f"w_{self.atom_index}_{k}"
        return f"{base}_x", f"{base}_y"


def _orientation_args(args, scope):
    objs = [scope[a] for a in args]
    p = point_of(objs[0])
    if len(objs) == 2:
        a, b = segment_of(objs[1])
    else:
        a, b = point_of(objs[1]), point_of(objs[2])
    return p, a, b


def _box(o):
    lo = (P(o, "x"), P(o, "y"), P(o, "z"))
    hi = (lo[0] + P(o, "w"), lo[1] + P(o, "d"), lo[2] + P(o, "h"))
    return lo, hi


def _discrete(a, b) -> PolyFormula:
    va, vb = rect_vertices(a), rect_vertices(b)
    parts = []
    for i in range(4):
        parts.append(_right_or_collinear_rect(a, vb[i], vb[(i + 1) % 4]))
        parts.append(_right_or_collinear_rect(b, va[i], va[(i + 1) % 4]))
    return disj(parts)


def _partially_overlaps(a, b, fresh: Fresh) -> PolyFormula:
    parts = []
    for first, second in ((inside_pt, inside_pt), (inside_pt, outside_pt), (outside_pt, inside_pt)):
        xs = fresh.point()
        w = (Poly.var(xs[0]), Poly.var(xs[1]))
        parts.append(PExists(xs, conj(first(w, a), second(w, b))))
    return conj(parts)


def _right_or_collinear_rect(rect, a: Vec, b: Vec) -> PolyFormula:
    return conj([le(cross(p, a, b), 0) for p in rect_vertices(rect)])


def _nonsquare(a, b, fresh: Fresh) -> PolyFormula:
    pa1, va, vpa, _, _ = rect_frame(a)
    va_ = rect_vertices(a)
    vb_ = rect_vertices(b)
    misaligned = disj(ne(P(a, "xv"), P(b, "xv")), ne(P(a, "yv"), P(b, "yv")))
    v, vp = va, vpa
    # w_I = min(A1, B1) - max(A2, B2); h_I = min(C1, D1) - max(C2, D2)
    A1, B1 = dot(v, va_[1]), dot(v, vb_[1])
    A2, B2 = dot(v, va_[0]), dot(v, vb_[0])
    C1, D1 = dot(vp, va_[3]), dot(vp, vb_[3])
    C2, D2 = dot(vp, va_[0]), dot(vp, vb_[0])

    def pick_min(x, y):
        return [(le(x, y), x), (lt(y, x), y)]

    def pick_max(x, y):
        return [(le(y, x), x), (lt(x, y), y)]

    branches = []
    for (g1, m1), (g2, m2), (g3, m3), (g4, m4) in itertools.product(
            pick_min(A1, B1), pick_max(A2, B2), pick_min(C1, D1), pick_max(C2, D2)):
        branches.append(conj(g1, g2, g3, g4, ne((m1 - m2) - (m3 - m4))))
    return conj(_partially_overlaps(a, b, fresh), disj(misaligned, disj(branches)))


def _positive(atom: RelationAtom, scope: Mapping[str, SpatialObject], fresh: Fresh) -> PolyFormula:
    name = atom.name
    objs = [scope[x] for x in atom.args]
    kinds = tuple(o.kind for o in objs)

    if name == "left_of":
        p, a, b = _orientation_args(atom.args, scope)
        return gt(cross(p, a, b), 0)
    if name == "collinear":
        p, a, b = _orientation_args(atom.args, scope)
        return eq(cross(p, a, b))
    if name == "right_or_collinear":
        p, a, b = _orientation_args(atom.args, scope)
        return le(cross(p, a, b), 0)
    if name == "parallel":
        (a, b), (c, d) = segment_of(objs[0]), segment_of(objs[1])
        return eq((b[1] - a[1]) * (d[0] - c[0]), (d[1] - c[1]) * (b[0] - a[0]))
    if name == "perpendicular":
        (a, b), (c, d) = segment_of(objs[0]), segment_of(objs[1])
        return eq(dot(sub(b, a), sub(d, c)))
    if name == "coincident":
        p = point_of(objs[0])
        if kinds[1] is ObjectKind.SEGMENT2:
            a, b = segment_of(objs[1])
            return conj(eq(cross(p, a, b)), in_interval(p[0], a[0], b[0]), in_interval(p[1], a[1], b[1]))
        c = centre_of(objs[1])
        return eq(sqdist(c, p), P(objs[1], "r") ** 2)
    if name == "inside":
        return inside_pt(point_of(objs[0]), objs[1])
    if name == "intersects":
        return intersects_pt(point_of(objs[0]), objs[1])
    if name == "boundary":
        return boundary_pt(point_of(objs[0]), objs[1])
    if name == "outside":
        return outside_pt(point_of(objs[0]), objs[1])
    if name == "concentric":
        return vec_eq(rect_centre(objs[0]), rect_centre(objs[1]))
    if name == "concentric_geo":
        a, b = objs
        return conj(vec_eq(rect_centre(a), rect_centre(b)),
                    eq(P(a, "xv"), P(b, "xv")), eq(P(a, "yv"), P(b, "yv")))
    if name == "part_of":
        return conj([intersects_pt(p, objs[1]) for p in rect_vertices(objs[0])])
    if name == "proper_part":
        not_equal = nnf(PNot(_positive(RelationAtom("equals", atom.args), scope, fresh)))
        return conj(not_equal, _positive(RelationAtom("part_of", atom.args), scope, fresh))
    if name == "boundary_part_of":
        return conj([boundary_pt(p, objs[1]) for p in rect_vertices(objs[0])])
    if name == "discrete_from":
        return _discrete(*objs)
    if name == "partially_overlaps":
        return _partially_overlaps(objs[0], objs[1], fresh)
    if name == "equals":
        a, b = objs
        return conj([eq(P(a, n), P(b, n)) for n in a.kind.param_names])
    if name == "covertex":
        a, b = objs
        shared = [vec_eq(p, q) for p in rect_vertices(a) for q in rect_vertices(b)]
        return conj(eq(P(a, "xv"), P(b, "xv")), eq(P(a, "yv"), P(b, "yv")), disj(shared))
    if name == "nonsquare_intersection":
        return _nonsquare(objs[0], objs[1], fresh)
    if name == "bisects":
        a, b = segment_of(objs[0])
        m2 = add(point_of(objs[1]), point_of(objs[2]))
        # midpoint collinear with the segment, scaled by 2
        return eq(cross(m2, scale(a, 2), scale(b, 2)))
    if name in ("touches", "disconnected") and kinds[0] is not ObjectKind.BOX3:
        d = sqdist(centre_of(objs[0]), centre_of(objs[1]))
        rr = (P(objs[0], "r") + P(objs[1], "r")) ** 2
        return eq(d, rr) if name == "touches" else gt(d, rr)
    if name == "touches":
        (la, ha), (lb, hb) = _box(objs[0]), _box(objs[1])
        overlap = conj([conj(le(la[i], hb[i]), le(lb[i], ha[i])) for i in range(3)])
        contact = disj([disj(eq(ha[i], lb[i]), eq(hb[i], la[i])) for i in range(3)])
        return conj(overlap, contact)
    if name == "disconnected":
        (la, ha), (lb, hb) = _box(objs[0]), _box(objs[1])
        return disj([disj(lt(ha[i], lb[i]), lt(hb[i], la[i])) for i in range(3)])
    if name == "inside_region":
        a, b = objs
        if a.kind is ObjectKind.BOX3:
            (la, ha), (lb, hb) = _box(a), _box(b)
            return conj([conj(le(lb[i], la[i]), le(ha[i], hb[i])) for i in range(3)])
        gap = P(b, "r") - P(a, "r")
        return conj(le(0, gap), le(sqdist(centre_of(a), centre_of(b)), gap ** 2))
    if name == "same_size":
        return eq(P(objs[0], "r"), P(objs[1], "r"))
    if name == "equal_length":
        if len(objs) == 2:
            (a, b), (c, d) = segment_of(objs[0]), segment_of(objs[1])
            return eq(sqdist(a, b), sqdist(c, d))
        c, d = segment_of(objs[2])
        return eq(sqdist(point_of(objs[0]), point_of(objs[1])), sqdist(c, d))
    if name == "centred_on":
        return vec_eq(centre_of(objs[0]), point_of(objs[1]))
    if name == "starts_at":
        return vec_eq(segment_of(objs[0])[0], point_of(objs[1]))
    if name == "ends_at":
        return vec_eq(segment_of(objs[0])[1], point_of(objs[1]))
    raise UnsupportedRelation(f"no encoding for {atom} over {[k.value for k in kinds]}")


def encode_atom(atom: RelationAtom, scope: Mapping[str, SpatialObject], positive: bool = True,
                fresh: Optional[Fresh] = None) -> PolyFormula:
    """Encode one relation atom; negative polarity yields the NNF complement."""
    spec = RELATIONS.get(atom.name)
    kinds = tuple(scope[a].kind for a in atom.args)
    if spec is None or kinds not in spec.signatures:
        raise UnsupportedRelation(f"no encoding for {atom} over {[k.value for k in kinds]}")
    f = _positive(atom, scope, fresh or Fresh())
    return f if positive else nnf(PNot(f))


def encode_nonsquare_intersection(a: str, b: str, scope: Mapping[str, SpatialObject],
                                  fresh: Optional[Fresh] = None) -> PolyFormula:
    return encode_atom(RelationAtom("nonsquare_intersection", (a, b)), scope, True, fresh)


class _Counter:
    def __init__(self):
        self.n = 0

    def next(self) -> Fresh:
        f = Fresh(self.n)
        self.n += 1
        return f


def encode_formula(f: Formula, scope: Mapping[str, SpatialObject], counter: Optional[_Counter] = None) -> PolyFormula:
    counter = counter or _Counter()
    return _encode_nnf(to_nnf(f), dict(scope), counter)


def _encode_nnf(f, scope, counter) -> PolyFormula:
    if isinstance(f, RelationAtom):
        return encode_atom(f, scope, True, counter.next())
    if isinstance(f, Not):
        return encode_atom(f.child, scope, False, counter.next())
    if isinstance(f, And):
        return conj([_encode_nnf(c, scope, counter) for c in f.children]) if f.children else TRUE
    if isinstance(f, Or):
        return disj([_encode_nnf(c, scope, counter) for c in f.children]) if f.children else FALSE
    inner = dict(scope)
    inner[f.obj.id] = f.obj
    body = _encode_nnf(f.body, inner, counter)
    names = f.obj.variables()
    wf = wellformed(f.obj)
    if isinstance(f, Exists):
        return PExists(names, conj(wf, body))
    return PForall(names, disj(nnf(PNot(wf)), body))


def encode_graph(g: ConstraintGraph, extra: Iterable[Formula] = ()) -> PolyFormula:
    """Well-formedness, groundings and every edge formula, conjoined."""
    counter = _Counter()
    parts: list[PolyFormula] = [wellformed(o) for o in g.objects.values()]
    parts += [eq(Poly.var(v), c) for v, c in g.groundings.items()]
    for f in tuple(g.formulas) + tuple(extra):
        parts.append(encode_formula(f, g.objects, counter))
    parts = [p for p in parts if p != TRUE]
    return conj(parts) if parts else TRUE


# evaluation


try:
    from gmpy2 import mpq as _mpq_ctor
    _MPQ = type(_mpq_ctor())
except ImportError:  # pragma: no cover
    _MPQ = None


class MissingVariable(KeyError):
    pass


def eval_ground(f: PolyFormula, assignment: Mapping[str, object],
                candidates: Sequence[Sequence[object]] = (), tol: Optional[float] = None,
                complete: bool = False) -> Optional[bool]:
    """Three-valued truth of ``f`` under ``assignment``.

    Exact when all values are rationals and ``tol`` is None. Quantifiers are
    checked only against ``candidates`` (value tuples whose length matches the
    number of bound variables): an existential with a satisfying candidate is
    True, a universal with a falsifying candidate is False, anything else is
    undecided (None). With ``complete`` the caller promises that the candidates
    contain a witness whenever one exists, so the remaining answers become
    decided too (for quantifiers whose arity some candidate matches).
    """
    cmp = _compare if tol is None else _tolerant(tol)
    env = dict(assignment)
    fast = _MPQ is not None and bool(env) and all(type(v) is _MPQ for v in env.values())
    return _eval(f, env, tuple(candidates), cmp, complete, fast)


def _tolerant(tol: float) -> Callable[[Rel, object], bool]:
    def cmp(rel, value):
        value = float(value)
        if rel is Rel.EQ:
            return abs(value) <= tol
        if rel is Rel.NE:
            return abs(value) > tol
        if rel is Rel.LT:
            return value < tol
        return value <= tol
    return cmp


def _eval(f, env, candidates, cmp, complete=False, fast=False) -> Optional[bool]:
    if isinstance(f, PAtom):
        try:
            value = f.lhs.evaluate_mpq(env) if fast else f.lhs.evaluate(env)
        except KeyError as exc:
            raise MissingVariable(f"no value for variable {exc.args[0]!r}") from None
        return cmp(f.rel, value)
    if isinstance(f, PAnd):
        result: Optional[bool] = True
        for c in f.children:
            r = _eval(c, env, candidates, cmp, complete, fast)
            if r is False:
                return False
            if r is None:
                result = None
        return result
    if isinstance(f, POr):
        result = False
        for c in f.children:
            r = _eval(c, env, candidates, cmp, complete, fast)
            if r is True:
                return True
            if r is None:
                result = None
        return result
    if isinstance(f, PNot):
        r = _eval(f.child, env, candidates, cmp, complete, fast)
        return None if r is None else not r
    want = isinstance(f, PExists)
    matched = False
    undecided = False
    for cand in candidates:
        if len(cand) != len(f.vars):
            continue
        matched = True
        inner = dict(env)
        inner.update(zip(f.vars, cand))
        r = _eval(f.body, inner, candidates, cmp, complete, fast)
        if r is want:
            return want
        if r is None:
            undecided = True
    if complete and matched and not undecided:
        return not want
    return None
