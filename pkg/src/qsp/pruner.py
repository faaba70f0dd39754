"""Pruning cases: ground position coordinates in exchange for transformations.

A case restricts some coordinates of one to three target points to constants.
Because point coincidence (and collinearity) survive every affine map, a case
may need several subcases, one per equality pattern of the targets; together
they cover every configuration, so the graph is consistent iff one of the
grounded copies is.
"""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np
from scipy.optimize import least_squares
from scipy.spatial.transform import Rotation

from .encoder import PolyFormula, encode_atom, ge
from .model import ConstraintGraph, ObjectKind, RelationAtom, SpatialObject, Var, atoms
from .poly import Poly
from .symmetry import TC, TransformBudget, TransformClass

X, Y, Z = 0, 1, 2
_AXES = "xyz"


@dataclass(frozen=True)
class Restriction:
    point: int
    axis: int
    const: str

    def __str__(self) -> str:
        return f"{_AXES[self.axis]}{self.point + 1}={self.const}"


@dataclass(frozen=True)
class Guard:
    """Equality pattern among source points.

    ``coord``: same ``axis`` coordinate of two points; ``point``: two points
    coincide; ``collinear``: three points on one line.
    """

    kind: str
    args: tuple
    equal: bool

    def holds(self, pts: Sequence[Sequence], tol: float = 0.0) -> bool:
        if self.kind == "coord":
            axis, i, j = self.args
            same = abs(pts[i][axis] - pts[j][axis]) <= tol
        elif self.kind == "point":
            i, j = self.args
            same = all(abs(a - b) <= tol for a, b in zip(pts[i], pts[j]))
        else:
            i, j, k = self.args
            (ax, ay), (bx, by), (cx, cy) = pts[i][:2], pts[j][:2], pts[k][:2]
            same = abs((bx - ax) * (cy - ay) - (by - ay) * (cx - ax)) <= tol
        return same == self.equal

    def __str__(self) -> str:
        rel = "=" if self.equal else "≠"
        if self.kind == "coord":
            axis, i, j = self.args
            return f"{_AXES[axis]}{i + 1} {rel} {_AXES[axis]}{j + 1}"
        if self.kind == "point":
            return f"p{self.args[0] + 1} {rel} p{self.args[1] + 1}"
        word = "collinear" if self.equal else "not collinear"
        return f"p{self.args[2] + 1} {word} with p{self.args[0] + 1}p{self.args[1] + 1}"


@dataclass(frozen=True)
class Subcase:
    label: str
    constants: Mapping[str, Fraction]
    guards: tuple[Guard, ...] = ()
    # the constant pattern as printed in the case table
    pattern: str = ""

    def matches(self, pts, tol: float = 0.0) -> bool:
        return all(g.holds(pts, tol) for g in self.guards)


@dataclass(frozen=True)
class PruningCase:
    id: str
    arity: int
    dimension: int
    restrictions: tuple[Restriction, ...]
    subcases: tuple[Subcase, ...]
    cost: frozenset[TransformClass]
    traded: str
    # (point, axis) coordinates known to be >= 0 after the restriction
    nonnegative: tuple[tuple[int, int], ...] = ()
    # a positive length may additionally be set to 1 when uniform scale is unspent
    unit_length: bool = False
    note: str = ""

    @property
    def restriction_count(self) -> int:
        return len(self.restrictions)

    def describe(self) -> str:
        return ", ".join(str(r) for r in self.restrictions)


def _c(**kw) -> dict:
    return {k: Fraction(v) for k, v in kw.items()}


def _R(*items) -> tuple[Restriction, ...]:
    out = []
    for it in items:
        point, axis, const = it
        out.append(Restriction(point, axis, const))
    return tuple(out)


def _g(kind, *args, equal=True) -> Guard:
    return Guard(kind, tuple(args), equal)


TRANSLATE_XY = frozenset({TC.TRANSLATE_X, TC.TRANSLATE_Y})
TRANSLATE_XYZ = TRANSLATE_XY | {TC.TRANSLATE_Z}
XY_SCALE = frozenset({TC.SCALE_UNIFORM, TC.SCALE_X, TC.SCALE_Y})

# "x-scale" in cases c, e, f and g only needs to stretch one distance to a
# constant while the other coordinates stay free, which uniform scaling does.
_CATALOG: tuple[PruningCase, ...] = (
    PruningCase("a", 1, 2, _R((0, X, "c1")),
                (Subcase("", _c(c1=0)),), frozenset({TC.TRANSLATE_X}), "x-translate"),
    PruningCase("b", 1, 2, _R((0, X, "c1"), (0, Y, "c2")),
                (Subcase("", _c(c1=0, c2=0)),), TRANSLATE_XY, "xy-translate"),
    PruningCase("c", 2, 2, _R((0, X, "c1"), (1, X, "c2")),
                (Subcase("(i)", _c(c1=0, c2=1), (_g("coord", X, 0, 1, equal=False),), "c1 ≠ c2"),
                 Subcase("(ii)", _c(c1=0, c2=0), (_g("coord", X, 0, 1),), "c1 = c2")),
                frozenset({TC.TRANSLATE_X, TC.ROTATE_PI, TC.SCALE_UNIFORM}), "x-translate, rotate π, x-scale"),
    PruningCase("d", 2, 2, _R((0, X, "c1"), (1, Y, "c2")),
                (Subcase("", _c(c1=0, c2=0)),), TRANSLATE_XY, "xy-translate"),
    PruningCase("e", 2, 2, _R((0, X, "c1"), (0, Y, "c2"), (1, X, "c3")),
                (Subcase("(i)", _c(c1=0, c2=0, c3=1), (_g("coord", X, 0, 1, equal=False),), "c1 ≠ c3"),
                 Subcase("(ii)", _c(c1=0, c2=0, c3=0), (_g("coord", X, 0, 1),), "c1 = c3")),
                TRANSLATE_XY | {TC.ROTATE_PI, TC.SCALE_UNIFORM}, "xy-translate, rotate π, x-scale"),
    PruningCase("f", 2, 2, _R((0, X, "c1"), (0, Y, "c2"), (1, X, "c3"), (1, Y, "c2")),
                (Subcase("(i)", _c(c1=0, c2=0, c3=1), (_g("point", 0, 1, equal=False),), "c1 ≠ c3"),
                 Subcase("(ii)", _c(c1=0, c2=0, c3=0), (_g("point", 0, 1),), "c1 = c3")),
                TRANSLATE_XY | {TC.ROTATE, TC.SCALE_UNIFORM}, "xy-translate, rotate (0,2π), x-scale"),
    PruningCase("g", 3, 2, _R((0, X, "c1"), (1, X, "c2"), (2, Y, "c3")),
                (Subcase("(i)", _c(c1=0, c2=1, c3=0), (_g("coord", X, 0, 1, equal=False),), "c1 ≠ c2"),
                 Subcase("(ii)", _c(c1=0, c2=0, c3=0), (_g("coord", X, 0, 1),), "c1 = c2")),
                TRANSLATE_XY | {TC.ROTATE_PI, TC.SCALE_UNIFORM}, "xy-translate, rotate π, x-scale"),
    PruningCase("h", 3, 2, _R((0, X, "c1"), (0, Y, "c2"), (1, X, "c3"), (2, Y, "c4")),
                (Subcase("(i)", _c(c1=0, c2=0, c3=1, c4=1),
                         (_g("coord", X, 0, 1, equal=False), _g("coord", Y, 0, 2, equal=False)),
                         "c1 ≠ c3 ∧ c2 ≠ c4"),
                 Subcase("(ii)", _c(c1=0, c2=0, c3=0, c4=1),
                         (_g("coord", X, 0, 1), _g("coord", Y, 0, 2, equal=False)), "c1 = c3 ∧ c2 ≠ c4"),
                 Subcase("(iii)", _c(c1=0, c2=0, c3=1, c4=0),
                         (_g("coord", X, 0, 1, equal=False), _g("coord", Y, 0, 2)), "c1 ≠ c3 ∧ c2 = c4"),
                 Subcase("(iv)", _c(c1=0, c2=0, c3=0, c4=0),
                         (_g("coord", X, 0, 1), _g("coord", Y, 0, 2)), "c1 = c3 ∧ c2 = c4")),
                TRANSLATE_XY | XY_SCALE | {TC.ROTATE_PI, TC.REFLECT_Y},
                "xy-translate, rotate π, xy-scale, y-reflect"),
    PruningCase("i", 3, 2, _R((0, X, "c1"), (0, Y, "c2"), (1, X, "c3"), (1, Y, "c2"), (2, Y, "c4")),
                (Subcase("(i)", _c(c1=0, c2=0, c3=1, c4=1),
                         (_g("point", 0, 1, equal=False), _g("collinear", 0, 1, 2, equal=False)),
                         "c1 ≠ c3 ∧ c2 ≠ c4"),
                 Subcase("(ii)", _c(c1=0, c2=0, c3=1, c4=0),
                         (_g("point", 0, 1, equal=False), _g("collinear", 0, 1, 2)), "c1 ≠ c3 ∧ c2 = c4"),
                 Subcase("(iii)", _c(c1=0, c2=0, c3=0, c4=0), (_g("point", 0, 1),), "c1 = c3 ∧ c2 = c4")),
                TRANSLATE_XY | XY_SCALE | {TC.ROTATE, TC.REFLECT_Y},
                "xy-translate, rotate (0,2π), xy-scale, y-reflect"),
    PruningCase("f0", 2, 2, _R((0, X, "c1"), (0, Y, "c2"), (1, Y, "c2")),
                (Subcase("", _c(c1=0, c2=0)),), TRANSLATE_XY | {TC.ROTATE}, "xy-translate, rotate (0,2π)",
                nonnegative=((1, X),),
                note="segment frame without scale: p1 at the origin, p2 on the non-negative x axis"),
    PruningCase("j3d", 3, 3, _R((0, X, "c0"), (0, Y, "c0"), (0, Z, "c0"), (1, Y, "c0"), (1, Z, "c0"),
                                (2, Z, "c0")),
                (Subcase("", _c(c0=0)),), TRANSLATE_XYZ | {TC.ROTATE}, "xyz-translate, rotate",
                nonnegative=((1, X), (2, Y)), unit_length=True,
                note="p1 at the origin, p2 on the non-negative x axis, p3 in the upper xy half-plane"),
    PruningCase("t3d", 1, 3, _R((0, X, "c0"), (0, Y, "c0"), (0, Z, "c0")),
                (Subcase("", _c(c0=0)),), TRANSLATE_XYZ, "xyz-translate",
                note="one 3D point at the origin"),
)

TABLE_CASES = tuple("abcdefghi")


def catalog() -> list[PruningCase]:
    return list(_CATALOG)


def get_case(case_id: str) -> PruningCase:
    for c in _CATALOG:
        if c.id == case_id:
            return c
    raise KeyError(case_id)


def applicable_cases(budget: TransformBudget, dimension: int) -> list[PruningCase]:
    return [c for c in _CATALOG if c.dimension == dimension and budget.allows(c.cost)]


# exhaustiveness of subcase guards


def _grid_configs(case: PruningCase, values=(0, 1, 2)):
    n = case.arity * case.dimension
    for flat in itertools.product(values, repeat=n):
        yield [flat[i * case.dimension:(i + 1) * case.dimension] for i in range(case.arity)]


def check_exhaustive(case: PruningCase) -> list[tuple]:
    """Configurations on a small integer grid matched by zero or several subcases.

    The grid realises every equality pattern of up to three planar points, so
    an empty result means the guards partition the patterns.
    """
    bad = []
    for pts in _grid_configs(case, (0, 1, 2) if case.dimension == 2 else (0, 1)):
        hits = sum(1 for s in case.subcases if s.matches(pts))
        if hits != 1:
            bad.append((tuple(map(tuple, pts)), hits))
    return bad


# numeric verification


@dataclass
class CaseVerification:
    verified: bool
    trials: int
    max_residual: float = 0.0
    counterexample: Optional[dict] = None

    def __bool__(self) -> bool:
        return self.verified


def _sample_source(case: PruningCase, sub: Subcase, rng: random.Random) -> list[list[float]]:
    while True:
        pts = [[rng.uniform(-10, 10) for _ in range(case.dimension)] for _ in range(case.arity)]
        for g in sub.guards:
            if not g.equal:
                continue
            if g.kind == "coord":
                axis, i, j = g.args
                pts[j][axis] = pts[i][axis]
            elif g.kind == "point":
                i, j = g.args
                pts[j] = list(pts[i])
            else:
                i, j, k = g.args
                t = rng.uniform(-2, 2)
                pts[k] = [a + t * (b - a) for a, b in zip(pts[i], pts[j])]
        if sub.matches(pts, tol=1e-12) and _generic(sub, pts):
            return pts


def _generic(sub: Subcase, pts) -> bool:
    # keep "≠" guards well away from equality so the solve is well conditioned
    for g in sub.guards:
        if not g.equal and g.holds(pts, tol=0.05) is False:
            return False
    return True


class _Family:
    """Transformations generated by a set of traded classes, as a parameter vector."""

    def __init__(self, cost: frozenset[TransformClass], dim: int):
        self.dim = dim
        self.trans = [a for a, c in enumerate((TC.TRANSLATE_X, TC.TRANSLATE_Y, TC.TRANSLATE_Z)[:dim])
                      if c in cost]
        self.rotate = TC.ROTATE in cost
        self.half_turn = TC.ROTATE_PI in cost and not self.rotate
        self.uniform = TC.SCALE_UNIFORM in cost
        self.axis_scale = [a for a, c in enumerate((TC.SCALE_X, TC.SCALE_Y, TC.SCALE_Z)[:dim]) if c in cost]
        self.reflect = [a for a, c in enumerate((TC.REFLECT_X, TC.REFLECT_Y)) if c in cost]
        self.n_rot = (1 if dim == 2 else 3) if self.rotate else 0

    def size(self) -> int:
        return len(self.trans) + self.n_rot + (1 if self.uniform else 0) + len(self.axis_scale)

    def discrete(self):
        flips = [(False, True)] * len(self.reflect)
        halves = (False, True) if self.half_turn else (False,)
        return list(itertools.product(halves, *flips))

    def matrix(self, theta, choice):
        d = self.dim
        i = 0
        M = np.eye(d)
        if self.rotate:
            if d == 2:
                a = theta[0]
                M = np.array([[math.cos(a), -math.sin(a)], [math.sin(a), math.cos(a)]])
            else:
                M = Rotation.from_rotvec(theta[:3]).as_matrix()
            i = self.n_rot
        half, *flips = choice
        if half:
            H = np.eye(d)
            H[0, 0] = H[1, 1] = -1
            M = H @ M
        for axis, on in zip(self.reflect, flips):
            if on:
                F = np.eye(d)
                F[axis, axis] = -1
                M = F @ M
        S = np.eye(d)
        if self.uniform:
            S = S * math.exp(theta[i])
            i += 1
        for axis in self.axis_scale:
            S[axis, axis] *= math.exp(theta[i])
            i += 1
        t = np.zeros(d)
        for axis in self.trans:
            t[axis] = theta[i]
            i += 1
        return S @ M, t


def _residuals(case, sub, family, pts, length, choice, theta):
    A, t = family.matrix(theta, choice)
    img = [A @ np.asarray(p) + t for p in pts]
    res = [img[r.point][r.axis] - float(sub.constants[r.const]) for r in case.restrictions]
    for point, axis in case.nonnegative:
        # zero iff the coordinate is >= 0 given the zero restrictions after it;
        # unlike min(0, v) this has no flat region on the wrong side
        tail = [r.axis for r in case.restrictions
                if r.point == point and r.axis > axis and sub.constants[r.const] == 0]
        v = img[point]
        res.append(v[axis] - math.sqrt(v[axis] ** 2 + sum(v[a] ** 2 for a in tail)))
    if length is not None:
        k = abs(np.linalg.det(A)) ** (1.0 / family.dim)
        res.append(k * length - 1.0)
    return np.asarray(res)


def _solve_one(case, sub, family, pts, length, rng, starts=8) -> tuple[float, Optional[np.ndarray]]:
    best = (math.inf, None)
    n = family.size()
    choices = family.discrete()
    if n == 0:
        for choice in choices:
            r = _residuals(case, sub, family, pts, length, choice, np.zeros(0))
            val = float(np.max(np.abs(r))) if len(r) else 0.0
            best = min(best, (val, np.zeros(0)), key=lambda b: b[0])
        return best
    # restarts in the outer loop so a lucky start for the right discrete
    # choice is found before many wasted solves on the wrong ones
    for _ in range(starts):
        for choice in choices:
            x0 = np.array([rng.uniform(-3, 3) for _ in range(n)])
            fun = lambda th: _residuals(case, sub, family, pts, length, choice, th)  # noqa: E731
            sol = least_squares(fun, x0, xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=300)
            val = float(np.max(np.abs(sol.fun))) if len(sol.fun) else 0.0
            if val < best[0]:
                best = (val, sol.x)
            if val <= 1e-12:
                return best
    return best


def verify_case_numeric(case: PruningCase, trials: int = 500, rng: Optional[random.Random] = None,
                        tol: float = 1e-9, seed: int = 0) -> CaseVerification:
    """Check that sources of every subcase reach the subcase constants.

    For each trial a source configuration matching the subcase guard is
    sampled and a transformation built only from ``case.cost`` is searched
    numerically (least squares over continuous parameters, enumeration over
    the discrete half turn and reflections). Cases with ``unit_length`` also
    map a random positive length to 1.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    rng = rng or random.Random(seed)
    family = _Family(case.cost, case.dimension)
    use_unit = case.unit_length and TC.SCALE_UNIFORM in case.cost
    worst = 0.0
    for t in range(trials):
        sub = case.subcases[t % len(case.subcases)]
        pts = _sample_source(case, sub, rng)
        length = rng.uniform(0.1, 10) if use_unit else None
        val, _ = _solve_one(case, sub, family, pts, length, rng)
        worst = max(worst, val)
        if val > tol:
            return CaseVerification(False, t + 1, worst, {"subcase": sub.label, "points": pts,
                                                            "length": length, "residual": val})
    return CaseVerification(True, trials, worst)


def with_unit_scale(case: PruningCase) -> PruningCase:
    """The case extended with uniform scale spent on a unit length."""
    if not case.unit_length:
        raise ValueError(f"case {case.id} has no unit-length option")
    return replace(case, cost=case.cost | {TC.SCALE_UNIFORM})


# targets


@dataclass(frozen=True)
class PointRef:
    """A position point of a graph object.

    ``role`` is ``pos`` (point or circle/sphere centre), ``a``/``b`` (segment
    endpoints), ``corner`` (rectangle base corner or box min corner) or
    ``v2`` (the rectangle vertex ``p + w v``, only used together with the
    same rectangle's corner to ground its whole frame).
    """

    obj: str
    role: str

    def __str__(self) -> str:
        return f"{self.obj}.{self.role}"


_COORDS = {
    "pos": ("x", "y", "z"),
    "corner": ("x", "y", "z"),
    "a": ("xa", "ya"),
    "b": ("xb", "yb"),
}


def point_refs(o: SpatialObject) -> list[PointRef]:
    k = o.kind
    if k is ObjectKind.SEGMENT2:
        return [PointRef(o.id, "a"), PointRef(o.id, "b")]
    if k in (ObjectKind.RECTANGLE2, ObjectKind.BOX3):
        return [PointRef(o.id, "corner")]
    return [PointRef(o.id, "pos")]


def coord_param(o: SpatialObject, ref: PointRef, axis: int):
    names = _COORDS[ref.role]
    if axis >= o.kind.dimension:
        raise IndexError(axis)
    return o.param(names[axis])


def _free(g: ConstraintGraph, p) -> bool:
    return isinstance(p, Var) and p.name not in g.groundings


def _ref_free(g: ConstraintGraph, ref: PointRef, axes) -> bool:
    o = g.objects[ref.obj]
    return all(_free(g, coord_param(o, ref, a)) for a in axes)


def _frame_free(g: ConstraintGraph, o: SpatialObject) -> bool:
    return all(_free(g, o.param(n)) for n in ("x", "y", "xv", "yv", "w"))


def _nonlinear_counts(g: ConstraintGraph, extra: Sequence = ()) -> dict[str, int]:
    scope = dict(g.objects)
    counts = {oid: 0 for oid in g.objects}
    for f in tuple(g.formulas) + tuple(extra):
        for a in atoms(f):
            if not all(x in scope for x in a.args):
                continue
            try:
                enc = encode_atom(a, scope)
            except Exception:
                continue
            from .encoder import poly_atoms
            if any(p.lhs.degree() > 1 for p in poly_atoms(enc)):
                for x in set(a.args):
                    counts[x] += 1
    return counts


def _shares_boundary_point(g: ConstraintGraph, extra: Sequence, c1: str, c2: str) -> bool:
    on: dict[str, set[str]] = {}
    touching = False
    for f in tuple(g.formulas) + tuple(extra):
        for a in atoms(f):
            if a.name == "coincident" and len(a.args) == 2:
                on.setdefault(a.args[0], set()).add(a.args[1])
            if a.name == "touches" and set(a.args) == {c1, c2}:
                touching = True
    return touching or any({c1, c2} <= s for s in on.values())


def _circle_pairs(g: ConstraintGraph, extra: Sequence) -> list[tuple[str, str]]:
    """Pairs of circles (or spheres) sharing a boundary point, declaration order."""
    ids = [oid for oid, o in g.objects.items() if o.kind in (ObjectKind.CIRCLE2, ObjectKind.SPHERE3)]
    out = []
    for i, a in enumerate(ids):
        for b in ids[i + 1:]:
            if _shares_boundary_point(g, extra, a, b):
                out.append((a, b))
    return out


def _equal_constrained(g: ConstraintGraph, extra: Sequence, a: str, b: str) -> bool:
    for f in tuple(g.formulas) + tuple(extra):
        for at in atoms(f):
            if at.name in ("equals", "centred_on", "starts_at", "ends_at") and {a, b} <= set(at.args):
                return True
    return False


def _restricted_axes(case: PruningCase, index: int) -> set[int]:
    return {r.axis for r in case.restrictions if r.point == index} | {a for p, a in case.nonnegative if p == index}


def select_targets(g: ConstraintGraph, case: PruningCase, extra: Sequence = ()) -> Optional[tuple[PointRef, ...]]:
    """Choose the points a case grounds.

    Pairs of circles (spheres) sharing a boundary point come first; otherwise
    points are ranked by how many nonlinear atoms mention their object, ties
    broken by declaration order. For case f a rectangle with a free frame is
    targeted as (corner, v2), which grounds its corner, direction and width.
    """
    dims = case.dimension
    candidates = [r for o in g.objects.values() if o.kind.dimension == dims for r in point_refs(o)]
    if not candidates:
        return None
    order = {oid: i for i, oid in enumerate(g.objects)}
    counts = _nonlinear_counts(g, extra)

    def eligible(ref, index):
        axes = _restricted_axes(case, index)
        return _ref_free(g, ref, axes)

    if case.arity >= 2 and dims in (2, 3):
        for a, b in _circle_pairs(g, extra):
            if g.objects[a].kind.dimension != dims:
                continue
            refs = [PointRef(a, "pos"), PointRef(b, "pos")]
            if all(eligible(r, i) for i, r in enumerate(refs)):
                chosen = _extend(refs, case, candidates, counts, order, eligible)
                if chosen:
                    return chosen

    ranked = sorted(candidates, key=lambda r: (-counts.get(r.obj, 0), order[r.obj], r.role))
    if case.id == "f":
        frames = _frames(g, ranked)
        if frames:
            return frames[0]
    chosen = _extend([], case, ranked, counts, order, eligible)
    if chosen and case.id == "d" and _equal_constrained(g, extra, chosen[0].obj, chosen[1].obj):
        return None
    return chosen


def _frames(g: ConstraintGraph, ranked: Sequence[PointRef]) -> list[tuple[PointRef, PointRef]]:
    out = []
    for ref in ranked:
        o = g.objects[ref.obj]
        if ref.role == "corner" and o.kind is ObjectKind.RECTANGLE2 and _frame_free(g, o):
            out.append((ref, PointRef(o.id, "v2")))
    return out


def _extend(prefix, case, ranked, counts, order, eligible):
    chosen = list(prefix)
    for ref in sorted(ranked, key=lambda r: (-counts.get(r.obj, 0), order[r.obj], r.role)):
        if len(chosen) == case.arity:
            break
        if ref in chosen:
            continue
        if eligible(ref, len(chosen)):
            chosen.append(ref)
    return tuple(chosen) if len(chosen) == case.arity else None


# expansion


@dataclass(frozen=True)
class PrunedGraph:
    """One subcase copy: the grounded graph plus extra polynomial side conditions."""

    graph: ConstraintGraph
    side: tuple[PolyFormula, ...]
    case: Optional[PruningCase]
    subcase: Optional[Subcase]
    targets: tuple[PointRef, ...]
    budget: TransformBudget
    unit: Optional[str] = None

    @property
    def label(self) -> str:
        if self.case is None:
            return "none"
        return f"{self.case.id}{self.subcase.label}" if self.subcase.label else self.case.id


class TargetError(ValueError):
    pass


def positive_lengths(g: ConstraintGraph, objs: Iterable[str]) -> list[str]:
    """Free variables that well-formedness forces positive (radii, sides)."""
    out = []
    for oid in objs:
        o = g.objects[oid]
        names = {ObjectKind.CIRCLE2: ("r",), ObjectKind.SPHERE3: ("r",),
                 ObjectKind.RECTANGLE2: ("w", "h"), ObjectKind.BOX3: ("w", "d", "h")}.get(o.kind, ())
        for n in names:
            p = o.param(n)
            if _free(g, p):
                out.append(p.name)
    return out


def expand_subcases(g: ConstraintGraph, case: PruningCase, targets: Sequence[PointRef],
                    budget: Optional[TransformBudget] = None, unit: Optional[str] = None) -> list[PrunedGraph]:
    """One grounded copy of ``g`` per subcase, with ``case.cost`` spent.

    ``unit`` names a positive length variable set to 1; it spends uniform
    scale and is only allowed for cases with the unit-length option.
    """
    budget = budget or TransformBudget()
    cost = case.cost
    if unit is not None:
        if not case.unit_length:
            raise TargetError(f"case {case.id} cannot ground a unit length")
        cost = cost | {TC.SCALE_UNIFORM}
        if unit not in g.variables() or unit in g.groundings:
            raise TargetError(f"unit length {unit!r} is not a free variable")
    spent = budget.spend(cost)
    if len(targets) != case.arity:
        raise TargetError(f"case {case.id} needs {case.arity} targets, got {len(targets)}")
    frame = len(targets) == 2 and targets[1].role == "v2"
    if frame and (case.id != "f" or targets[0] != PointRef(targets[1].obj, "corner")):
        raise TargetError("a rectangle frame target must be (corner, v2) of one rectangle under case f")
    out = []
    for sub in case.subcases:
        grounds: dict[str, Fraction] = {}
        side: list[PolyFormula] = []
        for r in case.restrictions:
            ref = targets[r.point]
            value = sub.constants[r.const]
            if ref.role == "v2":
                continue
            p = coord_param(g.objects[ref.obj], ref, r.axis)
            _ground(g, grounds, p, value)
        if frame:
            o = g.objects[targets[0].obj]
            # p + w v = (c3, c2) with |v| = 1 and w > 0 pins v = (1, 0), w = c3
            _ground(g, grounds, o.param("xv"), Fraction(1))
            _ground(g, grounds, o.param("yv"), Fraction(0))
            _ground(g, grounds, o.param("w"), sub.constants["c3"])
        for point, axis in case.nonnegative:
            ref = targets[point]
            p = coord_param(g.objects[ref.obj], ref, axis)
            if not isinstance(p, Var):
                raise TargetError(f"{ref} coordinate {axis} is a constant")
            side.append(ge(Poly.var(p.name), 0))
        if unit is not None:
            grounds[unit] = Fraction(1)
        out.append(PrunedGraph(g.with_groundings(grounds), tuple(side), case, sub, tuple(targets), spent, unit))
    return out


def _ground(g: ConstraintGraph, grounds: dict, p, value: Fraction) -> None:
    if not isinstance(p, Var):
        raise TargetError(f"cannot ground constant parameter {p}")
    if p.name in g.groundings:
        raise TargetError(f"target coordinate {p.name} is already grounded")
    if p.name in grounds and grounds[p.name] != value:
        raise TargetError(f"conflicting constants for {p.name}")
    grounds[p.name] = value


# case choice


def _preference(case: PruningCase) -> tuple:
    eliminated = case.restriction_count + (1 if case.unit_length else 0)
    return (-eliminated, len(case.subcases), case.id)


@dataclass(frozen=True)
class PruningPlan:
    case: Optional[PruningCase]
    targets: tuple[PointRef, ...]
    subgraphs: tuple[PrunedGraph, ...]


def plan_pruning(g: ConstraintGraph, budget: TransformBudget, extra: Sequence = (),
                 allow_scale: bool = True, dimension: Optional[int] = None) -> PruningPlan:
    """Pick the applicable case that grounds the most variables and expand it.

    ``allow_scale`` is false for components whose scale is spent elsewhere
    (lengths coupled to another component).
    """
    if not budget.allows(()) or not g.objects:
        return _unpruned(g, budget)
    dims = {o.kind.dimension for o in g.objects.values()}
    if dimension is None:
        if len(dims) != 1:
            return _unpruned(g, budget)
        dimension = dims.pop()
    if not allow_scale:
        budget = budget.restrict(budget.available - {TC.SCALE_UNIFORM, TC.SCALE_X, TC.SCALE_Y, TC.SCALE_Z})
    for case in sorted(applicable_cases(budget, dimension), key=_preference):
        targets = select_targets(g, case, extra)
        if targets is None:
            continue
        unit = None
        if case.unit_length and TC.SCALE_UNIFORM in budget:
            lengths = positive_lengths(g, [targets[0].obj]) or positive_lengths(g, list(g.objects))
            unit = lengths[0] if lengths else None
        subs = expand_subcases(g, case, targets, budget, unit)
        return PruningPlan(case, targets, tuple(subs))
    return _unpruned(g, budget)


def _unpruned(g: ConstraintGraph, budget: TransformBudget) -> PruningPlan:
    return PruningPlan(None, (), (PrunedGraph(g, (), None, None, (), budget),))


def plan_alternatives(g: ConstraintGraph, budget: TransformBudget, limit: int = 2,
                      allow_scale: bool = True) -> list[PruningPlan]:
    """The preferred plan, followed by the same case on other rectangle frames.

    Each plan is equisatisfiable with ``g`` on its own. Which frame gives the
    backend the easier problem is hard to predict, so callers may race them.
    """
    first = plan_pruning(g, budget, allow_scale=allow_scale)
    plans = [first]
    if first.case is None or first.case.id != "f" or len(first.targets) != 2 or first.targets[1].role != "v2":
        return plans
    counts = _nonlinear_counts(g)
    order = {oid: i for i, oid in enumerate(g.objects)}
    refs = [r for o in g.objects.values() if o.kind is ObjectKind.RECTANGLE2 for r in point_refs(o)]
    ranked = sorted(refs, key=lambda r: (-counts.get(r.obj, 0), order[r.obj], r.role))
    for targets in _frames(g, ranked):
        if len(plans) >= limit:
            break
        if targets == first.targets:
            continue
        if first.subgraphs[0].unit is not None:
            break
        if not allow_scale:
            budget = budget.restrict(budget.available - {TC.SCALE_UNIFORM, TC.SCALE_X, TC.SCALE_Y, TC.SCALE_Z})
        subs = expand_subcases(g, first.case, targets, budget)
        plans.append(PruningPlan(first.case, targets, tuple(subs)))
    return plans
