"""Which affine transformations preserve which relations, and how to apply them.

The knowledge is kept as two static tables: one keyed by relation class, one
listing per-object-kind exclusions. Everything else (graph budgets, the
randomized preservation checker) is derived from them.
"""

from __future__ import annotations

import enum
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence

from gmpy2 import mpq

from .encoder import encode_atom, eval_ground
from .geometry import overlap_candidates
from .model import (
    ConstraintGraph, ObjectKind, RelationAtom, RelationClass, RELATIONS, SpatialObject, Var,
    atoms, bound_objects,
)


class Category(enum.Enum):
    TRANSLATE = "translate"
    ROTATE = "rotate"
    UNIFORM_SCALE = "uniform-scale"
    NONUNIFORM_SCALE = "nonuniform-scale"
    REFLECT = "reflect"


class TransformClass(enum.Enum):
    TRANSLATE_X = ("x-translate", Category.TRANSLATE, 2)
    TRANSLATE_Y = ("y-translate", Category.TRANSLATE, 2)
    TRANSLATE_Z = ("z-translate", Category.TRANSLATE, 3)
    ROTATE = ("rotate", Category.ROTATE, 2)
    ROTATE_PI = ("rotate-pi", Category.ROTATE, 2)
    SCALE_UNIFORM = ("scale", Category.UNIFORM_SCALE, 2)
    SCALE_X = ("x-scale", Category.NONUNIFORM_SCALE, 2)
    SCALE_Y = ("y-scale", Category.NONUNIFORM_SCALE, 2)
    SCALE_Z = ("z-scale", Category.NONUNIFORM_SCALE, 3)
    # REFLECT_X negates x (the horizontal reflection), REFLECT_Y negates y
    REFLECT_X = ("x-reflect", Category.REFLECT, 2)
    REFLECT_Y = ("y-reflect", Category.REFLECT, 2)

    def __init__(self, label: str, category: Category, min_dim: int):
        self.label = label
        self.category = category
        self.min_dim = min_dim

    def __repr__(self) -> str:
        return f"<{self.label}>"


TC = TransformClass
ALL_CLASSES = frozenset(TC)
_ALL_CATEGORIES = frozenset(Category)

# relation class -> preserving transformation categories
PRESERVED_BY: Mapping[RelationClass, frozenset[Category]] = {
    RelationClass.TOPOLOGY: _ALL_CATEGORIES,
    RelationClass.MEREOLOGY: _ALL_CATEGORIES,
    RelationClass.COINCIDENCE: _ALL_CATEGORIES,
    RelationClass.COLLINEARITY: _ALL_CATEGORIES,
    RelationClass.PARALLELISM: _ALL_CATEGORIES,
    RelationClass.RELATIVE_ORIENTATION: _ALL_CATEGORIES - {Category.REFLECT},
    RelationClass.PERPENDICULARITY: _ALL_CATEGORIES - {Category.NONUNIFORM_SCALE},
    RelationClass.DISTANCE: _ALL_CATEGORIES - {Category.NONUNIFORM_SCALE},
}

# object kind -> transformation classes that do not map the kind onto itself
KIND_EXCLUSIONS: Mapping[ObjectKind, frozenset[TransformClass]] = {
    ObjectKind.CIRCLE2: frozenset({TC.SCALE_X, TC.SCALE_Y, TC.SCALE_Z}),
    ObjectKind.SPHERE3: frozenset({TC.SCALE_X, TC.SCALE_Y, TC.SCALE_Z}),
    ObjectKind.RECTANGLE2: frozenset({TC.SCALE_X, TC.SCALE_Y, TC.SCALE_Z}),
    # boxes stay axis-aligned: only the half turn about z survives
    ObjectKind.BOX3: frozenset({TC.ROTATE}),
}

# classes that are spent together: using any member uses the group
SPEND_GROUPS: tuple[frozenset[TransformClass], ...] = (
    frozenset({TC.ROTATE, TC.ROTATE_PI}),
)


def sym_of_relation(relation_class: RelationClass, kinds: Iterable[ObjectKind] = ()) -> frozenset[TransformClass]:
    cats = PRESERVED_BY[relation_class]
    out = {c for c in TC if c.category in cats}
    for k in kinds:
        out -= KIND_EXCLUSIONS.get(k, frozenset())
    return frozenset(out)


def _group_of(c: TransformClass) -> frozenset[TransformClass]:
    for g in SPEND_GROUPS:
        if c in g:
            return g
    return frozenset({c})


@dataclass(frozen=True)
class TransformBudget:
    """Transformation classes still available to a (sub)graph."""

    available: frozenset[TransformClass] = ALL_CLASSES
    spent: frozenset[TransformClass] = frozenset()

    def unspent(self) -> frozenset[TransformClass]:
        return self.available - self.spent

    def allows(self, classes: Iterable[TransformClass]) -> bool:
        return set(classes) <= self.unspent()

    def spend(self, classes: Iterable[TransformClass]) -> "TransformBudget":
        classes = frozenset(classes)
        if not self.allows(classes):
            missing = sorted(c.label for c in classes - self.unspent())
            raise ValueError(f"transformations not available: {', '.join(missing)}")
        used = set()
        for c in classes:
            used |= _group_of(c)
        return TransformBudget(self.available, self.spent | used)

    def restrict(self, classes: Iterable[TransformClass]) -> "TransformBudget":
        return TransformBudget(self.available & frozenset(classes), self.spent)

    def __contains__(self, c: TransformClass) -> bool:
        return c in self.unspent()

    def labels(self) -> list[str]:
        return [c.label for c in TC if c in self.unspent()]


def graph_kinds(g: ConstraintGraph, extra=()) -> set[ObjectKind]:
    kinds = {o.kind for o in g.objects.values()}
    for f in tuple(g.formulas) + tuple(extra):
        kinds |= {o.kind for o in bound_objects(f)}
    return kinds


def sym_of_graph(g: ConstraintGraph, extra=()) -> TransformBudget:
    """Intersection of the preserving sets of every atom (and object kind) in ``g``.

    ``extra`` holds formulas that take part in the query without being part
    of the graph, such as a conclusion to be entailed.
    """
    scope = dict(g.objects)
    for f in tuple(g.formulas) + tuple(extra):
        for o in bound_objects(f):
            scope[o.id] = o
    allowed = set(ALL_CLASSES)
    for k in graph_kinds(g, extra):
        allowed -= KIND_EXCLUSIONS.get(k, frozenset())
    for f in tuple(g.formulas) + tuple(extra):
        for a in atoms(f):
            kinds = [scope[x].kind for x in a.args if x in scope]
            allowed &= sym_of_relation(a.relation_class, kinds)
    return TransformBudget(frozenset(allowed))


# concrete transformations


Matrix = tuple[tuple[object, ...], ...]


@dataclass(frozen=True)
class AffineTransform:
    """``x -> Q x + t``."""

    Q: Matrix
    t: tuple

    @property
    def dim(self) -> int:
        return len(self.t)

    @classmethod
    def identity(cls, dim: int = 2) -> "AffineTransform":
        return cls(_diag([Fraction(1)] * dim), tuple(Fraction(0) for _ in range(dim)))

    def apply(self, p: Sequence) -> tuple:
        return tuple(sum(q * x for q, x in zip(row, p)) + ti for row, ti in zip(self.Q, self.t))

    def linear(self, v: Sequence) -> tuple:
        return tuple(sum(q * x for q, x in zip(row, v)) for row in self.Q)

    def compose(self, inner: "AffineTransform") -> "AffineTransform":
        """``self ∘ inner``: apply ``inner`` first."""
        n = self.dim
        Q = tuple(tuple(sum(self.Q[i][k] * inner.Q[k][j] for k in range(n)) for j in range(n))
                  for i in range(n))
        return AffineTransform(Q, tuple(a + b for a, b in zip(self.linear(inner.t), self.t)))

    def det(self):
        return _det(self.Q)

    def similarity_factor(self):
        """Scale ``k`` when ``QᵀQ = k²I``, otherwise None."""
        n = self.dim
        gram = [[sum(self.Q[k][i] * self.Q[k][j] for k in range(n)) for j in range(n)] for i in range(n)]
        k2 = gram[0][0]
        exact = all(isinstance(x, Fraction) for row in self.Q for x in row)
        for i in range(n):
            for j in range(n):
                want = k2 if i == j else 0
                if exact and gram[i][j] != want:
                    return None
                if not exact and abs(gram[i][j] - want) > 1e-12 * max(1.0, abs(k2)):
                    return None
        if exact:
            root = _exact_sqrt(k2)
            if root is not None:
                return root
        return math.sqrt(k2)

    def is_axis_preserving(self) -> bool:
        return all(sum(1 for x in row if x != 0) == 1 for row in self.Q)


def _diag(values) -> Matrix:
    n = len(values)
    return tuple(tuple(values[i] if i == j else Fraction(0) for j in range(n)) for i in range(n))


def _det(Q):
    if len(Q) == 2:
        return Q[0][0] * Q[1][1] - Q[0][1] * Q[1][0]
    return (Q[0][0] * (Q[1][1] * Q[2][2] - Q[1][2] * Q[2][1])
            - Q[0][1] * (Q[1][0] * Q[2][2] - Q[1][2] * Q[2][0])
            + Q[0][2] * (Q[1][0] * Q[2][1] - Q[1][1] * Q[2][0]))


def _exact_sqrt(q: Fraction) -> Optional[Fraction]:
    if q < 0:
        return None
    n, d = math.isqrt(q.numerator), math.isqrt(q.denominator)
    if n * n == q.numerator and d * d == q.denominator:
        return Fraction(n, d)
    return None


def _snap(x: float):
    for c in (0, 1, -1):
        if abs(x - c) < 1e-15:
            return Fraction(c)
    return x


def pythagorean_direction(t: Fraction) -> tuple[Fraction, Fraction]:
    """Rational point on the unit circle, ``((1-t²)/(1+t²), 2t/(1+t²))``."""
    d = 1 + t * t
    return (1 - t * t) / d, 2 * t / d


def quaternion_rotation(a, b, c, d) -> Matrix:
    """Rotation matrix of the (not necessarily unit) quaternion a+bi+cj+dk."""
    a, b, c, d = (Fraction(x) for x in (a, b, c, d))
    n = a * a + b * b + c * c + d * d
    if n == 0:
        raise ValueError("zero quaternion")
    return (
        ((a*a + b*b - c*c - d*d) / n, 2 * (b*c - a*d) / n, 2 * (b*d + a*c) / n),
        (2 * (b*c + a*d) / n, (a*a - b*b + c*c - d*d) / n, 2 * (c*d - a*b) / n),
        (2 * (b*d - a*c) / n, 2 * (c*d + a*b) / n, (a*a - b*b - c*c + d*d) / n),
    )


def make_transform(tclass: TransformClass, dim: int = 2, *, amount=None, angle: Optional[float] = None,
                   direction: Optional[Sequence] = None, quaternion: Optional[Sequence] = None,
                   k=None) -> AffineTransform:
    """Build a transformation of ``tclass``.

    ``amount`` is the offset for translations; rotations take an ``angle`` in
    radians, an exact unit ``direction`` (2D) or a ``quaternion`` (3D); scales
    take ``k > 0``.
    """
    if dim not in (2, 3):
        raise ValueError("dimension must be 2 or 3")
    if dim < tclass.min_dim:
        raise ValueError(f"{tclass.label} needs a {tclass.min_dim}D space")
    one = [Fraction(1)] * dim
    zero = tuple(Fraction(0) for _ in range(dim))
    cat = tclass.category
    if cat is Category.TRANSLATE:
        axis = {TC.TRANSLATE_X: 0, TC.TRANSLATE_Y: 1, TC.TRANSLATE_Z: 2}[tclass]
        t = list(zero)
        t[axis] = Fraction(amount if amount is not None else 0)
        return AffineTransform(_diag(one), tuple(t))
    if tclass is TC.ROTATE_PI:
        vals = [Fraction(-1), Fraction(-1)] + [Fraction(1)] * (dim - 2)
        return AffineTransform(_diag(vals), zero)
    if tclass is TC.ROTATE:
        if dim == 3:
            q = quaternion if quaternion is not None else (1, 0, 0, 0)
            return AffineTransform(quaternion_rotation(*q), zero)
        if direction is not None:
            c, s = direction
        else:
            theta = angle if angle is not None else 0.0
            c, s = _snap(math.cos(theta)), _snap(math.sin(theta))
        return AffineTransform(((c, -s), (s, c)), zero)
    if cat in (Category.UNIFORM_SCALE, Category.NONUNIFORM_SCALE):
        k = Fraction(1) if k is None else k
        if k <= 0:
            raise ValueError(f"scale factor must be positive, got {k}")
        if tclass is TC.SCALE_UNIFORM:
            return AffineTransform(_diag([k] * dim), zero)
        axis = {TC.SCALE_X: 0, TC.SCALE_Y: 1, TC.SCALE_Z: 2}[tclass]
        vals = list(one)
        vals[axis] = k
        return AffineTransform(_diag(vals), zero)
    axis = 0 if tclass is TC.REFLECT_X else 1
    vals = list(one)
    vals[axis] = Fraction(-1)
    return AffineTransform(_diag(vals), zero)


class TransformError(ValueError):
    pass


def _value(o: SpatialObject, name: str, config: Mapping):
    p = o.param(name)
    return config[p.name] if isinstance(p, Var) else p.value


def _write(o: SpatialObject, values: Mapping[str, object], out: dict) -> None:
    for name, val in values.items():
        p = o.param(name)
        if isinstance(p, Var):
            out[p.name] = val
        elif p.value != val:
            raise TransformError(f"{o.id}.{name} is a constant and cannot move")


def apply_transform(T: AffineTransform, config: Mapping[str, object],
                    objects: Iterable[SpatialObject]) -> dict:
    """Image of a configuration; variables of other objects pass through."""
    out = dict(config)
    for o in objects:
        if o.kind.dimension != T.dim:
            raise TransformError(f"{T.dim}D transformation applied to {o.kind.value} {o.id}")
        g = lambda n: _value(o, n, config)  # noqa: E731
        kind = o.kind
        if kind in (ObjectKind.POINT2, ObjectKind.POINT3):
            names = kind.param_names
            _write(o, dict(zip(names, T.apply([g(n) for n in names]))), out)
        elif kind is ObjectKind.SEGMENT2:
            a = T.apply([g("xa"), g("ya")])
            b = T.apply([g("xb"), g("yb")])
            _write(o, {"xa": a[0], "ya": a[1], "xb": b[0], "yb": b[1]}, out)
        elif kind in (ObjectKind.CIRCLE2, ObjectKind.SPHERE3):
            k = T.similarity_factor()
            if k is None:
                raise TransformError(f"non-uniform scaling does not map {kind.value} {o.id} to a {kind.value}")
            names = kind.param_names[:-1]
            c = T.apply([g(n) for n in names])
            vals = dict(zip(names, c))
            vals["r"] = g("r") * k
            _write(o, vals, out)
        elif kind is ObjectKind.RECTANGLE2:
            k = T.similarity_factor()
            if k is None:
                raise TransformError(f"non-uniform scaling does not map rectangle {o.id} to a rectangle")
            x, y, xv, yv, w, h = (g(n) for n in kind.param_names)
            corner = (x, y)
            if T.det() < 0:
                # orientation flips: the image of p4 becomes the new base corner
                corner = (x - h * yv, y + h * xv)
            p = T.apply(corner)
            v = T.linear((xv, yv))
            _write(o, {"x": p[0], "y": p[1], "xv": v[0] / k, "yv": v[1] / k, "w": w * k, "h": h * k}, out)
        elif kind is ObjectKind.BOX3:
            if not T.is_axis_preserving():
                raise TransformError(f"transformation does not keep box {o.id} axis-aligned")
            lo = [g("x"), g("y"), g("z")]
            ext = [g("w"), g("d"), g("h")]
            c1 = T.apply(lo)
            c2 = T.apply([a + e for a, e in zip(lo, ext)])
            new_lo = [min(a, b) for a, b in zip(c1, c2)]
            size = [abs(a - b) for a, b in zip(c1, c2)]
            _write(o, {"x": new_lo[0], "y": new_lo[1], "z": new_lo[2],
                       "w": size[0], "d": size[1], "h": size[2]}, out)
        else:  # pragma: no cover
            raise TransformError(f"unsupported kind {kind}")
    return out


# randomized preservation checking


def random_rational(rng: random.Random, lo=-10, hi=10, denominators=(1, 2, 3, 4, 5)) -> Fraction:
    d = rng.choice(denominators)
    return Fraction(rng.randint(lo * d, hi * d), d)


_AXIS_UNITS = [(Fraction(1), Fraction(0)), (Fraction(0), Fraction(1)),
               (Fraction(-1), Fraction(0)), (Fraction(0), Fraction(-1))]


def _positive(rng, mode):
    if mode == "tight":
        return Fraction(rng.randint(1, 2))
    if mode == "coarse":
        return Fraction(rng.randint(1, 3))
    return Fraction(rng.randint(1, 50), rng.choice((1, 2, 5)))


def _unit(rng, mode):
    if mode == "tight":
        return rng.choice(_AXIS_UNITS)
    if mode == "coarse":
        return rng.choice(_AXIS_UNITS + [(Fraction(3, 5), Fraction(4, 5)), (Fraction(4, 5), Fraction(-3, 5))])
    return pythagorean_direction(random_rational(rng, -3, 3))


def _coordinate(rng, mode):
    if mode == "tight":
        return Fraction(rng.randint(0, 2))
    if mode == "coarse":
        return Fraction(rng.randint(-3, 3))
    return random_rational(rng)


def sample_object(o: SpatialObject, rng: random.Random, mode: str = "fine") -> dict:
    """Random values for the variables of ``o``.

    ``tight`` and ``coarse`` samples live on small integer lattices so that
    equality relations (contact, coincidence, parallelism) hold reasonably
    often; ``fine`` samples use rationals with small denominators in [-10, 10].
    """
    vals: dict[str, Fraction] = {}
    kind = o.kind
    for name in kind.param_names:
        if name in ("r", "w", "h", "d"):
            vals[name] = _positive(rng, mode)
        elif name not in ("xv", "yv"):
            vals[name] = _coordinate(rng, mode)
    if kind is ObjectKind.RECTANGLE2:
        vals["xv"], vals["yv"] = _unit(rng, mode)
    if o.equal_sides:
        for n in ("h", "d"):
            if n in vals:
                vals[n] = vals["w"]
    return {p.name: mpq(vals[n].numerator, vals[n].denominator)
            for n, p in zip(kind.param_names, o.params) if isinstance(p, Var)}


def _degenerate(objs, config) -> bool:
    for o in objs:
        if o.kind is ObjectKind.SEGMENT2:
            if config[f"xa_{o.id}"] == config[f"xb_{o.id}"] and config[f"ya_{o.id}"] == config[f"yb_{o.id}"]:
                return True
    return False


def sample_configuration(objs: Sequence[SpatialObject], rng: random.Random, mode: Optional[str] = None) -> dict:
    if mode is None:
        u = rng.random()
        mode = "tight" if u < 0.4 else "coarse" if u < 0.7 else "fine"
    while True:
        config: dict = {}
        for o in objs:
            config.update(sample_object(o, rng, mode))
        if not _degenerate(objs, config):
            return config


def random_transform(tclass: TransformClass, dim: int, rng: random.Random) -> AffineTransform:
    cat = tclass.category
    if cat is Category.TRANSLATE:
        return make_transform(tclass, dim, amount=random_rational(rng))
    if tclass is TC.ROTATE:
        if dim == 3:
            q = [rng.randint(-4, 4) for _ in range(4)]
            if not any(q):
                q[0] = 1
            return make_transform(tclass, 3, quaternion=q)
        return make_transform(tclass, 2, direction=pythagorean_direction(random_rational(rng, -3, 3)))
    if cat in (Category.UNIFORM_SCALE, Category.NONUNIFORM_SCALE):
        k = Fraction(rng.randint(1, 12), rng.randint(1, 6))
        if rng.random() < 0.3:
            k = Fraction(rng.choice((2, 3, 5)), 1) ** rng.choice((1, -1))
        return make_transform(tclass, dim, k=k)
    return make_transform(tclass, dim)


def template_objects(relation: str, kinds: Sequence[ObjectKind], square: bool = False) -> tuple[list[SpatialObject], RelationAtom]:
    objs = [SpatialObject.symbolic(f"o{i}", k, square and k is ObjectKind.RECTANGLE2)
            for i, k in enumerate(kinds)]
    return objs, RelationAtom(relation, tuple(o.id for o in objs))


@dataclass
class PreservationResult:
    preserved: bool
    trials: int
    config: Optional[dict] = None
    transform: Optional[AffineTransform] = None
    image: Optional[dict] = None
    # how often the relation held / failed on sampled configurations
    truth_counts: dict = field(default_factory=dict)

    def __bool__(self) -> bool:
        return self.preserved


def _truth(f, config, objs):
    cands = overlap_candidates(objs, config)
    return eval_ground(f, config, cands, complete=True)


@dataclass(frozen=True)
class _Template:
    relation: str
    objs: tuple
    formula: object
    dim: int


def _template(relation: str, kinds: Sequence[ObjectKind], square: bool) -> _Template:
    objs, atom = template_objects(relation, kinds, square)
    f = encode_atom(atom, {o.id: o for o in objs})
    return _Template(relation, tuple(objs), f, kinds[0].dimension)


def _search(templates: Sequence[_Template], tclass: TransformClass, trials: int, seed: int) -> PreservationResult:
    if trials < 1:
        raise ValueError("trials must be at least 1")
    rng = random.Random(seed)
    counts = {True: 0, False: 0, None: 0}
    for i in range(trials):
        tpl = templates[i % len(templates)]
        config = sample_configuration(tpl.objs, rng)
        T = random_transform(tclass, tpl.dim, rng)
        image = apply_transform(T, config, tpl.objs)
        before = _truth(tpl.formula, config, tpl.objs)
        after = _truth(tpl.formula, image, tpl.objs)
        counts[before] += 1
        if before is None or after is None:
            continue
        if before != after:
            return PreservationResult(False, trials, config, T, image, counts)
    return PreservationResult(True, trials, truth_counts=counts)


def check_preservation(relation: str, kinds: Sequence[ObjectKind], tclass: TransformClass,
                       trials: int = 1000, seed: int = 0, square: bool = False) -> PreservationResult:
    """Search for a configuration whose truth value changes under ``tclass``."""
    if relation not in RELATIONS:
        raise KeyError(relation)
    return _search([_template(relation, kinds, square)], tclass, trials, seed)


def class_templates(relation_class: RelationClass, tclass: TransformClass) -> list[tuple[str, tuple]]:
    """Every (relation, signature) of the class on which ``tclass`` is defined."""
    out = []
    for name, spec in RELATIONS.items():
        if spec.relation_class is not relation_class:
            continue
        for sig in spec.signatures:
            if sig[0].dimension < tclass.min_dim:
                continue
            if any(tclass in KIND_EXCLUSIONS.get(k, ()) for k in sig):
                continue
            out.append((name, sig))
    return out


def check_class_preservation(relation_class: RelationClass, tclass: TransformClass,
                             trials: int = 1000, seed: int = 0) -> PreservationResult:
    """Preservation check for a whole relation class.

    Trials cycle through every relation signature of the class that the
    transformation applies to. Rectangle relations are sampled as squares on
    every other pass, since some relations only make sense for squares.
    """
    templates = []
    for name, sig in class_templates(relation_class, tclass):
        templates.append(_template(name, sig, False))
        if ObjectKind.RECTANGLE2 in sig:
            templates.append(_template(name, sig, True))
    if not templates:
        return PreservationResult(True, 0)
    return _search(templates, tclass, trials, seed)
