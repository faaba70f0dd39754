"""Spatial objects, relation atoms, edge formulas, constraint graphs and verdicts."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from fractions import Fraction
from types import MappingProxyType
from typing import Iterable, Iterator, Mapping, Optional, Sequence, Union


class ObjectKind(enum.Enum):
    POINT2 = "point"
    SEGMENT2 = "segment"
    RECTANGLE2 = "rectangle"
    CIRCLE2 = "circle"
    POINT3 = "point3"
    SPHERE3 = "sphere"
    BOX3 = "box"

    @property
    def param_names(self) -> tuple[str, ...]:
        return PARAM_NAMES[self]

    @property
    def dimension(self) -> int:
        return 3 if self in (ObjectKind.POINT3, ObjectKind.SPHERE3, ObjectKind.BOX3) else 2

    @property
    def is_region(self) -> bool:
        return self in (ObjectKind.RECTANGLE2, ObjectKind.CIRCLE2, ObjectKind.SPHERE3, ObjectKind.BOX3)


PARAM_NAMES = {
    ObjectKind.POINT2: ("x", "y"),
    ObjectKind.SEGMENT2: ("xa", "ya", "xb", "yb"),
    ObjectKind.RECTANGLE2: ("x", "y", "xv", "yv", "w", "h"),
    ObjectKind.CIRCLE2: ("x", "y", "r"),
    ObjectKind.POINT3: ("x", "y", "z"),
    ObjectKind.SPHERE3: ("x", "y", "z", "r"),
    ObjectKind.BOX3: ("x", "y", "z", "w", "d", "h"),
}


class RelationClass(enum.Enum):
    TOPOLOGY = "topology"
    MEREOLOGY = "mereology"
    COINCIDENCE = "coincidence"
    COLLINEARITY = "collinearity"
    RELATIVE_ORIENTATION = "relative_orientation"
    PARALLELISM = "parallelism"
    PERPENDICULARITY = "perpendicularity"
    DISTANCE = "distance"


@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Const:
    value: Fraction

    def __post_init__(self):
        if not isinstance(self.value, Fraction):
            object.__setattr__(self, "value", Fraction(self.value))

    def __str__(self) -> str:
        return str(self.value)


Param = Union[Var, Const]


@dataclass(frozen=True)
class SpatialObject:
    id: str
    kind: ObjectKind
    params: tuple[Param, ...]
    # square for rectangles, cube for boxes
    equal_sides: bool = False

    @classmethod
    def symbolic(cls, id: str, kind: ObjectKind, equal_sides: bool = False) -> "SpatialObject":
        """An object whose parameters are all fresh variables ``<param>_<id>``."""
        return cls(id, kind, tuple(Var(f"{p}_{id}") for p in kind.param_names), equal_sides)

    def param(self, name: str) -> Param:
        return self.params[self.kind.param_names.index(name)]

    def variables(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.params if isinstance(p, Var))

    @property
    def kind_label(self) -> str:
        if self.equal_sides and self.kind is ObjectKind.RECTANGLE2:
            return "square"
        if self.equal_sides and self.kind is ObjectKind.BOX3:
            return "cube"
        return self.kind.value


K = ObjectKind


@dataclass(frozen=True)
class RelationSpec:
    name: str
    relation_class: RelationClass
    signatures: tuple[tuple[ObjectKind, ...], ...]


def _spec(name, cls, *sigs):
    return name, RelationSpec(name, cls, tuple(sigs))


_PSS = ((K.POINT2, K.SEGMENT2), (K.POINT2, K.POINT2, K.POINT2))
_RR = (K.RECTANGLE2, K.RECTANGLE2)

RELATIONS: Mapping[str, RelationSpec] = MappingProxyType(dict([
    _spec("left_of", RelationClass.RELATIVE_ORIENTATION, *_PSS),
    _spec("right_or_collinear", RelationClass.RELATIVE_ORIENTATION, *_PSS),
    _spec("collinear", RelationClass.COLLINEARITY, *_PSS),
    _spec("parallel", RelationClass.PARALLELISM, (K.SEGMENT2, K.SEGMENT2)),
    _spec("perpendicular", RelationClass.PERPENDICULARITY, (K.SEGMENT2, K.SEGMENT2)),
    _spec("coincident", RelationClass.COINCIDENCE, (K.POINT2, K.SEGMENT2), (K.POINT2, K.CIRCLE2)),
    _spec("inside", RelationClass.COINCIDENCE, (K.POINT2, K.RECTANGLE2)),
    _spec("intersects", RelationClass.COINCIDENCE, (K.POINT2, K.RECTANGLE2)),
    _spec("boundary", RelationClass.COINCIDENCE, (K.POINT2, K.RECTANGLE2)),
    _spec("outside", RelationClass.COINCIDENCE, (K.POINT2, K.RECTANGLE2)),
    _spec("concentric", RelationClass.COINCIDENCE, _RR),
    _spec("concentric_geo", RelationClass.COINCIDENCE, _RR),
    _spec("part_of", RelationClass.MEREOLOGY, _RR),
    _spec("proper_part", RelationClass.MEREOLOGY, _RR),
    _spec("boundary_part_of", RelationClass.MEREOLOGY, _RR),
    _spec("discrete_from", RelationClass.TOPOLOGY, _RR),
    _spec("partially_overlaps", RelationClass.MEREOLOGY, _RR),
    _spec("equals", RelationClass.COINCIDENCE, _RR, (K.POINT2, K.POINT2), (K.POINT3, K.POINT3)),
    _spec("covertex", RelationClass.COINCIDENCE, _RR),
    _spec("nonsquare_intersection", RelationClass.DISTANCE, _RR),
    _spec("bisects", RelationClass.COLLINEARITY, (K.SEGMENT2, K.POINT2, K.POINT2)),
    _spec("touches", RelationClass.TOPOLOGY,
          (K.SPHERE3, K.SPHERE3), (K.CIRCLE2, K.CIRCLE2), (K.BOX3, K.BOX3)),
    _spec("disconnected", RelationClass.TOPOLOGY,
          (K.SPHERE3, K.SPHERE3), (K.CIRCLE2, K.CIRCLE2), (K.BOX3, K.BOX3)),
    _spec("inside_region", RelationClass.MEREOLOGY, (K.SPHERE3, K.SPHERE3), (K.BOX3, K.BOX3)),
    _spec("same_size", RelationClass.DISTANCE, (K.CIRCLE2, K.CIRCLE2), (K.SPHERE3, K.SPHERE3)),
    _spec("equal_length", RelationClass.DISTANCE,
          (K.SEGMENT2, K.SEGMENT2), (K.POINT2, K.POINT2, K.SEGMENT2)),
    _spec("centred_on", RelationClass.COINCIDENCE, (K.CIRCLE2, K.POINT2), (K.SPHERE3, K.POINT3)),
    _spec("starts_at", RelationClass.COINCIDENCE, (K.SEGMENT2, K.POINT2)),
    _spec("ends_at", RelationClass.COINCIDENCE, (K.SEGMENT2, K.POINT2)),
]))

# "inside" for 3D regions shares the surface name with the point/rectangle row.
SURFACE_ALIASES = {("inside", K.SPHERE3): "inside_region", ("inside", K.BOX3): "inside_region"}


# edge formulas


@dataclass(frozen=True)
class RelationAtom:
    name: str
    args: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))

    @property
    def relation_class(self) -> RelationClass:
        return RELATIONS[self.name].relation_class

    def __str__(self) -> str:
        return f"{self.name}({', '.join(self.args)})"


@dataclass(frozen=True)
class And:
    children: tuple["Formula", ...]

    def __init__(self, *children):
        if len(children) == 1 and isinstance(children[0], (list, tuple)):
            children = tuple(children[0])
        object.__setattr__(self, "children", tuple(children))


@dataclass(frozen=True)
class Or:
    children: tuple["Formula", ...]

    def __init__(self, *children):
        if len(children) == 1 and isinstance(children[0], (list, tuple)):
            children = tuple(children[0])
        object.__setattr__(self, "children", tuple(children))


@dataclass(frozen=True)
class Not:
    child: "Formula"


@dataclass(frozen=True)
class Exists:
    """Existential quantification over a locally declared object."""

    obj: SpatialObject
    body: "Formula"


@dataclass(frozen=True)
class Forall:
    obj: SpatialObject
    body: "Formula"


Formula = Union[RelationAtom, And, Or, Not, Exists, Forall]


def atoms(f: Formula) -> Iterator[RelationAtom]:
    if isinstance(f, RelationAtom):
        yield f
    elif isinstance(f, (And, Or)):
        for c in f.children:
            yield from atoms(c)
    elif isinstance(f, Not):
        yield from atoms(f.child)
    else:
        yield from atoms(f.body)


def bound_objects(f: Formula) -> Iterator[SpatialObject]:
    if isinstance(f, (And, Or)):
        for c in f.children:
            yield from bound_objects(c)
    elif isinstance(f, Not):
        yield from bound_objects(f.child)
    elif isinstance(f, (Exists, Forall)):
        yield f.obj
        yield from bound_objects(f.body)


def free_objects(f: Formula) -> frozenset[str]:
    """Ids of graph objects a formula mentions (bound objects excluded)."""
    if isinstance(f, RelationAtom):
        return frozenset(f.args)
    if isinstance(f, (And, Or)):
        return frozenset().union(*(free_objects(c) for c in f.children))
    if isinstance(f, Not):
        return free_objects(f.child)
    return free_objects(f.body) - {f.obj.id}


def to_nnf(f: Formula) -> Formula:
    """Push negations down to atoms (De Morgan, double negation, quantifier duality)."""
    if isinstance(f, RelationAtom):
        return f
    if isinstance(f, And):
        return And(tuple(to_nnf(c) for c in f.children))
    if isinstance(f, Or):
        return Or(tuple(to_nnf(c) for c in f.children))
    if isinstance(f, Exists):
        return Exists(f.obj, to_nnf(f.body))
    if isinstance(f, Forall):
        return Forall(f.obj, to_nnf(f.body))
    g = f.child
    if isinstance(g, RelationAtom):
        return f
    if isinstance(g, Not):
        return to_nnf(g.child)
    if isinstance(g, And):
        return Or(tuple(to_nnf(Not(c)) for c in g.children))
    if isinstance(g, Or):
        return And(tuple(to_nnf(Not(c)) for c in g.children))
    if isinstance(g, Exists):
        return Forall(g.obj, to_nnf(Not(g.body)))
    return Exists(g.obj, to_nnf(Not(g.body)))


def is_nnf(f: Formula) -> bool:
    if isinstance(f, RelationAtom):
        return True
    if isinstance(f, Not):
        return isinstance(f.child, RelationAtom)
    if isinstance(f, (And, Or)):
        return all(is_nnf(c) for c in f.children)
    return is_nnf(f.body)


def format_formula(f: Formula) -> str:
    if isinstance(f, RelationAtom):
        return str(f)
    if isinstance(f, Not):
        return f"not {_wrap(f.child)}"
    if isinstance(f, And):
        if not f.children:
            return "true"
        return " and ".join(_wrap(c) for c in f.children)
    if isinstance(f, Or):
        if not f.children:
            return "false"
        return " or ".join(_wrap(c) for c in f.children)
    q = "exists" if isinstance(f, Exists) else "forall"
    return f"{q} {f.obj.kind_label} {f.obj.id}: {_wrap(f.body, force=True)}"


def _wrap(f: Formula, force: bool = False) -> str:
    if isinstance(f, RelationAtom) and not force:
        return str(f)
    if isinstance(f, (And, Or)) and not f.children and not force:
        return format_formula(f)
    return f"({format_formula(f)})"


# graphs


@dataclass(frozen=True)
class ConstraintGraph:
    """Immutable constraint graph; every modification returns a copy."""

    objects: Mapping[str, SpatialObject] = field(default_factory=dict)
    formulas: tuple[Formula, ...] = ()
    groundings: Mapping[str, Fraction] = field(default_factory=dict)

    def __post_init__(self):
        objs = self.objects
        if not isinstance(objs, Mapping):
            objs = {o.id: o for o in objs}
        object.__setattr__(self, "objects", MappingProxyType(dict(objs)))
        object.__setattr__(self, "formulas", tuple(self.formulas))
        g = {k: Fraction(v) for k, v in dict(self.groundings).items()}
        object.__setattr__(self, "groundings", MappingProxyType(g))

    @classmethod
    def build(cls, objects: Iterable[SpatialObject], formulas: Iterable[Formula] = (),
              groundings: Mapping[str, object] | None = None) -> "ConstraintGraph":
        return cls({o.id: o for o in objects}, tuple(formulas), dict(groundings or {}))

    def __getitem__(self, oid: str) -> SpatialObject:
        return self.objects[oid]

    def variables(self) -> tuple[str, ...]:
        return tuple(v for o in self.objects.values() for v in o.variables())

    def atoms(self) -> Iterator[RelationAtom]:
        for f in self.formulas:
            yield from atoms(f)

    def with_groundings(self, extra: Mapping[str, object]) -> "ConstraintGraph":
        g = dict(self.groundings)
        g.update({k: Fraction(v) for k, v in extra.items()})
        return replace(self, groundings=g)

    def with_formulas(self, extra: Iterable[Formula]) -> "ConstraintGraph":
        return replace(self, formulas=self.formulas + tuple(extra))

    def subgraph(self, ids: Iterable[str], formulas: Iterable[Formula]) -> "ConstraintGraph":
        ids = set(ids)
        objs = {k: o for k, o in self.objects.items() if k in ids}
        names = {v for o in objs.values() for v in o.variables()}
        grounds = {k: v for k, v in self.groundings.items() if k in names}
        return ConstraintGraph(objs, tuple(formulas), grounds)


def free_vars(g: ConstraintGraph) -> tuple[str, ...]:
    """Ungrounded variable parameters, in declaration order."""
    return tuple(v for v in g.variables() if v not in g.groundings)


def ground_param(g: ConstraintGraph, name: str, value) -> ConstraintGraph:
    if name not in g.variables():
        raise KeyError(f"no variable parameter named {name!r}")
    return g.with_groundings({name: value})


# validation


@dataclass(frozen=True)
class Diagnostic:
    code: str
    message: str
    atom: Optional[RelationAtom] = None

    def __str__(self) -> str:
        return f"{self.code}: {self.message}"


def resolve_relation(name: str, kinds: Sequence[ObjectKind]) -> Optional[str]:
    """Map a surface relation name to its table entry for the given argument kinds."""
    if kinds and (name, kinds[0]) in SURFACE_ALIASES:
        return SURFACE_ALIASES[(name, kinds[0])]
    return name if name in RELATIONS else None


def validate_graph(g: ConstraintGraph) -> list[Diagnostic]:
    out: list[Diagnostic] = []
    seen_vars: dict[str, str] = {}
    for oid, o in g.objects.items():
        if oid != o.id:
            out.append(Diagnostic("id-mismatch", f"object stored under {oid!r} has id {o.id!r}"))
        out.extend(_check_object(o, seen_vars))
    for name in g.groundings:
        if name not in seen_vars:
            out.append(Diagnostic("unknown-variable", f"grounded variable {name!r} is not a parameter of any object"))
    for f in g.formulas:
        _check_formula(f, dict(g.objects), seen_vars, out)
    return out


def _check_object(o: SpatialObject, seen_vars: dict[str, str]) -> list[Diagnostic]:
    out = []
    if len(o.params) != len(o.kind.param_names):
        out.append(Diagnostic(
            "arity", f"object {o.id} of kind {o.kind.value} needs {len(o.kind.param_names)} parameters, got {len(o.params)}"))
    if o.equal_sides and o.kind not in (ObjectKind.RECTANGLE2, ObjectKind.BOX3):
        out.append(Diagnostic("kind", f"object {o.id}: equal sides only apply to rectangles and boxes"))
    for p in o.params:
        if isinstance(p, Var):
            if p.name in seen_vars:
                out.append(Diagnostic(
                    "duplicate-variable", f"variable {p.name!r} used by both {seen_vars[p.name]} and {o.id}"))
            seen_vars[p.name] = o.id
    return out


def _check_formula(f, scope: dict, seen_vars: dict, out: list) -> None:
    if isinstance(f, RelationAtom):
        _check_atom(f, scope, out)
    elif isinstance(f, (And, Or)):
        for c in f.children:
            _check_formula(c, scope, seen_vars, out)
    elif isinstance(f, Not):
        _check_formula(f.child, scope, seen_vars, out)
    elif isinstance(f, (Exists, Forall)):
        if f.obj.id in scope:
            out.append(Diagnostic("shadowing", f"quantified object {f.obj.id!r} shadows an existing object"))
        out.extend(_check_object(f.obj, seen_vars))
        inner = dict(scope)
        inner[f.obj.id] = f.obj
        _check_formula(f.body, inner, seen_vars, out)
    else:
        out.append(Diagnostic("formula", f"unexpected formula node {type(f).__name__}"))


def _check_atom(a: RelationAtom, scope: Mapping[str, SpatialObject], out: list) -> None:
    if a.name not in RELATIONS:
        out.append(Diagnostic("unknown-relation", f"unknown relation {a.name!r} in {a}", a))
        return
    missing = [x for x in a.args if x not in scope]
    if missing:
        for x in missing:
            out.append(Diagnostic("unknown-object", f"undeclared object {x!r} in {a}", a))
        return
    kinds = tuple(scope[x].kind for x in a.args)
    sigs = RELATIONS[a.name].signatures
    if kinds not in sigs:
        want = " | ".join("(" + ", ".join(k.value for k in s) + ")" for s in sigs)
        got = ", ".join(k.value for k in kinds)
        out.append(Diagnostic("kind-mismatch", f"{a} expects {want}, got ({got})", a))
    elif len(set(a.args)) != len(a.args):
        out.append(Diagnostic("repeated-argument", f"{a} relates an object to itself", a))


# verdicts


class Status(enum.Enum):
    CONSISTENT = "consistent"
    INCONSISTENT = "inconsistent"
    UNKNOWN = "unknown"


@dataclass
class Verdict:
    """Solver answer.

    For sufficiency queries ``CONSISTENT`` means the conclusion is entailed and
    ``INCONSISTENT`` means it is not (the witness is then a countermodel).
    """

    status: Status
    witness: Optional[dict] = None
    reason: Optional[str] = None
    task: str = "consistency"
    provenance: dict = field(default_factory=dict)

    @classmethod
    def consistent(cls, witness=None, **kw) -> "Verdict":
        return cls(Status.CONSISTENT, witness=witness, **kw)

    @classmethod
    def inconsistent(cls, **kw) -> "Verdict":
        return cls(Status.INCONSISTENT, **kw)

    @classmethod
    def unknown(cls, reason: str, **kw) -> "Verdict":
        return cls(Status.UNKNOWN, reason=reason, **kw)

    @property
    def label(self) -> str:
        if self.task == "sufficiency":
            return {Status.CONSISTENT: "entailed", Status.INCONSISTENT: "not entailed",
                    Status.UNKNOWN: "unknown"}[self.status]
        return self.status.value

    @property
    def entailed(self) -> bool:
        return self.task == "sufficiency" and self.status is Status.CONSISTENT
