"""Splitting a constraint graph into independently solvable components.

Edges come in three flavours. Binders (most atoms and every compound
formula) must be solved jointly with everything they mention. Separators
(``disconnected``, ``discrete_from``, ``proper_part`` and ``left_of`` a
segment) can always be satisfied afterwards by moving one whole component,
so their endpoints may live in different components. Couplers
(``equal_length``, ``same_size``) only compare lengths; the components they
join are solved in one query, each with its own positional frame, sharing a
single scale.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Optional, Sequence

from .encoder import encode_graph, eval_ground, MissingVariable
from .geometry import overlap_candidates, rect_corners, rect_values
from .model import (
    And, ConstraintGraph, Formula, ObjectKind, RelationAtom, SpatialObject, Status, Var, Verdict, free_objects,
)
from .symmetry import TC, AffineTransform, TransformBudget, TransformError, apply_transform, sym_of_graph


class EdgeKind(enum.Enum):
    SEPARATOR = "separator"
    COUPLER = "coupler"
    BINDER = "binder"


SEPARATORS = frozenset({"disconnected", "discrete_from", "proper_part", "left_of"})
COUPLERS = frozenset({"equal_length", "same_size"})


def separable(f: Formula, scope: Optional[Mapping[str, SpatialObject]] = None) -> EdgeKind:
    """Classify one edge formula (an atom; anything compound binds)."""
    if not isinstance(f, RelationAtom):
        return EdgeKind.BINDER
    if f.name in COUPLERS:
        return EdgeKind.COUPLER
    if f.name in SEPARATORS:
        if f.name == "left_of" and scope is not None:
            # only "point left of a segment"; the three-point form binds all three
            if len(f.args) != 2 or scope[f.args[1]].kind is not ObjectKind.SEGMENT2:
                return EdgeKind.BINDER
        if f.name == "left_of" and len(f.args) != 2:
            return EdgeKind.BINDER
        return EdgeKind.SEPARATOR
    return EdgeKind.BINDER


def split_conjuncts(formulas: Sequence[Formula]) -> list[Formula]:
    out: list[Formula] = []
    stack = list(reversed(formulas))
    while stack:
        f = stack.pop()
        if isinstance(f, And):
            stack.extend(reversed(f.children))
        else:
            out.append(f)
    return out


@dataclass
class Component:
    index: int
    graph: ConstraintGraph
    budget: TransformBudget
    # whether this component may spend uniform scale (one per coupled group)
    scale: bool = True

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(self.graph.objects)


@dataclass(frozen=True)
class CrossEdge:
    atom: RelationAtom
    kind: EdgeKind
    components: tuple[int, ...]


@dataclass
class DecompositionPlan:
    components: list[Component]
    separators: list[CrossEdge] = field(default_factory=list)
    couplers: list[CrossEdge] = field(default_factory=list)
    # groups of component indices solved in one query (coupled by lengths)
    links: list[tuple[int, ...]] = field(default_factory=list)

    def units(self) -> list[tuple[int, ...]]:
        """Solve units: every link group plus each uncoupled component."""
        linked = {i for grp in self.links for i in grp}
        out = [grp for grp in self.links]
        out += [(c.index,) for c in self.components if c.index not in linked]
        return sorted(out)

    def coupler_atoms(self, unit: Sequence[int]) -> list[RelationAtom]:
        members = set(unit)
        return [e.atom for e in self.couplers if set(e.components) <= members]


class _UnionFind:
    def __init__(self, items):
        self.parent = {x: x for x in items}

    def find(self, x):
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a, b) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[rb] = ra
        return True


_TRANSLATE = {2: {TC.TRANSLATE_X, TC.TRANSLATE_Y}, 3: {TC.TRANSLATE_X, TC.TRANSLATE_Y, TC.TRANSLATE_Z}}


def _movable(budget: TransformBudget, dim: int, scale: bool) -> bool:
    need = set(_TRANSLATE[dim]) | ({TC.SCALE_UNIFORM} if scale else set())
    return need <= budget.available


def decompose(g: ConstraintGraph) -> DecompositionPlan:
    """Components of the binder graph, with cross separators and couplers recorded.

    A separator whose placement would need a transformation the moved
    component lacks (translation; also uniform scale for ``proper_part``) is
    demoted to a binder, as is any cross edge touching a component with user
    groundings, since such a component cannot be moved.
    """
    ids = list(g.objects)
    edges = split_conjuncts(g.formulas)
    kinds = [separable(f, g.objects) for f in edges]
    demoted: set[int] = set()
    while True:
        uf = _UnionFind(ids)
        for n, (f, k) in enumerate(zip(edges, kinds)):
            objs = [x for x in free_objects(f) if x in g.objects]
            if k is EdgeKind.BINDER or n in demoted:
                for x in objs[1:]:
                    uf.union(objs[0], x)
            elif k is EdgeKind.COUPLER and len(f.args) == 3:
                # the distance between the two points is only a length inside one component
                uf.union(f.args[0], f.args[1])
        groups: dict[str, list[str]] = {}
        for x in ids:
            groups.setdefault(uf.find(x), []).append(x)
        members = list(groups.values())
        if not members and edges:
            members = [[]]  # closed formulas over quantified objects only
        comp_of = {x: i for i, grp in enumerate(members) for x in grp}
        internal: list[list[Formula]] = [[] for _ in members]
        cross: list[tuple[int, Formula, EdgeKind]] = []
        for n, (f, k) in enumerate(zip(edges, kinds)):
            objs = [x for x in free_objects(f) if x in g.objects]
            comps = sorted({comp_of[x] for x in objs})
            if len(comps) <= 1:
                internal[comps[0] if comps else 0].append(f)
            else:
                cross.append((n, f, k))
        subgraphs = [g.subgraph(grp, internal[i]) for i, grp in enumerate(members)]
        budgets = [_budget(sg) for sg in subgraphs]

        # coupled groups
        cuf = _UnionFind(range(len(members)))
        for n, f, k in cross:
            if k is EdgeKind.COUPLER:
                cs = sorted({comp_of[x] for x in f.args})
                for c in cs[1:]:
                    cuf.union(cs[0], c)
        coupled = {i for i in range(len(members)) if any(cuf.find(j) == cuf.find(i) and j != i
                                                        for j in range(len(members)))}
        changed = False
        for n, f, k in cross:
            if k is not EdgeKind.SEPARATOR:
                continue
            if not _placeable(f, comp_of, subgraphs, budgets, coupled):
                demoted.add(n)
                changed = True
        if not changed:
            break

    comps = [Component(i, subgraphs[i], budgets[i]) for i in range(len(members))]
    seps = [CrossEdge(f, k, tuple(sorted({comp_of[x] for x in f.args}))) for n, f, k in cross
            if k is EdgeKind.SEPARATOR]
    coups = [CrossEdge(f, k, tuple(sorted({comp_of[x] for x in f.args}))) for n, f, k in cross
             if k is EdgeKind.COUPLER]
    link_groups: dict[int, list[int]] = {}
    for i in range(len(members)):
        link_groups.setdefault(cuf.find(i), []).append(i)
    links = [tuple(sorted(v)) for v in link_groups.values() if len(v) > 1]
    for grp in links:
        _share_scale(comps, grp)
    return DecompositionPlan(comps, seps, coups, sorted(links))


def _budget(sg: ConstraintGraph) -> TransformBudget:
    if sg.groundings:
        return TransformBudget(frozenset())
    return sym_of_graph(sg)


def _share_scale(comps: list[Component], grp: Sequence[int]) -> None:
    """Couplers compare lengths across components: each keeps its own isometries,
    one global uniform scale is spent in the largest member, and nobody uses
    non-uniform scaling."""
    allowed = all(TC.SCALE_UNIFORM in comps[i].budget.available for i in grp)
    axis = {TC.SCALE_X, TC.SCALE_Y, TC.SCALE_Z}
    owner = max(grp, key=lambda i: (len(comps[i].graph.objects), -i)) if allowed else None
    for i in grp:
        c = comps[i]
        c.budget = c.budget.restrict(c.budget.available - axis)
        c.scale = i == owner


def _placeable(f: RelationAtom, comp_of, subgraphs, budgets, coupled) -> bool:
    ci, cj = comp_of[f.args[0]], comp_of[f.args[-1]]
    gi, gj = subgraphs[ci], subgraphs[cj]
    dim = gi.objects[f.args[0]].kind.dimension
    if f.name == "proper_part":
        return _movable(budgets[ci], dim, True) and ci not in coupled
    return _movable(budgets[ci], dim, False) or _movable(budgets[cj], dim, False)


# recombination


def _num(o: SpatialObject, name: str, values: Mapping[str, object]):
    p = o.param(name)
    return values[p.name] if isinstance(p, Var) else p.value


def bounding_box(objects, values: Mapping[str, object]) -> Optional[tuple]:
    """Axis-aligned (xmin, ymin, xmax, ymax) of the xy footprint of some objects."""
    xs, ys = [], []
    for o in objects:
        v = lambda n: _num(o, n, values)  # noqa: E731
        k = o.kind
        if k in (ObjectKind.POINT2, ObjectKind.POINT3):
            xs.append(v("x")); ys.append(v("y"))
        elif k is ObjectKind.SEGMENT2:
            xs += [v("xa"), v("xb")]; ys += [v("ya"), v("yb")]
        elif k in (ObjectKind.CIRCLE2, ObjectKind.SPHERE3):
            xs += [v("x") - v("r"), v("x") + v("r")]; ys += [v("y") - v("r"), v("y") + v("r")]
        elif k is ObjectKind.RECTANGLE2:
            for px, py in rect_corners(*rect_values(o, values)):
                xs.append(px); ys.append(py)
        elif k is ObjectKind.BOX3:
            xs += [v("x"), v("x") + v("w")]; ys += [v("y"), v("y") + v("d")]
    if not xs:
        return None
    return (min(xs), min(ys), max(xs), max(ys))


def _as_rational(v):
    return v if isinstance(v, (int, Fraction)) else Fraction(v).limit_denominator(10 ** 15)


def _scaling(dim: int, k, dx, dy) -> AffineTransform:
    Q = tuple(tuple(k if i == j else 0 for j in range(dim)) for i in range(dim))
    t = (dx, dy) + ((0,) if dim == 3 else ())
    return AffineTransform(Q, tuple(t))


def _extent(box) -> object:
    return (box[2] - box[0]) + (box[3] - box[1]) + 1


def place_components(plan: DecompositionPlan, witnesses: Sequence[Mapping[str, object]]) -> Optional[dict]:
    """Move component witnesses so every cross separator holds.

    Components are placed one after another; each separator edge to an
    already placed component decides where the new one goes. Returns the
    joint assignment or None when some component cannot be placed.
    """
    values: dict = {}
    for w in witnesses:
        values.update(w)
    n = len(plan.components)
    if not plan.separators:
        return values
    adj: dict[int, list[CrossEdge]] = {i: [] for i in range(n)}
    for e in plan.separators:
        for c in e.components:
            adj[c].append(e)
    placed: list[int] = []
    for start in range(n):
        if start in placed:
            continue
        queue = [start]
        first = True
        while queue:
            c = queue.pop(0)
            if c in placed:
                continue
            edge = None if first else _edge_to_placed(adj[c], placed, c)
            ok = _place(plan, c, edge, placed, values)
            if not ok:
                return None
            first = False
            placed.append(c)
            for e in adj[c]:
                for other in e.components:
                    if other not in placed and other not in queue:
                        queue.append(other)
    return values


def _edge_to_placed(edges, placed, c):
    for e in edges:
        if any(o in placed for o in e.components if o != c):
            return e
    return None


def _place(plan: DecompositionPlan, c: int, edge: Optional[CrossEdge], placed: list[int], values: dict) -> bool:
    comp = plan.components[c]
    objs = list(comp.graph.objects.values())
    if not objs:
        return True
    dim = objs[0].kind.dimension
    try:
        if edge is None or edge.atom.name in ("disconnected", "discrete_from"):
            if not placed:
                return True
            if TC.TRANSLATE_X not in comp.budget.available:
                return False
            others = [o for i in placed for o in plan.components[i].graph.objects.values()]
            ob = bounding_box(others, values)
            mb = bounding_box(objs, values)
            if ob is None or mb is None:
                return True
            dx = _as_rational(ob[2] - mb[0] + 1)
            dy = _as_rational(ob[1] - mb[1])
            T = _scaling(dim, 1, dx, dy)
            values.update(apply_transform(T, values, objs))
            return True
        a, b = edge.atom.args[0], edge.atom.args[-1]
        if edge.atom.name == "proper_part":
            if a not in comp.graph.objects:
                return False  # would need to grow this component around a placed part
            big = _find(plan, b)
            x, y, xv, yv, w, h = (_as_rational(v) for v in rect_values(big, values))
            centre = (x + (w * xv - h * yv) / 2, y + (w * yv + h * xv) / 2)
            mb = bounding_box(objs, values)
            size = _as_rational(_extent(mb))
            k = min(w, h) / (4 * size)
            mid = (_as_rational((mb[0] + mb[2]) / 2), _as_rational((mb[1] + mb[3]) / 2))
            T = _scaling(dim, k, centre[0] - k * mid[0], centre[1] - k * mid[1])
            values.update(apply_transform(T, values, objs))
            return True
        # left_of(p, s)
        p_obj, s_obj = _find(plan, a), _find(plan, b)
        xa, ya, xb, yb = (_as_rational(_num(s_obj, n, values)) for n in ("xa", "ya", "xb", "yb"))
        nx, ny = -(yb - ya), xb - xa
        others = [o for i in placed for o in plan.components[i].graph.objects.values()]
        size = _as_rational(_extent(bounding_box(objs + others, values)))
        lam = 2 * size / (abs(nx) + abs(ny))
        target = ((xa + xb) / 2 + lam * nx, (ya + yb) / 2 + lam * ny)
        px, py = _as_rational(_num(p_obj, "x", values)), _as_rational(_num(p_obj, "y", values))
        if a in comp.graph.objects:
            T = _scaling(dim, 1, target[0] - px, target[1] - py)
        else:
            # move the segment's component so that p ends up on its left
            T = _scaling(dim, 1, px - target[0], py - target[1])
        values.update(apply_transform(T, values, objs))
        return True
    except (TransformError, ZeroDivisionError, TypeError):
        return False


def _find(plan: DecompositionPlan, oid: str) -> SpatialObject:
    for c in plan.components:
        if oid in c.graph.objects:
            return c.graph.objects[oid]
    raise KeyError(oid)


def check_assembly(g: ConstraintGraph, values: Mapping[str, object], tol: float = 1e-9) -> bool:
    """Every edge of ``g`` holds under the assembled values."""
    f = encode_graph(g)
    cands = overlap_candidates(g.objects.values(), values)
    try:
        exact = eval_ground(f, values, cands, complete=True)
        if exact:
            return True
        return bool(eval_ground(f, values, cands, tol=tol, complete=True))
    except MissingVariable:
        return False


def recombine(verdicts: Sequence[Verdict], plan: DecompositionPlan,
              graph: Optional[ConstraintGraph] = None, tol: float = 1e-9) -> Verdict:
    """Join per-unit verdicts (one per ``plan.units()`` entry, or per component).

    Any inconsistent part makes the whole inconsistent; otherwise an unknown
    part makes it unknown. Consistent parts are assembled by placement and,
    when ``graph`` is given, the assembly is re-checked against it.
    """
    if any(v.status is Status.INCONSISTENT for v in verdicts):
        return Verdict.inconsistent()
    unknown = [v for v in verdicts if v.status is Status.UNKNOWN]
    if unknown:
        return Verdict.unknown(unknown[0].reason or "unknown")
    values = place_components(plan, [v.witness or {} for v in verdicts])
    if values is None:
        return Verdict.unknown("placement")
    if graph is not None and len(plan.components) > 1 and not check_assembly(graph, values, tol):
        return Verdict.unknown("placement")
    return Verdict.consistent(values)
