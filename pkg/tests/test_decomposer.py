from fractions import Fraction

from hypothesis import given, settings, strategies as st

from qsp.decomposer import (
    COUPLERS, EdgeKind, SEPARATORS, bounding_box, check_assembly, decompose, place_components, recombine,
    separable, split_conjuncts,
)
from qsp.dsl import load_problem
from qsp.model import (
    And, ConstraintGraph, ObjectKind as K, Or, RELATIONS, RelationAtom, SpatialObject, Status, Verdict,
    free_objects,
)

_KINDS = [K.POINT2, K.SEGMENT2, K.CIRCLE2, K.RECTANGLE2]


@st.composite
def graphs(draw):
    n = draw(st.integers(1, 6))
    objs = [SpatialObject.symbolic(f"o{i}", draw(st.sampled_from(_KINDS))) for i in range(n)]
    by_kind = {}
    for o in objs:
        by_kind.setdefault(o.kind, []).append(o.id)
    sigs = [(name, sig) for name, spec in RELATIONS.items() for sig in spec.signatures
            if all(k in by_kind for k in sig)]
    formulas = []
    for _ in range(draw(st.integers(0, 6)) if sigs else 0):
        name, sig = draw(st.sampled_from(sigs))
        atom = RelationAtom(name, tuple(draw(st.sampled_from(by_kind[k])) for k in sig))
        if draw(st.integers(0, 4)) == 0 and formulas:
            atom = Or(atom, formulas.pop())
        formulas.append(atom)
    return ConstraintGraph.build(objs, formulas)


@settings(max_examples=300, deadline=None)
@given(g=graphs())
def test_components_partition_objects_and_edges(g):
    plan = decompose(g)
    seen = [oid for c in plan.components for oid in c.graph.objects]
    assert sorted(seen) == sorted(g.objects)
    comp_of = {oid: c.index for c in plan.components for oid in c.graph.objects}
    internal = [f for c in plan.components for f in c.graph.formulas]
    cross = [e.atom for e in plan.separators + plan.couplers]
    assert sorted(map(str, internal + cross)) == sorted(map(str, split_conjuncts(g.formulas)))
    for f in internal:
        assert len({comp_of[x] for x in free_objects(f)}) <= 1
    for e in plan.separators:
        assert e.atom.name in SEPARATORS and len(e.components) == 2
    for e in plan.couplers:
        assert e.atom.name in COUPLERS
        if len(e.atom.args) == 3:
            # a point-to-point distance never spans two components
            assert comp_of[e.atom.args[0]] == comp_of[e.atom.args[1]]
    units = [i for u in plan.units() for i in u]
    assert sorted(units) == list(range(len(plan.components)))


def test_edge_classification():
    scope = {"p": SpatialObject.symbolic("p", K.POINT2), "s": SpatialObject.symbolic("s", K.SEGMENT2),
             "q": SpatialObject.symbolic("q", K.POINT2), "r": SpatialObject.symbolic("r", K.POINT2)}
    assert separable(RelationAtom("left_of", ("p", "s")), scope) is EdgeKind.SEPARATOR
    assert separable(RelationAtom("left_of", ("p", "q", "r")), scope) is EdgeKind.BINDER
    assert separable(RelationAtom("equal_length", ("s", "s")), scope) is EdgeKind.COUPLER
    assert separable(Or(RelationAtom("left_of", ("p", "s"))), scope) is EdgeKind.BINDER
    assert split_conjuncts([And(RelationAtom("a", ()), And(RelationAtom("b", ())))]) == [
        RelationAtom("a", ()), RelationAtom("b", ())]


def test_triangle_has_four_components(corpus):
    plan = decompose(load_problem(corpus / "triangle-construction.qsp").graph())
    assert len(plan.components) == 4
    assert plan.links == [(0, 1, 2, 3)]
    assert sum(c.scale for c in plan.components) == 1


def _circles(*formulas):
    objs = [SpatialObject.symbolic(n, K.CIRCLE2) for n in ("a", "b", "c")]
    return ConstraintGraph.build(objs, formulas)


def test_groundings_pin_components():
    g = _circles(RelationAtom("disconnected", ("a", "b"))).with_groundings({"x_a": 0})
    plan = decompose(g)
    # a grounded component cannot move; the other one can, so the edge still separates
    assert len(plan.components) == 3 and len(plan.separators) == 1
    g = g.with_groundings({"x_b": 0})
    assert len(decompose(g).components) == 2


def test_placement_separates_disconnected_components():
    g = _circles(RelationAtom("disconnected", ("a", "b")), RelationAtom("disconnected", ("b", "c")))
    plan = decompose(g)
    assert len(plan.components) == 3
    same = {"x": Fraction(0), "y": Fraction(0), "r": Fraction(1)}
    witnesses = [{f"{k}_{c.graph.objects[next(iter(c.graph.objects))].id}": v for k, v in same.items()}
                 for c in plan.components]
    values = place_components(plan, witnesses)
    assert values is not None and check_assembly(g, values)
    boxes = [bounding_box([c.graph.objects[o] for o in c.graph.objects], values) for c in plan.components]
    assert len(set(boxes)) == 3


def test_recombine_joins_verdicts():
    g = _circles(RelationAtom("disconnected", ("a", "b")))
    plan = decompose(g)
    unit = {"x": Fraction(0), "y": Fraction(0), "r": Fraction(1)}
    parts = [Verdict.consistent({f"{k}_{oid}": v for k, v in unit.items()})
             for c in plan.components for oid in c.graph.objects]
    joined = recombine(parts, plan, g)
    assert joined.status is Status.CONSISTENT and check_assembly(g, joined.witness)
    assert recombine([parts[0], Verdict.inconsistent(), parts[2]], plan, g).status is Status.INCONSISTENT
    r = recombine([parts[0], Verdict.unknown("timeout"), parts[2]], plan, g)
    assert r.status is Status.UNKNOWN and r.reason == "timeout"


def test_recombine_moves_the_free_component():
    a, b = SpatialObject.symbolic("a", K.CIRCLE2), SpatialObject.symbolic("b", K.CIRCLE2)
    g = ConstraintGraph.build([a, b], [RelationAtom("disconnected", ("a", "b"))]).with_groundings(
        {"x_a": 0, "y_a": 0})
    plan = decompose(g)
    overlapping = [Verdict.consistent({"x_a": 0, "y_a": 0, "r_a": 5}), Verdict.consistent(
        {"x_b": 0, "y_b": 0, "r_b": 5})]
    # the grounded circle cannot move; the free one is moved aside by placement
    joined = recombine(overlapping, plan, g)
    assert joined.status is Status.CONSISTENT and check_assembly(g, joined.witness)
