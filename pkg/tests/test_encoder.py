import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from oracle import decide
from qsp.encoder import (
    FALSE, TRUE, PAnd, PAtom, PNot, POr, Rel, UnsupportedRelation, complement, conj, disj, encode_atom,
    encode_formula, encode_graph, eq, eval_ground, le, lt, nnf, simplify, substitute,
)
from qsp.geometry import overlap_candidates
from qsp.model import (
    And, ConstraintGraph, Exists, Forall, Not, ObjectKind as K, Or, RELATIONS, RelationAtom, SpatialObject,
    is_nnf, to_nnf,
)
from qsp.poly import Poly
from qsp.symmetry import sample_configuration, template_objects

SIGNATURES = [(name, sig) for name, spec in RELATIONS.items() for sig in spec.signatures]


def _template(name, sig, square=False):
    objs, atom = template_objects(name, sig, square)
    return objs, atom, {o.id: o for o in objs}


def _truth(f, objs, cfg):
    return eval_ground(f, cfg, overlap_candidates(objs, cfg), complete=True)


@pytest.mark.parametrize("name,sig", SIGNATURES, ids=[f"{n}-{'-'.join(k.value for k in s)}" for n, s in SIGNATURES])
@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), square=st.booleans())
def test_encoding_agrees_with_direct_geometry(name, sig, seed, square):
    objs, atom, scope = _template(name, sig, square)
    cfg = sample_configuration(objs, random.Random(seed))
    assert _truth(encode_atom(atom, scope), objs, cfg) == decide(name, objs, cfg)


@pytest.mark.parametrize("name,sig", SIGNATURES, ids=[f"{n}-{'-'.join(k.value for k in s)}" for n, s in SIGNATURES])
@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_negative_polarity_is_the_complement(name, sig, seed):
    objs, atom, scope = _template(name, sig)
    cfg = sample_configuration(objs, random.Random(seed))
    pos = _truth(encode_atom(atom, scope, True), objs, cfg)
    neg = _truth(encode_atom(atom, scope, False), objs, cfg)
    assert pos is not None and neg is not None
    assert pos != neg


@settings(max_examples=300, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_boundary_is_intersects_and_not_inside(seed):
    objs, _, scope = _template("boundary", (K.POINT2, K.RECTANGLE2))
    cfg = sample_configuration(objs, random.Random(seed))
    args = tuple(o.id for o in objs)
    b = eval_ground(encode_atom(RelationAtom("boundary", args), scope), cfg)
    i = eval_ground(encode_atom(RelationAtom("intersects", args), scope), cfg)
    n = eval_ground(encode_atom(RelationAtom("inside", args), scope), cfg)
    assert b == (i and not n)


def test_complement_flips_each_relation():
    p = Poly.var("x") - 1
    for a in (eq(p), PAtom(p, Rel.NE), lt(p, 0), le(p, 0)):
        for x in (Fraction(0), Fraction(1), Fraction(2)):
            assert eval_ground(a, {"x": x}) != eval_ground(complement(a), {"x": x})


# NNF over polynomial formulas

_X = [Poly.var(v) for v in "xyz"]


def _atoms():
    polys = st.builds(lambda i, j, c: _X[i] * _X[j] - c, st.integers(0, 2), st.integers(0, 2), st.integers(-2, 2))
    return st.builds(PAtom, polys, st.sampled_from(list(Rel)))


_formulas = st.recursive(
    _atoms(),
    lambda inner: st.one_of(
        st.builds(lambda cs: PAnd(tuple(cs)), st.lists(inner, min_size=1, max_size=3)),
        st.builds(lambda cs: POr(tuple(cs)), st.lists(inner, min_size=1, max_size=3)),
        st.builds(PNot, inner),
    ),
    max_leaves=8,
)


def _negation_free(f):
    if isinstance(f, PNot):
        return False
    if isinstance(f, (PAnd, POr)):
        return all(_negation_free(c) for c in f.children)
    return True


@settings(max_examples=300, deadline=None)
@given(f=_formulas, vals=st.lists(st.integers(-3, 3), min_size=3, max_size=3))
def test_nnf_is_equivalent_and_negation_free(f, vals):
    env = {v: Fraction(x) for v, x in zip("xyz", vals)}
    g = nnf(f)
    assert _negation_free(g)
    assert eval_ground(g, env) == eval_ground(f, env)


@settings(max_examples=200, deadline=None)
@given(f=_formulas, vals=st.lists(st.integers(-3, 3), min_size=3, max_size=3))
def test_simplify_preserves_truth(f, vals):
    env = {v: Fraction(x) for v, x in zip("xyz", vals)}
    assert eval_ground(simplify(f), env) == eval_ground(f, env)


# NNF over relation formulas

_P = [SpatialObject.symbolic(n, K.POINT2) for n in ("a", "b", "c")]
_S = SpatialObject.symbolic("s", K.SEGMENT2)
_SCOPE = {o.id: o for o in (*_P, _S)}

_rel_atoms = st.one_of(
    st.builds(lambda i: RelationAtom("left_of", (_P[i].id, "s")), st.integers(0, 2)),
    st.builds(lambda i: RelationAtom("collinear", (_P[i].id, "s")), st.integers(0, 2)),
    st.builds(lambda i: RelationAtom("starts_at", ("s", _P[i].id)), st.integers(0, 2)),
)

_rel_formulas = st.recursive(
    _rel_atoms,
    lambda inner: st.one_of(
        st.builds(lambda cs: And(tuple(cs)), st.lists(inner, min_size=1, max_size=3)),
        st.builds(lambda cs: Or(tuple(cs)), st.lists(inner, min_size=1, max_size=3)),
        st.builds(Not, inner),
    ),
    max_leaves=6,
)


@settings(max_examples=200, deadline=None)
@given(f=_rel_formulas, seed=st.integers(0, 2**32 - 1))
def test_to_nnf_keeps_meaning(f, seed):
    g = to_nnf(f)
    assert is_nnf(g)
    cfg = sample_configuration(list(_SCOPE.values()), random.Random(seed), "tight")

    def direct(h):
        if isinstance(h, RelationAtom):
            return decide(h.name, [_SCOPE[a] for a in h.args], cfg)
        if isinstance(h, Not):
            return not direct(h.child)
        if isinstance(h, And):
            return all(direct(c) for c in h.children)
        return any(direct(c) for c in h.children)

    assert direct(g) == direct(f)
    assert eval_ground(encode_formula(f, _SCOPE), cfg) == direct(f)


def test_to_nnf_dualises_quantifiers():
    q = SpatialObject.symbolic("q", K.POINT2)
    f = Not(Exists(q, RelationAtom("left_of", ("q", "s"))))
    g = to_nnf(f)
    assert isinstance(g, Forall) and g.body == Not(RelationAtom("left_of", ("q", "s")))


# evaluation


def test_eval_ground_is_exact():
    x = Poly.var("x")
    third = Fraction(1, 3)
    assert eval_ground(eq(x * 3, 1), {"x": third}) is True
    # 0.1 + 0.2 style drift does not exist over rationals
    assert eval_ground(eq(x + Fraction(1, 10) + Fraction(2, 10), Fraction(3, 10) + x), {"x": third}) is True
    assert eval_ground(eq(x * 3, 1), {"x": 1 / 3}, tol=1e-12) is True


def test_quantifiers_need_candidates():
    from qsp.encoder import PExists
    x, w = Poly.var("x"), Poly.var("w")
    f = PExists(("w",), eq(w, x))
    assert eval_ground(f, {"x": Fraction(2)}) is None
    assert eval_ground(f, {"x": Fraction(2)}, [(Fraction(2),)]) is True
    assert eval_ground(f, {"x": Fraction(2)}, [(Fraction(1),)], complete=True) is False


def test_substitute_then_evaluate():
    x, y = Poly.var("x"), Poly.var("y")
    f = conj(lt(x, y), eq(x * y, 6))
    g = substitute(f, {"y": x + 1})
    assert eval_ground(g, {"x": Fraction(2)}) is True
    assert simplify(substitute(f, {"x": Fraction(0), "y": Fraction(1)})) == FALSE
    assert simplify(disj(TRUE, f)) == TRUE


def test_graph_encoding_includes_wellformedness_and_groundings():
    c = SpatialObject.symbolic("c", K.CIRCLE2)
    g = ConstraintGraph.build([c], [], {"r_c": Fraction(2)})
    f = encode_graph(g)
    assert eval_ground(f, {"x_c": Fraction(0), "y_c": Fraction(0), "r_c": Fraction(2)}) is True
    assert eval_ground(f, {"x_c": Fraction(0), "y_c": Fraction(0), "r_c": Fraction(-2)}) is False


def test_unsupported_signature_is_rejected():
    a = SpatialObject.symbolic("a", K.POINT3)
    b = SpatialObject.symbolic("b", K.POINT3)
    with pytest.raises(UnsupportedRelation):
        encode_atom(RelationAtom("left_of", ("a", "b")), {"a": a, "b": b})
