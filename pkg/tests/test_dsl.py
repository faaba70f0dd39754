from fractions import Fraction

import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from qsp.dsl import KIND_WORDS, ParseError, Query, ProblemFile, format_problem, load_problem, parse_formula, parse_problem
from qsp.model import And, Exists, Forall, Not, Or, RELATIONS, RelationAtom, SpatialObject


def _sigs_for(kinds_by_id):
    """(relation, arg ids) pairs that type-check against the declared objects."""
    by_kind = {}
    for oid, k in kinds_by_id.items():
        by_kind.setdefault(k, []).append(oid)
    out = []
    for name, spec in RELATIONS.items():
        for sig in spec.signatures:
            if all(k in by_kind for k in sig):
                out.append((name, sig))
    return out, by_kind


@st.composite
def formulas(draw, scope, depth=3):
    kinds = {oid: o.kind for oid, o in scope.items()}
    sigs, by_kind = _sigs_for(kinds)
    leaf = depth == 0 or draw(st.integers(0, 3)) == 0
    if leaf or not sigs:
        if not sigs:
            return draw(st.sampled_from([And(), Or()]))
        name, sig = draw(st.sampled_from(sigs))
        return RelationAtom(name, tuple(draw(st.sampled_from(by_kind[k])) for k in sig))
    op = draw(st.sampled_from(["and", "or", "not", "exists", "forall"]))
    if op == "not":
        return Not(draw(formulas(scope, depth - 1)))
    if op in ("and", "or"):
        kids = tuple(draw(st.lists(formulas(scope, depth - 1), min_size=2, max_size=3)))
        return And(kids) if op == "and" else Or(kids)
    word = draw(st.sampled_from(sorted(KIND_WORDS)))
    kind, sides = KIND_WORDS[word]
    oid = f"q{depth}_{len(scope)}"
    o = SpatialObject.symbolic(oid, kind, sides)
    inner = dict(scope)
    inner[oid] = o
    body = draw(formulas(inner, depth - 1))
    return Exists(o, body) if op == "exists" else Forall(o, body)


@st.composite
def problems(draw):
    n = draw(st.integers(0, 5))
    objs = []
    for i in range(n):
        kind, sides = KIND_WORDS[draw(st.sampled_from(sorted(KIND_WORDS)))]
        objs.append(SpatialObject.symbolic(f"o{i}", kind, sides))
    scope = {o.id: o for o in objs}
    constraints = draw(st.lists(formulas(scope), max_size=4))
    names = [v for o in objs for v in o.variables()]
    grounded = draw(st.lists(st.sampled_from(names), unique=True, max_size=3)) if names else []
    values = st.fractions(min_value=-100, max_value=100, max_denominator=12)
    groundings = {v: draw(values) for v in grounded}
    if draw(st.booleans()) and objs:
        query = Query("sufficiency", draw(formulas(scope, 2)))
    else:
        query = Query("consistency")
    return ProblemFile(objs, constraints, groundings, query)


@settings(max_examples=500, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(p=problems())
def test_format_parse_round_trip(p):
    text = format_problem(p)
    q = parse_problem(text)
    assert q == p
    assert format_problem(q) == text


@settings(max_examples=300, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(p=problems(), cut=st.floats(0, 1, exclude_max=True))
def test_truncated_input_fails_cleanly(p, cut):
    text = format_problem(p)
    prefix = text[: int(len(text) * cut)]
    try:
        parse_problem(prefix)
    except ParseError as e:
        assert e.line >= 1 and e.col >= 1
        assert str(e).startswith(f"line {e.line}, column {e.col}")


@settings(max_examples=300, deadline=None)
@given(text=st.text(alphabet="objectsphr ().,:=%\n-1/2abnotxz_", max_size=60))
def test_garbage_only_raises_parse_error(text):
    try:
        parse_problem(text)
    except ParseError:
        pass


def test_corpus_files_round_trip(corpus):
    for path in sorted(corpus.glob("*.qsp")):
        p = load_problem(path)
        assert parse_problem(format_problem(p)) == p


@pytest.mark.parametrize("text,line,col,fragment", [
    ("object sphere s.\nconstraint touches(s, t).\nquery consistent.\n", 2, 23, "undeclared object 't'"),
    ("object blob b.\nquery consistent.\n", 1, 8, "unknown object kind 'blob'"),
    ("object point p.\nconstraint hovers(p).\nquery consistent.\n", 2, 12, "unknown relation 'hovers'"),
    ("object point p.\nobject point p.\nquery consistent.\n", 2, 1, "duplicate object id 'p'"),
    ("object point p.\nground x_q = 1.\nquery consistent.\n", 2, 8, "unknown variable 'x_q'"),
    ("object point p.\n", 2, 1, "missing query"),
    ("object point p\nquery consistent.\n", 2, 1, "unexpected 'query'"),
    ("object point p.\nquery consistent.\nquery consistent.\n", 3, 1, "more than one query"),
    ("object point p.\nground x_p = 1.\nground x_p = 2.\nquery consistent.\n", 3, 8, "grounded twice"),
    ("object point p.\nconstraint exists point p: (equals(p, p)).\nquery consistent.\n", 2, 12, "shadows"),
    ("object point p;\n", 1, 15, "unexpected character ';'"),
])
def test_error_positions(text, line, col, fragment):
    with pytest.raises(ParseError) as info:
        parse_problem(text)
    e = info.value
    assert (e.line, e.col) == (line, col)
    assert fragment in str(e)


def test_relation_with_wrong_kinds_lists_alternatives():
    with pytest.raises(ParseError) as info:
        parse_problem("object point p.\nobject point q.\nconstraint touches(p, q).\nquery consistent.\n")
    assert info.value.expected == ("(box, box)", "(circle, circle)", "(sphere, sphere)")
    assert (info.value.line, info.value.col) == (3, 12)


def test_rationals_and_comments():
    p = parse_problem("% header\nobject circle c. % trailing\nground r_c = 3/4.\nground x_c = -2.5.\n"
                      "query consistent.\n")
    assert p.groundings == {"r_c": Fraction(3, 4), "x_c": Fraction(-5, 2)}


def test_three_dimensional_inside_resolves():
    p = parse_problem("object sphere a.\nobject sphere b.\nconstraint inside(a, b).\nquery consistent.\n")
    assert p.constraints == [RelationAtom("inside_region", ("a", "b"))]


def test_parse_formula_against_objects():
    objs = [SpatialObject.symbolic("p", KIND_WORDS["point"][0]), SpatialObject.symbolic("s", KIND_WORDS["segment"][0])]
    f = parse_formula("left_of(p, s) or not collinear(p, s)", objs)
    assert f == Or(RelationAtom("left_of", ("p", "s")), Not(RelationAtom("collinear", ("p", "s"))))
    with pytest.raises(ParseError):
        parse_formula("left_of(p, s) extra", objs)
