import time
from fractions import Fraction

import pytest

from graphgen import random_graph
from qsp.dsl import parse_problem
from qsp.encoder import encode_graph, eq
from qsp.model import ConstraintGraph, ObjectKind as K, RelationAtom, SpatialObject, Status
from qsp.poly import Poly
from qsp.smt import BackendConfig
from qsp.solver import SolverConfig, check_witness, decide, decide_consistency, decide_sufficiency


@pytest.fixture(scope="module")
def config(solver_path):
    return SolverConfig(BackendConfig(solver=solver_path, timeout=60))


def _problem(text):
    return parse_problem(text)


def test_check_witness_exact_and_tolerant():
    x = Poly.var("x")
    f = eq(x * x, 2)
    assert not check_witness({"x": Fraction(7, 5)}, f)
    assert check_witness({"x": 2 ** 0.5}, f, tol=1e-9)
    bad = check_witness({}, f)
    assert not bad and "no value" in bad.violations[0]


def test_consistent_problem_has_a_checked_witness(config):
    p = _problem("object circle a.\nobject circle b.\nconstraint touches(a, b) and same_size(a, b).\n"
                 "query consistent.\n")
    for mode in ("naive", "pruned"):
        v = decide(p, mode, config)
        assert v.status is Status.CONSISTENT
        assert check_witness(v.witness, encode_graph(p.graph()))


def test_inconsistent_problem(config):
    p = _problem("object point p.\nobject segment s.\nconstraint left_of(p, s) and collinear(p, s).\n"
                 "query consistent.\n")
    assert decide(p, "pruned", config).status is Status.INCONSISTENT
    assert decide(p, "naive", config).status is Status.INCONSISTENT


def test_groundings_are_respected(config):
    p = _problem("object circle c.\nobject point q.\nconstraint coincident(q, c).\nground r_c = 2.\n"
                 "ground x_q = 5.\nquery consistent.\n")
    v = decide(p, "pruned", config)
    assert v.status is Status.CONSISTENT
    assert v.witness["r_c"] == 2 and v.witness["x_q"] == 5


def test_sufficiency(config):
    p = _problem("object segment s.\nobject segment t.\nobject segment u.\n"
                 "constraint parallel(s, t) and parallel(t, u).\nquery entails: parallel(s, u).\n")
    # degenerate segments are excluded, so parallelism is transitive
    assert decide(p, "pruned", config).entailed
    q = _problem("object point p.\nobject segment s.\nconstraint right_or_collinear(p, s).\n"
                 "query entails: collinear(p, s).\n")
    v = decide(q, "pruned", config)
    assert v.status is Status.INCONSISTENT and v.label == "not entailed"
    # the counter-model is reported as the witness
    assert v.witness is not None


def test_invalid_graphs_are_rejected(config):
    p = SpatialObject.symbolic("p", K.POINT2)
    g = ConstraintGraph.build([p], [RelationAtom("equals", ("p", "p"))])
    with pytest.raises(ValueError):
        decide_consistency(g, "pruned", config)
    with pytest.raises(ValueError):
        decide_consistency(ConstraintGraph.build([p]), "fast", config)


def test_timeout_is_unknown(solver_path):
    cfg = SolverConfig(BackendConfig(solver=solver_path, timeout=0.05))
    p = _problem("object rectangle a.\nobject rectangle b.\nobject rectangle c.\n"
                 "constraint discrete_from(a, b) and discrete_from(b, c) and part_of(a, c).\n"
                 "ground w_a = 1.\nground x_c = 0.\nquery consistent.\n")
    v = decide(p, "naive", cfg)
    assert v.status is Status.UNKNOWN and v.reason == "timeout"


def test_deadline_bounds_the_whole_decision(solver_path):
    cfg = SolverConfig(BackendConfig(solver=solver_path, timeout=600), deadline=1.0)
    p = _problem("object rectangle a.\nobject rectangle b.\nobject rectangle c.\n"
                 "constraint discrete_from(a, b) and discrete_from(b, c) and part_of(a, c).\n"
                 "ground w_a = 1.\nground x_c = 0.\nquery consistent.\n")
    t0 = time.monotonic()
    v = decide(p, "naive", cfg)
    assert v.status is Status.UNKNOWN and v.reason == "timeout"
    assert time.monotonic() - t0 < 10


def test_empty_graph(config):
    v = decide_consistency(ConstraintGraph(), "pruned", config)
    assert v.status is Status.CONSISTENT and v.witness == {}


def test_provenance_fields(config):
    p = _problem("object sphere a.\nobject sphere b.\nobject sphere c.\n"
                 "constraint touches(a, b) and touches(b, c).\nquery consistent.\n")
    v = decide(p, "pruned", config)
    prov = v.provenance
    assert prov["mode"] == "pruned" and prov["case"] == "j3d"
    assert prov["vars_after"] < prov["vars_before"] == 12
    assert all(row["answer"] for row in prov["subcases"])


@pytest.mark.parametrize("seed", range(12))
def test_pruned_agrees_with_naive_on_random_graphs(seed, config):
    g = random_graph(1000 + seed)
    quick = SolverConfig(BackendConfig(solver=config.backend.solver, timeout=10))
    naive = decide_consistency(g, "naive", quick)
    if naive.status is Status.UNKNOWN:
        pytest.skip("naive mode gave no verdict")
    assert decide_consistency(g, "pruned", config).status is naive.status


def test_sufficiency_rejects_bad_conclusions(config):
    p = SpatialObject.symbolic("p", K.POINT2)
    g = ConstraintGraph.build([p])
    with pytest.raises(ValueError):
        decide_sufficiency(g, RelationAtom("equals", ("p", "q")), "pruned", config)
