from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from qsp.encoder import PExists, PForall, conj, disj, eq, lt, ne
from qsp.poly import Poly
from qsp.smt import (
    Answer, BackendConfig, EmitError, Logic, emit_smtlib, literal, parse_model, parse_output, run_backend,
    select_logic, symbol,
)

x, y = Poly.var("x"), Poly.var("y")


def test_literals_and_symbols():
    assert literal(Fraction(3)) == "3.0"
    assert literal(Fraction(-1, 2)) == "(- (/ 1.0 2.0))"
    assert symbol("x_a") == "x_a"
    assert symbol("w 1") == "|w 1|"


def test_emission_is_deterministic_and_sorted():
    f = conj(eq(x * x + y, 1), lt(y, x), ne(x, 0))
    a, b = emit_smtlib(f), emit_smtlib(conj(eq(x * x + y, 1), lt(y, x), ne(x, 0)))
    assert a == b
    lines = a.splitlines()
    assert lines[0] == "(set-logic QF_NRA)"
    assert lines[1:3] == ["(declare-const x Real)", "(declare-const y Real)"]
    assert lines[-2:] == ["(check-sat)", "(get-model)"]


@settings(max_examples=100, deadline=None)
@given(cs=st.lists(st.integers(-5, 5), min_size=3, max_size=3))
def test_emission_depends_only_on_the_formula(cs):
    a, b, c = cs
    f = disj(eq(x * a + y * b, c), lt(x * y, c))
    assert emit_smtlib(f) == emit_smtlib(disj(eq(x * a + y * b, c), lt(x * y, c)))


def test_logic_selection():
    w = Poly.var("w")
    # a top-level existential is lifted to a free constant
    assert select_logic(PExists(("w",), eq(w, x))) is Logic.QF_NRA
    f = PForall(("w",), lt(w * w, x))
    assert select_logic(f) is Logic.NRA
    assert "(forall ((w Real))" in emit_smtlib(f)
    with pytest.raises(EmitError):
        emit_smtlib(f, Logic.QF_NRA)


def test_model_parsing():
    text = """(
  (define-fun x () Real (/ 1.0 3.0))
  (define-fun |w 0| () Real (- 2.0))
  (define-fun y () Real (root-obj (+ (^ x 2) (- 2)) 2))
  (define-fun f ((a Real)) Real a)
)"""
    m = parse_model(text)
    assert m["x"] == Fraction(1, 3)
    assert m["w 0"] == -2
    assert abs(m["y"] - 2 ** 0.5) < 1e-12
    assert "f" not in m


def test_output_classification():
    assert parse_output("unsat\n", "", 0, 0.1).answer is Answer.UNSAT
    assert parse_output("unknown\n", "", 0, 0.1).answer is Answer.UNKNOWN
    r = parse_output("", "segfault", 139, 0.1)
    assert r.answer is Answer.ERROR and "segfault" in r.detail
    r = parse_output("sat\n((define-fun x () Real 2.0))\n", "", 0, 0.1)
    assert r.answer is Answer.SAT and r.model == {"x": 2}


def test_missing_solver_is_an_error(tmp_path):
    cfg = BackendConfig(solver=str(tmp_path / "nope"), timeout=5)
    r = run_backend(emit_smtlib(eq(x, 1)), cfg)
    assert r.answer is Answer.ERROR
    with pytest.raises(ValueError):
        BackendConfig(timeout=0)


def test_backend_round_trip(solver_path, tmp_path):
    cfg = BackendConfig(solver=solver_path, timeout=30, keep_dir=str(tmp_path))
    r = run_backend(emit_smtlib(conj(eq(x * x, 4), lt(0, x))), cfg, "square")
    assert r.answer is Answer.SAT and r.model["x"] == 2
    assert run_backend(emit_smtlib(conj(eq(x * x, -1))), cfg).answer is Answer.UNSAT
    kept = sorted(p.name for p in tmp_path.iterdir())
    assert len(kept) == 2 and kept[0].endswith("_square.smt2")
