"""SMT-LIB2 emission and an external-solver subprocess backend."""

from __future__ import annotations

import enum
import os
import re
import shutil
import subprocess
import tempfile
import threading
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from .encoder import (
    PAnd, PAtom, PExists, PForall, PNot, POr, PolyFormula, Rel, formula_vars,
    has_quantifiers, nnf, skolemize,
)
from .poly import Poly

SOLVER_ENV = "QS_SOLVER_PATH"
DEFAULT_TIMEOUT = 600.0
GRACE = 2.0


class Logic(enum.Enum):
    QF_NRA = "QF_NRA"
    NRA = "NRA"


class EmitError(ValueError):
    pass


_SIMPLE_SYMBOL = re.compile(r"^[A-Za-z_~!@$%^&*+=<>.?/\-][A-Za-z0-9_~!@$%^&*+=<>.?/\-]*$")


def symbol(name: str) -> str:
    return name if _SIMPLE_SYMBOL.match(name) else f"|{name}|"


def literal(c: Fraction) -> str:
    c = Fraction(c)
    if c < 0:
        return f"(- {literal(-c)})"
    if c.denominator == 1:
        return f"{c.numerator}.0"
    return f"(/ {c.numerator}.0 {c.denominator}.0)"


def poly_term(p: Poly) -> str:
    if p.is_zero():
        return "0.0"
    terms = []
    for mono, c in p:
        factors = [symbol(v) for v, e in mono for _ in range(e)]
        if not factors:
            terms.append(literal(c))
            continue
        if c != 1:
            factors.insert(0, literal(c))
        terms.append(factors[0] if len(factors) == 1 else f"(* {' '.join(factors)})")
    return terms[0] if len(terms) == 1 else f"(+ {' '.join(terms)})"


def formula_term(f: PolyFormula) -> str:
    if isinstance(f, PAtom):
        lhs = poly_term(f.lhs)
        if f.rel is Rel.EQ:
            return f"(= {lhs} 0.0)"
        if f.rel is Rel.LT:
            return f"(< {lhs} 0.0)"
        if f.rel is Rel.LE:
            return f"(<= {lhs} 0.0)"
        return f"(or (< {lhs} 0.0) (> {lhs} 0.0))"
    if isinstance(f, PAnd):
        if not f.children:
            return "true"
        if len(f.children) == 1:
            return formula_term(f.children[0])
        return "(and " + " ".join(formula_term(c) for c in f.children) + ")"
    if isinstance(f, POr):
        if not f.children:
            return "false"
        if len(f.children) == 1:
            return formula_term(f.children[0])
        return "(or " + " ".join(formula_term(c) for c in f.children) + ")"
    if isinstance(f, PNot):
        return f"(not {formula_term(f.child)})"
    q = "exists" if isinstance(f, PExists) else "forall"
    binders = " ".join(f"({symbol(v)} Real)" for v in f.vars)
    return f"({q} ({binders}) {formula_term(f.body)})"


def prepare(f: PolyFormula) -> PolyFormula:
    """NNF plus lifting of top-level existentials."""
    return skolemize(nnf(f))


def select_logic(f: PolyFormula) -> Logic:
    return Logic.NRA if has_quantifiers(prepare(f)) else Logic.QF_NRA


def emit_smtlib(f: PolyFormula, logic: Optional[Logic] = None) -> str:
    """Deterministic SMT-LIB2 script for ``f``; free variables become Real constants."""
    g = prepare(f)
    needed = Logic.NRA if has_quantifiers(g) else Logic.QF_NRA
    if logic is None:
        logic = needed
    elif logic is Logic.QF_NRA and needed is Logic.NRA:
        raise EmitError("formula has quantifiers but the logic is quantifier-free")
    lines = [f"(set-logic {logic.value})"]
    for v in sorted(formula_vars(g)):
        lines.append(f"(declare-const {symbol(v)} Real)")
    lines.append(f"(assert {formula_term(g)})")
    lines.append("(check-sat)")
    lines.append("(get-model)")
    return "\n".join(lines) + "\n"


# backend


class Answer(enum.Enum):
    SAT = "sat"
    UNSAT = "unsat"
    UNKNOWN = "unknown"
    TIMEOUT = "timeout"
    ERROR = "error"


@dataclass
class SolverOutcome:
    answer: Answer
    model: dict = field(default_factory=dict)
    duration: float = 0.0
    detail: str = ""


def default_solver_path() -> Optional[str]:
    env = os.environ.get(SOLVER_ENV)
    if env:
        return env
    return shutil.which("z3")


@dataclass
class BackendConfig:
    solver: Optional[str] = None
    args: Sequence[str] = ()
    timeout: float = DEFAULT_TIMEOUT
    keep_dir: Optional[str] = None

    def __post_init__(self):
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.solver is None:
            self.solver = default_solver_path()

    def command(self, script_path: str) -> list[str]:
        exe = self.solver
        if not exe:
            raise FileNotFoundError(f"no SMT solver found; pass --solver or set {SOLVER_ENV}")
        resolved = shutil.which(exe) or (exe if os.path.exists(exe) else None)
        if resolved is None:
            raise FileNotFoundError(f"SMT solver {exe!r} not found")
        args = list(self.args)
        if not args and os.path.basename(resolved).startswith("z3"):
            args = ["-smt2"]
        return [resolved, *args, script_path]


_counter_lock = threading.Lock()
_counter = [0]


def _script_path(config: BackendConfig, tag: str) -> tuple[str, bool]:
    if config.keep_dir:
        Path(config.keep_dir).mkdir(parents=True, exist_ok=True)
        with _counter_lock:
            _counter[0] += 1
            n = _counter[0]
        safe = re.sub(r"[^A-Za-z0-9_.-]", "_", tag) or "query"
        return str(Path(config.keep_dir) / f"{n:04d}_{safe}.smt2"), True
    fd, path = tempfile.mkstemp(suffix=".smt2", prefix="qsp_")
    os.close(fd)
    return path, False


def run_backend(script: str, config: BackendConfig, tag: str = "query",
                cancel: Optional[threading.Event] = None) -> SolverOutcome:
    """Run the external solver on ``script``; kills it on timeout or cancellation."""
    path, keep = _script_path(config, tag)
    Path(path).write_text(script, encoding="utf-8")
    start = time.monotonic()
    try:
        try:
            cmd = config.command(path)
        except FileNotFoundError as exc:
            return SolverOutcome(Answer.ERROR, detail=str(exc))
        proc = subprocess.Popen(cmd, stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True)
        deadline = start + config.timeout
        out = err = ""
        while True:
            try:
                out, err = proc.communicate(timeout=0.05)
                break
            except subprocess.TimeoutExpired:
                now = time.monotonic()
                if now >= deadline or (cancel is not None and cancel.is_set()):
                    proc.kill()
                    proc.communicate()
                    answer = Answer.TIMEOUT if now >= deadline else Answer.UNKNOWN
                    detail = "timeout" if now >= deadline else "cancelled"
                    return SolverOutcome(answer, duration=time.monotonic() - start, detail=detail)
        duration = time.monotonic() - start
        return parse_output(out, err, proc.returncode, duration)
    finally:
        if not keep:
            try:
                os.unlink(path)
            except OSError:
                pass


def parse_output(out: str, err: str, returncode: int, duration: float) -> SolverOutcome:
    lines = [ln.strip() for ln in out.splitlines() if ln.strip()]
    head = lines[0] if lines else ""
    if head == "sat":
        rest = "\n".join(out.split("\n")[1:])
        return SolverOutcome(Answer.SAT, parse_model(rest), duration)
    if head == "unsat":
        return SolverOutcome(Answer.UNSAT, duration=duration)
    if head == "unknown":
        return SolverOutcome(Answer.UNKNOWN, duration=duration, detail="backend-unknown")
    detail = (err or out).strip()[:500] or f"exit code {returncode}"
    return SolverOutcome(Answer.ERROR, duration=duration, detail=detail)


# model parsing


def _tokenize(text: str) -> list[str]:
    return re.findall(r"\(|\)|\|[^|]*\||[^\s()]+", text)


def _parse_sexpr(tokens: list[str], i: int = 0):
    tok = tokens[i]
    if tok == "(":
        items = []
        i += 1
        while tokens[i] != ")":
            item, i = _parse_sexpr(tokens, i)
            items.append(item)
        return items, i + 1
    return tok, i + 1


def parse_sexprs(text: str) -> list:
    tokens = _tokenize(text)
    out, i = [], 0
    while i < len(tokens):
        item, i = _parse_sexpr(tokens, i)
        out.append(item)
    return out


def parse_model(text: str) -> dict:
    """Map ``define-fun`` constants to Fraction (exact) or float (algebraic)."""
    model = {}
    try:
        exprs = parse_sexprs(text)
    except (IndexError, RecursionError):
        return model
    stack = list(exprs)
    while stack:
        e = stack.pop()
        if not isinstance(e, list) or not e:
            continue
        if e[0] == "define-fun" and len(e) == 5 and e[2] == [] and e[3] == "Real":
            name = e[1][1:-1] if e[1].startswith("|") else e[1]
            try:
                model[name] = model_value(e[4])
            except (ValueError, TypeError, ZeroDivisionError, IndexError):
                pass
        else:
            stack.extend(x for x in e if isinstance(x, list))
    return model


def model_value(e):
    if isinstance(e, str):
        if e.endswith("?"):
            return float(e[:-1])
        return Fraction(e)
    op = e[0]
    if op == "-" and len(e) == 2:
        return -model_value(e[1])
    if op == "-":
        return model_value(e[1]) - sum(model_value(x) for x in e[2:])
    if op == "+":
        return sum(model_value(x) for x in e[1:])
    if op == "*":
        out = 1
        for x in e[1:]:
            out = out * model_value(x)
        return out
    if op == "/":
        a, b = model_value(e[1]), model_value(e[2])
        if isinstance(a, Fraction) and isinstance(b, Fraction):
            return a / b
        return float(a) / float(b)
    if op == "root-obj":
        return _root_obj(e[1], int(e[2]))
    raise ValueError(f"unsupported model value {e!r}")


def _root_obj(poly_expr, index: int) -> float:
    """The ``index``-th (1-based, ascending) real root of a univariate polynomial."""
    coeffs = _univariate(poly_expr)
    deg = max(coeffs)
    arr = [float(coeffs.get(d, 0)) for d in range(deg, -1, -1)]
    roots = np.roots(arr)
    real = sorted(r.real for r in roots if abs(r.imag) < 1e-9 * max(1.0, abs(r.real)))
    x = real[index - 1]
    # a few Newton steps in extended precision
    for _ in range(3):
        fx = sum(float(c) * x**d for d, c in coeffs.items())
        dfx = sum(float(c) * d * x ** (d - 1) for d, c in coeffs.items() if d)
        if dfx == 0:
            break
        x -= fx / dfx
    return x


def _univariate(e) -> dict[int, Fraction]:
    if isinstance(e, str):
        if re.match(r"^[-+]?[0-9.]+$", e):
            return {0: Fraction(e)}
        return {1: Fraction(1)}
    op = e[0]
    if op == "+":
        out: dict[int, Fraction] = {}
        for x in e[1:]:
            for d, c in _univariate(x).items():
                out[d] = out.get(d, 0) + c
        return out
    if op == "-" and len(e) == 2:
        return {d: -c for d, c in _univariate(e[1]).items()}
    if op == "-":
        out = dict(_univariate(e[1]))
        for x in e[2:]:
            for d, c in _univariate(x).items():
                out[d] = out.get(d, 0) - c
        return out
    if op == "*":
        out = {0: Fraction(1)}
        for x in e[1:]:
            nxt: dict[int, Fraction] = {}
            for d1, c1 in out.items():
                for d2, c2 in _univariate(x).items():
                    nxt[d1 + d2] = nxt.get(d1 + d2, 0) + c1 * c2
            out = nxt
        return out
    if op == "^":
        base = _univariate(e[1])
        n = int(e[2])
        out = {0: Fraction(1)}
        for _ in range(n):
            nxt = {}
            for d1, c1 in out.items():
                for d2, c2 in base.items():
                    nxt[d1 + d2] = nxt.get(d1 + d2, 0) + c1 * c2
            out = nxt
        return out
    if op == "/":
        num = _univariate(e[1])
        den = _univariate(e[2])[0]
        return {d: c / den for d, c in num.items()}
    raise ValueError(f"unsupported root-obj polynomial {e!r}")
