"""Equality propagation applied to pruned encodings before they reach the solver.

Top-level linear equalities (groundings, shared radii, centre identifications)
are solved for one variable and substituted everywhere. A univariate quadratic
equality whose rational roots are told apart by top-level sign bounds (the
half-space restrictions the pruner adds) fixes its variable the same way.
When neither applies, the equalities are row-reduced with monomials as columns
(nonlinear monomials first); any row left with only linear terms is fed back
to the substitution step. Each step keeps the solution set unchanged. The eliminated
variables are recorded so a model of the reduced formula extends to a model of
the original one.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math
from fractions import Fraction
from typing import Mapping

from .encoder import (
    FALSE, TRUE, PAnd, PAtom, PExists, PForall, PNot, POr, PolyFormula, Rel, _compare, formula_vars, nnf,
    simplify, substitute,
)
from .poly import Poly


@dataclass
class Reduced:
    formula: PolyFormula
    # eliminated variable -> expression over remaining variables, in elimination order
    eliminated: list[tuple[str, Poly]] = field(default_factory=list)

    def extend(self, model: Mapping[str, object]) -> dict:
        """Complete a model of the reduced formula with the eliminated variables."""
        values = dict(model)
        for name, expr in reversed(self.eliminated):
            missing = expr.variables() - values.keys()
            for v in missing:
                # unconstrained after elimination; any value works
                values[v] = Fraction(0)
            values[name] = expr.evaluate(values)
        return values


def _conjuncts(f: PolyFormula):
    return f.children if isinstance(f, PAnd) else (f,)


def _pick(atom: PAtom, protected: frozenset[str]):
    p = atom.lhs
    if atom.rel is not Rel.EQ or not p.is_linear() or p.is_constant():
        return None
    candidates = sorted(v for v in p.variables() if v not in protected)
    if not candidates:
        return None
    # prefer variables that occur alone (plain groundings)
    name = candidates[0]
    coeff = p.terms[((name, 1),)]
    rest = p - Poly.var(name) * coeff
    return name, rest / (-coeff)


def _rational_sqrt(q: Fraction):
    if q < 0:
        return None
    n, d = math.isqrt(q.numerator), math.isqrt(q.denominator)
    if n * n == q.numerator and d * d == q.denominator:
        return Fraction(n, d)
    return None


def _quadratic_roots(p: Poly, name: str):
    a = p.terms.get(((name, 2),), Fraction(0))
    b = p.terms.get(((name, 1),), Fraction(0))
    c = p.terms.get((), Fraction(0))
    s = _rational_sqrt(b * b - 4 * a * c)
    if s is None:
        return None
    return {(-b + s) / (2 * a), (-b - s) / (2 * a)}


def _fix_root(conjuncts, protected):
    """Find ``(name, value)`` for a quadratic pinned down by sign bounds."""
    bounds: dict[str, list[PAtom]] = {}
    for c in conjuncts:
        if isinstance(c, PAtom) and c.rel is not Rel.EQ and c.lhs.is_linear():
            vs = c.lhs.variables()
            if len(vs) == 1:
                bounds.setdefault(next(iter(vs)), []).append(c)
    for c in conjuncts:
        if not (isinstance(c, PAtom) and c.rel is Rel.EQ and c.lhs.degree() == 2):
            continue
        vs = c.lhs.variables()
        if len(vs) != 1:
            continue
        name = next(iter(vs))
        if name in protected or name not in bounds:
            continue
        roots = _quadratic_roots(c.lhs, name)
        if roots is None:
            continue
        ok = [r for r in roots
              if all(_compare(b.rel, b.lhs.evaluate({name: r})) for b in bounds[name])]
        if len(ok) == 1:
            return name, Poly.const(ok[0])
    return None


def _atom_key(a: PAtom):
    """Atoms equal up to a positive factor (or any factor for = and ≠) share a key."""
    p = a.lhs
    lead = p.terms[min(p.terms)]
    s = lead if a.rel in (Rel.EQ, Rel.NE) else abs(lead)
    return (p / s, a.rel)


def _key(f: PolyFormula):
    return _atom_key(f) if isinstance(f, PAtom) else f


def _assume(f: PolyFormula, true: set, false: set) -> PolyFormula:
    k = _key(f)
    if k in true:
        return TRUE
    if k in false:
        return FALSE
    if isinstance(f, (PAnd, POr)):
        return type(f)(tuple(_assume(c, true, false) for c in f.children))
    if isinstance(f, (PExists, PForall)):
        return type(f)(f.vars, _assume(f.body, true, false))
    return f


def _contextual(f: PolyFormula) -> PolyFormula:
    """Rewrite each top-level conjunct assuming all the others.

    Copies of another conjunct become true, its complement false.
    """
    cs = list(_conjuncts(f))
    if len(cs) < 2:
        return f
    keys = [_key(c) for c in cs]
    negs = [_key(simplify(nnf(PNot(c)))) for c in cs]
    out = []
    for i, c in enumerate(cs):
        true = {k for j, k in enumerate(keys) if j != i}
        false = {k for j, k in enumerate(negs) if j != i}
        if isinstance(c, PAtom):
            out.append(FALSE if keys[i] in false else c)
        else:
            out.append(_assume(c, true, false))
    return simplify(PAnd(tuple(out)))


def _mono_key(m):
    return (-sum(e for _, e in m), m)


def _row_reduce(conjuncts):
    """Return conjuncts with the equalities in reduced echelon form, or None
    when elimination exposes no new linear equality."""
    rows = [c.lhs for c in conjuncts if isinstance(c, PAtom) and c.rel is Rel.EQ]
    if len(rows) < 2 or all(r.is_linear() for r in rows):
        return None
    cols = sorted({m for r in rows for m in r.terms}, key=_mono_key)
    mat = [dict(r.terms) for r in rows]
    pivot_row = 0
    for m in cols:
        if not m:
            continue
        pr = next((i for i in range(pivot_row, len(mat)) if mat[i].get(m)), None)
        if pr is None:
            continue
        mat[pivot_row], mat[pr] = mat[pr], mat[pivot_row]
        lead = mat[pivot_row][m]
        mat[pivot_row] = {k: v / lead for k, v in mat[pivot_row].items()}
        for i in range(len(mat)):
            if i != pivot_row and mat[i].get(m):
                k = mat[i][m]
                row = dict(mat[i])
                for mm, v in mat[pivot_row].items():
                    row[mm] = row.get(mm, 0) - k * v
                mat[i] = {mm: v for mm, v in row.items() if v}
        pivot_row += 1
    reduced = [Poly(r) for r in mat]
    old = {r for r in rows if r.is_linear()}
    fresh = [r for r in reduced if r.is_linear() and not r.is_zero()
             and r not in old and -r not in old]
    if not fresh:
        return None
    others = [c for c in conjuncts if not (isinstance(c, PAtom) and c.rel is Rel.EQ)]
    return [PAtom(r, Rel.EQ) for r in reduced] + others


def reduce_formula(f: PolyFormula, protected=frozenset()) -> Reduced:
    """Eliminate top-level linear equalities until none are left."""
    f = simplify(f)
    eliminated: list[tuple[str, Poly]] = []
    protected = frozenset(protected)
    while f not in (TRUE, FALSE):
        choice = None
        for c in _conjuncts(f):
            if isinstance(c, PAtom):
                choice = _pick(c, protected)
                if choice:
                    break
        if choice is None:
            choice = _fix_root(_conjuncts(f), protected)
        if choice is None:
            rows = _row_reduce(_conjuncts(f))
            if rows is not None:
                f = simplify(PAnd(tuple(rows)))
                continue
        if choice is None:
            g = _contextual(f)
            if g != f:
                f = g
                continue
            break
        name, expr = choice
        eliminated = [(n, e.subs({name: expr})) for n, e in eliminated]
        eliminated.append((name, expr))
        f = simplify(substitute(f, {name: expr}))
    return Reduced(f, eliminated)


def count_free(r: Reduced) -> int:
    return len(formula_vars(r.formula))


def _has_linear_eq(f: PolyFormula) -> bool:
    return any(isinstance(c, PAtom) and c.rel is Rel.EQ and c.lhs.is_linear() and not c.lhs.is_constant()
               for c in _conjuncts(f))


def split_cases(f: PolyFormula, limit: int = 16, protected=frozenset()) -> list[Reduced]:
    """Reduce ``f``, splitting top-level disjunctions whose branches carry linear equalities.

    ``f`` is equivalent to the disjunction of the returned formulas. Branches
    that reduce to false are dropped; at most ``limit`` branches are kept
    (the rest stay unsplit).
    """
    work = [reduce_formula(f, protected)]
    done: list[Reduced] = []
    while work:
        r = work.pop(0)
        cs = _conjuncts(r.formula)
        ors = [c for c in cs if isinstance(c, POr) and any(_has_linear_eq(b) for b in c.children)]
        if r.formula in (TRUE, FALSE) or not ors or len(done) + len(work) + len(ors[0].children) > limit:
            done.append(r)
            continue
        pick = ors[0]
        rest = tuple(c for c in cs if c is not pick)
        for b in pick.children:
            sub = reduce_formula(PAnd(rest + (b,)), protected)
            if sub.formula == FALSE:
                continue
            work.append(Reduced(sub.formula, r.eliminated + sub.eliminated))
    live = [r for r in done if r.formula != FALSE]
    return live or [Reduced(FALSE)]

