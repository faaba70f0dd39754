"""Sparse multivariate polynomials with exact rational coefficients.

A monomial is a tuple of ``(variable, exponent)`` pairs sorted by variable
name; the empty tuple is the constant monomial. Polynomials are immutable and
hashable, and two equal polynomials always have identical term dictionaries,
so structural comparison is canonical.
"""

from __future__ import annotations

from fractions import Fraction
from numbers import Rational
from typing import Callable, Iterable, Iterator, Mapping, Union

try:  # optional fast rationals
    from gmpy2 import mpq as _mpq
except ImportError:  # pragma: no cover
    _mpq = None

Monomial = tuple[tuple[str, int], ...]
Number = Union[int, Fraction]


def _mono_mul(a: Monomial, b: Monomial) -> Monomial:
    if not a:
        return b
    if not b:
        return a
    exps = dict(a)
    for v, e in b:
        exps[v] = exps.get(v, 0) + e
    return tuple(sorted(exps.items()))


def as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, Rational)):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value)
    if _mpq is not None and isinstance(value, type(_mpq())):
        return Fraction(int(value.numerator), int(value.denominator))
    raise TypeError(f"expected an exact rational, got {type(value).__name__}")


class Poly:
    __slots__ = ("_terms", "_hash", "_fast")

    def __init__(self, terms: Mapping[Monomial, Number] | None = None):
        clean = {}
        if terms:
            for m, c in terms.items():
                c = as_fraction(c)
                if c:
                    clean[m] = c
        self._terms: dict[Monomial, Fraction] = clean
        self._hash = None
        self._fast = None

    @classmethod
    def var(cls, name: str) -> "Poly":
        return cls({((name, 1),): 1})

    @classmethod
    def const(cls, value: Number) -> "Poly":
        return cls({(): value})

    @classmethod
    def lift(cls, value) -> "Poly":
        if isinstance(value, Poly):
            return value
        return cls.const(value)

    @property
    def terms(self) -> Mapping[Monomial, Fraction]:
        return self._terms

    def __iter__(self) -> Iterator[tuple[Monomial, Fraction]]:
        return iter(sorted(self._terms.items(), key=_term_order))

    def is_zero(self) -> bool:
        return not self._terms

    def is_constant(self) -> bool:
        return all(not m for m in self._terms)

    def constant_value(self) -> Fraction:
        if not self.is_constant():
            raise ValueError("polynomial is not constant")
        return self._terms.get((), Fraction(0))

    def variables(self) -> frozenset[str]:
        return frozenset(v for m in self._terms for v, _ in m)

    def degree(self) -> int:
        return max((sum(e for _, e in m) for m in self._terms), default=0)

    def is_linear(self) -> bool:
        return self.degree() <= 1

    # arithmetic

    def __add__(self, other) -> "Poly":
        other = Poly.lift(other)
        out = dict(self._terms)
        for m, c in other._terms.items():
            out[m] = out.get(m, 0) + c
        return Poly(out)

    __radd__ = __add__

    def __neg__(self) -> "Poly":
        return Poly({m: -c for m, c in self._terms.items()})

    def __sub__(self, other) -> "Poly":
        return self + (-Poly.lift(other))

    def __rsub__(self, other) -> "Poly":
        return Poly.lift(other) - self

    def __mul__(self, other) -> "Poly":
        other = Poly.lift(other)
        out: dict[Monomial, Fraction] = {}
        for m1, c1 in self._terms.items():
            for m2, c2 in other._terms.items():
                m = _mono_mul(m1, m2)
                out[m] = out.get(m, 0) + c1 * c2
        return Poly(out)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Poly":
        k = as_fraction(other)
        return Poly({m: c / k for m, c in self._terms.items()})

    def __pow__(self, n: int) -> "Poly":
        if n < 0:
            raise ValueError("negative exponent")
        result = Poly.const(1)
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    def __eq__(self, other) -> bool:
        if isinstance(other, Poly):
            return self._terms == other._terms
        if isinstance(other, (int, Fraction)):
            return self._terms == Poly.const(other)._terms
        return NotImplemented

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(frozenset(self._terms.items()))
        return self._hash

    # evaluation

    def evaluate(self, values: Mapping[str, object]):
        """Evaluate with whatever number type ``values`` holds.

        Raises ``KeyError`` naming the first variable without a value.
        """
        total = 0
        for m, c in self._terms.items():
            term = c
            for v, e in m:
                if v not in values:
                    raise KeyError(v)
                x = values[v]
                term = term * (x if e == 1 else x**e)
            total = total + term
        return total

    def evaluate_mpq(self, values: Mapping[str, object]):
        """Like :meth:`evaluate` for ``gmpy2.mpq`` values, with cached mpq coefficients."""
        if self._fast is None:
            self._fast = [(_mpq(c.numerator, c.denominator), m) for m, c in self._terms.items()]
        total = _mpq(0)
        for c, m in self._fast:
            term = c
            for v, e in m:
                if v not in values:
                    raise KeyError(v)
                term = term * (values[v] if e == 1 else values[v] ** e)
            total += term
        return total

    def evaluate_float(self, values: Mapping[str, object]) -> float:
        total = 0.0
        for m, c in self._terms.items():
            term = float(c)
            for v, e in m:
                term *= float(values[v]) ** e
            total += term
        return total

    def subs(self, mapping: Mapping[str, "Poly | Number"]) -> "Poly":
        """Substitute polynomials (or constants) for variables."""
        if not mapping or not (self.variables() & mapping.keys()):
            return self
        cache: dict[tuple[str, int], Poly] = {}
        out = Poly()
        for m, c in self._terms.items():
            term = Poly.const(c)
            rest = []
            for v, e in m:
                if v in mapping:
                    key = (v, e)
                    if key not in cache:
                        cache[key] = Poly.lift(mapping[v]) ** e
                    term = term * cache[key]
                else:
                    rest.append((v, e))
            if rest:
                term = term * Poly({tuple(rest): 1})
            out = out + term
        return out

    def rename(self, fn: Callable[[str], str]) -> "Poly":
        out: dict[Monomial, Fraction] = {}
        for m, c in self._terms.items():
            exps: dict[str, int] = {}
            for v, e in m:
                nv = fn(v)
                exps[nv] = exps.get(nv, 0) + e
            key = tuple(sorted(exps.items()))
            out[key] = out.get(key, 0) + c
        return Poly(out)

    def __repr__(self) -> str:
        return f"Poly({self})"

    def __str__(self) -> str:
        if not self._terms:
            return "0"
        parts = []
        for m, c in self:
            mono = "*".join(v if e == 1 else f"{v}^{e}" for v, e in m)
            if not mono:
                parts.append(str(c))
            elif c == 1:
                parts.append(mono)
            elif c == -1:
                parts.append("-" + mono)
            else:
                parts.append(f"{c}*{mono}")
        return " + ".join(parts).replace("+ -", "- ")


def _term_order(item: tuple[Monomial, Fraction]):
    m, _ = item
    return (-sum(e for _, e in m), m)


def var(name: str) -> Poly:
    return Poly.var(name)


def const(value: Number) -> Poly:
    return Poly.const(value)


def poly_sum(items: Iterable[Poly]) -> Poly:
    total = Poly()
    for p in items:
        total = total + p
    return total
