"""The ``.qsp`` problem format.

One period-terminated statement per line::

    % comment
    object sphere s1.
    constraint touches(s1, s2) and same_size(s1, s2).
    ground r_s1 = 1.
    query consistent.          % or: query entails: <formula>.

Formulas use ``and``/``or``/``not``, prefix relation application and
``exists <kind> <id>: (...)`` / ``forall <kind> <id>: (...)`` over locally
declared objects. Parameters of an object ``o`` are named ``<param>_<o>``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional

from .model import (
    And, ConstraintGraph, Exists, Forall, Formula, Not, ObjectKind, Or, RELATIONS, RelationAtom,
    SpatialObject, format_formula, resolve_relation,
)

KIND_WORDS = {
    "point": (ObjectKind.POINT2, False),
    "segment": (ObjectKind.SEGMENT2, False),
    "rectangle": (ObjectKind.RECTANGLE2, False),
    "square": (ObjectKind.RECTANGLE2, True),
    "circle": (ObjectKind.CIRCLE2, False),
    "point3": (ObjectKind.POINT3, False),
    "sphere": (ObjectKind.SPHERE3, False),
    "box": (ObjectKind.BOX3, False),
    "cube": (ObjectKind.BOX3, True),
}

KEYWORDS = {"object", "constraint", "ground", "query", "consistent", "entails",
            "and", "or", "not", "exists", "forall", "true", "false"}


class ParseError(ValueError):
    def __init__(self, message: str, line: int, col: int, expected: Iterable[str] = ()):
        self.message = message
        self.line = line
        self.col = col
        self.expected = tuple(sorted(set(expected)))
        text = f"line {line}, column {col}: {message}"
        if self.expected:
            text += f" (expected {', '.join(self.expected)})"
        super().__init__(text)


@dataclass(frozen=True)
class Query:
    kind: str  # "consistency" | "sufficiency"
    conclusion: Optional[Formula] = None


@dataclass
class ProblemFile:
    objects: list[SpatialObject] = field(default_factory=list)
    constraints: list[Formula] = field(default_factory=list)
    groundings: dict[str, Fraction] = field(default_factory=dict)
    query: Query = field(default_factory=lambda: Query("consistency"))

    def graph(self) -> ConstraintGraph:
        return ConstraintGraph.build(self.objects, self.constraints, self.groundings)


_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>%[^\n]*)
  | (?P<num>-?\d+(?:\.\d+)?(?:/\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>[(),.:=])
""", re.VERBOSE)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    out = []
    line, start, pos = 1, 0, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            start = m.end()
        elif kind not in ("ws", "comment"):
            out.append(Token(kind, m.group(), line, pos - start + 1))
        pos = m.end()
    out.append(Token("eof", "", line, pos - start + 1))
    return out


def parse_rational(text: str) -> Fraction:
    """Integer, exact decimal or ``a/b``."""
    return Fraction(text)


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def fail(self, message: str, expected: Iterable[str] = (), tok: Optional[Token] = None):
        tok = tok or self.tok
        raise ParseError(message, tok.line, tok.col, expected)

    def next(self) -> Token:
        t = self.tok
        self.i += 1
        return t

    def accept(self, text: str) -> bool:
        if self.tok.text == text and self.tok.kind != "eof":
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        if self.tok.text != text or self.tok.kind == "eof":
            got = self.tok.text or "end of input"
            self.fail(f"unexpected {got!r}", [repr(text)])
        return self.next()

    def ident(self, what: str) -> Token:
        t = self.tok
        if t.kind != "name" or t.text in KEYWORDS:
            self.fail(f"unexpected {t.text or 'end of input'!r}", [what])
        return self.next()

    # statements

    def problem(self) -> ProblemFile:
        p = ProblemFile()
        scope: dict[str, SpatialObject] = {}
        query_tok = None
        while self.tok.kind != "eof":
            t = self.tok
            if t.text == "object":
                self.next()
                o = self.declaration()
                if o.id in scope:
                    self.fail(f"duplicate object id {o.id!r}", tok=t)
                scope[o.id] = o
                p.objects.append(o)
            elif t.text == "constraint":
                self.next()
                p.constraints.append(self.formula(scope))
            elif t.text == "ground":
                self.next()
                name = self.ident("variable name")
                known = {v for o in p.objects for v in o.variables()}
                if name.text not in known:
                    self.fail(f"unknown variable {name.text!r}", tok=name)
                if name.text in p.groundings:
                    self.fail(f"variable {name.text!r} grounded twice", tok=name)
                self.expect("=")
                num = self.tok
                if num.kind != "num":
                    self.fail(f"unexpected {num.text or 'end of input'!r}", ["rational"])
                self.next()
                p.groundings[name.text] = parse_rational(num.text)
            elif t.text == "query":
                if query_tok is not None:
                    self.fail("more than one query", tok=t)
                query_tok = self.next()
                if self.accept("consistent"):
                    p.query = Query("consistency")
                elif self.accept("entails"):
                    self.expect(":")
                    p.query = Query("sufficiency", self.formula(scope))
                else:
                    self.fail(f"unexpected {self.tok.text or 'end of input'!r}", ["'consistent'", "'entails'"])
            else:
                self.fail(f"unexpected {t.text!r}", ["'object'", "'constraint'", "'ground'", "'query'"])
            self.expect(".")
        if query_tok is None:
            self.fail("missing query statement", ["'query'"])
        return p

    def declaration(self) -> SpatialObject:
        kt = self.tok
        if kt.text not in KIND_WORDS:
            self.fail(f"unknown object kind {kt.text or 'end of input'!r}", sorted(KIND_WORDS))
        self.next()
        kind, sides = KIND_WORDS[kt.text]
        oid = self.ident("object id")
        return SpatialObject.symbolic(oid.text, kind, sides)

    # formulas: or < and < not < primary

    def formula(self, scope) -> Formula:
        items = [self.conjunction(scope)]
        while self.accept("or"):
            items.append(self.conjunction(scope))
        return items[0] if len(items) == 1 else Or(*items)

    def conjunction(self, scope) -> Formula:
        items = [self.unary(scope)]
        while self.accept("and"):
            items.append(self.unary(scope))
        return items[0] if len(items) == 1 else And(*items)

    def unary(self, scope) -> Formula:
        if self.accept("not"):
            return Not(self.unary(scope))
        t = self.tok
        if t.text in ("exists", "forall"):
            self.next()
            o = self.declaration()
            if o.id in scope:
                self.fail(f"quantified object {o.id!r} shadows an existing object", tok=t)
            self.expect(":")
            inner = dict(scope)
            inner[o.id] = o
            body = self.unary(inner)
            return Exists(o, body) if t.text == "exists" else Forall(o, body)
        if self.accept("("):
            f = self.formula(scope)
            self.expect(")")
            return f
        if self.accept("true"):
            return And()
        if self.accept("false"):
            return Or()
        return self.atom(scope)

    def atom(self, scope) -> RelationAtom:
        name = self.ident("relation or '('")
        self.expect("(")
        args = [self.ident("object id")]
        while self.accept(","):
            args.append(self.ident("object id"))
        self.expect(")")
        for a in args:
            if a.text not in scope:
                self.fail(f"undeclared object {a.text!r}", tok=a)
        kinds = [scope[a.text].kind for a in args]
        resolved = resolve_relation(name.text, kinds)
        if resolved is None:
            self.fail(f"unknown relation {name.text!r}", sorted(RELATIONS), tok=name)
        sigs = RELATIONS[resolved].signatures
        if tuple(kinds) not in sigs:
            got = ", ".join(k.value for k in kinds)
            want = ["(" + ", ".join(k.value for k in s) + ")" for s in sigs]
            self.fail(f"{name.text} does not apply to ({got})", want, tok=name)
        return RelationAtom(resolved, tuple(a.text for a in args))


def parse_problem(text: str) -> ProblemFile:
    return _Parser(text).problem()


def parse_formula(text: str, objects: Iterable[SpatialObject]) -> Formula:
    p = _Parser(text)
    f = p.formula({o.id: o for o in objects})
    if p.tok.kind != "eof":
        p.fail(f"unexpected {p.tok.text!r}", ["end of formula"])
    return f


def _rational(q: Fraction) -> str:
    return str(Fraction(q))


def format_problem(p: ProblemFile) -> str:
    lines = [f"object {o.kind_label} {o.id}." for o in p.objects]
    lines += [f"constraint {format_formula(f)}." for f in p.constraints]
    lines += [f"ground {k} = {_rational(v)}." for k, v in p.groundings.items()]
    if p.query.kind == "sufficiency":
        lines.append(f"query entails: {format_formula(p.query.conclusion)}.")
    else:
        lines.append("query consistent.")
    return "\n".join(lines) + "\n"


def load_problem(path) -> ProblemFile:
    with open(path, encoding="utf-8") as fh:
        return parse_problem(fh.read())
