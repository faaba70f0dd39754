"""Seeded generator of small constraint graphs for solver-level soundness checks."""

from __future__ import annotations

import random

from qsp.model import ConstraintGraph, Not, ObjectKind as K, Or, RELATIONS, RelationAtom, SpatialObject

KINDS = (K.POINT2, K.POINT2, K.SEGMENT2, K.SEGMENT2, K.CIRCLE2, K.RECTANGLE2)
# quantifier-free relations; naive mode has to answer these quickly
RELATIONS_USED = (
    "left_of", "right_or_collinear", "collinear", "parallel", "perpendicular", "coincident", "inside",
    "outside", "boundary", "part_of", "discrete_from", "equals", "touches", "disconnected", "same_size",
    "equal_length", "centred_on", "starts_at", "ends_at", "concentric",
)


def random_graph(seed: int, max_objects: int = 4) -> ConstraintGraph:
    rng = random.Random(seed)
    n = rng.randint(2, max_objects)
    objs = [SpatialObject.symbolic(f"o{i}", rng.choice(KINDS)) for i in range(n)]
    by_kind: dict = {}
    for o in objs:
        by_kind.setdefault(o.kind, []).append(o.id)
    options = []
    for name in RELATIONS_USED:
        for sig in RELATIONS[name].signatures:
            pools = [by_kind.get(k, []) for k in sig]
            if all(pools) and all(len(by_kind[k]) >= sig.count(k) for k in sig):
                options.append((name, sig))
    formulas = []
    for _ in range(rng.randint(1, 4) if options else 0):
        name, sig = rng.choice(options)
        used: list[str] = []
        for k in sig:
            used.append(rng.choice([x for x in by_kind[k] if x not in used]))
        f = RelationAtom(name, tuple(used))
        u = rng.random()
        if u < 0.2:
            f = Not(f)
        elif u < 0.3 and formulas:
            f = Or(f, formulas.pop())
        formulas.append(f)
    return ConstraintGraph.build(objs, formulas)
