"""Consistency and sufficiency queries, in naive or pruned mode.

Naive mode hands the full polynomial encoding to the backend. Pruned mode
decomposes the graph, applies one pruning case per component, reduces the
resulting systems (see :mod:`qsp.presolve`) and discharges every subcase
combination, in parallel up to the number of CPUs. Every satisfying model is mapped back to the
original variables and re-checked against the unpruned encoding before a
configuration is reported.
"""

from __future__ import annotations

import itertools
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence

from .decomposer import Component, DecompositionPlan, decompose, recombine
from .encoder import (
    PAnd, PAtom, PExists, PForall, PNot, POr, PolyFormula, TRUE, FALSE, conj, encode_graph, eval_ground,
    formula_vars, MissingVariable,
)
from .geometry import overlap_candidates
from .model import ConstraintGraph, Formula, Not, SpatialObject, Status, Verdict, validate_graph
from .presolve import Reduced, reduce_formula, split_cases
from .pruner import PrunedGraph, PruningPlan, plan_alternatives
from .smt import Answer, BackendConfig, SolverOutcome, emit_smtlib, prepare, run_backend
from .symmetry import TransformBudget, sym_of_graph

MODES = ("naive", "pruned")


# witness checking


@dataclass
class WitnessCheck:
    verified: bool
    violations: list[str] = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.verified


def _quantifiers(f: PolyFormula):
    if isinstance(f, (PAnd, POr)):
        for c in f.children:
            yield from _quantifiers(c)
    elif isinstance(f, PNot):
        yield from _quantifiers(f.child)
    elif isinstance(f, (PExists, PForall)):
        yield f
        yield from _quantifiers(f.body)


def _only_overlap_witnesses(f: PolyFormula) -> bool:
    return all(len(q.vars) == 2 and all(v.startswith("w_") for v in q.vars) for q in _quantifiers(f))


def _candidates(f: PolyFormula, model: Mapping[str, object], objects: Iterable[SpatialObject]) -> list[tuple]:
    out = []
    for q in _quantifiers(f):
        if all(v in model for v in q.vars):
            out.append(tuple(model[v] for v in q.vars))
    try:
        out += overlap_candidates(objects, model)
    except (KeyError, TypeError):
        pass
    return out


def _truth(f, model, cands, tol, complete):
    exact = eval_ground(f, model, cands, complete=complete)
    if exact:
        return True
    return eval_ground(f, model, cands, tol=tol, complete=complete)


def check_witness(model: Mapping[str, object], f: PolyFormula, tol: float = 1e-9,
                  objects: Iterable[SpatialObject] = ()) -> WitnessCheck:
    """Re-evaluate ``f`` under ``model``.

    Exact rational evaluation first; values the backend could only give
    approximately (irrational roots) fall back to comparing polynomial values
    against 0 with absolute tolerance ``tol``. Quantifiers are decided by the
    quantified values found in the model and by the overlap witnesses of the
    model's rectangles.
    """
    objects = list(objects)
    cands = _candidates(f, model, objects)
    complete = _only_overlap_witnesses(f)
    try:
        if _truth(f, model, cands, tol, complete):
            return WitnessCheck(True)
    except MissingVariable as exc:
        return WitnessCheck(False, [str(exc)])
    parts = f.children if isinstance(f, PAnd) else (f,)
    bad = []
    for p in parts:
        r = _truth(p, model, cands, tol, complete)
        if r is not True:
            bad.append(("undecided: " if r is None else "") + _short(p))
    return WitnessCheck(False, bad or ["formula not satisfied"])


def _short(f: PolyFormula, limit: int = 160) -> str:
    s = str(f) if isinstance(f, PAtom) else repr(f)
    return s if len(s) <= limit else s[:limit] + "..."


# configuration


@dataclass
class SolverConfig:
    backend: BackendConfig = field(default_factory=BackendConfig)
    workers: int = field(default_factory=lambda: os.cpu_count() or 1)
    tol: float = 1e-9
    # first time slice when alternatives of a unit are interleaved
    first_slice: float = 2.0
    # wall-clock seconds for a whole decision; None leaves only the per-call timeout
    deadline: Optional[float] = None
    until: Optional[float] = field(default=None, repr=False)  # absolute monotonic end, set per decision


@dataclass
class _Query:
    tag: str
    formula: PolyFormula            # what the backend sees
    reduced: Optional[Reduced]      # presolve record, to extend models
    check: PolyFormula              # unpruned encoding for the witness check
    variables: tuple[str, ...]      # object variables of the original problem part
    objects: tuple[SpatialObject, ...]
    label: str
    vars_before: int
    vars_after: int


@dataclass
class _Result:
    query: _Query
    outcome: SolverOutcome
    witness: Optional[dict] = None
    note: str = ""

    @property
    def sat(self) -> bool:
        return self.witness is not None

    @property
    def unsat(self) -> bool:
        return self.outcome.answer is Answer.UNSAT


def _run_query(q: _Query, config: SolverConfig, cancel: Optional[threading.Event],
               timeout: Optional[float] = None) -> _Result:
    start = time.monotonic()
    f = q.formula
    if f == FALSE:
        return _Result(q, SolverOutcome(Answer.UNSAT, duration=time.monotonic() - start, detail="presolve"))
    if f == TRUE:
        outcome = SolverOutcome(Answer.SAT, {}, time.monotonic() - start, "presolve")
    else:
        limit = config.backend.timeout if timeout is None else timeout
        if config.until is not None:
            left = config.until - start
            if left <= 0:
                return _Result(q, SolverOutcome(Answer.TIMEOUT, detail="deadline"))
            limit = min(limit, left)
        backend = config.backend if limit == config.backend.timeout else replace(config.backend, timeout=limit)
        outcome = run_backend(emit_smtlib(f), backend, q.tag, cancel)
    if outcome.answer is not Answer.SAT:
        return _Result(q, outcome)
    model = dict(outcome.model)
    for v in formula_vars(f):
        model.setdefault(v, Fraction(0))
    if q.reduced is not None:
        model = q.reduced.extend(model)
    for v in q.variables:
        # a variable no constraint mentions can take any value
        model.setdefault(v, Fraction(0))
    check = check_witness(model, q.check, config.tol, q.objects)
    if not check:
        return _Result(q, outcome, None, "witness re-check failed: " + "; ".join(check.violations[:3]))
    return _Result(q, outcome, model)


def _run_all(queries: Sequence[_Query], config: SolverConfig, stop_on_sat: bool) -> list[_Result]:
    if not queries:
        return []
    if len(queries) == 1 or config.workers <= 1:
        out = []
        for q in queries:
            r = _run_query(q, config, None)
            out.append(r)
            if stop_on_sat and r.sat:
                break
        return out
    cancel = threading.Event()
    results: list[Optional[_Result]] = [None] * len(queries)

    def work(i):
        if cancel.is_set():
            return
        r = _run_query(queries[i], config, cancel)
        results[i] = r
        if stop_on_sat and r.sat:
            cancel.set()

    with ThreadPoolExecutor(max_workers=min(config.workers, len(queries))) as pool:
        list(pool.map(work, range(len(queries))))
    return [r for r in results if r is not None]


# query construction


def _object_vars(g: ConstraintGraph) -> tuple[str, ...]:
    return tuple(g.variables())


def _naive_query(g: ConstraintGraph, tag: str) -> _Query:
    f = encode_graph(g)
    n = len(formula_vars(f))
    return _Query(tag, f, None, f, _object_vars(g), tuple(g.objects.values()), "naive", n, n)


def _merge(graphs: Sequence[ConstraintGraph], extra: Sequence[Formula] = ()) -> ConstraintGraph:
    objs, formulas, grounds = {}, [], {}
    for sg in graphs:
        objs.update(sg.objects)
        formulas.extend(sg.formulas)
        grounds.update(sg.groundings)
    return ConstraintGraph(objs, tuple(formulas) + tuple(extra), grounds)


@dataclass
class _Group:
    """One pruning alternative of a unit: its plans and the backend queries."""
    prunings: list[PruningPlan]
    queries: list[_Query]


@dataclass
class _UnitPlan:
    unit: tuple[int, ...]
    original: ConstraintGraph
    groups: list[_Group]


def _unit_queries(plan: DecompositionPlan, unit: tuple[int, ...], tag: str, alternatives: int = 2) -> _UnitPlan:
    comps = [plan.components[i] for i in unit]
    couplers = plan.coupler_atoms(unit)
    original = _merge([c.graph for c in comps], couplers)
    check = encode_graph(original)
    before = len(formula_vars(check))
    options = [plan_alternatives(c.graph, c.budget, alternatives, allow_scale=c.scale) for c in comps]
    groups = []
    for k in range(max(len(o) for o in options)):
        prunings = [o[min(k, len(o) - 1)] for o in options]
        queries = []
        for combo in itertools.product(*(p.subgraphs for p in prunings)):
            merged = _merge([s.graph for s in combo], couplers)
            side = [a for s in combo for a in s.side]
            f = conj(encode_graph(merged), *side) if side else encode_graph(merged)
            label = "+".join(s.label for s in combo)
            if k:
                label += f"@{k}"
            # lift top-level existentials first so their equalities reach presolve
            branches = split_cases(prepare(f))
            for b, reduced in enumerate(branches):
                name = label if len(branches) == 1 else f"{label}#{b}"
                queries.append(_Query(f"{tag}_{name}", reduced.formula, reduced, check, _object_vars(original),
                                      tuple(original.objects.values()), name, before,
                                      len(formula_vars(reduced.formula))))
        groups.append(_Group(prunings, queries))
    return _UnitPlan(unit, original, groups)


def _run_groups(groups: Sequence[_Group], config: SolverConfig) -> tuple[int, list[list[_Result]]]:
    """Interleave the alternatives of a unit under doubling time slices.

    Every round gives each undecided query a slice twice as long as the
    previous one, capped by the backend timeout. A unit is decided by a
    verified witness in any group or by a group whose queries are all unsat.
    Returns the deciding group index (-1 if none) and the last result of
    every query, per group. Slicing instead of racing matters on few cores,
    where concurrent solver processes slow each other down far more than
    proportionally.
    """
    if len(groups) == 1:
        return 0, [_run_all(groups[0].queries, config, True)]
    latest: list[list[Optional[_Result]]] = [[None] * len(g.queries) for g in groups]
    limit = config.backend.timeout
    span = min(config.first_slice, limit)
    while True:
        todo = [(g, i) for g, grp in enumerate(groups) for i in range(len(grp.queries))
                if latest[g][i] is None or _retry(latest[g][i])]
        # shortest open groups first: they are closest to a decision
        todo.sort(key=lambda gi: (sum(r is None or not r.unsat for r in latest[gi[0]]), gi))
        cancel = threading.Event()
        lock = threading.Lock()

        def work(item):
            g, i = item
            if cancel.is_set():
                return
            r = _run_query(groups[g].queries[i], config, cancel, span)
            with lock:
                latest[g][i] = r
                if _decided(latest) >= 0:
                    cancel.set()

        workers = max(1, min(config.workers, len(todo)))
        if workers == 1:
            for item in todo:
                work(item)
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                list(pool.map(work, todo))
        index = _decided(latest)
        final = span >= limit
        if index >= 0 or final or not any(_retry(r) for rs in latest for r in rs if r is not None):
            return index, [[r for r in rs if r is not None] for rs in latest]
        span = min(2 * span, limit)


def _retry(r: _Result) -> bool:
    return r.outcome.answer is Answer.TIMEOUT or (r.outcome.answer is Answer.UNKNOWN and r.outcome.detail == "cancelled")


def _decided(latest) -> int:
    for g, rs in enumerate(latest):
        if any(r is not None and r.sat for r in rs):
            return g
    for g, rs in enumerate(latest):
        if rs and all(r is not None and r.unsat for r in rs):
            return g
    return -1


# deciding


def _satisfiable(g: ConstraintGraph, mode: str, config: SolverConfig, tag: str) -> tuple[str, Optional[dict], dict]:
    """``("sat"|"unsat"|"unknown", witness, provenance)`` for the graph as a whole."""
    t0 = time.monotonic()
    if config.deadline is not None and config.until is None:
        config = replace(config, until=t0 + config.deadline)
    if mode == "naive":
        q = _naive_query(g, tag)
        results = _run_all([q], config, True)
        status, witness, reason = _join(results, True)
        prov = {"mode": "naive", "vars_before": q.vars_before, "vars_after": q.vars_after,
                "case": None, "subcases": _subcase_rows(results), "components": 1}
        prov["time"] = time.monotonic() - t0
        if reason:
            prov["reason"] = reason
        return status, witness, prov

    plan = decompose(g)
    prov = {"mode": "pruned", "components": len(plan.components), "units": [],
            "vars_before": 0, "vars_after": 0, "case": None, "subcases": []}
    parts: list[Verdict] = []
    for unit in plan.units():
        up = _unit_queries(plan, unit, f"{tag}_u{unit[0]}")
        status, witness, reason, group, results = _decide_unit(up, config)
        cases = [p.case.id if p.case else None for p in group.prunings]
        prov["units"].append({"components": list(unit), "cases": cases,
                              "targets": [[str(t) for t in p.targets] for p in group.prunings],
                              "subcases": _subcase_rows(results), "status": status})
        prov["vars_before"] += group.queries[0].vars_before if group.queries else 0
        prov["vars_after"] += max((q.vars_after for q in group.queries), default=0)
        prov["subcases"] += _subcase_rows(results)
        if status == "unsat":
            # one inconsistent unit settles the whole graph
            parts = [Verdict.inconsistent()]
            break
        parts.append(Verdict.consistent(witness) if status == "sat" else Verdict.unknown(reason or "unknown"))
    _summarise_cases(prov)
    joined = recombine(parts, plan, g, config.tol)
    if joined.status is Status.INCONSISTENT:
        prov["time"] = time.monotonic() - t0
        return "unsat", None, prov
    if joined.status is Status.CONSISTENT:
        prov["time"] = time.monotonic() - t0
        return "sat", joined.witness, prov
    if joined.reason != "placement":
        prov["time"] = time.monotonic() - t0
        prov["reason"] = joined.reason
        return "unknown", None, prov
    # placement failed: solve the whole graph as one component
    prov["fallback"] = "joint"
    budget = sym_of_graph(g) if not g.groundings else None
    joint = DecompositionPlan([_single(g, budget)])
    up = _unit_queries(joint, (0,), f"{tag}_joint")
    status, witness, reason, _, results = _decide_unit(up, config)
    prov["subcases"] += _subcase_rows(results)
    prov["time"] = time.monotonic() - t0
    if reason:
        prov["reason"] = reason
    return status, witness, prov


def _decide_unit(up: _UnitPlan, config: SolverConfig):
    """``(status, witness, reason, group, results)`` for one unit."""
    index, per_group = _run_groups(up.groups, config)
    if index >= 0:
        status, witness, reason = _join(per_group[index], True)
        return status, witness, reason, up.groups[index], per_group[index]
    merged = [r for rs in per_group for r in rs]
    status, witness, reason = _join(merged, True)
    if status == "unsat":
        # every query unsat but no group complete cannot happen; be conservative
        status, reason = "unknown", "incomplete"
    return status, witness, reason, up.groups[0], merged


def _single(g: ConstraintGraph, budget):
    return Component(0, g, budget if budget is not None else TransformBudget(frozenset()))


def _summarise_cases(prov: dict) -> None:
    cases = [c for u in prov["units"] for c in u["cases"] if c]
    prov["case"] = ",".join(dict.fromkeys(cases)) if cases else None


def _subcase_rows(results: Sequence[_Result]) -> list[dict]:
    rows = []
    for r in results:
        row = {"label": r.query.label, "answer": r.outcome.answer.value, "time": round(r.outcome.duration, 6),
               "vars_before": r.query.vars_before, "vars_after": r.query.vars_after}
        if r.note or r.outcome.detail:
            row["detail"] = r.note or r.outcome.detail
        rows.append(row)
    return rows


def _join(results: Sequence[_Result], any_sat: bool) -> tuple[str, Optional[dict], Optional[str]]:
    for r in results:
        if r.sat:
            return "sat", r.witness, None
    if results and all(r.unsat for r in results):
        return "unsat", None, None
    reasons = []
    for r in results:
        if r.unsat:
            continue
        if r.note:
            reasons.append(r.note)
        elif r.outcome.answer is Answer.TIMEOUT:
            reasons.append("timeout")
        elif r.outcome.answer is Answer.ERROR:
            reasons.append("backend-error: " + r.outcome.detail)
        else:
            reasons.append(r.outcome.detail or "backend-unknown")
    return "unknown", None, reasons[0] if reasons else "no subcases"


def _check_mode(mode: str) -> None:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")


def _validate(g: ConstraintGraph, extra: Sequence[Formula] = ()) -> None:
    diags = validate_graph(g.with_formulas(extra))
    if diags:
        raise ValueError("invalid constraint graph: " + "; ".join(str(d) for d in diags))


def _object_witness(g: ConstraintGraph, values: Optional[dict]) -> Optional[dict]:
    if values is None:
        return None
    names = set(g.variables())
    return {k: v for k, v in values.items() if k in names}


def decide_consistency(g: ConstraintGraph, mode: str = "pruned", config: Optional[SolverConfig] = None) -> Verdict:
    _check_mode(mode)
    _validate(g)
    config = config or SolverConfig()
    status, witness, prov = _satisfiable(g, mode, config, "consistency")
    if status == "sat":
        return Verdict.consistent(_object_witness(g, witness), task="consistency", provenance=prov)
    if status == "unsat":
        return Verdict.inconsistent(task="consistency", provenance=prov)
    return Verdict.unknown(prov.get("reason", "unknown"), task="consistency", provenance=prov)


def decide_sufficiency(g: ConstraintGraph, conclusion: Formula, mode: str = "pruned",
                       config: Optional[SolverConfig] = None) -> Verdict:
    """Entailed iff ``g`` together with the negated conclusion has no model."""
    _check_mode(mode)
    _validate(g, [conclusion])
    config = config or SolverConfig()
    combined = g.with_formulas([Not(conclusion)])
    status, witness, prov = _satisfiable(combined, mode, config, "sufficiency")
    if status == "unsat":
        return Verdict.consistent(None, task="sufficiency", provenance=prov)
    if status == "sat":
        return Verdict.inconsistent(task="sufficiency", witness=_object_witness(g, witness), provenance=prov)
    return Verdict.unknown(prov.get("reason", "unknown"), task="sufficiency", provenance=prov)


def decide(problem, mode: str = "pruned", config: Optional[SolverConfig] = None) -> Verdict:
    """Answer the query of a parsed problem file."""
    g = problem.graph()
    if problem.query.kind == "sufficiency":
        return decide_sufficiency(g, problem.query.conclusion, mode, config)
    return decide_consistency(g, mode, config)
