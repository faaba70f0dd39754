"""Naive-versus-pruned timing over a corpus of ``.qsp`` problems."""

from __future__ import annotations

import csv
import io
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .dsl import load_problem
from .solver import MODES, SolverConfig, decide

COLUMNS = ("problem", "mode", "verdict", "time_s", "case", "subcases", "vars_before", "vars_after")


@dataclass(frozen=True)
class BenchRow:
    problem: str
    mode: str
    verdict: str
    time_s: float
    case: Optional[str]
    subcases: int
    vars_before: int
    vars_after: int
    timed_out: bool = False

    def as_csv(self) -> list:
        return [self.problem, self.mode, self.verdict, f"{self.time_s:.6f}", self.case or "",
                self.subcases, self.vars_before, self.vars_after]


@dataclass
class BenchReport:
    rows: list[BenchRow] = field(default_factory=list)
    timeout: float = 0.0

    def row(self, problem: str, mode: str) -> Optional[BenchRow]:
        return next((r for r in self.rows if r.problem == problem and r.mode == mode), None)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in self.rows:
            w.writerow(r.as_csv())
        return buf.getvalue()

    def speedup(self, problem: str) -> str:
        """Naive over pruned time; a naive timeout is reported as a bound."""
        naive, pruned = self.row(problem, "naive"), self.row(problem, "pruned")
        if naive is None or pruned is None or pruned.timed_out:
            return "n/a"
        if naive.timed_out:
            return f"> timeout ({self.timeout:g} s)"
        if pruned.time_s <= 0:
            return "n/a"
        return f"{naive.time_s / pruned.time_s:.1f}x"

    def summary(self) -> str:
        lines = [f"{'problem':32} {'mode':7} {'verdict':13} {'time_s':>10} vars"]
        for r in self.rows:
            t = f"> {self.timeout:g}" if r.timed_out else f"{r.time_s:.3f}"
            lines.append(f"{r.problem:32} {r.mode:7} {r.verdict:13} {t:>10} {r.vars_before}->{r.vars_after}")
        problems = list(dict.fromkeys(r.problem for r in self.rows))
        for p in problems:
            s = self.speedup(p)
            if s != "n/a":
                lines.append(f"speedup {p}: {s}")
        return "\n".join(lines)


def corpus_files(directory) -> list[Path]:
    d = Path(directory)
    if not d.is_dir():
        raise FileNotFoundError(f"corpus directory {d} not found")
    return sorted(d.glob("*.qsp"))


def run_problem(path: Path, mode: str, config: SolverConfig, repeat: int = 1) -> BenchRow:
    problem = load_problem(path)
    times, verdicts = [], []
    prov: dict = {}
    for _ in range(max(1, repeat)):
        t0 = time.monotonic()
        v = decide(problem, mode, config)
        times.append(time.monotonic() - t0)
        verdicts.append(v)
        prov = v.provenance
    v = verdicts[-1]
    timed_out = any(x.reason == "timeout" for x in verdicts)
    return BenchRow(path.stem, mode, v.label, statistics.median(times), prov.get("case"),
                    len(prov.get("subcases", [])), prov.get("vars_before", 0), prov.get("vars_after", 0), timed_out)


def run_bench(paths: Iterable[Path], config: SolverConfig, modes: Sequence[str] = MODES,
              repeat: int = 1, parallel: bool = False, zero_times: bool = False) -> BenchReport:
    """Each problem in each mode; one problem's timeout never aborts the run."""
    jobs = [(p, m) for p in paths for m in modes]
    if parallel:
        with ThreadPoolExecutor() as pool:
            rows = list(pool.map(lambda j: run_problem(j[0], j[1], config, repeat), jobs))
    else:
        rows = [run_problem(p, m, config, repeat) for p, m in jobs]
    if zero_times:
        rows = [BenchRow(r.problem, r.mode, r.verdict, 0.0, r.case, r.subcases, r.vars_before,
                         r.vars_after, r.timed_out) for r in rows]
    return BenchReport(rows, config.backend.timeout)
