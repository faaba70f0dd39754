import os
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from qsp.smt import default_solver_path  # noqa: E402

CORPUS = Path(__file__).resolve().parents[1] / "src" / "qsp" / "corpus"

# filled by test_acceptance.record(); printed at the end of the run
ACCEPTANCE: list[tuple[str, bool, str]] = []


@pytest.fixture(scope="session")
def corpus() -> Path:
    return CORPUS


@pytest.fixture(scope="session")
def solver_path():
    path = os.environ.get("QS_SOLVER_PATH") or default_solver_path()
    if not path:
        pytest.skip("no SMT solver found (set QS_SOLVER_PATH or put z3 on PATH)")
    return path


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
