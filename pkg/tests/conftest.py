import functools
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from eevconv.pauli_algebra import LocalOperator, mixed_field_ising, witness_operator  # noqa: E402
from eevconv.spectra import HamiltonianSpec, eev_table  # noqa: E402

MODELS_DIR = Path(__file__).resolve().parent.parent / "models"

ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


@functools.lru_cache(maxsize=None)
def mfi_table(n: int):
    """Mixed-field Ising tables with h, X1 and the witness registered."""
    h = mixed_field_ising()
    w, _ = witness_operator(h)
    obs = {"h": h, "X1": LocalOperator.parse("X1")}
    if n >= 7:
        obs["W"] = w
    return eev_table(HamiltonianSpec(h, n), obs)


@functools.lru_cache(maxsize=None)
def transverse_table(n: int):
    h = LocalOperator.parse("X1")
    return eev_table(HamiltonianSpec(h, n), {"X1": h})


@pytest.fixture
def models_dir():
    return MODELS_DIR


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}")
