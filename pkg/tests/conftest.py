import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from phantomcastle.chaincx import ChainComplex  # noqa: E402
from phantomcastle.fgmod import FgModule  # noqa: E402
from phantomcastle.ringlin import Integers, IntegersMod, PrimeField, RMatrix, TruncatedPoly  # noqa: E402

# criterion number -> (passed, detail); filled by test_acceptance
ACCEPTANCE = {}


def complex_from(ring, ranks, diffs=None):
    return ChainComplex(ring, ranks, {n: RMatrix.from_rows(ring, m) for n, m in (diffs or {}).items()})


def cyclic_module(ring, d):
    return FgModule(ring, 1, RMatrix.from_rows(ring, [[d]]))


@pytest.fixture
def Z():
    return Integers()


@pytest.fixture
def Z4():
    return IntegersMod(4)


@pytest.fixture
def F2():
    return PrimeField(2)


@pytest.fixture
def TP():
    return TruncatedPoly(2, 2)


@pytest.fixture
def fix1(Z):
    return complex_from(Z, {0: 1, 1: 1}, {1: [[2]]})


@pytest.fixture
def fix2(Z4):
    return complex_from(Z4, {0: 1, 1: 1}, {1: [[2]]})


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
