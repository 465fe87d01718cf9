from pathlib import Path

import pytest

from pstflow.grid_model import CorrectionTable, load_case

CASES = Path(__file__).parent / "cases"
GOLDEN = Path(__file__).parent / "golden"

# corpus case -> (seller area, buyer area) used for transfer studies
TRANSFERS = {
    "two_bus": ("north", "south"),
    "two_bus_lossy": ("north", "south"),
    "parallel_pair": ("north", "south"),
    "triangle": ("north", "south"),
    "chain3": ("north", "south"),
    "four_bus_pst": ("west", "east"),
    "five_bus_pst": ("north", "south"),
}

SMALL_CASES = ["two_bus", "two_bus_lossy", "parallel_pair", "triangle", "chain3", "four_bus_pst"]
ALL_CASES = sorted(TRANSFERS)

TABLE_I_POINTS = (
    (-152.0, 1.0), (-121.0, 0.62), (-85.0, 0.37), (-42.0, 0.21), (0.0, 0.15),
    (42.0, 0.21), (85.0, 0.37), (121.0, 0.62), (152.0, 1.0),
)


def case(name):
    return load_case(CASES / f"{name}.json")


@pytest.fixture
def table_i():
    return CorrectionTable("table1", TABLE_I_POINTS)


@pytest.fixture
def five_bus():
    return case("five_bus_pst")


def pytest_terminal_summary(terminalreporter):
    verdicts = {}
    for status in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(status, []):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance.py::test_criterion_" not in nodeid:
                continue
            if status == "passed" and rep.when != "call":
                continue
            num = int(nodeid.split("::")[-1].split("[")[0].rsplit("_", 1)[1])
            verdicts[num] = verdicts.get(num, True) and status == "passed"
    if verdicts:
        terminalreporter.section("acceptance criteria")
        for num in sorted(verdicts):
            terminalreporter.write_line(f"{'PASS' if verdicts[num] else 'FAIL'}  criterion {num}")
