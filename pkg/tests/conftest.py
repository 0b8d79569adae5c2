from __future__ import annotations

import pytest

from jfta_bench.jfta import FaultTree, example_tree, parse_fault_tree

# R(OR) -> {A(AND) -> {X, Y}, Z}
AND_DOC = """{"R": {"NodeName": "Rig stalls", "NextType": "OR", "NextTree": {
  "A": {"NodeName": "Drive train issue", "NextType": "AND", "NextTree": {
    "X": {"NodeName": "Clutch wear", "NextType": "Solution", "NextTree": "Replace clutch plate"},
    "Y": {"NodeName": "Chain slack", "NextType": "Solution", "NextTree": "Tighten chain"}}},
  "Z": {"NodeName": "Empty tank", "NextType": "Solution", "NextTree": "Refill tank"}}}}"""

# small tree carrying the node names used in the user-reply examples
SHOP_DOC = """{"1": {"NodeName": "Controller unstable", "NextType": "OR", "NextTree": {
  "2": {"NodeName": "Board fault", "NextType": "OR", "NextTree": {
    "3": {"NodeName": "Chip Overheating", "NextType": "Solution", "NextTree": "Clean the heat sink"},
    "4": {"NodeName": "Insulation Aging", "NextType": "Solution", "NextTree": "Rewrap the harness"}}},
  "5": {"NodeName": "Engine fault", "NextType": "Fault", "NextTree": {
    "6": {"NodeName": "Misfire", "NextType": "Solution", "NextTree": "Swap the ignition coil"}}}}}}"""

ONE_DOC = '{"1": {"NodeName": "x", "NextType": "Solution", "NextTree": "fix"}}'


@pytest.fixture(scope="session")
def a2() -> FaultTree:
    return example_tree()


@pytest.fixture(scope="session")
def and_tree() -> FaultTree:
    return parse_fault_tree(AND_DOC)


@pytest.fixture(scope="session")
def shop_tree() -> FaultTree:
    return parse_fault_tree(SHOP_DOC)


@pytest.fixture(scope="session")
def one_tree() -> FaultTree:
    return parse_fault_tree(ONE_DOC)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    from . import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in test_acceptance.RESULTS:
            terminalreporter.write_line(line)
