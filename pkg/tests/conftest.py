from pathlib import Path

import pytest

from factrank.facts import Fact
from factrank.kg import Triple, load_graph

FIXTURES = Path(__file__).parent / "fixtures"

T1 = Triple("BillGates", "founderOf", "MSFT")
T2 = Triple("PaulAllen", "founderOf", "MSFT")
T3 = Triple("BillGates", "marriage", "M1")
T4 = Triple("M1", "spouse", "MelindaGates")
T5 = Triple("M1", "marriageDate", "D1994")
T6 = Triple("MSFT", "foundedIn", "D1975")
T7 = Triple("BillGates", "parentOf", "JenniferGates")


def fact(*triples):
    return Fact(tuple(triples))


@pytest.fixture(scope="session")
def toy():
    return load_graph(FIXTURES / "toy_triples.tsv", FIXTURES / "toy_entities.tsv")


@pytest.fixture(scope="session")
def toy_paths():
    return FIXTURES / "toy_triples.tsv", FIXTURES / "toy_entities.tsv"


# Acceptance outcomes, one line per criterion, shown after the test summary.
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
