import pathlib

import pytest

from droughtrate import dataset

ROOT = pathlib.Path(__file__).resolve().parents[1]
FIXTURE_DIR = ROOT / "data" / "fixture"

_ACCEPTANCE = []


@pytest.fixture(scope="session")
def fixture_dir():
    return FIXTURE_DIR


@pytest.fixture(scope="session")
def panel():
    return dataset.load_panel(FIXTURE_DIR / "yields.csv", FIXTURE_DIR / "areas.csv")


@pytest.fixture(scope="session")
def prices(panel):
    return dataset.load_prices(FIXTURE_DIR / "prices.csv", panel)


@pytest.fixture(scope="session")
def declarations(panel):
    return dataset.load_declarations(FIXTURE_DIR / "declarations.csv", panel)


@pytest.fixture
def write(tmp_path):
    """Write ``text`` to ``tmp_path/name`` and return the path."""

    def _write(name, text):
        p = tmp_path / name
        p.write_text(text, encoding="utf-8")
        return p

    return _write


def random_panel(rng, J, n, *, positive_area=True):
    yields = rng.gamma(2.0, 400.0, size=(J, n))
    areas = rng.uniform(0.5 if positive_area else 0.0, 10.0, size=(J, n))
    return dataset.YieldPanel(
        crops=[f"c{j}" for j in range(J)], years=range(2000, 2000 + n),
        yields=yields, areas=areas,
    )


@pytest.fixture
def record_acceptance():
    def _record(criterion, passed, detail):
        _ACCEPTANCE.append((criterion, passed, detail))
        return passed

    return _record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, passed, detail in sorted(_ACCEPTANCE, key=lambda r: r[0]):
        terminalreporter.write_line(
            f"criterion {criterion:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        )
