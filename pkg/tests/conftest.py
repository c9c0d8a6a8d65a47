import numpy as np
import pytest

from shockpanel import PanelDataset, SynthConfig, classify_panel, generate, smooth_panel

# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])


@pytest.fixture(scope="session")
def default_panel():
    """Default 163 x 27 synthetic panel, its truth, smoother and k=3 classes."""
    panel, truth = generate(SynthConfig(seed=0))
    sm = smooth_panel(panel, "ipgt")
    classes = classify_panel(panel, "ipgt", sm, 3)
    return panel, truth, sm, classes


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def small_panel(n_units=4, n_years=6, seed=0, first_year=2000):
    """Balanced panel with a few random series, for unit tests."""
    r = np.random.default_rng(seed)
    unit = np.repeat([f"u{i}" for i in range(n_units)], n_years)
    year = np.tile(np.arange(first_year, first_year + n_years), n_units)
    n = unit.size
    return PanelDataset.from_columns(unit, year, {
        "a": r.standard_normal(n),
        "b": r.standard_normal(n),
        "c": r.standard_normal(n),
    })
