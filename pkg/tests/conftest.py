from pathlib import Path
import warnings

import numpy as np
import pytest

from mpgne import serialization
from mpgne.gne_solver import solve_gnep
from mpgne.mpc_games import condense, two_mass_game

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "fixtures"


def load_running_example():
    with warnings.catch_warnings():
        # agent 1's full Q_1 is indefinite; only its own block must be PD
        warnings.simplefilter("ignore")
        gp, _ = serialization.load_problem(serialization.load_json(FIXTURES / "running-example.json"))
    return gp


@pytest.fixture(scope="session")
def running():
    return load_running_example()


@pytest.fixture(scope="session")
def running_solutions(running):
    return {sel: solve_gnep(running, sel) for sel in ("none", "min_norm", "welfare", "vgne")}


@pytest.fixture(scope="session")
def two_mass():
    spec = two_mass_game()
    return spec, condense(spec)


@pytest.fixture(scope="session")
def two_mass_solutions(two_mass):
    _, gp = two_mass
    return {sel: solve_gnep(gp, sel) for sel in ("none", "min_norm", "vgne", "welfare")}


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES = {}


def record_criterion(number, passed, detail):
    """Store the one-line verdict printed for acceptance criterion ``number``."""
    ACCEPTANCE_LINES[number] = f"criterion {number}: {'PASS' if passed else 'FAIL'} - {detail}"
    print(ACCEPTANCE_LINES[number])


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
