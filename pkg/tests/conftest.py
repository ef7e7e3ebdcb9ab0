import numpy as np
import pytest

from qbmexact.scenarios import (
    THERMALIZATION_BETAS,
    thermalization_preset,
    second_bath_preset,
    artificial_blackbody_preset,
    physical_blackbody_preset,
    run_preset,
)

_cache: dict = {}


def cached_run(key, make):
    if key not in _cache:
        _cache[key] = run_preset(make())
    return _cache[key]


@pytest.fixture(scope="session")
def thermalization_runs():
    return {b: cached_run(("thermalization", b, 2000), lambda b=b: thermalization_preset(b, 2000)) for b in THERMALIZATION_BETAS}


@pytest.fixture(scope="session")
def second_bath_run():
    return cached_run(("second_bath", 2000), lambda: second_bath_preset(2000))


@pytest.fixture(scope="session")
def blackbody_runs():
    return {
        "artificial": cached_run(("bbart", 2000), lambda: artificial_blackbody_preset(2000)),
        "physical": cached_run(("bbphys", 2000), lambda: physical_blackbody_preset(2000)),
    }


def shipped_makers():
    """(label, cache key, maker taking a mode count) for every shipped preset."""
    out = [(f"thermalization_beta{b:g}", ("thermalization", b), lambda n, b=b: thermalization_preset(b, n)) for b in THERMALIZATION_BETAS]
    out += [
        ("second_bath", ("second_bath",), second_bath_preset),
        ("blackbody_artificial_cutoff", ("bbart",), artificial_blackbody_preset),
        ("blackbody_physical_cutoff", ("bbphys",), physical_blackbody_preset),
    ]
    return out


@pytest.fixture(scope="session")
def doubled_runs():
    """Every shipped preset at 2000 and 4000 modes per bath, keyed by label."""
    return {
        label: tuple(cached_run(key + (n,), lambda make=make, n=n: make(n)) for n in (2000, 4000))
        for label, key, make in shipped_makers()
    }


@pytest.fixture
def rng():
    return np.random.default_rng(20240517)


_acceptance_lines: dict = {}


@pytest.fixture
def report():
    """Record the one-line verdict for an acceptance criterion."""

    def record(number, passed, detail):
        _acceptance_lines[number] = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
        print(_acceptance_lines[number])
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_acceptance_lines):
            terminalreporter.write_line(_acceptance_lines[number])
