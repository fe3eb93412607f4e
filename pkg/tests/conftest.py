import numpy as np
import pytest

from brwpdc.dispersion import PhasematchParams, preset_params
from brwpdc.jsa import GridSpec, PumpSpec, build_jsa
from brwpdc.multilayer import preset_stack


@pytest.fixture(scope="session")
def graded_params():
    return preset_params("graded")


@pytest.fixture(scope="session")
def m_core_params():
    return preset_params("m_core")


@pytest.fixture(scope="session")
def graded_stack():
    return preset_stack("graded")


@pytest.fixture(scope="session")
def m_core_stack():
    return preset_stack("m_core")


@pytest.fixture(scope="session")
def symmetric_params():
    """Exchange-symmetric parameters: signal and idler behave identically."""
    return PhasematchParams(-3.0, -3.0, 1.2, 1.2, 10.0, 1550.0, 2000.0, name="symmetric")


@pytest.fixture(scope="session")
def small_grid():
    return GridSpec(0.25, 0.25, 256, 256)


@pytest.fixture(scope="session")
def graded_jsa(graded_params):
    return build_jsa(graded_params, PumpSpec(776.9, 0.25))


@pytest.fixture(scope="session")
def m_core_jsa(m_core_params):
    return build_jsa(m_core_params, PumpSpec(775.3, 0.25))


def random_jsa_grid(rng, n=64):
    """Complex test amplitude without any exchange symmetry."""
    return rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))


@pytest.fixture
def rng():
    return np.random.default_rng(20261018)


_CRITERIA = {}


@pytest.fixture
def report_criterion(capsys):
    """Record one acceptance line and fail the test if any check failed."""

    def report(number, title, checks):
        failed = [name for name, ok, _ in checks if not ok]
        status = "FAIL" if failed else "PASS"
        detail = "; ".join(f"{name}: {value}{'' if ok else ' [x]'}" for name, ok, value in checks)
        line = f"acceptance {number} {status}  {title}  ({detail})"
        _CRITERIA[number] = line
        with capsys.disabled():
            print("\n" + line)
        assert not failed, f"criterion {number} failed checks: {', '.join(failed)}"

    return report


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[number])
