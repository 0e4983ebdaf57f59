import numpy as np
import pytest

from qlsid.model import GaussianInput, QlsParams, build_state_space, reduce_to_vacuum_input

# Lines printed at the end of the run by the acceptance suite.
ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture
def squeezed_input():
    return GaussianInput(np.array([[1.0]]), np.array([[np.sqrt(2.0)]]))


@pytest.fixture
def cavity():
    """Passive cavity, unit decay, zero detuning."""
    return build_state_space(QlsParams.cavity(1.0, 0.0))


@pytest.fixture
def detuned_cavity():
    return build_state_space(QlsParams.cavity(1.0, 1.0))


@pytest.fixture
def squeezed_cavity(squeezed_input):
    """Detuned cavity driven by the pure squeezed input, in vacuum form."""
    return reduce_to_vacuum_input(build_state_space(QlsParams.cavity(1.0, 1.0)), squeezed_input)


@pytest.fixture
def acceptance_report():
    def record(number: int, passed: bool, detail: str) -> None:
        ACCEPTANCE_LINES[number] = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
