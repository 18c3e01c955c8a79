import math

import numpy as np
import pytest
from hypothesis import strategies as st

from optodip import CavityParams, preset

TWO_PI = 2 * math.pi


@pytest.fixture
def fig2():
    return preset("fig2")


@pytest.fixture
def experiment():
    return preset("experiment")


def random_params(rng, spring=True):
    """Valid parameters spread over a few decades around the reference cavity."""
    kappa = TWO_PI * 10 ** rng.uniform(4.0, 6.0)
    return CavityParams(
        wavelength=rng.uniform(0.5e-6, 2.0e-6),
        cavity_length=10 ** rng.uniform(-2, 0),
        mirror_mass=10 ** rng.uniform(-6, -3),
        total_decay=kappa,
        input_coupling=rng.uniform(0.05, 0.95) * kappa,
        detuning=(rng.uniform(0.1, 2.0) if spring else rng.uniform(-2.0, 2.0)) * kappa,
        intracavity_power=10 ** rng.uniform(-1, 1),
        mode_matching=rng.uniform(0, 1),
    )


@st.composite
def cavity_params(draw, spring=True):
    kappa = TWO_PI * draw(st.floats(1e3, 1e6))
    low = 0.01 if spring else -3.0
    return CavityParams(
        wavelength=draw(st.floats(3e-7, 3e-6)),
        cavity_length=draw(st.floats(1e-3, 1.0)),
        mirror_mass=draw(st.floats(1e-7, 1.0)),
        total_decay=kappa,
        input_coupling=draw(st.floats(0.001, 0.999)) * kappa,
        detuning=draw(st.floats(low, 3.0)) * kappa,
        intracavity_power=draw(st.floats(1e-3, 100.0)),
        mode_matching=draw(st.floats(0.0, 1.0)),
    )


def rel(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return np.abs(a - b) / np.abs(b)


ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def verdict(request):
    """Record one PASS/FAIL line for an acceptance criterion and print it."""
    lines = request.config.stash.setdefault(ACCEPTANCE_KEY, [])

    def report(label, ok, detail):
        line = f"{label}: {'PASS' if ok else 'FAIL'} ({detail})"
        lines.append(line)
        print(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
