import numpy as np
import pytest

from aawf import pauli_basis
from aawf.channels import amplitude_damping_model, dephasing_model


@pytest.fixture(scope="session")
def basis1():
    return pauli_basis(1)


@pytest.fixture(scope="session")
def basis2():
    return pauli_basis(2)


@pytest.fixture
def damping():
    return amplitude_damping_model(1.0, 0.1)


@pytest.fixture
def dephasing():
    return dephasing_model(1.0, 0.1)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_hermitian(rng, d):
    A = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return (A + A.conj().T) / 2


def random_density(rng, d, rank=None):
    rank = rank or d
    A = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    rho = A @ A.conj().T
    return rho / np.trace(rho).real


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(lines):
        terminalreporter.write_line(line)
