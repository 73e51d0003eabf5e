"""Small reference models: single-qubit channels and a two-qubit toy gate."""
from __future__ import annotations

import numpy as np

from .model import PAULIS, HilbertSpec, JumpOperator, LindbladModel, Segment

__all__ = [
    "amplitude_damping_model",
    "dephasing_model",
    "unitary_model",
    "two_qubit_toy_model",
    "amplitude_damping_kraus",
]

SIGMA_MINUS = np.array([[0, 1], [0, 0]], dtype=complex)  # |0><1|


def amplitude_damping_model(gamma: float, duration: float, hamiltonian=None) -> LindbladModel:
    H = np.zeros((2, 2)) if hamiltonian is None else hamiltonian
    jumps = (JumpOperator("decay", np.sqrt(gamma) * SIGMA_MINUS),) if gamma > 0 else ()
    return LindbladModel(HilbertSpec(2), (Segment(duration, H),), jumps, np.eye(2))


def dephasing_model(gamma_d: float, duration: float, hamiltonian=None) -> LindbladModel:
    """``L = sqrt(gamma_d) (1 - 2|1><1|)``; coherences decay as ``exp(-2 gamma_d t)``."""
    H = np.zeros((2, 2)) if hamiltonian is None else hamiltonian
    jumps = (JumpOperator("dephase", np.sqrt(gamma_d) * PAULIS["Z"]),) if gamma_d > 0 else ()
    return LindbladModel(HilbertSpec(2), (Segment(duration, H),), jumps, np.eye(2))


def unitary_model(hamiltonian: np.ndarray, duration: float) -> LindbladModel:
    H = np.asarray(hamiltonian, dtype=complex)
    d = H.shape[0]
    nq = int(round(np.log2(d)))
    return LindbladModel(HilbertSpec(d, (2,) * nq), (Segment(duration, H),))


def two_qubit_toy_model(
    gamma: float = 0.02, gamma_d: float = 0.01, coupling: float = 0.25, duration: float = 1.0
) -> LindbladModel:
    """Two qubits under an XX+ZZ exchange with a local drive, weakly damped.

    The schedule has two segments so that the segment boundary handling is
    exercised too.
    """
    X, Z, I = PAULIS["X"], PAULIS["Z"], PAULIS["I"]
    H1 = coupling * (np.kron(X, X) + np.kron(Z, Z)) + 0.3 * np.kron(X, I)
    H2 = coupling * np.kron(Z, Z) + 0.4 * np.kron(I, X)
    jumps = []
    for site, (a, b) in enumerate([(SIGMA_MINUS, I), (I, SIGMA_MINUS)]):
        jumps.append(JumpOperator(f"decay{site}", np.sqrt(gamma) * np.kron(a, b)))
    for site, (a, b) in enumerate([(Z, I), (I, Z)]):
        jumps.append(JumpOperator(f"dephase{site}", np.sqrt(gamma_d) * np.kron(a, b)))
    spec = HilbertSpec(4, (2, 2))
    sched = (Segment(duration / 2, H1), Segment(duration / 2, H2))
    return LindbladModel(spec, sched, tuple(jumps))


def amplitude_damping_kraus(p: float) -> list:
    """Kraus operators of amplitude damping with decay probability ``p``."""
    return [
        np.diag([1.0, np.sqrt(1 - p)]).astype(complex),
        np.sqrt(p) * SIGMA_MINUS,
    ]
