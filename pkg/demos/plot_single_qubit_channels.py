"""
Process matrices of single-qubit channels from trajectories
===========================================================

A qubit and an ancilla start in the maximally entangled state. Each
trajectory evolves the pair under the noisy qubit dynamics, and every
surviving final state yields one process vector. Averaging their outer
products gives the process matrix in the Pauli basis.
"""

import numpy as np

from aawf import characterize, pauli_basis
from aawf.channels import amplitude_damping_kraus, amplitude_damping_model
from aawf.tomography import operator_chi, trace_distance

basis = pauli_basis(1)
gamma_t = 0.1
model = amplitude_damping_model(gamma=1.0, duration=gamma_t)

###############################################################################
# Run a modest ensemble. The seed fixes every trajectory individually.
res = characterize(model, basis, n=4000, master_seed=42)
chi = res.chi
print("labels:", basis.labels)
print("chi (real part):")
print(np.round(chi.data.real, 4))
print(f"trajectories: n={chi.n}  no-jump S={chi.S}  jumped J={chi.J}")

###############################################################################
# The closed-form answer follows from the two Kraus operators of amplitude
# damping with decay probability 1 - exp(-gamma t).
exact = sum(operator_chi(A, basis) for A in amplitude_damping_kraus(1 - np.exp(-gamma_t)))
print(f"trace distance to the Kraus result: {trace_distance(chi, exact):.2e}")
print(f"expected sampling scale 1/sqrt(n):  {1 / np.sqrt(chi.n):.2e}")
