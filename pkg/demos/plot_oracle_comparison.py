"""
Trajectories against the density-matrix reference
=================================================

The standard route propagates every basis input matrix through the master
equation and inverts the structural tensor. Its ancilla-assisted twin
propagates a single system-ancilla projector. Both are exact, and the
trajectory estimate should approach them as the ensemble grows.
"""

import numpy as np

from aawf import characterize, pauli_basis
from aawf.channels import two_qubit_toy_model
from aawf.mastereq import aapc_characterize_density, sqpc_characterize
from aawf.tomography import trace_distance

model = two_qubit_toy_model()
basis = pauli_basis(2)

sqpc = sqpc_characterize(model, basis)
aapc = aapc_characterize_density(model, basis)
print(f"density routes agree to {np.abs(sqpc.data - aapc.data).max():.1e}")

###############################################################################
# The trajectory error shrinks roughly as 1/sqrt(n).
for n in (100, 1000, 5000):
    chi = characterize(model, basis, n, master_seed=7).chi
    print(f"n={n:5d}  T(trajectories, exact) = {trace_distance(chi, sqpc):.4f}")
