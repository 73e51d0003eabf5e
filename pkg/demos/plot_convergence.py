"""
Statistical convergence of the estimate
=======================================

Repeat the characterisation with independent seeds and watch the spread of
the trace distance shrink with the number of trajectories.
"""

import numpy as np

from aawf import characterize, ideal_chi, pauli_basis
from aawf.cli import ensemble_seed
from aawf.mcwf import TrajectoryEngine
from aawf.rydberg import build_cphase_model, ideal_cphase
from aawf.tomography import trace_distance

basis = pauli_basis(2)
chi_ideal = ideal_chi(ideal_cphase(), basis)
# the engine caches the per-segment propagators, so reuse it
engine = TrajectoryEngine(build_cphase_model())

n_list = (20, 50, 100, 200, 500)
spread = []
for n in n_list:
    T = [trace_distance(chi_ideal, characterize(engine, basis, n, ensemble_seed(0, n, k)).chi)
         for k in range(30)]
    spread.append(np.std(T, ddof=1))
    print(f"n={n:4d}  mean T={np.mean(T):.4f}  std T={spread[-1]:.4f}")

slope = np.polyfit(np.log(n_list), np.log(spread), 1)[0]
print(f"log-log slope of the spread: {slope:.2f}")
