"""
Blockade gate quality against the blue drive strength
=====================================================

Two four-level atoms run the control pi, target 2pi, control pi sequence.
A weak blue drive makes the gate slow, so Rydberg decay and dephasing
accumulate. A strong drive weakens the blockade condition. The trace
distance to the ideal controlled phase therefore has a minimum in between.
The no-jump bound uses only trajectories without jumps, and it always sits
above the full estimate.
"""

from aawf import characterize, ideal_chi, pauli_basis
from aawf.rydberg import RydbergParams, build_cphase_model, ideal_cphase

basis = pauli_basis(2)
chi_ideal = ideal_chi(ideal_cphase(), basis)

print(" B/MHz  OmegaB/MHz       T       F   bound")
for B in (20.0, 30.0):
    for omega_b in (10.0, 20.0, 39.0, 80.0, 150.0):
        model = build_cphase_model(RydbergParams.from_mhz(OmegaB=omega_b, B=B))
        m = characterize(model, basis, n=300, master_seed=1).metrics(chi_ideal)
        print(f"{B:6.0f}  {omega_b:10.0f}  {m['trace_distance_to_ideal']:.4f}  "
              f"{m['fidelity_to_ideal']:.4f}  {m['nojump_upper_bound']:.4f}")
