"""Process characterisation of open quantum systems with Monte-Carlo
wave-functions of a system entangled with a passive ancilla."""

from .model import (
    HilbertSpec,
    JumpOperator,
    LindbladModel,
    OperatorBasis,
    Segment,
    build_K,
    build_kappa,
    maximally_entangled_input,
    pauli_basis,
)
from .mcwf import Trajectory, TrajectoryEngine, average_density, run_ensemble, run_trajectory
from .tomography import (
    ChiMatrix,
    accumulate_chi,
    characterize,
    fidelity,
    ideal_chi,
    nojump_upper_bound,
    trace_distance,
    zeta_from_state,
)
from .mastereq import aapc_characterize_density, propagate_density, sqpc_characterize

__version__ = "0.1.0"
