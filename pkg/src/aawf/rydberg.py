"""Two-atom Rydberg-blockade controlled-phase gate.

Each atom has the levels ``|0>, |1>`` (qubit), ``|r>`` (Rydberg) and ``|p>``
(intermediate). ``|p>`` is adiabatically eliminated from the Hamiltonian and
only appears transiently after a Rydberg decay, from which it cascades
immediately to ``|0>``, ``|1>`` or an untracked loss state ``|g>``.

All frequencies and rates are angular (rad/s), times are seconds.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .model import HilbertSpec, JumpOperator, LindbladModel, Segment

__all__ = [
    "LEVELS",
    "TWO_PI",
    "RydbergParams",
    "delta_Er",
    "omega_eff",
    "pi_time",
    "single_atom_hamiltonian",
    "jump_operators",
    "build_cphase_model",
    "build_single_atom_model",
    "ideal_cphase",
    "blockade_projector",
]

LEVELS = ("0", "1", "r", "p")
G0, G1, R, P = range(4)
TWO_PI = 2 * np.pi
BRANCH_TARGETS = ("0", "1", "g")


def _ket(i, d=4):
    v = np.zeros(d, dtype=complex)
    v[i] = 1.0
    return v


def _op(i, j, d=4):
    """``|i><j|``."""
    return np.outer(_ket(i, d), _ket(j, d))


@dataclass(frozen=True)
class RydbergParams:
    """Physical parameters; defaults follow the experimental reference set.

    ``branching`` gives the decay fractions from ``|p>`` into ``|0>``,
    ``|1>`` and the loss state. ``deltaE0=None`` selects the value that
    cancels the ``|0><0|`` light shift.
    """

    Delta: float = TWO_PI * 2.0e9
    OmegaR: float = TWO_PI * 118e6
    OmegaB: float = TWO_PI * 39e6
    B: float = TWO_PI * 20e6
    gamma_p: float = TWO_PI * 6.07e6
    gamma_r: float = TWO_PI * 0.53e3
    gamma_d: float = TWO_PI * 1.0e3
    branching: tuple = (0.12, 0.32, 0.56)
    deltaE0: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "branching", tuple(float(c) for c in self.branching))
        if len(self.branching) != 3:
            raise ValueError("branching needs one fraction per target (0, 1, g)")
        if min(self.gamma_p, self.gamma_r, self.gamma_d) < 0 or min(self.branching) < 0:
            raise ValueError("rates and branching fractions must be non-negative")
        if abs(sum(self.branching) - 1) > 1e-12:
            raise ValueError(f"branching fractions sum to {sum(self.branching)}, not 1")

    @classmethod
    def from_mhz(cls, **kw) -> "RydbergParams":
        """Build from linear frequencies in MHz (the ``value/2pi`` convention)."""
        conv = {k: (TWO_PI * 1e6 * v if k not in ("branching", "deltaE0") else v)
                for k, v in kw.items()}
        if kw.get("deltaE0") is not None:
            conv["deltaE0"] = TWO_PI * 1e6 * kw["deltaE0"]
        return cls(**conv)

    @property
    def gamma(self) -> float:
        """Total decay rate of ``|p>``: ``sum_j c_j gamma_p``."""
        return sum(self.branching) * self.gamma_p

    def without_dissipation(self) -> "RydbergParams":
        return replace(self, gamma_p=0.0, gamma_r=0.0, gamma_d=0.0)

    def light_shift_0(self) -> float:
        return self.Delta * self.OmegaR**2 / (4 * self.Delta**2 + self.gamma**2)


def delta_Er(p: RydbergParams) -> float:
    """Stark-shift correction subtracted from the blue detuning."""
    if p.Delta == 0:
        raise ValueError("Delta must be non-zero")
    D, R_, B_ = p.Delta, p.OmegaR, p.OmegaB
    return (16 * D**2 * (B_**2 - R_**2) - R_**4) / (64 * D**3)


def omega_eff(p: RydbergParams) -> float:
    """Effective two-photon Rabi frequency between ``|1>`` and ``|r>``."""
    dEr = delta_Er(p)
    den = 8 * p.Delta * (p.Delta - dEr) + 2 * p.gamma**2
    if den == 0:
        raise ValueError("vanishing denominator in the effective Rabi frequency")
    return 2 * (2 * p.Delta - dEr) * p.OmegaR * p.OmegaB / den


def pi_time(p: RydbergParams) -> float:
    om = omega_eff(p)
    if om == 0:
        raise ValueError("effective Rabi frequency is zero; pulse time is infinite")
    return np.pi / abs(om)


def single_atom_hamiltonian(p: RydbergParams) -> np.ndarray:
    if 4 * p.Delta**2 + p.gamma**2 == 0:
        raise ValueError("vanishing denominator in the |0> light shift")
    half = omega_eff(p) / 2
    dE0 = p.light_shift_0() if p.deltaE0 is None else p.deltaE0
    H = half * (_op(G1, R) + _op(R, G1))
    H += (dE0 - p.light_shift_0()) * _op(G0, G0)
    return H


def jump_operators(p: RydbergParams) -> list:
    """Single-atom jump channels.

    Loss-flagged operators carry their decay rate through ``op^dag op``
    only; their row placement is irrelevant because the target ``|g>`` is
    not simulated.
    """
    dEr = delta_Er(p)
    a = p.OmegaR / (2 * p.Delta - 1j * p.gamma)
    b = p.OmegaB / (2 * (p.Delta - dEr) - 1j * p.gamma)
    ops = []
    for c, tgt, row in zip(p.branching, BRANCH_TARGETS, (G0, G1, G0)):
        amp = np.sqrt(c * p.gamma_p)
        L = amp * (a * _op(row, G1) + b * _op(row, R))
        ops.append(JumpOperator(f"gamma_p,{tgt}", L, loss=(tgt == "g")))
    ops.append(JumpOperator("gamma_d", np.sqrt(p.gamma_d) * (np.eye(4) - 2 * _op(R, R))))
    # the common sqrt(gamma_p) factor cancels in the branching ratios
    cascade = tuple(
        JumpOperator(f"p->{tgt}", np.sqrt(c) * _op(row, P), loss=(tgt == "g"))
        for c, tgt, row in zip(p.branching, BRANCH_TARGETS, (G0, G1, G0))
    )
    ops.append(JumpOperator("gamma_r", np.sqrt(p.gamma_r) * _op(P, R), cascade=cascade))
    return ops


def blockade_projector() -> np.ndarray:
    return np.kron(_op(R, R), _op(R, R))


def _two_atom_spec() -> HilbertSpec:
    return HilbertSpec(16, (2, 2), (4 * G0 + G0, 4 * G0 + G1, 4 * G1 + G0, 4 * G1 + G1))


def ideal_cphase() -> np.ndarray:
    """``diag(1, -1, -1, -1)`` on ``|00>, |01>, |10>, |11>`` (control first)."""
    return np.diag([1.0, -1.0, -1.0, -1.0]).astype(complex)


def build_cphase_model(p: RydbergParams | None = None) -> LindbladModel:
    """Three-pulse gate: control pi, target 2pi, control pi.

    The blockade shift and every jump channel on both atoms are present in
    all three segments.
    """
    p = p or RydbergParams()
    H = single_atom_hamiltonian(p)
    I4 = np.eye(4)
    Hb = p.B * blockade_projector()
    t_pi = pi_time(p)
    schedule = (
        Segment(t_pi, np.kron(H, I4) + Hb),
        Segment(2 * t_pi, np.kron(I4, H) + Hb),
        Segment(t_pi, np.kron(H, I4) + Hb),
    )
    jumps = []
    for L in jump_operators(p):
        if not np.any(L.op):
            continue
        jumps.append(replace(L.kron(right=I4), label=L.label + "@c"))
        jumps.append(replace(L.kron(left=I4), label=L.label + "@t"))
    return LindbladModel(_two_atom_spec(), schedule, tuple(jumps), ideal_cphase())


def build_single_atom_model(p: RydbergParams | None = None, area: float = np.pi) -> LindbladModel:
    """One atom driven for pulse ``area`` (in units where pi is a pi-pulse)."""
    p = p or RydbergParams()
    t = area / abs(omega_eff(p))
    H = single_atom_hamiltonian(p)
    jumps = tuple(L for L in jump_operators(p) if np.any(L.op))
    return LindbladModel(HilbertSpec(4, (2,), (G0, G1)), (Segment(t, H),), jumps)
