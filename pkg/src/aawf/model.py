"""Hilbert-space layout, operator bases and time-dependent Lindblad models.

Index conventions (frozen, row-major everywhere):

* principal (x) ancilla vectors are indexed ``p * D_q + a``;
* the kappa matrix has rows ``j = (p, a)`` and columns ``m`` (basis operator);
* the K tensor is a ``D_q**4 x D_q**4`` matrix with rows ``(r, s, p, q)`` and
  columns ``(m, n)``, ``K[(r,s,p,q), (m,n)] = <p|E_m|r> <s|E_n^dag|q>``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np
from scipy import linalg as sla

__all__ = [
    "PAULIS",
    "HilbertSpec",
    "JumpOperator",
    "Segment",
    "LindbladModel",
    "OperatorBasis",
    "EntangledInput",
    "BasisError",
    "pauli_basis",
    "build_kappa",
    "build_K",
    "maximally_entangled_input",
]

PAULIS = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

HERMITIAN_RTOL = 1e-12
K_TENSOR_MAX_DQ = 8


class BasisError(ValueError):
    """Raised when an operator basis cannot be used for characterisation."""


@dataclass(frozen=True)
class HilbertSpec:
    """Simulation space and the embedded qubit subspace.

    Parameters
    ----------
    full_dim : int
        Dimension of the simulated (principal) Hilbert space.
    qubit_dims : tuple of int
        Per-subsystem qubit sub-dimensions; ``D_q`` is their product.
    qubit_index_map : tuple of int, optional
        Full-space index of each qubit computational basis state. Defaults to
        ``range(D_q)``.
    loss_indices : tuple of int
        Full-space indices treated as irreversible loss.
    """

    full_dim: int
    qubit_dims: tuple = (2,)
    qubit_index_map: Optional[tuple] = None
    loss_indices: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "qubit_dims", tuple(int(d) for d in self.qubit_dims))
        if self.qubit_index_map is None:
            object.__setattr__(self, "qubit_index_map", tuple(range(self.dq)))
        else:
            object.__setattr__(
                self, "qubit_index_map", tuple(int(i) for i in self.qubit_index_map)
            )
        object.__setattr__(self, "loss_indices", tuple(int(i) for i in self.loss_indices))

        if self.full_dim < 1:
            raise ValueError("full_dim must be positive")
        if self.dq > self.full_dim:
            raise ValueError(f"D_q={self.dq} exceeds full_dim={self.full_dim}")
        imap = self.qubit_index_map
        if len(imap) != self.dq:
            raise ValueError("qubit_index_map must have one entry per qubit basis state")
        if len(set(imap)) != len(imap):
            raise ValueError("qubit_index_map is not injective")
        if any(i < 0 or i >= self.full_dim for i in imap + self.loss_indices):
            raise ValueError("index out of range of the full space")
        if set(imap) & set(self.loss_indices):
            raise ValueError("loss_indices overlap the qubit subspace")

    @property
    def dq(self) -> int:
        return int(np.prod(self.qubit_dims))

    def embed(self, op_q: np.ndarray) -> np.ndarray:
        """Embed a ``D_q x D_q`` operator into the full space (zero elsewhere)."""
        out = np.zeros((self.full_dim, self.full_dim), dtype=complex)
        idx = np.asarray(self.qubit_index_map)
        out[np.ix_(idx, idx)] = op_q
        return out

    def restrict(self, op_full: np.ndarray) -> np.ndarray:
        """Project a full-space operator onto the qubit subspace."""
        idx = np.asarray(self.qubit_index_map)
        return np.asarray(op_full)[np.ix_(idx, idx)]


@dataclass(frozen=True, eq=False)
class JumpOperator:
    """A Lindblad jump channel.

    ``loss=True`` marks a channel whose target lies outside the simulated
    space (e.g. an untracked ground state): only ``op^dag op`` is used, and a
    trajectory that fires it is disposed. ``cascade`` lists the jump
    operators that fire immediately after this one, selected with
    probability proportional to ``||M_j L psi||^2``.
    """

    label: str
    op: np.ndarray
    loss: bool = False
    cascade: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "op", np.asarray(self.op, dtype=complex))
        object.__setattr__(self, "cascade", tuple(self.cascade))

    def kron(self, left: np.ndarray | None = None, right: np.ndarray | None = None):
        """Return the channel embedded as ``left (x) L (x) right``."""

        def emb(a):
            if left is not None:
                a = np.kron(left, a)
            if right is not None:
                a = np.kron(a, right)
            return a

        return JumpOperator(
            self.label,
            emb(self.op),
            self.loss,
            tuple(c.kron(left, right) for c in self.cascade),
        )

    def sandwich_ops(self) -> list:
        """Operators ``A`` entering ``sum A rho A^dag`` in the master equation.

        Loss channels contribute nothing. A cascade is collapsed into the
        composite operators ``M_j L / sqrt(s)`` where ``sum_j M_j^dag M_j``
        acts as ``s`` times the identity on the range of ``L``.
        """
        if self.loss:
            return []
        if not self.cascade:
            return [self.op]
        G = sum(c.op.conj().T @ c.op for c in self.cascade)
        GL = G @ self.op
        norm_L = np.linalg.norm(self.op)
        if norm_L == 0:
            return []
        s = np.vdot(self.op, GL).real / norm_L**2
        if s <= 0 or np.linalg.norm(GL - s * self.op) > 1e-9 * max(1.0, s) * norm_L:
            raise ValueError(
                f"cascade of {self.label!r} is not uniform on the range of its parent"
            )
        out = []
        for c in self.cascade:
            out.extend(A @ self.op / np.sqrt(s) for A in c.sandwich_ops())
        return out


@dataclass(frozen=True, eq=False)
class Segment:
    """Constant Hamiltonian applied for ``duration`` seconds."""

    duration: float
    hamiltonian: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "hamiltonian", np.asarray(self.hamiltonian, dtype=complex))
        if not self.duration > 0:
            raise ValueError(f"segment duration must be positive, got {self.duration}")
        H = self.hamiltonian
        scale = max(np.abs(H).max(), 1.0)
        if np.abs(H - H.conj().T).max() > HERMITIAN_RTOL * scale:
            raise ValueError("segment Hamiltonian is not Hermitian")


@dataclass(frozen=True, eq=False)
class LindbladModel:
    """Piecewise-constant Hamiltonian schedule plus jump operators (hbar = 1).

    Hamiltonians are in angular-frequency units, durations in seconds and
    jump operators in units of sqrt(angular frequency).
    """

    spec: HilbertSpec
    schedule: tuple
    jump_ops: tuple = ()
    ideal_unitary: Optional[np.ndarray] = field(default=None, compare=False)

    def __post_init__(self):
        sched = tuple(
            s if isinstance(s, Segment) else Segment(float(s[0]), s[1]) for s in self.schedule
        )
        object.__setattr__(self, "schedule", sched)
        object.__setattr__(self, "jump_ops", tuple(self.jump_ops))
        if not sched:
            raise ValueError("empty schedule")
        D = self.spec.full_dim
        for seg in sched:
            if seg.hamiltonian.shape != (D, D):
                raise ValueError(f"Hamiltonian shape {seg.hamiltonian.shape} != ({D}, {D})")
        for L in self.jump_ops:
            if L.op.shape != (D, D):
                raise ValueError(f"jump operator {L.label!r} has wrong shape")

    @property
    def duration(self) -> float:
        return float(sum(s.duration for s in self.schedule))

    @property
    def boundaries(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum([s.duration for s in self.schedule])])

    def decay_operator(self) -> np.ndarray:
        """``sum_k L_k^dag L_k`` over the primary jump channels."""
        D = self.spec.full_dim
        out = np.zeros((D, D), dtype=complex)
        for L in self.jump_ops:
            out += L.op.conj().T @ L.op
        return out

    def sandwich_ops(self) -> list:
        return [A for L in self.jump_ops for A in L.sandwich_ops()]

    def with_rates_zeroed(self) -> "LindbladModel":
        return LindbladModel(self.spec, self.schedule, (), self.ideal_unitary)


@dataclass(frozen=True, eq=False)
class OperatorBasis:
    """Ordered operator basis ``{E_m}`` on the qubit space."""

    ops: np.ndarray
    labels: tuple

    def __post_init__(self):
        ops = np.asarray(self.ops, dtype=complex)
        object.__setattr__(self, "ops", ops)
        object.__setattr__(self, "labels", tuple(self.labels))
        n, d1, d2 = ops.shape
        if d1 != d2 or n != d1 * d1:
            raise BasisError(f"basis needs D_q^2 square operators, got shape {ops.shape}")
        if len(self.labels) != n:
            raise BasisError("one label per basis operator required")

    @property
    def dq(self) -> int:
        return self.ops.shape[1]

    @property
    def size(self) -> int:
        return self.ops.shape[0]

    def gram(self) -> np.ndarray:
        """``Tr(E_m^dag E_n)``."""
        flat = self.ops.reshape(self.size, -1)
        return flat.conj() @ flat.T

    def coefficients(self, op: np.ndarray) -> np.ndarray:
        """Expansion coefficients ``c`` with ``op = sum_m c_m E_m``."""
        flat = self.ops.reshape(self.size, -1).T
        return np.linalg.solve(flat, np.asarray(op, dtype=complex).reshape(-1))

    @cached_property
    def K(self) -> np.ndarray:
        return build_K(self)


def pauli_basis(num_qubits: int) -> OperatorBasis:
    """Unnormalised Pauli products in lexicographic order (``I < X < Y < Z``).

    The leftmost factor is the most significant; ``E_1`` is the identity.
    """
    if num_qubits < 1:
        raise ValueError("num_qubits must be >= 1")
    labels, ops = [], []
    for word in itertools.product("IXYZ", repeat=num_qubits):
        op = np.ones((1, 1), dtype=complex)
        for ch in word:
            op = np.kron(op, PAULIS[ch])
        labels.append("".join(word))
        ops.append(op)
    return OperatorBasis(np.array(ops), tuple(labels))


@dataclass(frozen=True, eq=False)
class EntangledInput:
    """Unit-norm maximally entangled principal (x) ancilla state.

    ``normalization_scale`` (``sqrt(D_q)``) converts amplitudes of the
    simulated state to those of the unnormalised ``sum_r |r>|r>``.
    """

    state: np.ndarray
    normalization_scale: float
    spec: HilbertSpec

    def as_matrix(self) -> np.ndarray:
        return self.state.reshape(self.spec.full_dim, self.spec.dq)


def maximally_entangled_input(spec: HilbertSpec) -> EntangledInput:
    dq = spec.dq
    psi = np.zeros((spec.full_dim, dq), dtype=complex)
    for r, p in enumerate(spec.qubit_index_map):
        psi[p, r] = 1.0 / np.sqrt(dq)
    return EntangledInput(psi.reshape(-1), float(np.sqrt(dq)), spec)


@dataclass(frozen=True, eq=False)
class Kappa:
    """kappa matrix together with its LU factorisation."""

    matrix: np.ndarray
    lu: tuple
    bip_basis: np.ndarray

    def solve(self, lam: np.ndarray) -> np.ndarray:
        return sla.lu_solve(self.lu, lam)


def build_kappa(
    basis: OperatorBasis,
    entangled: EntangledInput | None = None,
    bip_basis: np.ndarray | None = None,
) -> Kappa:
    """Column ``m`` holds the coordinates of ``(E_m (x) I) sum_r |r>|r>``.

    Parameters
    ----------
    basis : OperatorBasis
    entangled : EntangledInput, optional
        Only used for a dimension check; the unnormalised convention is used
        for the columns regardless.
    bip_basis : ndarray, optional
        ``D_q^2 x D_q^2`` matrix whose columns are the orthonormal basis
        vectors ``|j>>`` of the qubit (x) ancilla space. Defaults to the
        computational product basis.
    """
    dq = basis.dq
    if entangled is not None and entangled.spec.dq != dq:
        raise BasisError("entangled input and basis disagree on D_q")
    # (E_m (x) I) sum_r |r>|r> has amplitude (E_m)[p, a] on |p>|a>
    cols = basis.ops.reshape(basis.size, -1).T
    if bip_basis is None:
        bip_basis = np.eye(dq * dq, dtype=complex)
        kappa = cols.copy()
    else:
        bip_basis = np.asarray(bip_basis, dtype=complex)
        kappa = bip_basis.conj().T @ cols
    cond = np.linalg.cond(kappa)
    if not np.isfinite(cond) or cond > 1e12:
        raise BasisError(
            f"kappa is singular for basis {list(basis.labels)} (condition number {cond:.3g})"
        )
    return Kappa(kappa, sla.lu_factor(kappa), bip_basis)


def build_K(basis: OperatorBasis) -> np.ndarray:
    """Structural tensor of ``E_m O_rs E_n^dag`` in the ``O_pq`` basis."""
    dq = basis.dq
    if dq > K_TENSOR_MAX_DQ:
        raise MemoryError(
            f"K tensor for D_q={dq} would hold {dq**8} entries; limit is D_q <= {K_TENSOR_MAX_DQ}"
        )
    E = basis.ops
    # K[r,s,p,q,m,n] = E_m[p,r] * conj(E_n[q,s])
    K = np.einsum("mpr,nqs->rspqmn", E, E.conj())
    return K.reshape(dq**4, dq**4)


def embed_ops(ops: Sequence[np.ndarray], site: int, dims: Sequence[int]) -> list:
    """Place single-site operators on ``site`` of a tensor product space."""
    out = []
    for op in ops:
        full = np.ones((1, 1), dtype=complex)
        for k, d in enumerate(dims):
            full = np.kron(full, op if k == site else np.eye(d))
        out.append(full)
    return out
