"""Process vectors, the process matrix and distance measures.

Each trajectory of the system-ancilla state yields a vector ``zeta`` solving
``kappa zeta = lambda``; the ensemble average of ``zeta zeta^dag`` is the
process matrix. Only ``zeta zeta^dag`` is ever used, so no global-phase
fixing is applied to ``zeta``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .mcwf import Trajectory, TrajectoryEngine, run_ensemble
from .model import (
    HilbertSpec,
    Kappa,
    LindbladModel,
    OperatorBasis,
    build_kappa,
    maximally_entangled_input,
)

__all__ = [
    "ZetaVector",
    "ChiMatrix",
    "zeta_from_state",
    "accumulate_chi",
    "split_chi",
    "operator_chi",
    "ideal_chi",
    "trace_norm",
    "trace_distance",
    "fidelity",
    "nojump_upper_bound",
    "single_trajectory_bound",
    "Characterization",
    "characterize",
]

log = logging.getLogger(__name__)

ZETA_RESIDUAL_TOL = 1e-10
HERMITIAN_TOL = 1e-10


@dataclass
class ZetaVector:
    coeffs: np.ndarray
    source: int = 0
    jumped: bool = False


@dataclass
class ChiMatrix:
    """Process matrix in the ``{E_m}`` order with ensemble bookkeeping.

    ``n is None`` marks an exact (density-matrix) result.
    """

    data: np.ndarray
    labels: tuple = ()
    n: Optional[int] = None
    S: int = 0
    J: int = 0
    disposed: int = 0
    seed: Optional[int] = None

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.data, dtype=dtype)

    @property
    def trace(self) -> float:
        return float(np.trace(self.data).real)

    @property
    def exact(self) -> bool:
        return self.n is None


def _mat(A) -> np.ndarray:
    return np.asarray(A.data if isinstance(A, ChiMatrix) else A, dtype=complex)


def zeta_from_state(
    kappa: Kappa, final_state: np.ndarray, spec: HilbertSpec, source: int = 0, jumped=False
) -> ZetaVector:
    """Solve ``kappa zeta = lambda`` for one final system-ancilla state.

    ``lambda`` holds the amplitudes on the qubit (x) ancilla subspace scaled
    by ``sqrt(D_q)``; amplitudes on non-qubit levels are dropped, so leakage
    reduces the norm of ``zeta``.
    """
    dq = spec.dq
    psi = np.asarray(final_state, dtype=complex).reshape(spec.full_dim, dq)
    amp = psi[np.asarray(spec.qubit_index_map), :].reshape(-1) * np.sqrt(dq)
    lam = kappa.bip_basis.conj().T @ amp
    zeta = kappa.solve(lam)
    resid = np.linalg.norm(kappa.matrix @ zeta - lam)
    if resid > ZETA_RESIDUAL_TOL * max(1.0, np.linalg.norm(lam)):
        raise ArithmeticError(f"kappa solve residual {resid:.3g} exceeds tolerance")
    return ZetaVector(zeta, source, jumped)


def accumulate_chi(
    zetas: Iterable[ZetaVector],
    disposed_count: int = 0,
    n_total: Optional[int] = None,
    labels: Sequence[str] = (),
    seed: Optional[int] = None,
) -> ChiMatrix:
    """``chi_mn = (1/n) sum_i zeta_m zeta_n^*`` over all kept trajectories.

    Disposed trajectories have no vector and enter only through ``n``.
    """
    zetas = list(zetas)
    n = len(zetas) + disposed_count if n_total is None else n_total
    if n < 1 or n != len(zetas) + disposed_count:
        raise ValueError("n_total must equal the number of vectors plus disposed runs")
    if zetas:
        Z = np.array([z.coeffs for z in zetas])
        chi = Z.T @ Z.conj() / n
    else:
        raise ValueError("no surviving trajectories; chi dimension is undefined")
    S = sum(1 for z in zetas if not z.jumped)
    return ChiMatrix(chi, tuple(labels), n, S, n - S, disposed_count, seed)


def split_chi(zetas: Sequence[ZetaVector], n_total: int):
    """``(chi_S, chi_J)`` of the no-jump/jump decomposition.

    ``chi_S`` is ``zeta_S zeta_S^dag`` of the first zero-jump vector and
    ``chi_J`` the mean over jumped trajectories (disposed ones count in
    ``J`` but add nothing). Either is ``None`` when its class is empty.
    """
    nojump = [z for z in zetas if not z.jumped]
    jumped = [z for z in zetas if z.jumped]
    J = n_total - len(nojump)
    chi_S = np.outer(nojump[0].coeffs, nojump[0].coeffs.conj()) if nojump else None
    chi_J = None
    if J:
        d = len(zetas[0].coeffs)
        chi_J = np.zeros((d, d), dtype=complex)
        for z in jumped:
            chi_J += np.outer(z.coeffs, z.coeffs.conj())
        chi_J /= J
    return chi_S, chi_J


def operator_chi(op: np.ndarray, basis: OperatorBasis) -> np.ndarray:
    """Rank-one process matrix ``c c^dag`` of a single-Kraus map ``rho -> A rho A^dag``."""
    c = basis.coefficients(op)
    return np.outer(c, c.conj())


def ideal_chi(target_unitary: np.ndarray, basis: OperatorBasis) -> ChiMatrix:
    U = np.asarray(target_unitary, dtype=complex)
    if U.shape != (basis.dq, basis.dq):
        raise ValueError(f"unitary shape {U.shape} does not match D_q={basis.dq}")
    if np.abs(U.conj().T @ U - np.eye(basis.dq)).max() > 1e-10:
        raise ValueError("target is not unitary")
    return ChiMatrix(operator_chi(U, basis), basis.labels)


def _herm_eigvals(A: np.ndarray, what: str) -> np.ndarray:
    scale = max(1.0, np.abs(A).max())
    if np.abs(A - A.conj().T).max() > HERMITIAN_TOL * scale:
        raise ValueError(f"{what} is not Hermitian")
    return np.linalg.eigvalsh(0.5 * (A + A.conj().T))


def trace_norm(A: np.ndarray) -> float:
    return float(np.linalg.svd(np.asarray(A), compute_uv=False).sum())


def trace_distance(A, B) -> float:
    """``T(A, B) = 1/2 ||A - B||_tr`` for Hermitian ``A``, ``B``."""
    A, B = _mat(A), _mat(B)
    if A.shape != B.shape:
        raise ValueError("shape mismatch")
    return 0.5 * float(np.abs(_herm_eigvals(A - B, "A - B")).sum())


def _neg_tol(A) -> float:
    if isinstance(A, ChiMatrix) and A.n is not None and A.n >= 500:
        return 1e-3
    return 1e-8


def _psd_sqrt(A: np.ndarray, tol: float, what: str) -> np.ndarray:
    A = 0.5 * (A + A.conj().T)
    w, V = np.linalg.eigh(A)
    if w.min() < -tol:
        raise ValueError(f"{what} has eigenvalue {w.min():.3g} below -{tol:g}")
    return (V * np.sqrt(np.clip(w, 0, None))) @ V.conj().T


def fidelity(A, B) -> float:
    """``F(A, B) = || sqrt(A) sqrt(B) ||_tr``.

    Small negative eigenvalues are clipped: below ``-1e-8`` is an error,
    except for sampled matrices with ``n >= 500`` where ``-1e-3`` is
    tolerated.
    """
    tA, tB = _neg_tol(A), _neg_tol(B)
    A, B = _mat(A), _mat(B)
    _herm_eigvals(A, "A")
    _herm_eigvals(B, "B")
    return trace_norm(_psd_sqrt(A, tA, "A") @ _psd_sqrt(B, tB, "B"))


def fidelity_rank1(c: np.ndarray, B) -> float:
    """``sqrt(c^dag B c)``: fidelity of ``c c^dag`` against ``B``."""
    B = _mat(B)
    return float(np.sqrt(max(np.vdot(c, B @ c).real, 0.0)))


def nojump_upper_bound(chi_ideal, chi_S, S: int, n: int) -> float:
    """``T(chi_ideal, (S/n) chi_S) + J/(2n)`` with ``J = n - S``.

    Bounds ``T(chi_ideal, chi)`` from above for the ensemble the counts came
    from.
    """
    if S <= 0:
        raise ValueError("no zero-jump trajectory: the bound is undefined")
    if not 0 < S <= n:
        raise ValueError("need 0 < S <= n")
    J = n - S
    return trace_distance(_mat(chi_ideal), (S / n) * _mat(chi_S)) + J / (2 * n)


def single_trajectory_bound(chi_ideal, chi_S, survival: float) -> float:
    """Bound from one zero-jump trajectory, using its survival probability
    in place of ``S/n``."""
    if not 0 < survival <= 1:
        raise ValueError("survival probability must lie in (0, 1]")
    return trace_distance(_mat(chi_ideal), survival * _mat(chi_S)) + (1 - survival) / 2


@dataclass
class Characterization:
    """Result of an ensemble characterisation run."""

    chi: ChiMatrix
    zetas: list
    trajectories: list = field(repr=False)
    chi_S: Optional[np.ndarray] = None
    survival: Optional[float] = None

    def metrics(self, chi_ideal) -> dict:
        out = {
            "trace_distance_to_ideal": trace_distance(chi_ideal, self.chi),
            "fidelity_to_ideal": fidelity(chi_ideal, self.chi),
            "nojump_upper_bound": None,
            "nojump_upper_bound_single": None,
        }
        if self.chi.S > 0:
            out["nojump_upper_bound"] = nojump_upper_bound(
                chi_ideal, self.chi_S, self.chi.S, self.chi.n
            )
            out["nojump_upper_bound_single"] = single_trajectory_bound(
                chi_ideal, self.chi_S, self.survival
            )
        else:
            log.warning("no zero-jump trajectory; upper bound omitted")
        return out


def characterize(
    model: LindbladModel | TrajectoryEngine,
    basis: OperatorBasis,
    n: int,
    master_seed: int = 0,
    workers: int = 1,
    kappa: Kappa | None = None,
) -> Characterization:
    """Monte-Carlo ancilla-assisted characterisation of ``model``.

    Runs ``n`` trajectories from the maximally entangled system-ancilla
    state, converts each surviving final state to a process vector and
    averages their outer products.
    """
    engine = model if isinstance(model, TrajectoryEngine) else TrajectoryEngine(model)
    spec = engine.model.spec
    if basis.dq != spec.dq:
        raise ValueError("basis and model disagree on D_q")
    ent = maximally_entangled_input(spec)
    kappa = kappa or build_kappa(basis, ent)
    trajs: list[Trajectory] = run_ensemble(engine, ent.state, n, master_seed, workers)
    zetas = [
        zeta_from_state(kappa, tr.final_state, spec, tr.index, tr.jumped)
        for tr in trajs
        if not tr.disposed
    ]
    disposed = sum(tr.disposed for tr in trajs)
    chi = accumulate_chi(zetas, disposed, n, basis.labels, master_seed)
    first = next((z for z in zetas if not z.jumped), None)
    chi_S = np.outer(first.coeffs, first.coeffs.conj()) if first is not None else None
    survival = trajs[first.source].survival if first is not None else None
    return Characterization(chi, zetas, trajs, chi_S, survival)
