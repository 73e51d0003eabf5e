"""Dense density-matrix propagation and the density-matrix characterisation
routes (standard and ancilla-assisted) used as exact references.
"""
from __future__ import annotations

import logging

import numpy as np
from scipy.integrate import solve_ivp

from .model import HilbertSpec, LindbladModel, OperatorBasis, maximally_entangled_input
from .tomography import ChiMatrix

__all__ = [
    "IntegrationError",
    "lindblad_rhs",
    "propagate_density",
    "lambda_tensor",
    "solve_chi",
    "sqpc_lambda",
    "aapc_lambda",
    "sqpc_characterize",
    "aapc_characterize_density",
    "superoperator_input",
]

log = logging.getLogger(__name__)

RTOL = 1e-9
ATOL = 1e-12


class IntegrationError(RuntimeError):
    pass


def _generators(model: LindbladModel, ancilla_dim: int):
    decay = model.decay_operator()
    sandwich = model.sandwich_ops()
    if ancilla_dim > 1:
        eye = np.eye(ancilla_dim)
        decay = np.kron(decay, eye)
        sandwich = [np.kron(A, eye) for A in sandwich]
        hams = [np.kron(s.hamiltonian, eye) for s in model.schedule]
    else:
        hams = [s.hamiltonian for s in model.schedule]
    return hams, decay, sandwich


def lindblad_rhs(H: np.ndarray, decay: np.ndarray, sandwich) -> callable:
    """Right-hand side for a stack of matrices ``rho[b, :, :]``.

    ``d rho/dt = -i(H_eff rho - rho H_eff^dag) + sum_A A rho A^dag``; the
    generator is linear, so non-Hermitian inputs are propagated as well.
    """
    h_eff = H - 0.5j * decay
    h_eff_dag = h_eff.conj().T
    As = np.array(sandwich) if sandwich else np.zeros((0,) + H.shape, dtype=complex)
    As_dag = As.conj().transpose(0, 2, 1)
    D = H.shape[0]

    def rhs(t, y):
        rho = y.reshape(-1, D, D)
        out = -1j * (h_eff @ rho - rho @ h_eff_dag)
        for A, Ad in zip(As, As_dag):
            out += A @ rho @ Ad
        return out.reshape(-1)

    return rhs


def propagate_density(
    model: LindbladModel,
    rho0: np.ndarray,
    rtol: float = RTOL,
    atol: float = ATOL,
) -> np.ndarray:
    """Integrate the master equation over the whole schedule.

    ``rho0`` may be a single matrix or a stack ``(B, D, D)``. ``D`` is either
    ``full_dim`` or ``full_dim * D_q``; in the latter case the ancilla
    factor carries identity dynamics.
    """
    rho0 = np.asarray(rho0, dtype=complex)
    single = rho0.ndim == 2
    stack = rho0[None] if single else rho0
    D = stack.shape[-1]
    full = model.spec.full_dim
    if D % full:
        raise ValueError(f"density matrix dimension {D} incompatible with full_dim {full}")
    anc = D // full
    if anc not in (1, model.spec.dq):
        raise ValueError(f"ancilla dimension {anc} must be 1 or D_q={model.spec.dq}")
    hams, decay, sandwich = _generators(model, anc)

    y = stack.reshape(-1)
    t = 0.0
    for k, (seg, H) in enumerate(zip(model.schedule, hams)):
        rhs = lindblad_rhs(H, decay, sandwich)
        sol = solve_ivp(
            rhs, (t, t + seg.duration), y, method="DOP853", rtol=rtol, atol=atol
        )
        if not sol.success:
            raise IntegrationError(
                f"integration failed in segment {k} at t={sol.t[-1]:.6g}: {sol.message}"
            )
        y = sol.y[:, -1]
        t += seg.duration
    out = y.reshape(stack.shape)
    return out[0] if single else out


def lambda_tensor(outputs: np.ndarray, spec: HilbertSpec) -> np.ndarray:
    """Flatten ``E(O_rs)`` (stacked over ``(r, s)``) into ``Lambda[(r,s,p,q)]``.

    Outputs are first projected onto the qubit subspace, so leaked
    population shows up as a trace deficit.
    """
    dq = spec.dq
    idx = np.asarray(spec.qubit_index_map)
    proj = outputs[:, idx[:, None], idx[None, :]]
    return proj.reshape(dq * dq * dq * dq)


def solve_chi(basis: OperatorBasis, lam: np.ndarray) -> np.ndarray:
    """Minimum-norm least-squares solution of ``K chi = Lambda``."""
    K = basis.K
    sol, _, rank, sv = np.linalg.lstsq(K, lam, rcond=None)
    cond = sv[0] / sv[-1] if sv[-1] > 0 else np.inf
    if rank < K.shape[1]:
        log.warning("K tensor is rank deficient (rank %d of %d); using minimum-norm chi",
                    rank, K.shape[1])
    log.debug("K condition number %.3g", cond)
    d2 = basis.size
    return sol.reshape(d2, d2)


def sqpc_lambda(model: LindbladModel, rtol: float = RTOL, atol: float = ATOL) -> np.ndarray:
    spec = model.spec
    dq, full = spec.dq, spec.full_dim
    inputs = np.zeros((dq * dq, full, full), dtype=complex)
    for r, pr in enumerate(spec.qubit_index_map):
        for s, ps in enumerate(spec.qubit_index_map):
            inputs[r * dq + s, pr, ps] = 1.0
    outputs = propagate_density(model, inputs, rtol, atol)
    return lambda_tensor(outputs, spec)


def superoperator_input(spec: HilbertSpec) -> np.ndarray:
    """``|Psi>><<Psi|`` with the unnormalised ``|Psi>> = sum_r |r>|r>``."""
    ent = maximally_entangled_input(spec)
    psi = ent.state * ent.normalization_scale
    return np.outer(psi, psi.conj())


def aapc_lambda(model: LindbladModel, rtol: float = RTOL, atol: float = ATOL) -> np.ndarray:
    spec = model.spec
    dq, full = spec.dq, spec.full_dim
    out = propagate_density(model, superoperator_input(spec), rtol, atol)
    # out[(P,a),(Q,b)] -> E(O_rs)[P,Q] = Tr_A[(I (x) |s><r|) out] = out[(P,r),(Q,s)]
    out4 = out.reshape(full, dq, full, dq)
    outputs = out4.transpose(1, 3, 0, 2).reshape(dq * dq, full, full)
    return lambda_tensor(outputs, spec)


def sqpc_characterize(model: LindbladModel, basis: OperatorBasis, **tol) -> ChiMatrix:
    """Process matrix from ``D_q^2`` separate density-matrix propagations."""
    _check_basis(model, basis)
    return ChiMatrix(solve_chi(basis, sqpc_lambda(model, **tol)), basis.labels)


def aapc_characterize_density(model: LindbladModel, basis: OperatorBasis, **tol) -> ChiMatrix:
    """Process matrix from one propagation of the system-ancilla projector."""
    _check_basis(model, basis)
    return ChiMatrix(solve_chi(basis, aapc_lambda(model, **tol)), basis.labels)


def _check_basis(model, basis):
    if basis.dq != model.spec.dq:
        raise ValueError(f"basis D_q={basis.dq} does not match model D_q={model.spec.dq}")
