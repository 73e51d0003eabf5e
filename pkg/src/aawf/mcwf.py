"""Monte-Carlo wave-function trajectories with norm-threshold jump timing.

Between jumps a state evolves under ``H_eff = H - (i/2) sum_k L_k^dag L_k``.
A uniform threshold ``r`` is drawn after each jump (and at the start); the
next jump fires when the squared norm of the unnormalised state reaches
``r``. The Hamiltonian is piecewise constant, so every segment is
propagated exactly with a precomputed spectral decomposition of ``H_eff``
and the crossing time is located by bracketed root finding.

States are handled as ``(D_full, k)`` arrays: ``k = 1`` for a bare
principal-system state and ``k = D_q`` for the ancilla-extended state, on
which every operator acts as ``A (x) I``.
"""
from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import linalg as sla
from scipy.optimize import brentq

from .model import JumpOperator, LindbladModel

__all__ = [
    "SimulationError",
    "Trajectory",
    "EffectiveSegment",
    "effective_hamiltonian",
    "NoJumpPropagator",
    "trajectory_rng",
    "select_jump",
    "apply_jump",
    "TrajectoryEngine",
    "run_trajectory",
    "run_ensemble",
    "average_density",
]

log = logging.getLogger(__name__)

NORM_MONOTONE_TOL = 1e-10
CROSSING_RTOL = 1e-12


class SimulationError(RuntimeError):
    """Numerical failure inside a trajectory."""


@dataclass
class Trajectory:
    """Outcome of one stochastic run.

    ``final_state`` is the flattened unit-norm state, or ``None`` when the
    trajectory was disposed into a loss channel. ``survival`` is the squared
    norm of the no-jump state at the end of the schedule and is only
    recorded for zero-jump runs.
    """

    final_state: Optional[np.ndarray]
    jumps: list = field(default_factory=list)
    disposed_at: Optional[float] = None
    survival: Optional[float] = None
    seed: int = 0
    index: int = 0

    @property
    def disposed(self) -> bool:
        return self.disposed_at is not None

    @property
    def jumped(self) -> bool:
        return bool(self.jumps) or self.disposed


@dataclass(frozen=True, eq=False)
class EffectiveSegment:
    """``H_eff`` of one schedule segment with a cached propagation method."""

    t0: float
    t1: float
    h_eff: np.ndarray
    eigvals: Optional[np.ndarray]
    eigvecs: Optional[np.ndarray]
    eigvecs_inv: Optional[np.ndarray]
    full_step: np.ndarray

    @property
    def duration(self) -> float:
        return self.t1 - self.t0

    def propagate(self, psi: np.ndarray, tau: float) -> np.ndarray:
        """Apply ``exp(-i H_eff tau)`` to ``psi``."""
        if tau == self.duration:
            return self.full_step @ psi
        if self.eigvals is not None:
            phase = np.exp(-1j * self.eigvals * tau)
            return self.eigvecs @ (phase[:, None] * (self.eigvecs_inv @ psi))
        return sla.expm(-1j * self.h_eff * tau) @ psi


def _spectral(h_eff: np.ndarray):
    w, V = np.linalg.eig(h_eff)
    if np.linalg.cond(V) > 1e6:
        return None, None, None
    Vinv = np.linalg.inv(V)
    scale = max(np.abs(h_eff).max(), 1.0)
    if np.abs(V @ (w[:, None] * Vinv) - h_eff).max() > 1e-11 * scale:
        return None, None, None
    return w, V, Vinv


def effective_hamiltonian(model: LindbladModel, ancilla_dim: int = 1) -> list:
    """Per-segment ``H_eff = H - (i/2) sum_k L_k^dag L_k``.

    The returned matrices act on the principal space; ancilla extension is
    implicit (``H_eff (x) I``) because states carry the ancilla as a second
    array axis. ``ancilla_dim > 1`` returns the explicit Kronecker form
    instead, for inspection.
    """
    decay = model.decay_operator()
    out = []
    for seg in model.schedule:
        h = seg.hamiltonian - 0.5j * decay
        if ancilla_dim > 1:
            h = np.kron(h, np.eye(ancilla_dim))
        out.append(h)
    return out


class NoJumpPropagator:
    """Deterministic no-jump evolution across the full pulse schedule."""

    def __init__(self, model: LindbladModel):
        self.model = model
        b = model.boundaries
        self.boundaries = b
        segs = []
        for k, h in enumerate(effective_hamiltonian(model)):
            w, V, Vinv = _spectral(h)
            step = sla.expm(-1j * h * model.schedule[k].duration)
            segs.append(EffectiveSegment(b[k], b[k + 1], h, w, V, Vinv, step))
        self.segments = segs

    @property
    def duration(self) -> float:
        return float(self.boundaries[-1])

    def segment_index(self, t: float) -> int:
        k = int(np.searchsorted(self.boundaries, t, side="right")) - 1
        return min(max(k, 0), len(self.segments) - 1)

    def evolve(self, psi: np.ndarray, t_start: float, threshold: float):
        """Integrate the no-jump equation from ``t_start``.

        Returns ``(psi_unnormalised, hit)`` where ``hit`` is the time at which
        the squared norm first reaches ``threshold`` or ``None`` if the end of
        the schedule was reached first.
        """
        psi = np.asarray(psi, dtype=complex)
        n0 = float(np.vdot(psi, psi).real)
        if threshold >= n0:
            raise ValueError(f"threshold {threshold} is not below the squared norm {n0}")
        t = float(t_start)
        k = self.segment_index(t)
        while k < len(self.segments):
            seg = self.segments[k]
            tau_end = seg.t1 - t
            if tau_end <= 0:
                k += 1
                continue
            psi_end = seg.propagate(psi, tau_end) if t > seg.t0 else seg.full_step @ psi
            n_end = float(np.vdot(psi_end, psi_end).real)
            if n_end > n0 * (1 + NORM_MONOTONE_TOL) + 1e-300:
                raise SimulationError(
                    f"squared norm increased from {n0} to {n_end} in segment {k}"
                )
            if n_end > threshold:
                psi, n0, t = psi_end, n_end, seg.t1
                k += 1
                continue

            def f(tau):
                phi = seg.propagate(psi, tau)
                return float(np.vdot(phi, phi).real) - threshold

            try:
                tau = brentq(
                    f, 0.0, tau_end, xtol=1e-15 * self.duration, rtol=CROSSING_RTOL
                )
            except ValueError as exc:
                raise SimulationError(f"crossing search failed in segment {k} at t={t}") from exc
            return seg.propagate(psi, tau), t + tau
        return psi, None


def trajectory_rng(master_seed: int, index: int) -> np.random.Generator:
    """Independent stream for trajectory ``index`` of an ensemble."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(index),))
    return np.random.Generator(np.random.PCG64(ss))


def _choose(weights: np.ndarray, u: float) -> int:
    total = weights.sum()
    if not total > 0:
        raise SimulationError("jump fired with no available channel")
    cum = np.cumsum(weights) / total
    return min(int(np.searchsorted(cum, u, side="right")), len(weights) - 1)


def select_jump(psi: np.ndarray, jump_ops: Sequence[JumpOperator], u: float) -> int:
    """Index ``k`` drawn with probability ``<L_k^dag L_k> / sum``.

    Selection is cumulative-sum inversion of ``u`` in operator order.
    """
    psi = np.asarray(psi)
    if psi.ndim == 1:
        psi = psi[:, None]
    weights = np.array([np.linalg.norm(L.op @ psi) ** 2 for L in jump_ops])
    return _choose(weights, u)


def _in_loss(psi: np.ndarray, loss_indices) -> bool:
    if not loss_indices:
        return False
    keep = np.ones(psi.shape[0], dtype=bool)
    keep[list(loss_indices)] = False
    return np.linalg.norm(psi[keep]) <= 1e-14 * np.linalg.norm(psi)


def apply_jump(
    psi: np.ndarray,
    jump: JumpOperator,
    u: float | None = None,
    loss_indices=(),
):
    """Apply a jump (and its cascade) to ``psi``.

    Returns ``(state, labels)``; ``state`` is ``None`` when the trajectory
    ends in a loss channel. ``u`` selects the cascade branch and is only
    needed when ``jump`` has one.
    """
    psi = np.asarray(psi, dtype=complex)
    vec = psi.ndim == 1
    if vec:
        psi = psi[:, None]
    labels = [jump.label]
    if jump.loss:
        return None, labels
    phi = jump.op @ psi
    nrm = np.linalg.norm(phi)
    if nrm == 0:
        raise SimulationError(f"jump {jump.label!r} annihilates the state")
    phi = phi / nrm
    if jump.cascade:
        if u is None:
            raise ValueError(f"jump {jump.label!r} cascades; a uniform draw is required")
        k = _choose(np.array([np.linalg.norm(c.op @ phi) ** 2 for c in jump.cascade]), u)
        phi, more = apply_jump(phi, jump.cascade[k], None, loss_indices)
        labels += more
        if phi is None:
            return None, labels
    elif _in_loss(phi, loss_indices):
        return None, labels
    return (phi[:, 0] if vec else phi), labels


class TrajectoryEngine:
    """Runs trajectories of one model; cheap to pickle to worker processes."""

    def __init__(self, model: LindbladModel):
        self.model = model
        self.propagator = NoJumpPropagator(model)
        self.jump_ops = tuple(model.jump_ops)
        self.loss_indices = model.spec.loss_indices

    def run(self, psi0: np.ndarray, master_seed: int = 0, index: int = 0) -> Trajectory:
        D = self.model.spec.full_dim
        psi0 = np.asarray(psi0, dtype=complex)
        if psi0.size % D:
            raise ValueError(f"state of size {psi0.size} does not fit full_dim={D}")
        psi = psi0.reshape(D, -1)
        if abs(np.linalg.norm(psi) - 1) > 1e-10:
            raise ValueError("input state must have unit norm")
        rng = trajectory_rng(master_seed, index)
        t = 0.0
        jumps = []
        while True:
            r = rng.random()
            if r == 0.0:
                r = np.nextafter(0.0, 1.0)
            psi, hit = self.propagator.evolve(psi, t, r)
            if hit is None:
                nrm2 = float(np.vdot(psi, psi).real)
                final = (psi / np.sqrt(nrm2)).reshape(-1)
                return Trajectory(
                    final, jumps, None, nrm2 if not jumps else None, master_seed, index
                )
            t = hit
            k = select_jump(psi, self.jump_ops, rng.random())
            u = rng.random() if self.jump_ops[k].cascade else None
            psi, labels = apply_jump(psi, self.jump_ops[k], u, self.loss_indices)
            jumps.extend((t, lab) for lab in labels)
            if psi is None:
                return Trajectory(None, jumps, t, None, master_seed, index)


def run_trajectory(
    model: LindbladModel, psi0: np.ndarray, master_seed: int = 0, index: int = 0
) -> Trajectory:
    return TrajectoryEngine(model).run(psi0, master_seed, index)


def _run_chunk(engine: TrajectoryEngine, psi0, master_seed, indices):
    return [engine.run(psi0, master_seed, i) for i in indices]


def default_workers() -> int:
    return os.cpu_count() or 1


def run_ensemble(
    model: LindbladModel | TrajectoryEngine,
    psi0: np.ndarray,
    n: int,
    master_seed: int = 0,
    workers: int = 1,
) -> list:
    """Run ``n`` trajectories; results are returned in index order.

    Trajectory ``i`` always uses the stream ``(master_seed, i)``, so the
    output does not depend on ``workers``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    engine = model if isinstance(model, TrajectoryEngine) else TrajectoryEngine(model)
    workers = max(1, int(workers))
    if workers == 1 or n < 2 * workers:
        return _run_chunk(engine, psi0, master_seed, range(n))
    chunks = np.array_split(np.arange(n), workers * 4)
    out = []
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [
            pool.submit(_run_chunk, engine, psi0, master_seed, c.tolist()) for c in chunks if len(c)
        ]
        for fut in futures:
            out.extend(fut.result())
    return out


def average_density(trajectories: Sequence[Trajectory], dim: int | None = None) -> np.ndarray:
    """Ensemble average of ``|psi><psi|``; disposed runs contribute zero."""
    if not trajectories:
        raise ValueError("need at least one trajectory")
    states = [tr.final_state for tr in trajectories if tr.final_state is not None]
    n = len(trajectories)
    if not states:
        if dim is None:
            raise ValueError("every trajectory was disposed; pass dim explicitly")
        return np.zeros((dim, dim), dtype=complex)
    S = np.array(states)
    return S.T @ S.conj() / n
