import numpy as np
import pytest

from aawf.channels import amplitude_damping_model, dephasing_model, two_qubit_toy_model
from aawf.mastereq import propagate_density
from aawf.mcwf import (
    NoJumpPropagator,
    SimulationError,
    TrajectoryEngine,
    apply_jump,
    average_density,
    effective_hamiltonian,
    run_ensemble,
    select_jump,
    trajectory_rng,
)
from aawf.model import HilbertSpec, JumpOperator, LindbladModel, Segment
from aawf.rydberg import RydbergParams, build_single_atom_model, jump_operators

ONE = np.array([0, 1], dtype=complex)
PLUS = np.array([1, 1], dtype=complex) / np.sqrt(2)


def test_effective_hamiltonian_damping():
    (h,) = effective_hamiltonian(amplitude_damping_model(2.0, 1.0))
    np.testing.assert_allclose(h, np.diag([0, -1j]))


def test_effective_hamiltonian_ancilla_kron():
    m = amplitude_damping_model(2.0, 1.0)
    (h,) = effective_hamiltonian(m, ancilla_dim=2)
    np.testing.assert_allclose(h, np.kron(np.diag([0, -1j]), np.eye(2)))


@pytest.mark.parametrize("r", [0.9, 0.5, 0.05])
def test_crossing_time_closed_form(r):
    prop = NoJumpPropagator(amplitude_damping_model(3.0, 10.0))
    psi, hit = prop.evolve(ONE[:, None], 0.0, r)
    assert hit == pytest.approx(-np.log(r) / 3.0, rel=1e-10)
    assert np.vdot(psi, psi).real == pytest.approx(r, rel=1e-10)


def test_crossing_across_segments():
    spec = HilbertSpec(2)
    L = JumpOperator("d", np.array([[0, 1], [0, 0]]))
    sched = (Segment(0.2, np.zeros((2, 2))), Segment(0.3, np.zeros((2, 2))))
    prop = NoJumpPropagator(LindbladModel(spec, sched, (L,)))
    _, hit = prop.evolve(ONE[:, None], 0.0, np.exp(-0.35))
    assert hit == pytest.approx(0.35, rel=1e-10)
    # resuming mid-segment keeps the time origin
    _, hit2 = prop.evolve(ONE[:, None], 0.25, np.exp(-0.1))
    assert hit2 == pytest.approx(0.35, rel=1e-10)


def test_dark_state_never_jumps():
    prop = NoJumpPropagator(amplitude_damping_model(5.0, 1.0))
    psi, hit = prop.evolve(np.array([[1.0], [0.0]]), 0.0, 1e-6)
    assert hit is None
    np.testing.assert_allclose(psi[:, 0], [1, 0])


def test_threshold_must_be_below_norm():
    prop = NoJumpPropagator(amplitude_damping_model(1.0, 1.0))
    with pytest.raises(ValueError):
        prop.evolve(ONE, 0.0, 1.0)


def test_norm_increase_detected():
    spec = HilbertSpec(2)
    # a gain term disguised as a negative decay
    m = LindbladModel(spec, (Segment(1.0, np.zeros((2, 2))),))
    prop = NoJumpPropagator(m)
    seg = prop.segments[0]
    object.__setattr__(seg, "full_step", 2 * np.eye(2))
    with pytest.raises(SimulationError, match="increased"):
        prop.evolve(ONE[:, None], 0.0, 0.5)


@pytest.mark.parametrize("u, expected", [(0.0, 0), (0.24, 0), (0.26, 1), (0.99, 1)])
def test_select_jump_cumulative(u, expected):
    # weights 1 : 3 on |1>
    ops = [JumpOperator("a", np.array([[0, 1], [0, 0]])),
           JumpOperator("b", np.sqrt(3) * np.array([[0, 0], [0, 1]]))]
    assert select_jump(ONE, ops, u) == expected


def test_select_jump_skips_zero_weights():
    ops = [JumpOperator("a", np.zeros((2, 2))), JumpOperator("b", np.eye(2))]
    assert select_jump(PLUS, ops, 0.0) == 1


def test_apply_jump_normalises():
    L = JumpOperator("d", 0.3 * np.array([[0, 1], [0, 0]]))
    out, labels = apply_jump(PLUS, L)
    np.testing.assert_allclose(out, [1, 0])
    assert labels == ["d"]


def test_apply_jump_loss_flag():
    out, labels = apply_jump(PLUS, JumpOperator("g", np.eye(2), loss=True))
    assert out is None and labels == ["g"]


def test_apply_jump_annihilated():
    with pytest.raises(SimulationError):
        apply_jump(np.array([1, 0]), JumpOperator("d", np.array([[0, 1], [0, 0]])))


def test_cascade_requires_draw():
    L = jump_operators(RydbergParams())[-1]
    with pytest.raises(ValueError):
        apply_jump(np.eye(4)[2], L)


def test_rydberg_cascade_branching():
    p = RydbergParams()
    L = jump_operators(p)[-1]
    assert L.label == "gamma_r"
    r = np.eye(4)[2].astype(complex)
    counts = {"0": 0, "1": 0, "g": 0}
    us = np.random.default_rng(11).random(20000)
    for u in us:
        out, labels = apply_jump(r, L, u)
        tgt = labels[-1][-1]
        counts[tgt] += 1
        if tgt == "g":
            assert out is None
        else:
            np.testing.assert_allclose(np.abs(out), np.eye(4)[int(tgt)])
    n = len(us)
    for c, tgt in zip(p.branching, "01g"):
        sigma = np.sqrt(c * (1 - c) / n)
        assert abs(counts[tgt] / n - c) < 4 * sigma


def test_rng_streams_independent_of_order():
    a = trajectory_rng(5, 3).random(4)
    trajectory_rng(5, 2).random(10)
    np.testing.assert_array_equal(a, trajectory_rng(5, 3).random(4))
    assert not np.array_equal(a, trajectory_rng(5, 4).random(4))


def test_engine_deterministic():
    eng = TrajectoryEngine(two_qubit_toy_model(gamma=0.5, gamma_d=0.3))
    psi0 = np.eye(4)[3]
    a = [eng.run(psi0, 9, i) for i in range(20)]
    b = [eng.run(psi0, 9, i) for i in range(20)]
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x.final_state, y.final_state)
        assert x.jumps == y.jumps


def test_engine_rejects_bad_input():
    eng = TrajectoryEngine(amplitude_damping_model(1.0, 1.0))
    with pytest.raises(ValueError):
        eng.run(np.array([1.0, 1.0]))
    with pytest.raises(ValueError):
        eng.run(np.ones(3) / np.sqrt(3))


def test_survival_fraction_binomial():
    n = 4000
    trajs = run_ensemble(amplitude_damping_model(1.0, 0.5), ONE, n, master_seed=3)
    S = sum(not t.jumped for t in trajs)
    p = np.exp(-0.5)
    assert abs(S / n - p) <= 3 * np.sqrt(p * (1 - p) / n)
    for t in trajs:
        if not t.jumped:
            assert t.survival == pytest.approx(p, rel=1e-10)
        else:
            assert t.survival is None


@pytest.mark.parametrize(
    "model, psi0",
    [
        (amplitude_damping_model(1.0, 0.7), PLUS),
        (dephasing_model(1.0, 0.4), PLUS),
        (two_qubit_toy_model(gamma=0.3, gamma_d=0.2), np.ones(4) / 2),
    ],
    ids=["damping", "dephasing", "toy"],
)
def test_average_density_matches_master_equation(model, psi0):
    n = 3000
    trajs = run_ensemble(model, psi0, n, master_seed=1)
    rho = average_density(trajs)
    ref = propagate_density(model, np.outer(psi0, psi0.conj()))
    dist = 0.5 * np.abs(np.linalg.eigvalsh(rho - ref)).sum()
    assert dist <= 5 / np.sqrt(n)


def test_loss_reduces_trace():
    p = RydbergParams.from_mhz(gamma_p=200.0)
    m = build_single_atom_model(p, area=np.pi)
    n = 1500
    trajs = run_ensemble(m, np.eye(4)[1], n, master_seed=4)
    rho = average_density(trajs)
    ref = propagate_density(m, np.diag([0, 1, 0, 0]).astype(complex))
    disposed = sum(t.disposed for t in trajs)
    assert disposed > 0
    assert np.trace(rho).real == pytest.approx(1 - disposed / n)
    assert np.trace(ref).real < 1 - 1e-3
    assert 0.5 * np.abs(np.linalg.eigvalsh(rho - ref)).sum() <= 5 / np.sqrt(n)


def test_average_density_all_disposed():
    from aawf.mcwf import Trajectory

    trajs = [Trajectory(None, [(0.1, "g")], 0.1)]
    with pytest.raises(ValueError):
        average_density(trajs)
    np.testing.assert_array_equal(average_density(trajs, dim=2), np.zeros((2, 2)))


def test_ensemble_worker_independent():
    m = amplitude_damping_model(1.0, 0.5)
    a = run_ensemble(m, PLUS, 40, 2, workers=1)
    b = run_ensemble(m, PLUS, 40, 2, workers=3)
    assert [t.index for t in b] == list(range(40))
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x.final_state, y.final_state)
