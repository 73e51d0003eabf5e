import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aawf.channels import amplitude_damping_model, unitary_model
from aawf.model import PAULIS, HilbertSpec, build_kappa, maximally_entangled_input, pauli_basis
from aawf.rydberg import ideal_cphase
from aawf.tomography import (
    ChiMatrix,
    ZetaVector,
    accumulate_chi,
    characterize,
    fidelity,
    fidelity_rank1,
    ideal_chi,
    nojump_upper_bound,
    operator_chi,
    single_trajectory_bound,
    split_chi,
    trace_distance,
    zeta_from_state,
)

from conftest import random_density


def _unit(i, d=4):
    v = np.zeros(d, complex)
    v[i] = 1
    return ZetaVector(v)


def test_zeta_of_untouched_input(basis1):
    spec = HilbertSpec(2)
    ent = maximally_entangled_input(spec)
    z = zeta_from_state(build_kappa(basis1, ent), ent.state, spec)
    np.testing.assert_allclose(z.coeffs, [1, 0, 0, 0], atol=1e-15)


@pytest.mark.parametrize("label", ["X", "Y", "Z"])
def test_zeta_of_pauli_rotated_input(basis1, label):
    spec = HilbertSpec(2)
    ent = maximally_entangled_input(spec)
    state = np.kron(PAULIS[label], np.eye(2)) @ ent.state
    z = zeta_from_state(build_kappa(basis1, ent), state, spec)
    expected = np.zeros(4)
    expected["IXYZ".index(label)] = 1
    np.testing.assert_allclose(z.coeffs, expected, atol=1e-15)


def test_zeta_drops_leaked_amplitude():
    spec = HilbertSpec(3, (2,), (0, 1))
    b = pauli_basis(1)
    ent = maximally_entangled_input(spec)
    leaked = np.zeros(6, complex)
    leaked[4] = 1.0  # |2>|0>
    state = (ent.state + leaked) / np.sqrt(2)
    z = zeta_from_state(build_kappa(b, ent), state, spec)
    assert np.linalg.norm(z.coeffs) ** 2 == pytest.approx(0.5)


def test_accumulate_weights_disposed():
    chi = accumulate_chi([_unit(0), _unit(1)], disposed_count=2)
    assert chi.n == 4 and chi.disposed == 2
    np.testing.assert_allclose(np.diag(chi.data).real, [0.25, 0.25, 0, 0])
    assert chi.trace == pytest.approx(0.5)


def test_accumulate_validates_counts():
    with pytest.raises(ValueError):
        accumulate_chi([_unit(0)], disposed_count=0, n_total=3)
    with pytest.raises(ValueError):
        accumulate_chi([], disposed_count=2)


def test_accumulate_counts_jumps():
    zs = [_unit(0), ZetaVector(_unit(1).coeffs, jumped=True), _unit(0)]
    chi = accumulate_chi(zs, disposed_count=1)
    assert (chi.S, chi.J, chi.n) == (2, 2, 4)


def test_split_reconstructs_chi():
    rng = np.random.default_rng(8)
    zs = []
    c_s = rng.normal(size=4) + 1j * rng.normal(size=4)
    for i in range(30):
        if i % 3 == 0:
            zs.append(ZetaVector(c_s.copy(), i, False))
        else:
            zs.append(ZetaVector(rng.normal(size=4) + 1j * rng.normal(size=4), i, True))
    n = len(zs) + 5
    chi = accumulate_chi(zs, disposed_count=5)
    chi_S, chi_J = split_chi(zs, n)
    S = chi.S
    np.testing.assert_allclose(S / n * chi_S + (n - S) / n * chi_J, chi.data, atol=1e-12)


def test_ideal_cphase_coefficients(basis2):
    chi = ideal_chi(ideal_cphase(), basis2)
    c = basis2.coefficients(ideal_cphase())
    expected = np.zeros(16)
    for lab, val in {"II": -0.5, "IZ": 0.5, "ZI": 0.5, "ZZ": 0.5}.items():
        expected[basis2.labels.index(lab)] = val
    np.testing.assert_allclose(c, expected, atol=1e-15)
    assert chi.trace == pytest.approx(1.0)


def test_ideal_chi_rejects_nonunitary(basis1):
    with pytest.raises(ValueError, match="unitary"):
        ideal_chi(np.diag([1, 0.5]), basis1)
    with pytest.raises(ValueError):
        ideal_chi(np.eye(4), basis1)


def test_trace_distance_examples():
    assert trace_distance(np.diag([1, 0]), np.diag([0, 1])) == pytest.approx(1.0)
    assert trace_distance(np.diag([0.7, 0.3]), np.diag([0.2, 0.8])) == pytest.approx(0.5)
    plus = np.full((2, 2), 0.5)
    # pure states: sqrt(1 - |<0|+>|^2)
    assert trace_distance(np.diag([1, 0]), plus) == pytest.approx(np.sqrt(0.5))


def test_trace_distance_rejects_nonhermitian():
    with pytest.raises(ValueError):
        trace_distance(np.array([[0, 1], [0, 0]]), np.zeros((2, 2)))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_trace_distance_metric_axioms(seed):
    rng = np.random.default_rng(seed)
    a, b, c = (random_density(rng, 4) for _ in range(3))
    tab = trace_distance(a, b)
    assert trace_distance(a, a) == pytest.approx(0, abs=1e-12)
    assert tab == pytest.approx(trace_distance(b, a))
    assert 0 <= tab <= 1 + 1e-12
    assert tab <= trace_distance(a, c) + trace_distance(c, b) + 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_fidelity_rank1_dual_path(seed):
    rng = np.random.default_rng(seed)
    c = rng.normal(size=4) + 1j * rng.normal(size=4)
    c /= np.linalg.norm(c)
    B = random_density(rng, 4)
    full = fidelity(np.outer(c, c.conj()), B)
    assert full == pytest.approx(fidelity_rank1(c, B), abs=1e-7)
    assert full <= 1 + 1e-12
    assert fidelity(B, B) == pytest.approx(1.0, abs=1e-7)


def test_fidelity_classical():
    assert fidelity(np.diag([0.5, 0.5]), np.diag([0.9, 0.1])) == pytest.approx(
        np.sqrt(0.45) + np.sqrt(0.05)
    )


def test_fidelity_negative_eigenvalue_tolerance():
    A = np.diag([1.0, -1e-4])
    with pytest.raises(ValueError, match="eigenvalue"):
        fidelity(A, np.eye(2) / 2)
    sampled = ChiMatrix(A, n=500)
    assert fidelity(sampled, np.diag([1.0, 0.0])) == pytest.approx(1.0)


def test_bound_examples():
    chi = np.diag([1.0, 0, 0, 0])
    assert nojump_upper_bound(chi, chi, 10, 10) == pytest.approx(0.0)
    assert nojump_upper_bound(chi, chi, 5, 10) == pytest.approx(0.5)
    assert single_trajectory_bound(chi, chi, 1.0) == pytest.approx(0.0)
    assert single_trajectory_bound(chi, chi, 0.5) == pytest.approx(0.5)


def test_bound_requires_survivor():
    chi = np.eye(4) / 4
    with pytest.raises(ValueError):
        nojump_upper_bound(chi, chi, 0, 10)
    with pytest.raises(ValueError):
        single_trajectory_bound(chi, chi, 0.0)


def test_characterize_unitary_is_rank_one(basis1):
    m = unitary_model(0.5 * PAULIS["Y"], 1.3)
    res = characterize(m, basis1, 7, master_seed=2)
    from scipy.linalg import expm

    ref = operator_chi(expm(-0.65j * PAULIS["Y"]), basis1)
    np.testing.assert_allclose(res.chi.data, ref, atol=1e-10)
    assert res.chi.J == 0 and res.survival == pytest.approx(1.0)
    assert np.linalg.matrix_rank(res.chi.data, tol=1e-10) == 1


def test_characterize_bound_holds(basis1):
    m = amplitude_damping_model(1.0, 0.3)
    res = characterize(m, basis1, 300, master_seed=5)
    met = res.metrics(ideal_chi(np.eye(2), basis1))
    # equality holds analytically here; allow rounding
    assert met["nojump_upper_bound"] >= met["trace_distance_to_ideal"] - 1e-12
    assert 0 < met["fidelity_to_ideal"] <= 1
