import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from obsim.errors import DegenerateStateError, InvalidArgumentError
from obsim.hilbert import (BasisLayout, StateVector, accumulate_mode_density, all_expectations,
                           apply_annihilation, apply_creation, apply_effective_hamiltonian,
                           apply_hamiltonian, apply_sigma_minus, apply_sigma_plus, basis_state,
                           check_density_matrix, expectation, new_mode_density)
from obsim.params import SystemParams

from oracles import dense_heff, dense_hamiltonian, dense_operators, partial_trace_atoms


def random_state(layout, seed):
    rng = np.random.default_rng(seed)
    v = rng.normal(size=layout.dim_total) + 1j * rng.normal(size=layout.dim_total)
    return StateVector(v / np.linalg.norm(v), layout)


PARAMS = SystemParams(n_atoms=3, g=0.7, kappa=0.5, gamma=1.0, delta_m=0.3, delta_a=-0.2, eta=1.1)


def test_layout_index_roundtrip():
    lay = BasisLayout(3, 5)
    assert lay.dim_total == 40
    for i in range(lay.dim_total):
        assert lay.index(*lay.label(i)) == i
    assert lay.index(2, 0b101) == 2 * 8 + 5
    with pytest.raises(InvalidArgumentError):
        lay.index(5, 0)
    with pytest.raises(InvalidArgumentError):
        BasisLayout(0, 3)


def test_basis_state_string_labels_atom0_first():
    lay = BasisLayout(3, 4)
    s = basis_state(lay, 1, "egg")
    assert np.argmax(np.abs(s.amplitudes)) == lay.index(1, 0b001)
    with pytest.raises(InvalidArgumentError):
        basis_state(lay, 0, "eg")


def test_state_shape_checked():
    with pytest.raises(InvalidArgumentError):
        StateVector(np.zeros(7), BasisLayout(1, 4))


def test_ladder_operators_match_dense():
    lay = BasisLayout(2, 6)
    a, sig = dense_operators(2, 6)
    psi = random_state(lay, 1)
    assert np.allclose(apply_annihilation(psi).amplitudes, a @ psi.amplitudes)
    assert np.allclose(apply_creation(psi).amplitudes, a.conj().T @ psi.amplitudes)
    for i in range(2):
        assert np.allclose(apply_sigma_minus(psi, i).amplitudes, sig[i] @ psi.amplitudes)
        assert np.allclose(apply_sigma_plus(psi, i).amplitudes, sig[i].conj().T @ psi.amplitudes)


def test_single_photon_examples():
    lay = BasisLayout(1, 4)
    one = basis_state(lay, 1, "g")
    assert np.allclose(apply_annihilation(one).amplitudes, basis_state(lay, 0, "g").amplitudes)
    assert np.allclose(apply_creation(one).amplitudes, np.sqrt(2) * basis_state(lay, 2, "g").amplitudes)
    top = basis_state(lay, 3, "g")
    assert np.all(apply_creation(top).amplitudes == 0)
    exc = basis_state(lay, 0, "e")
    assert np.allclose(apply_sigma_minus(exc, 0).amplitudes, basis_state(lay, 0, "g").amplitudes)
    with pytest.raises(InvalidArgumentError):
        apply_sigma_minus(exc, 1)


@pytest.mark.parametrize("n_atoms,dim", [(1, 8), (2, 5), (3, 4)])
def test_hamiltonian_matches_dense(n_atoms, dim):
    p = PARAMS.with_(n_atoms=n_atoms)
    lay = BasisLayout(n_atoms, dim)
    psi = random_state(lay, n_atoms)
    assert np.allclose(apply_hamiltonian(psi, p).amplitudes, dense_hamiltonian(p, dim) @ psi.amplitudes,
                       atol=1e-13)
    assert np.allclose(apply_effective_hamiltonian(psi, p).amplitudes,
                       dense_heff(p, dim) @ psi.amplitudes, atol=1e-13)


def test_hamiltonian_param_mismatch():
    with pytest.raises(InvalidArgumentError):
        apply_hamiltonian(random_state(BasisLayout(2, 3), 0), PARAMS)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10**6), n_atoms=st.integers(1, 3), dim=st.integers(2, 7))
def test_hamiltonian_hermitian_and_ladder_adjoint(seed, n_atoms, dim):
    lay = BasisLayout(n_atoms, dim)
    phi, psi = random_state(lay, seed), random_state(lay, seed + 1)
    p = PARAMS.with_(n_atoms=n_atoms)
    lhs = np.vdot(phi.amplitudes, apply_hamiltonian(psi, p).amplitudes)
    rhs = np.vdot(apply_hamiltonian(phi, p).amplitudes, psi.amplitudes)
    assert abs(lhs - rhs) < 1e-11
    lhs = np.vdot(phi.amplitudes, apply_annihilation(psi).amplitudes)
    rhs = np.vdot(apply_creation(phi).amplitudes, psi.amplitudes)
    assert abs(lhs - rhs) < 1e-12


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_commutator_below_truncation(seed):
    lay = BasisLayout(2, 8)
    psi = random_state(lay, seed)
    # drop the top Fock level so [a, a+] = 1 holds exactly
    psi.grid[-1] = 0
    comm = apply_annihilation(apply_creation(psi)).amplitudes - apply_creation(apply_annihilation(psi)).amplitudes
    assert np.allclose(comm, psi.amplitudes, atol=1e-13)


def test_expectations_match_dense():
    lay = BasisLayout(2, 6)
    psi = random_state(lay, 5)
    a, sig = dense_operators(2, 6)
    v = psi.amplitudes
    ev = lambda op: np.vdot(v, op @ v)
    S = sum(sig)
    e = all_expectations(psi)
    assert np.isclose(e["photon_number"], ev(a.conj().T @ a))
    assert np.isclose(e["a"], ev(a))
    assert np.isclose(e["a_squared"], ev(a @ a))
    assert np.isclose(e["Sigma"], ev(S))
    assert np.isclose(e["a_dagger_Sigma"], ev(a.conj().T @ S))
    exc = sum(ev(s.conj().T @ s) for s in sig)
    assert np.isclose(e["atom_excitation"], exc)
    assert np.isclose(e["Sigma_z"], exc - 1.0)
    assert np.isclose(e["top_population"], np.sum(np.abs(psi.grid[-1]) ** 2))
    # unnormalized input gives the same normalized expectation
    scaled = StateVector(3.0 * v, lay)
    assert np.isclose(expectation(scaled, "photon_number"), e["photon_number"])


def test_expectation_errors():
    lay = BasisLayout(1, 3)
    with pytest.raises(DegenerateStateError):
        expectation(StateVector(np.zeros(6), lay), "a")
    with pytest.raises(InvalidArgumentError):
        expectation(basis_state(lay, 0), "b")


def test_ground_and_excited_expectations():
    lay = BasisLayout(2, 3)
    g = basis_state(lay, 0, "gg")
    assert expectation(g, "Sigma_z") == -1.0
    assert expectation(g, "atom_excitation") == 0.0
    e = basis_state(lay, 2, "ee")
    assert expectation(e, "atom_excitation") == 2.0
    assert np.isclose(expectation(e, "photon_number"), 2.0)


def test_mode_density_partial_trace():
    lay = BasisLayout(2, 5)
    psi = random_state(lay, 9)
    acc = new_mode_density(5)
    accumulate_mode_density(psi, acc, 0.25)
    accumulate_mode_density(psi, acc, 0.75)
    full = np.outer(psi.amplitudes, psi.amplitudes.conj())
    assert np.allclose(acc, partial_trace_atoms(full, 2, 5))
    check_density_matrix(acc)
    with pytest.raises(InvalidArgumentError):
        accumulate_mode_density(psi, new_mode_density(4), 1.0)


def test_check_density_matrix_rejects():
    with pytest.raises(InvalidArgumentError):
        check_density_matrix(np.array([[0.5, 0.1], [0.0, 0.5]]))
    with pytest.raises(InvalidArgumentError):
        check_density_matrix(np.eye(2))
    with pytest.raises(InvalidArgumentError):
        check_density_matrix(np.diag([1.2, -0.2]))
