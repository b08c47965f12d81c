"""Independent dense reference implementations used only by the test-suite.

Everything here is built from explicit Kronecker products of small matrices,
so it shares no code path with the sparse kernels it checks.
"""
from functools import reduce

import numpy as np
import scipy.linalg as sla


def destroy(d):
    return np.diag(np.sqrt(np.arange(1, d)), 1).astype(complex)


SM = np.array([[0, 1], [0, 0]], dtype=complex)  # basis (g, e): sigma|e> = |g>
I2 = np.eye(2, dtype=complex)


def atom_op(op, i, n_atoms):
    # atom bitmask b = sum b_i 2**i, so atom n_atoms-1 is the most significant factor
    factors = [op if k == i else I2 for k in reversed(range(n_atoms))]
    return reduce(np.kron, factors)


def dense_operators(n_atoms, dim_mode):
    a = np.kron(destroy(dim_mode), np.eye(2**n_atoms))
    sig = [np.kron(np.eye(dim_mode), atom_op(SM, i, n_atoms)) for i in range(n_atoms)]
    return a, sig


def dense_hamiltonian(p, dim_mode):
    a, sig = dense_operators(p.n_atoms, dim_mode)
    ad = a.conj().T
    H = -p.delta_m * ad @ a
    for s in sig:
        sd = s.conj().T
        H = H - p.delta_a * sd @ s + 1j * p.g * (ad @ s - sd @ a)
    return H + 1j * p.eta * (ad - a)


def dense_heff(p, dim_mode):
    a, sig = dense_operators(p.n_atoms, dim_mode)
    H = dense_hamiltonian(p, dim_mode) - 1j * p.kappa * a.conj().T @ a
    for s in sig:
        H = H - 1j * p.gamma * s.conj().T @ s
    return H


def liouvillian(p, dim_mode):
    """Column-stacking superoperator of the master equation."""
    a, sig = dense_operators(p.n_atoms, dim_mode)
    H = dense_hamiltonian(p, dim_mode)
    dim = H.shape[0]
    eye = np.eye(dim)
    L = -1j * (np.kron(eye, H) - np.kron(H.T, eye))
    for rate, c in [(p.kappa, a)] + [(p.gamma, s) for s in sig]:
        cd = c.conj().T
        cdc = cd @ c
        L += rate * (2 * np.kron(c.conj(), c) - np.kron(eye, cdc) - np.kron(cdc.T, eye))
    return L


def steady_state(p, dim_mode):
    """Null vector of the Liouvillian, normalized to unit trace."""
    L = liouvillian(p, dim_mode)
    vec = sla.null_space(L, rcond=1e-12)
    assert vec.shape[1] == 1, "steady state is not unique"
    dim = int(np.sqrt(L.shape[0]))
    rho = vec[:, 0].reshape(dim, dim, order="F")
    rho = rho / np.trace(rho)
    return 0.5 * (rho + rho.conj().T)


def steady_moments(p, dim_mode):
    rho = steady_state(p, dim_mode)
    a, sig = dense_operators(p.n_atoms, dim_mode)
    Sig = sum(sig)
    ad = a.conj().T
    ev = lambda op: np.trace(rho @ op)
    return {
        "photon_number": ev(ad @ a).real,
        "atom_excitation": sum(ev(s.conj().T @ s).real for s in sig),
        "a": ev(a),
        "a_squared": ev(a @ a),
        "Sigma": ev(Sig),
        "adag_Sigma": ev(ad @ Sig),
        "rho": rho,
    }


def partial_trace_atoms(rho_full, n_atoms, dim_mode):
    r = rho_full.reshape(dim_mode, 2**n_atoms, dim_mode, 2**n_atoms)
    return np.einsum("mbnb->mn", r)
