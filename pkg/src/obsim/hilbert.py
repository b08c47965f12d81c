"""Composite Hilbert space of N two-level atoms and one truncated bosonic mode.

States are plain complex vectors in the mode-major layout
``index = fock * 2**N + atom_bitmask``. Operators are applied on the fly;
no matrix over the full space is ever built.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .errors import DegenerateStateError, InvalidArgumentError
from .params import SystemParams

OBSERVABLES = ("photon_number", "a", "a_squared", "a_dagger_Sigma", "Sigma", "Sigma_z",
               "atom_excitation", "top_population")


@dataclass(frozen=True)
class BasisLayout:
    n_atoms: int
    dim_mode: int

    def __post_init__(self):
        if self.n_atoms < 1 or self.dim_mode < 1:
            raise InvalidArgumentError("n_atoms and dim_mode must be >= 1")

    @property
    def n_atom_states(self) -> int:
        return 1 << self.n_atoms

    @property
    def dim_total(self) -> int:
        return self.n_atom_states * self.dim_mode

    def index(self, fock: int, atoms: int) -> int:
        if not (0 <= fock < self.dim_mode and 0 <= atoms < self.n_atom_states):
            raise InvalidArgumentError(f"basis label ({fock}, {atoms}) out of range")
        return fock * self.n_atom_states + atoms

    def label(self, index: int) -> tuple[int, int]:
        if not 0 <= index < self.dim_total:
            raise InvalidArgumentError(f"index {index} out of range")
        return divmod(index, self.n_atom_states)


@dataclass
class StateVector:
    amplitudes: np.ndarray
    layout: BasisLayout

    def __post_init__(self):
        self.amplitudes = np.ascontiguousarray(self.amplitudes, dtype=np.complex128)
        if self.amplitudes.shape != (self.layout.dim_total,):
            raise InvalidArgumentError(
                f"state has shape {self.amplitudes.shape}, layout needs ({self.layout.dim_total},)")

    @property
    def grid(self) -> np.ndarray:
        """View as a (dim_mode, 2**N) array."""
        return self.amplitudes.reshape(self.layout.dim_mode, self.layout.n_atom_states)

    def norm2(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def normalized(self) -> "StateVector":
        nrm = self.norm2()
        if nrm <= 0.0:
            raise DegenerateStateError("cannot normalize a zero vector")
        return StateVector(self.amplitudes / np.sqrt(nrm), self.layout)

    def copy(self) -> "StateVector":
        return StateVector(self.amplitudes.copy(), self.layout)


def basis_state(layout: BasisLayout, fock: int, atoms: int | str = 0) -> StateVector:
    """|fock> (x) |atoms>.

    ``atoms`` is a bitmask, or a string such as ``"eg"`` listing atom 0 first.
    """
    if isinstance(atoms, str):
        if len(atoms) != layout.n_atoms or set(atoms) - {"e", "g"}:
            raise InvalidArgumentError(f"atom string {atoms!r} does not match {layout.n_atoms} atoms")
        atoms = sum(1 << i for i, c in enumerate(atoms) if c == "e")
    psi = np.zeros(layout.dim_total, dtype=np.complex128)
    psi[layout.index(fock, atoms)] = 1.0
    return StateVector(psi, layout)


def _coef(params: SystemParams) -> np.ndarray:
    return np.array([params.delta_m, params.delta_a, params.g, params.eta,
                     params.kappa, params.gamma], dtype=np.float64)


def _check_params(state: StateVector, params: SystemParams):
    if params.n_atoms != state.layout.n_atoms:
        raise InvalidArgumentError(
            f"params describe {params.n_atoms} atoms, state layout has {state.layout.n_atoms}")


def apply_annihilation(state: StateVector) -> StateVector:
    src = state.grid
    out = np.zeros_like(src)
    n = np.sqrt(np.arange(1, state.layout.dim_mode))[:, None]
    out[:-1] = n * src[1:]
    return StateVector(out.ravel(), state.layout)


def apply_creation(state: StateVector) -> StateVector:
    src = state.grid
    out = np.zeros_like(src)
    n = np.sqrt(np.arange(1, state.layout.dim_mode))[:, None]
    out[1:] = n * src[:-1]
    return StateVector(out.ravel(), state.layout)


def _atom_axes(state: StateVector, atom_index: int) -> np.ndarray:
    n_atoms = state.layout.n_atoms
    if not 0 <= atom_index < n_atoms:
        raise InvalidArgumentError(f"atom_index {atom_index} out of range for {n_atoms} atoms")
    # axis 2 is the bit of atom ``atom_index``
    return state.amplitudes.reshape(state.layout.dim_mode, 1 << (n_atoms - 1 - atom_index),
                                    2, 1 << atom_index)


def apply_sigma_minus(state: StateVector, atom_index: int) -> StateVector:
    src = _atom_axes(state, atom_index)
    out = np.zeros_like(src)
    out[:, :, 0, :] = src[:, :, 1, :]
    return StateVector(out.ravel(), state.layout)


def apply_sigma_plus(state: StateVector, atom_index: int) -> StateVector:
    src = _atom_axes(state, atom_index)
    out = np.zeros_like(src)
    out[:, :, 1, :] = src[:, :, 0, :]
    return StateVector(out.ravel(), state.layout)


def apply_hamiltonian(state: StateVector, params: SystemParams) -> StateVector:
    """H|psi> with H = -dM a+a - dA sum s+s + i g sum (a+ s - s+ a) + i eta (a+ - a)."""
    _check_params(state, params)
    out = np.empty_like(state.amplitudes)
    K.apply_h(state.amplitudes, out, state.layout.n_atoms, state.layout.dim_mode,
              _coef(params), False, K.popcounts(state.layout.n_atoms))
    return StateVector(out, state.layout)


def apply_effective_hamiltonian(state: StateVector, params: SystemParams) -> StateVector:
    """H_eff|psi> = (H - i kappa a+a - i gamma sum s+s)|psi>."""
    _check_params(state, params)
    out = np.empty_like(state.amplitudes)
    K.apply_h(state.amplitudes, out, state.layout.n_atoms, state.layout.dim_mode,
              _coef(params), True, K.popcounts(state.layout.n_atoms))
    return StateVector(out, state.layout)


def all_expectations(state: StateVector) -> dict[str, complex]:
    nrm = state.norm2()
    if not nrm > 0.0:
        raise DegenerateStateError("expectation of a zero-norm state")
    lay = state.layout
    row = np.empty(K.N_MOMENTS, dtype=np.complex128)
    K.moments(state.amplitudes, lay.n_atoms, lay.dim_mode, K.popcounts(lay.n_atoms), row)
    return {
        "photon_number": complex(row[K.M_N].real, 0.0),
        "a": complex(row[K.M_A]),
        "a_squared": complex(row[K.M_A2]),
        "a_dagger_Sigma": complex(row[K.M_ADAG_SIGMA]),
        "Sigma": complex(row[K.M_SIGMA]),
        "Sigma_z": complex(row[K.M_SIGMA_Z].real, 0.0),
        "atom_excitation": complex(row[K.M_SIGMA_Z].real + 0.5 * lay.n_atoms, 0.0),
        "top_population": complex(row[K.M_TOP].real, 0.0),
    }


def expectation(state: StateVector, observable: str) -> complex:
    """<psi|O|psi> / <psi|psi> for one of ``OBSERVABLES``."""
    if observable not in OBSERVABLES:
        raise InvalidArgumentError(f"unknown observable {observable!r}; choose from {OBSERVABLES}")
    return all_expectations(state)[observable]


def new_mode_density(dim_mode: int) -> np.ndarray:
    return np.zeros((dim_mode, dim_mode), dtype=np.complex128)


def accumulate_mode_density(state: StateVector, accumulator: np.ndarray, weight: float) -> None:
    """accumulator[m, n] += weight * sum_b psi(m, b) conj(psi(n, b)) (atoms traced out)."""
    lay = state.layout
    if accumulator.shape != (lay.dim_mode, lay.dim_mode):
        raise InvalidArgumentError("accumulator shape does not match the mode dimension")
    K.accumulate_rho(state.amplitudes, float(weight), lay.n_atoms, lay.dim_mode, accumulator)


def check_density_matrix(rho: np.ndarray, herm_tol=1e-10, trace_tol=1e-8, eig_tol=1e-8) -> None:
    """Raise ``InvalidArgumentError`` unless ``rho`` is a valid mode density matrix."""
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise InvalidArgumentError("density matrix must be square")
    if np.max(np.abs(rho - rho.conj().T), initial=0.0) > herm_tol:
        raise InvalidArgumentError("density matrix is not Hermitian")
    tr = np.trace(rho).real
    if abs(tr - 1.0) > trace_tol:
        raise InvalidArgumentError(f"density matrix trace is {tr!r}, expected 1")
    if np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min() < -eig_tol:
        raise InvalidArgumentError("density matrix has a negative eigenvalue")
