"""Linearized quantum fluctuations around a mean-field steady state.

Fluctuation vector, in this fixed order::

    v = (da, da^+, dSigma, dSigma^+, dSigma_z)

with ``a = sqrt(N)(alpha + da)``, ``Sigma = N(s + dSigma)``, ``Sigma_z = N(s_z + dSigma_z)``.
The linear Langevin system ``dv/dt = M v + noise`` with
``<noise_i(t) noise_j(t')> = D_ij delta(t - t')`` has stationary ordered moments
``P_ij = <v_i v_j>`` solving ``M P + P M^T + D = 0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_sylvester

from . import meanfield as mf
from .errors import DomainError, InvalidArgumentError
from .params import SystemParams

VARIABLES = ("da", "da_dag", "dSigma", "dSigma_dag", "dSigma_z")
# index of the Hermitian-conjugate partner of each variable
CONJUGATE = (1, 0, 3, 2, 4)
STABILITY_MARGIN = 1e-9


@dataclass
class LinearSystem:
    drift: np.ndarray
    diffusion: np.ndarray
    state: mf.MeanFieldState
    params: SystemParams

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvals(self.drift)


@dataclass
class FluctuationCovariance:
    moments: np.ndarray
    var_x: float
    var_y: float
    corr_adag_Sigma: complex  # <a+ Sigma> - <a+><Sigma> = N^(3/2) <da+ dSigma>
    corr_scaled: complex  # N <da+ dSigma>, independent of N under the scaling lock
    residual: float
    n_atoms: int

    @property
    def excess_x(self) -> float:
        return self.var_x - 0.25

    @property
    def excess_y(self) -> float:
        return self.var_y - 0.25


def build_linear_system(params: SystemParams, state: mf.MeanFieldState,
                        tol: float = mf.STATIONARY_TOL) -> LinearSystem:
    res = mf.residual(state, params)
    if res > tol:
        raise InvalidArgumentError(f"state is not stationary (|mb_rhs| = {res:.3g} > {tol:g})")
    G = params.collective_g
    N = params.n_atoms
    al, s, sz = state.alpha, state.s, state.s_z
    ac, sc = al.conjugate(), s.conjugate()
    dm, da = params.delta_m, params.delta_a
    M = np.zeros((5, 5), dtype=complex)
    M[0, 0] = complex(-params.kappa, dm)
    M[0, 2] = G
    M[1, 1] = complex(-params.kappa, -dm)
    M[1, 3] = G
    M[2, 2] = complex(-params.gamma, da)
    M[2, 0] = 2 * G * sz
    M[2, 4] = 2 * G * al
    M[3, 3] = complex(-params.gamma, -da)
    M[3, 1] = 2 * G * sz
    M[3, 4] = 2 * G * ac
    # -2G Re{s* da + alpha dSigma^+}
    M[4, 0] = -G * sc
    M[4, 1] = -G * s
    M[4, 2] = -G * ac
    M[4, 3] = -G * al
    M[4, 4] = -params.gamma_parallel

    D = np.zeros((5, 5), dtype=complex)
    D[0, 1] = 2 * params.kappa / N
    D[2, 3] = 2 * params.gamma / N
    D[2, 4] = 2 * params.gamma * s / N
    D[4, 3] = 2 * params.gamma * sc / N
    D[4, 4] = 2 * params.gamma * (sz + 0.5) / N
    return LinearSystem(M, D, state, params)


def lyapunov_moments(drift: np.ndarray, diffusion: np.ndarray) -> np.ndarray:
    """Solve ``M P + P M^T + D = 0`` (plain transpose) by Bartels-Stewart."""
    drift = np.atleast_2d(np.asarray(drift, dtype=complex))
    diffusion = np.atleast_2d(np.asarray(diffusion, dtype=complex))
    if np.max(np.linalg.eigvals(drift).real) >= -STABILITY_MARGIN:
        raise DomainError("drift matrix is not strictly stable; the reference state lies in or at "
                          "the edge of the unstable window (near a turning point)")
    return solve_sylvester(drift, drift.T, -diffusion)


def solve_lyapunov(system: LinearSystem) -> FluctuationCovariance:
    P = lyapunov_moments(system.drift, system.diffusion)
    M, D = system.drift, system.diffusion
    res = float(np.linalg.norm(M @ P + P @ M.T + D))
    N = system.params.n_atoms
    n_excess = P[1, 0].real  # <da+ da>
    sq = P[0, 0].real  # Re <da da>
    corr = complex(P[1, 2])
    return FluctuationCovariance(
        moments=P,
        var_x=0.25 + 0.5 * N * (n_excess + sq),
        var_y=0.25 + 0.5 * N * (n_excess - sq),
        corr_adag_Sigma=N**1.5 * corr,
        corr_scaled=N * corr,
        residual=res,
        n_atoms=N,
    )


@dataclass
class FluctuationRow:
    eta: float
    branch: str
    var_x: float
    var_y: float
    corr: complex
    corr_scaled: complex
    stable: bool

    @property
    def present(self) -> bool:
        return self.stable and math.isfinite(self.var_x)


def variance_scan(params: SystemParams, eta_grid, branch: str = "lower") -> list[FluctuationRow]:
    """Quadrature variances and atom-field correlation along one mean-field branch.

    Grid points where the branch does not exist or is unstable are returned with
    NaN entries and ``stable=False``.
    """
    if branch not in ("lower", "upper"):
        raise InvalidArgumentError("branch must be 'lower' or 'upper'")
    try:
        turning = mf.turning_points(params)
    except DomainError:
        turning = None
    nan = float("nan")
    rows = []
    for eta in np.asarray(eta_grid, dtype=float):
        p = params.with_(eta=float(eta))
        sols = mf.steady_states(p, turning=turning).solutions
        if turning is None and len(sols) == 1:
            sol = sols[0]
        else:
            sol = next((s for s in sols if s.label == branch), None)
        if sol is None or not sol.stable:
            rows.append(FluctuationRow(float(eta), branch, nan, nan, complex(nan, nan),
                                       complex(nan, nan), False))
            continue
        try:
            cov = solve_lyapunov(build_linear_system(p, sol.state))
        except DomainError:
            rows.append(FluctuationRow(float(eta), branch, nan, nan, complex(nan, nan),
                                       complex(nan, nan), False))
            continue
        rows.append(FluctuationRow(float(eta), branch, cov.var_x, cov.var_y, cov.corr_adag_Sigma,
                                   cov.corr_scaled, True))
    return rows
