"""Semiclassical Maxwell-Bloch equations: dynamics, steady states, S-curve.

Scaled variables: ``alpha = <a>/sqrt(N)``, ``s = <Sigma>/N``, ``s_z = <Sigma_z>/N``.
With ``G = sqrt(N) g`` and ``y = eta/sqrt(N)``::

    d alpha/dt = (i dM - kappa) alpha + G s + y
    d s/dt     = (i dA - gamma) s + 2 G s_z alpha
    d s_z/dt   = -gamma_par (s_z + 1/2) - G (s* alpha + alpha* s)

``gamma_par`` is ``params.gamma_parallel`` (2 gamma unless overridden).

Stationary points satisfy ``alpha (K + A / (1 + c u)) = y`` with
``K = kappa - i dM``, ``A = G^2 / (gamma - i dA)``, ``u = |alpha|^2`` and
saturation coefficient ``c = 4 G^2 gamma / (gamma_par (gamma^2 + dA^2))``.
Taking the squared modulus gives a real cubic in ``u``; at exact resonance
alpha is real and the state equation is a real cubic in alpha itself.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .errors import DomainError, InvalidArgumentError
from .params import SystemParams

STATIONARY_TOL = 1e-10
RESONANCE_THRESHOLD = 4.0
DEFAULT_ALPHA_MAX = math.sqrt(200.0)


@dataclass(frozen=True)
class MeanFieldState:
    alpha: complex
    s: complex
    s_z: float

    def to_real(self) -> np.ndarray:
        return np.array([self.alpha.real, self.alpha.imag, self.s.real, self.s.imag, self.s_z])

    @classmethod
    def from_real(cls, v) -> "MeanFieldState":
        return cls(complex(v[0], v[1]), complex(v[2], v[3]), float(v[4]))

    @classmethod
    def ground(cls) -> "MeanFieldState":
        return cls(0j, 0j, -0.5)


@dataclass
class BranchSolution:
    state: MeanFieldState
    stable: bool
    label: str
    multiplicity: int = 1
    residual: float = 0.0
    eigenvalues: np.ndarray = field(default=None, repr=False)


@dataclass
class MeanFieldBranch:
    eta: float
    solutions: list[BranchSolution]

    def by_label(self, label: str) -> BranchSolution | None:
        for sol in self.solutions:
            if sol.label == label:
                return sol
        return None

    def __len__(self):
        return len(self.solutions)


@dataclass(frozen=True)
class TurningPoints:
    eta_low: float
    eta_high: float
    alpha_low: float  # |alpha| at the fold ending the upper branch (at eta_low)
    alpha_high: float  # |alpha| at the fold ending the lower branch (at eta_high)
    state_low: MeanFieldState
    state_high: MeanFieldState

    def midpoint(self) -> float:
        return 0.5 * (self.eta_low + self.eta_high)


def mb_rhs(state: MeanFieldState, params: SystemParams) -> MeanFieldState:
    G = params.collective_g
    al, s, sz = state.alpha, state.s, state.s_z
    d_alpha = complex(-params.kappa, params.delta_m) * al + G * s + params.scaled_eta
    d_s = complex(-params.gamma, params.delta_a) * s + 2.0 * G * sz * al
    d_sz = -params.gamma_parallel * (sz + 0.5) - G * 2.0 * (s.conjugate() * al).real
    return MeanFieldState(d_alpha, d_s, float(d_sz))


def _rhs_real(_t, v, params):
    return mb_rhs(MeanFieldState.from_real(v), params).to_real()


def residual(state: MeanFieldState, params: SystemParams) -> float:
    return float(np.max(np.abs(mb_rhs(state, params).to_real())))


def jacobian(state: MeanFieldState, params: SystemParams) -> np.ndarray:
    """Jacobian of ``mb_rhs`` in (Re alpha, Im alpha, Re s, Im s, s_z)."""
    G = params.collective_g
    k, dm, gm, da = params.kappa, params.delta_m, params.gamma, params.delta_a
    ar, ai = state.alpha.real, state.alpha.imag
    sr, si = state.s.real, state.s.imag
    sz = state.s_z
    J = np.zeros((5, 5))
    J[0] = [-k, -dm, G, 0.0, 0.0]
    J[1] = [dm, -k, 0.0, G, 0.0]
    J[2] = [2 * G * sz, 0.0, -gm, -da, 2 * G * ar]
    J[3] = [0.0, 2 * G * sz, da, -gm, 2 * G * ai]
    # s* alpha + alpha* s = 2 (sr ar + si ai)
    J[4] = [-2 * G * sr, -2 * G * si, -2 * G * ar, -2 * G * ai, -params.gamma_parallel]
    return J


def eigenvalues(state: MeanFieldState, params: SystemParams) -> np.ndarray:
    return np.linalg.eigvals(jacobian(state, params))


def is_stable(state: MeanFieldState, params: SystemParams) -> bool:
    return bool(np.max(eigenvalues(state, params).real) < 0.0)


@dataclass
class MeanFieldTrajectory:
    times: np.ndarray
    states: np.ndarray  # (n_times, 5) real coordinates
    residual: float
    converged: bool

    @property
    def final(self) -> MeanFieldState:
        return MeanFieldState.from_real(self.states[-1])


def integrate_mb(initial: MeanFieldState, params: SystemParams, t_final: float,
                 n_out: int = 200, rtol: float = 1e-10, atol: float = 1e-12,
                 tol: float = 1e-8) -> MeanFieldTrajectory:
    """Adaptive (DOP853) relaxation of the Maxwell-Bloch equations.

    ``converged`` is False when the terminal ``|mb_rhs|`` exceeds ``tol``; this is
    reported, not raised.
    """
    if not t_final > 0:
        raise InvalidArgumentError("t_final must be > 0")
    t_eval = np.linspace(0.0, t_final, n_out)
    sol = solve_ivp(_rhs_real, (0.0, t_final), initial.to_real(), method="DOP853",
                    t_eval=t_eval, rtol=rtol, atol=atol, args=(params,))
    states = sol.y.T
    res = residual(MeanFieldState.from_real(states[-1]), params)
    return MeanFieldTrajectory(sol.t, states, res, bool(sol.success and res < tol))


# ---------------------------------------------------------------------------
# steady states


def _saturation_coefficient(params: SystemParams) -> float:
    G2 = params.collective_g**2
    return 4.0 * G2 * params.gamma / (params.gamma_parallel * (params.gamma**2 + params.delta_a**2))


def _is_resonant(params: SystemParams) -> bool:
    return params.delta_m == 0.0 and params.delta_a == 0.0


def real_cubic_roots(c3: float, c2: float, c1: float, c0: float,
                     rel_tol: float = 1e-12) -> list[tuple[float, int]]:
    """Real roots of c3 x^3 + c2 x^2 + c1 x + c0 with multiplicities.

    Closed form (trigonometric for three real roots, Cardano otherwise),
    then Newton-polished on the original polynomial.
    """
    if c3 == 0:
        raise InvalidArgumentError("leading coefficient must be nonzero")
    b, c, d = c2 / c3, c1 / c3, c0 / c3
    p = c - b * b / 3.0
    q = 2.0 * b**3 / 27.0 - b * c / 3.0 + d
    shift = -b / 3.0
    disc = (q / 2.0) ** 2 + (p / 3.0) ** 3
    scale = (abs(q) / 2.0) ** 2 + (abs(p) / 3.0) ** 3
    if scale == 0.0:
        roots = [(shift, 3)]
    elif abs(disc) <= rel_tol * scale:
        # double root
        u = np.cbrt(-q / 2.0)
        roots = sorted([(shift + 2 * u, 1), (shift - u, 2)])
    elif disc < 0:
        r = 2.0 * math.sqrt(-p / 3.0)
        arg = max(-1.0, min(1.0, 3.0 * q / (p * r)))
        phi = math.acos(arg) / 3.0
        roots = sorted((shift + r * math.cos(phi - 2.0 * math.pi * k / 3.0), 1) for k in range(3))
    else:
        sq = math.sqrt(disc)
        roots = [(shift + np.cbrt(-q / 2.0 + sq) + np.cbrt(-q / 2.0 - sq), 1)]

    def poly(x):
        return ((c3 * x + c2) * x + c1) * x + c0

    def dpoly(x):
        return (3 * c3 * x + 2 * c2) * x + c1

    polished = []
    for x, mult in roots:
        for _ in range(3):
            dp = dpoly(x)
            if dp == 0 or mult > 1:
                break
            step = poly(x) / dp
            x -= step
            if abs(step) <= 1e-16 * max(1.0, abs(x)):
                break
        polished.append((float(x), mult))
    return polished


def _state_from_u(u: float, params: SystemParams) -> MeanFieldState:
    G = params.collective_g
    c = _saturation_coefficient(params)
    K = complex(params.kappa, -params.delta_m)
    A = G**2 / complex(params.gamma, -params.delta_a)
    sat = 1.0 + c * u
    alpha = params.scaled_eta * sat / (K * sat + A)
    s_z = -0.5 / sat
    s = 2.0 * G * s_z * alpha / complex(params.gamma, -params.delta_a)
    return MeanFieldState(complex(alpha), complex(s), float(s_z))


def _state_from_real_alpha(x: float, params: SystemParams) -> MeanFieldState:
    G = params.collective_g
    s_z = -0.5 / (1.0 + _saturation_coefficient(params) * x * x)
    return MeanFieldState(complex(x), complex(2.0 * G * s_z * x / params.gamma), float(s_z))


def _polish(state: MeanFieldState, params: SystemParams) -> MeanFieldState:
    """Newton refinement on the 5-d real system, kept only if it lowers the residual."""
    best, best_res = state, residual(state, params)
    v = state.to_real()
    for _ in range(4):
        if best_res < 1e-15:
            break
        J = jacobian(MeanFieldState.from_real(v), params)
        try:
            v = v - np.linalg.solve(J, mb_rhs(MeanFieldState.from_real(v), params).to_real())
        except np.linalg.LinAlgError:
            break
        cand = MeanFieldState.from_real(v)
        res = residual(cand, params)
        if res < best_res:
            best, best_res = cand, res
    return best


def _raw_steady_states(params: SystemParams) -> list[tuple[MeanFieldState, int]]:
    y = params.scaled_eta
    c = _saturation_coefficient(params)
    if y == 0.0:
        return [(MeanFieldState.ground(), 1)]
    if _is_resonant(params):
        k = params.kappa
        two_c = params.collective_g**2 / (params.kappa * params.gamma)
        # y (1 + c x^2) = k x (1 + c x^2 + 2C)
        roots = real_cubic_roots(k * c, -y * c, k * (1.0 + two_c), -y)
        return [(_state_from_real_alpha(x, params), m) for x, m in roots if x > 0]
    G = params.collective_g
    K = complex(params.kappa, -params.delta_m)
    A = G**2 / complex(params.gamma, -params.delta_a)
    p0, p1 = K + A, K * c
    # u |p0 + p1 u|^2 = y^2 (1 + c u)^2
    coeffs = (abs(p1) ** 2, 2.0 * (p0 * p1.conjugate()).real - (y * c) ** 2,
              abs(p0) ** 2 - 2.0 * y * y * c, -y * y)
    roots = real_cubic_roots(*coeffs)
    return [(_state_from_u(u, params), m) for u, m in roots if u > 0]


def _classify(state: MeanFieldState, params: SystemParams, label: str, mult: int) -> BranchSolution:
    state = _polish(state, params)
    ev = eigenvalues(state, params)
    return BranchSolution(state, bool(np.max(ev.real) < 0.0), label, mult,
                          residual(state, params), ev)


def steady_states(params: SystemParams, turning: TurningPoints | None = None) -> MeanFieldBranch:
    """All stationary solutions at ``params.eta``, sorted by |alpha|.

    Three solutions are labelled lower/middle/upper. A lone solution is 'upper'
    when eta lies above the bistable window and 'lower' otherwise.
    """
    raw = sorted(_raw_steady_states(params), key=lambda sm: abs(sm[0].alpha))
    if len(raw) >= 3:
        labels = ["lower", "middle", "upper"][: len(raw)]
    elif len(raw) == 2:
        # exactly at a fold: the double root is the merging pair
        labels = ["lower", "upper"]
    else:
        labels = ["lower"]
        if turning is None:
            try:
                turning = turning_points(params)
            except DomainError:
                turning = None
        if turning is not None and params.eta >= turning.eta_high:
            labels = ["upper"]
    sols = [_classify(st, params, lab, m) for (st, m), lab in zip(raw, labels)]
    return MeanFieldBranch(float(params.eta), sols)


def trace_scurve(params: SystemParams, eta_grid) -> list[MeanFieldBranch]:
    """Steady states along ``eta_grid`` with labels carried by nearest-|alpha| matching."""
    grid = np.asarray(eta_grid, dtype=float)
    if grid.size > 1 and np.any(np.diff(grid) < 0):
        raise InvalidArgumentError("eta_grid must be sorted ascending")
    out: list[MeanFieldBranch] = []
    prev: MeanFieldBranch | None = None
    for eta in grid:
        p = params.with_(eta=float(eta))
        raw = sorted(_raw_steady_states(p), key=lambda sm: abs(sm[0].alpha))
        if len(raw) >= 3:
            labels = ["lower", "middle", "upper"]
        elif prev is None or not prev.solutions:
            labels = ["lower"] * len(raw)
        else:
            labels = []
            for st, _ in raw:
                nearest = min(prev.solutions, key=lambda sol: abs(abs(sol.state.alpha) - abs(st.alpha)))
                labels.append(nearest.label if nearest.label != "middle" else "lower")
        branch = MeanFieldBranch(float(eta), [_classify(st, p, lab, m)
                                              for (st, m), lab in zip(raw, labels)])
        out.append(branch)
        prev = branch
    return out


def output_amplitude(state: MeanFieldState, params: SystemParams) -> float:
    """sqrt(kappa N) |alpha|, comparable to sqrt(kappa <a+a>)."""
    return math.sqrt(params.kappa * params.n_atoms) * abs(state.alpha)


# ---------------------------------------------------------------------------
# turning points


def _scaled_drive_of_alpha(x: float, params: SystemParams) -> tuple[float, float]:
    """(y, dy/dx) on the state equation, with x = |alpha| and y = eta/sqrt(N)."""
    G2 = params.collective_g**2
    c = _saturation_coefficient(params)
    K = complex(params.kappa, -params.delta_m)
    Ab = G2 / complex(params.gamma, -params.delta_a)
    sat = 1.0 + c * x * x
    F = K + Ab / sat
    dF = -Ab * 2.0 * c * x / sat**2
    aF = abs(F)
    return x * aF, aF + x * (F.conjugate() * dF).real / aF


def turning_points(params: SystemParams, alpha_max: float = DEFAULT_ALPHA_MAX,
                   n_grid: int = 2000) -> TurningPoints:
    """The two drive strengths where d eta / d|alpha| = 0 on the state equation.

    Bracketed on a uniform |alpha| grid over (0, alpha_max], then refined with
    Brent's method in |alpha| so the fold states themselves are accurate.
    """
    xs = np.linspace(0.0, alpha_max, n_grid + 1)[1:]
    dys = np.array([_scaled_drive_of_alpha(x, params)[1] for x in xs])
    crossings = np.nonzero(np.sign(dys[:-1]) != np.sign(dys[1:]))[0]
    if crossings.size < 2:
        raise DomainError(
            f"no bistability for these parameters (cooperativity C = {params.cooperativity():.6g}; "
            f"at resonance bistability needs C > {RESONANCE_THRESHOLD:g})")
    folds = []
    for i in crossings[:2]:
        x = brentq(lambda v: _scaled_drive_of_alpha(v, params)[1], xs[i], xs[i + 1],
                   xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
        folds.append(x)
    sqrt_n = math.sqrt(params.n_atoms)
    etas = [sqrt_n * _scaled_drive_of_alpha(x, params)[0] for x in folds]

    def fold_state(x, eta):
        p = params.with_(eta=eta)
        u = x * x
        return _state_from_real_alpha(x, p) if _is_resonant(p) else _state_from_u(u, p)

    # the fold at smaller |alpha| terminates the lower branch at the larger eta
    (x_hi_eta, x_lo_eta), (e_hi, e_lo) = folds, etas
    if e_hi < e_lo:
        x_hi_eta, x_lo_eta, e_hi, e_lo = x_lo_eta, x_hi_eta, e_lo, e_hi
    return TurningPoints(eta_low=e_lo, eta_high=e_hi, alpha_low=x_lo_eta, alpha_high=x_hi_eta,
                         state_low=fold_state(x_lo_eta, e_lo), state_high=fold_state(x_hi_eta, e_hi))


def soft_mode(state: MeanFieldState, params: SystemParams) -> complex:
    """Jacobian eigenvalue of smallest modulus."""
    ev = eigenvalues(state, params)
    return complex(ev[np.argmin(np.abs(ev))])
