"""Wigner function of the cavity mode from its Fock-basis density matrix.

Phase-space point ``(x, y)`` corresponds to the complex amplitude ``x + i y``;
``x`` and ``y`` are the expectation values of the quadratures
``X = (a + a^+)/2`` and ``Y = (a - a^+)/(2i)``, so a coherent state ``|beta>``
gives ``W = (2/pi) exp(-2 |x + i y - beta|^2)``.

Two evaluation paths are provided:

* ``wigner_from_density`` evaluates the Hermite double-sum expansion
  ``(2/pi) e^{-2(x^2+y^2)} sum_{m,n} rho_mn (-1)^n (2i)^{-m-n} / sqrt(m! n!)
  sum_{k',k''} C(m,k') C(n,k'') i^{k'+k''} (-1)^{k'} H_{k'+k''}(-2x) H_{m+n-k'-k''}(2y)``.
  The inner binomial sums are exact integers, all factorial ratios are formed in
  log space, and the Gaussian is absorbed into scaled Hermite functions, so the
  whole thing collapses to a bilinear form evaluated with two matrix products.
* ``wigner_laguerre`` uses the associated-Laguerre representation through a
  stable three-term recursion; it has no size limit and serves as the
  cross-check path.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gammaln

from .errors import CapabilityError, InvalidArgumentError

log = logging.getLogger(__name__)

# phase-space convention: (x, y) -> x + i y, verified by the coherent-state test
COORDINATE_SIGN = (1, 1)
FORMULA_MAX_DIM = 120
TRIM_TOL = 1e-15


@dataclass(frozen=True)
class PhaseSpaceGrid:
    x_min: float = -6.0
    x_max: float = 6.0
    y_min: float = -6.0
    y_max: float = 6.0
    nx: int = 201
    ny: int = 201

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2:
            raise InvalidArgumentError("grid needs at least 2 points per axis")
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise InvalidArgumentError("grid bounds must satisfy max > min")

    @property
    def xs(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.nx)

    @property
    def ys(self) -> np.ndarray:
        return np.linspace(self.y_min, self.y_max, self.ny)


@dataclass
class WignerField:
    values: np.ndarray  # shape (nx, ny), values[i, j] = W(xs[i], ys[j])
    grid: PhaseSpaceGrid


@dataclass(frozen=True)
class WignerMoments:
    norm: float
    mean_x: float
    mean_y: float
    var_x: float
    var_y: float


def hermite_sequence(k_max: int, x):
    """Physicists' Hermite polynomials H_0..H_{k_max} at ``x`` (leading axis = order)."""
    if k_max < 0:
        raise InvalidArgumentError("k_max must be >= 0")
    x = np.asarray(x, dtype=float)
    out = np.empty((k_max + 1,) + x.shape)
    out[0] = 1.0
    if k_max >= 1:
        out[1] = 2.0 * x
    for k in range(1, k_max):
        out[k + 1] = 2.0 * x * out[k] - 2.0 * k * out[k - 1]
    return out


def hermite_function_sequence(k_max: int, z):
    """H_j(z) exp(-z^2/2) / sqrt(2^j j!) for j = 0..k_max; bounded for all z."""
    z = np.asarray(z, dtype=float)
    out = np.empty((k_max + 1,) + z.shape)
    out[0] = np.exp(-0.5 * z * z)
    if k_max >= 1:
        out[1] = math.sqrt(2.0) * z * out[0]
    for j in range(1, k_max):
        out[j + 1] = math.sqrt(2.0 / (j + 1)) * z * out[j] - math.sqrt(j / (j + 1)) * out[j - 1]
    return out


def _check_hermitian(rho: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise InvalidArgumentError("density matrix must be square")
    if np.max(np.abs(rho - rho.conj().T), initial=0.0) > tol:
        raise InvalidArgumentError("density matrix is not Hermitian")
    return rho


def effective_dimension(rho: np.ndarray, tol: float = TRIM_TOL) -> int:
    """Smallest D such that all entries outside the leading D x D block are below tol * max|rho|."""
    mag = np.abs(rho)
    scale = mag.max(initial=0.0)
    if scale == 0.0:
        return 1
    big = np.nonzero((mag > tol * scale).any(axis=0) | (mag > tol * scale).any(axis=1))[0]
    return int(big.max()) + 1


@lru_cache(maxsize=8)
def _formula_tensor(dim: int):
    """Coefficients c[m, n, j] of H_j(-2x) H_{m+n-j}(2y) (scaled form) for each rho_mn.

    Returns (coef, rows, cols) with coef of shape (dim, dim, 2*dim - 1); entries with
    j > m + n are zero and their (rows, cols) indices point at (0, 0).
    """
    width = 2 * dim - 1
    coef = np.zeros((dim, dim, width), dtype=complex)
    lg = gammaln(np.arange(width + 1) + 1.0)
    ln2 = math.log(2.0)
    for n in range(dim):
        # exact integer coefficients of (1 - z)^m (1 + z)^n, starting at m = 0
        poly = [math.comb(n, k) for k in range(n + 1)]
        for m in range(dim):
            if m > 0:
                poly = [(poly[k] if k < len(poly) else 0) - (poly[k - 1] if k >= 1 else 0)
                        for k in range(len(poly) + 1)]
            L = m + n
            for j, t in enumerate(poly):
                if t == 0:
                    continue
                l_ = L - j
                logmag = (math.log(abs(t)) + 0.5 * (lg[j] + lg[l_] - lg[m] - lg[n]) - 0.5 * L * ln2)
                sign = -1.0 if (t < 0) ^ (n % 2 == 1) else 1.0
                phase = (1, 1j, -1, -1j)[(j - L) % 4]
                coef[m, n, j] = sign * phase * math.exp(logmag)
    m_idx, n_idx, j_idx = np.meshgrid(np.arange(dim), np.arange(dim), np.arange(width), indexing="ij")
    valid = j_idx <= m_idx + n_idx
    rows = np.where(valid, j_idx, 0)
    cols = np.where(valid, m_idx + n_idx - j_idx, 0)
    return coef, rows, cols


def _hermite_matrix(rho: np.ndarray) -> np.ndarray:
    """R[j, l] such that W = (2/pi) sum_{j,l} h_j(-2x) R[j, l] h_l(2y)."""
    dim = rho.shape[0]
    coef, rows, cols = _formula_tensor(dim)
    width = 2 * dim - 1
    w = (rho[:, :, None] * coef).ravel()
    flat = (rows * width + cols).ravel()
    R = np.bincount(flat, weights=w.real, minlength=width * width) + \
        1j * np.bincount(flat, weights=w.imag, minlength=width * width)
    return R.reshape(width, width)


def wigner_from_density(rho, grid: PhaseSpaceGrid | None = None) -> WignerField:
    grid = grid or PhaseSpaceGrid()
    rho = _check_hermitian(rho)
    dim = effective_dimension(rho)
    if dim > FORMULA_MAX_DIM:
        raise CapabilityError(
            f"Fock support {dim} exceeds the {FORMULA_MAX_DIM}-level limit of the Hermite "
            "double-sum path; use wigner_laguerre for this state")
    rho = rho[:dim, :dim]
    R = _hermite_matrix(rho)
    k_max = 2 * dim - 2
    hx = hermite_function_sequence(k_max, -2.0 * COORDINATE_SIGN[0] * grid.xs)
    hy = hermite_function_sequence(k_max, 2.0 * COORDINATE_SIGN[1] * grid.ys)
    W = (2.0 / math.pi) * (hx.T @ R @ hy)
    scale = max(1.0, float(np.max(np.abs(W.real))))
    resid = float(np.max(np.abs(W.imag)))
    if resid > 1e-9 * scale:
        raise InvalidArgumentError(f"Wigner function has an imaginary residue of {resid:.3g}")
    return WignerField(np.ascontiguousarray(W.real), grid)


def wigner_laguerre(rho, grid: PhaseSpaceGrid | None = None) -> WignerField:
    """Cross-check path: W = sum rho_mn W_mn with Laguerre-function recursion."""
    grid = grid or PhaseSpaceGrid()
    rho = _check_hermitian(rho)
    dim = effective_dimension(rho)
    rho = rho[:dim, :dim]
    lam = grid.xs[:, None] + 1j * grid.ys[None, :]
    x = 4.0 * np.abs(lam) ** 2
    two_lam_c = 2.0 * lam.conj()
    with np.errstate(divide="ignore"):
        log_r = np.log(np.abs(two_lam_c))
    phase = np.exp(1j * np.angle(two_lam_c))
    W = np.zeros(lam.shape)
    for d in range(dim):
        # q_n ~ (-1)^n sqrt(n!/(n+d)!) (2 lam*)^d e^{-x/2} L_n^(d)(x)
        if d == 0:
            q0 = np.exp(-0.5 * x).astype(complex)
        else:
            with np.errstate(invalid="ignore"):
                q0 = np.where(x > 0, np.exp(d * log_r - 0.5 * x - 0.5 * gammaln(d + 1.0)), 0.0)
            q0 = q0 * phase**d
        acc = rho[d, 0] * q0
        q_prev, q = None, q0
        for n in range(1, dim - d):
            nxt = -(2 * n - 1 + d - x) / math.sqrt(n * (n + d)) * q
            if q_prev is not None:
                nxt = nxt - math.sqrt((n - 1) * (n + d - 1) / (n * (n + d))) * q_prev
            q_prev, q = q, nxt
            acc = acc + rho[n + d, n] * q
        W += acc.real if d == 0 else 2.0 * acc.real
    return WignerField((2.0 / math.pi) * W, grid)


def wigner(rho, grid: PhaseSpaceGrid | None = None, method: str = "auto") -> WignerField:
    """Dispatch: 'formula', 'laguerre', or 'auto' (formula when the support allows)."""
    if method == "formula":
        return wigner_from_density(rho, grid)
    if method == "laguerre":
        return wigner_laguerre(rho, grid)
    if method != "auto":
        raise InvalidArgumentError(f"unknown Wigner method {method!r}")
    if effective_dimension(np.asarray(rho)) <= FORMULA_MAX_DIM:
        return wigner_from_density(rho, grid)
    return wigner_laguerre(rho, grid)


def coherent_density(beta: complex, dim: int | None = None) -> np.ndarray:
    """|beta><beta| truncated to ``dim`` Fock levels (default: enough to reach ~1e-16)."""
    r = abs(beta)
    if dim is None:
        dim = max(30, int(r * r + 12 * r + 20))
    n = np.arange(dim)
    amp = np.zeros(dim, dtype=complex)
    if r == 0:
        amp[0] = 1.0
    else:
        amp = np.exp(n * math.log(r) - 0.5 * gammaln(n + 1.0) - 0.5 * r * r + 1j * n * np.angle(beta))
    return np.outer(amp, amp.conj())


def wigner_moments(field: WignerField, coverage_tol: float = 1e-2) -> WignerMoments:
    xs, ys = field.grid.xs, field.grid.ys
    W = field.values

    def integrate(f):
        return float(np.trapezoid(np.trapezoid(f, ys, axis=1), xs))

    X = xs[:, None]
    Y = ys[None, :]
    norm = integrate(W)
    if abs(norm - 1.0) > coverage_tol:
        log.warning("Wigner field integrates to %.6g; the grid does not cover the state", norm)
    mx = integrate(X * W) / norm
    my = integrate(Y * W) / norm
    vx = integrate((X - mx) ** 2 * W) / norm
    vy = integrate((Y - my) ** 2 * W) / norm
    return WignerMoments(norm, mx, my, vx, vy)


def local_maxima(values: np.ndarray, min_fraction: float = 0.05) -> list[tuple[int, int]]:
    """Grid indices of strict local maxima (8-neighbourhood) above min_fraction * global max."""
    v = np.asarray(values)
    pad = np.pad(v, 1, constant_values=-np.inf)
    core = pad[1:-1, 1:-1]
    is_max = np.ones_like(v, dtype=bool)
    for dx in (-1, 0, 1):
        for dy in (-1, 0, 1):
            if dx == 0 and dy == 0:
                continue
            is_max &= core > pad[1 + dx: pad.shape[0] - 1 + dx, 1 + dy: pad.shape[1] - 1 + dy]
    is_max &= v > min_fraction * v.max()
    return [tuple(int(i) for i in idx) for idx in np.argwhere(is_max)]
