"""Monte Carlo wave-function trajectories and steady-state time averages.

A single long trajectory is unravelled with the waiting-time (norm threshold)
scheme: draw ``r ~ U(0, 1]``, integrate the non-Hermitian Schroedinger equation
with fixed-step RK4 until the squared norm drops to ``r``, locate the crossing
by bisection, then apply a jump chosen with probability proportional to its
rate. After a burn-in period the normalized state is sampled every
``sample_interval`` and all steady-state quantities are time averages over
those samples.
"""
from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels as K
from .errors import DegenerateStateError, InvalidArgumentError, StepSizeError
from .hilbert import BasisLayout, StateVector, _coef, basis_state
from .params import SystemParams

log = logging.getLogger(__name__)

CAVITY = 0
THREADS_ENV = "OBSIM_THREADS"
TRUNCATION_WARN_LEVEL = 1e-6


def atom_channel(i: int) -> int:
    return i + 1


def channel_name(channel: int) -> str:
    return "cavity" if channel == CAVITY else f"atom{channel - 1}"


@dataclass(frozen=True)
class TrajectoryConfig:
    """Integration and sampling settings. Times are in units of 1/gamma."""

    dim_mode: int = 40
    dt_max: float = 0.01
    burn_in: float = 50.0
    sample_interval: float = 1.0
    total_time: float = 2.0e4
    seed: int = 0
    norm_tolerance: float = 1e-8
    n_bins: int = 100
    hist_max: float | None = None
    block_length: int = 50

    def __post_init__(self):
        if self.dim_mode < 2:
            raise InvalidArgumentError("dim_mode must be >= 2")
        if not self.dt_max > 0:
            raise InvalidArgumentError("dt_max must be > 0")
        if not self.sample_interval > 0:
            raise InvalidArgumentError("sample_interval must be > 0")
        if not 0 <= self.burn_in < self.total_time:
            raise InvalidArgumentError("need 0 <= burn_in < total_time")
        if self.n_samples < 1:
            raise InvalidArgumentError("total_time leaves no room for a sample after burn_in")
        if not 0 <= self.seed < 2**64:
            raise InvalidArgumentError("seed must be an unsigned 64-bit integer")
        if self.n_bins < 1 or self.block_length < 1:
            raise InvalidArgumentError("n_bins and block_length must be >= 1")

    @property
    def n_samples(self) -> int:
        return int(np.floor((self.total_time - self.burn_in) / self.sample_interval + 1e-9))

    def histogram_range(self, params: SystemParams) -> float:
        if self.hist_max is not None:
            return float(self.hist_max)
        return 1.5 * float(np.sqrt(params.kappa * self.dim_mode))


@dataclass(frozen=True)
class JumpEvent:
    time: float
    channel: int

    @property
    def channel_name(self) -> str:
        return channel_name(self.channel)


@dataclass
class SteadyStateStats:
    mean_photon_number: float
    out_amplitude: float
    mean_a: complex
    mean_a_squared: complex
    mean_Sigma: complex
    mean_Sigma_z: float
    mean_atom_excitation: float
    mean_adag_Sigma: complex
    corr_adag_Sigma: complex
    quad_var_x: float
    quad_var_y: float
    factorial_moment2: float
    hist_edges: np.ndarray
    hist_counts: np.ndarray
    mode_density: np.ndarray
    n_samples: int
    n_jumps_per_channel: np.ndarray
    std_errors: dict
    max_top_population: float
    truncation_warning: bool
    samples: np.ndarray = field(repr=False)
    block_means: np.ndarray = field(repr=False)
    jump_times: list = field(default_factory=list, repr=False)
    jump_channels: list = field(default_factory=list, repr=False)
    seeds: list = field(default_factory=list)

    @property
    def amplitude_histogram(self) -> tuple[np.ndarray, np.ndarray]:
        return self.hist_edges, self.hist_counts

    def jump_events(self, worker: int = 0) -> list[JumpEvent]:
        return [JumpEvent(float(t), int(c))
                for t, c in zip(self.jump_times[worker], self.jump_channels[worker])]

    def summary(self) -> dict:
        """JSON-serializable scalar summary."""
        def cpx(z):
            return [float(np.real(z)), float(np.imag(z))]
        return {
            "mean_photon_number": float(self.mean_photon_number),
            "out_amplitude": float(self.out_amplitude),
            "mean_a": cpx(self.mean_a),
            "mean_a_squared": cpx(self.mean_a_squared),
            "mean_Sigma": cpx(self.mean_Sigma),
            "mean_Sigma_z": float(self.mean_Sigma_z),
            "mean_atom_excitation": float(self.mean_atom_excitation),
            "mean_adag_Sigma": cpx(self.mean_adag_Sigma),
            "corr_adag_Sigma": cpx(self.corr_adag_Sigma),
            "quad_var_x": float(self.quad_var_x),
            "quad_var_y": float(self.quad_var_y),
            "factorial_moment2": float(self.factorial_moment2),
            "n_samples": int(self.n_samples),
            "n_jumps_per_channel": [int(c) for c in self.n_jumps_per_channel],
            "std_errors": {k: float(v) for k, v in self.std_errors.items()},
            "max_top_population": float(self.max_top_population),
            "truncation_warning": bool(self.truncation_warning),
            "seeds": [list(s) for s in self.seeds],
        }


def trajectory_rng(seed: int, worker: int = 0) -> np.random.Generator:
    """RNG stream of ensemble worker ``worker``: PCG64 seeded by SeedSequence(seed, spawn_key=(worker,))."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(worker,))))


def propagate_no_jump(state: StateVector, dt: float, params: SystemParams,
                      dt_max: float = 0.01) -> StateVector:
    """One RK4 step of size ``dt`` under H_eff; the result is not renormalized."""
    if not 0 < dt <= dt_max:
        raise InvalidArgumentError(f"dt must lie in (0, {dt_max}], got {dt}")
    lay = state.layout
    psi = state.amplitudes
    out = np.empty_like(psi)
    k1, k2, k3, tmp = (np.empty_like(psi) for _ in range(4))
    K.rk4_step(psi, dt, out, k1, k2, k3, tmp, lay.n_atoms, lay.dim_mode, _coef(params),
               K.popcounts(lay.n_atoms))
    if K.norm2(out) > K.norm2(psi) * (1.0 + 1e-8):
        raise StepSizeError(f"norm grew during a no-jump step of size {dt}; reduce dt_max")
    return StateVector(out, lay)


def jump_rates(state: StateVector, params: SystemParams) -> np.ndarray:
    """Normalized rates [2 kappa <a+a>, 2 gamma <s0+ s0>, ...]."""
    lay = state.layout
    rates = np.empty(lay.n_atoms + 1)
    K.channel_rates(state.amplitudes, lay.n_atoms, lay.dim_mode, params.kappa, params.gamma,
                    K.popcounts(lay.n_atoms), rates)
    nrm = state.norm2()
    if nrm <= 0:
        raise DegenerateStateError("jump rates of a zero-norm state")
    return rates / nrm


def sample_jump(state: StateVector, rng: np.random.Generator,
                params: SystemParams) -> tuple[int, StateVector]:
    """Choose a jump channel with probability proportional to its rate and apply it."""
    rates = jump_rates(state, params)
    total = rates.sum()
    if total <= 0:
        raise DegenerateStateError("all jump rates vanish; a jump cannot occur in a dark state")
    u = rng.random() * total
    channel = int(min(np.searchsorted(np.cumsum(rates), u, side="right"), len(rates) - 1))
    lay = state.layout
    out = np.empty_like(state.amplitudes)
    K.apply_jump(state.amplitudes, out, channel, lay.n_atoms, lay.dim_mode)
    return channel, StateVector(out, lay).normalized()


def _block_means(samples: np.ndarray, block_length: int) -> np.ndarray:
    n_blocks = samples.shape[0] // block_length
    if n_blocks == 0:
        return samples.mean(axis=0, keepdims=True)
    return samples[: n_blocks * block_length].reshape(n_blocks, block_length, -1).mean(axis=1)


def _derived(m: np.ndarray) -> dict:
    """Derived quantities from a row of time-averaged moments."""
    n = m[K.M_N].real
    a = m[K.M_A]
    a2 = m[K.M_A2]
    return {
        "corr": m[K.M_ADAG_SIGMA] - np.conj(a) * m[K.M_SIGMA],
        "var_x": 0.25 * (1 + 2 * n + 2 * a2.real) - a.real**2,
        "var_y": 0.25 * (1 + 2 * n - 2 * a2.real) - a.imag**2,
    }


def _jackknife_errors(blocks: np.ndarray) -> dict:
    nb_ = blocks.shape[0]
    if nb_ < 2:
        return {}
    total = blocks.sum(axis=0)
    loo = [(total - blocks[i]) / (nb_ - 1) for i in range(nb_)]
    vals = [_derived(m) for m in loo]
    out = {}
    for key, parts in (("corr", ("re_corr_adag_Sigma", "im_corr_adag_Sigma")),):
        z = np.array([v[key] for v in vals])
        for part, arr in zip(parts, (z.real, z.imag)):
            out[part] = float(np.sqrt((nb_ - 1) / nb_ * np.sum((arr - arr.mean()) ** 2)))
    for key in ("var_x", "var_y"):
        arr = np.array([v[key] for v in vals])
        out["quad_" + key] = float(np.sqrt((nb_ - 1) / nb_ * np.sum((arr - arr.mean()) ** 2)))
    return out


def _finalize(params: SystemParams, config: TrajectoryConfig, samples_list, rho_sum,
              jump_counts, jump_times, jump_channels, seeds) -> SteadyStateStats:
    samples = np.concatenate(samples_list, axis=0)
    n_samples = samples.shape[0]
    blocks = np.concatenate([_block_means(s, config.block_length) for s in samples_list], axis=0)
    mean = samples.mean(axis=0)
    rho = rho_sum / n_samples
    rho = 0.5 * (rho + rho.conj().T)

    photons = samples[:, K.M_N].real
    amp = np.sqrt(params.kappa * np.clip(photons, 0.0, None))
    hmax = config.histogram_range(params)
    edges = np.linspace(0.0, hmax, config.n_bins + 1)
    idx = np.clip((amp / hmax * config.n_bins).astype(np.int64), 0, config.n_bins - 1)
    counts = np.bincount(idx, minlength=config.n_bins)

    n_blocks = blocks.shape[0]
    se = {}
    cols = {
        "photon_number": blocks[:, K.M_N].real,
        "Sigma_z": blocks[:, K.M_SIGMA_Z].real,
        "atom_excitation": blocks[:, K.M_SIGMA_Z].real + 0.5 * params.n_atoms,
        "re_a": blocks[:, K.M_A].real, "im_a": blocks[:, K.M_A].imag,
        "re_Sigma": blocks[:, K.M_SIGMA].real, "im_Sigma": blocks[:, K.M_SIGMA].imag,
        "re_adag_Sigma": blocks[:, K.M_ADAG_SIGMA].real,
        "im_adag_Sigma": blocks[:, K.M_ADAG_SIGMA].imag,
    }
    for name, col in cols.items():
        se[name] = float(col.std(ddof=1) / np.sqrt(n_blocks)) if n_blocks > 1 else float("nan")
    se.update(_jackknife_errors(blocks))

    top = float(samples[:, K.M_TOP].real.max())
    warn = top > TRUNCATION_WARN_LEVEL
    if warn:
        log.warning("top Fock level population reached %.3g (dim_mode=%d); increase dim_mode",
                    top, config.dim_mode)
    d = _derived(mean)
    fock = np.arange(rho.shape[0])
    n_mean = float(mean[K.M_N].real)
    return SteadyStateStats(
        mean_photon_number=n_mean,
        out_amplitude=float(np.sqrt(params.kappa * max(n_mean, 0.0))),
        mean_a=complex(mean[K.M_A]),
        mean_a_squared=complex(mean[K.M_A2]),
        mean_Sigma=complex(mean[K.M_SIGMA]),
        mean_Sigma_z=float(mean[K.M_SIGMA_Z].real),
        mean_atom_excitation=float(mean[K.M_SIGMA_Z].real + 0.5 * params.n_atoms),
        mean_adag_Sigma=complex(mean[K.M_ADAG_SIGMA]),
        corr_adag_Sigma=complex(d["corr"]),
        quad_var_x=float(d["var_x"]),
        quad_var_y=float(d["var_y"]),
        factorial_moment2=float(np.sum(fock * (fock - 1) * np.diag(rho).real)),
        hist_edges=edges,
        hist_counts=counts,
        mode_density=rho,
        n_samples=n_samples,
        n_jumps_per_channel=np.asarray(jump_counts),
        std_errors=se,
        max_top_population=top,
        truncation_warning=warn,
        samples=samples,
        block_means=blocks,
        jump_times=jump_times,
        jump_channels=jump_channels,
        seeds=seeds,
    )


def _raw_trajectory(params: SystemParams, config: TrajectoryConfig, worker: int):
    layout = BasisLayout(params.n_atoms, config.dim_mode)
    psi = basis_state(layout, 0, 0).amplitudes.copy()
    rng = trajectory_rng(config.seed, worker)
    n_samples = config.n_samples
    samples = np.zeros((n_samples, K.N_MOMENTS), dtype=np.complex128)
    rho = np.zeros((config.dim_mode, config.dim_mode), dtype=np.complex128)
    counts = np.zeros(params.n_atoms + 1, dtype=np.int64)
    status, jt, jc, _, _ = K.run_trajectory(
        psi, params.n_atoms, config.dim_mode, _coef(params), config.dt_max, config.burn_in,
        config.sample_interval, n_samples, rng, samples, rho, counts)
    if status == K.NORM_GROWTH:
        raise StepSizeError(f"norm grew during a no-jump step; reduce dt_max (now {config.dt_max})")
    if status == K.DARK_JUMP:
        raise DegenerateStateError("jump threshold crossed with all jump rates zero")
    return samples, rho, counts, jt.copy(), jc.copy()


def run_trajectory(params: SystemParams, config: TrajectoryConfig) -> SteadyStateStats:
    """Time-averaged steady state from one trajectory (RNG stream of worker 0)."""
    samples, rho, counts, jt, jc = _raw_trajectory(params, config, 0)
    return _finalize(params, config, [samples], rho, counts, [jt], [jc], [(config.seed, 0)])


def default_workers() -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def run_ensemble(params: SystemParams, config: TrajectoryConfig, n_workers: int,
                 max_threads: int | None = None) -> SteadyStateStats:
    """Independent trajectories on streams 0..n_workers-1 merged into one estimate.

    Worker ``k`` uses ``trajectory_rng(config.seed, k)``; the merged result depends
    only on (params, config, n_workers), not on the thread count.
    """
    if n_workers < 1:
        raise InvalidArgumentError("n_workers must be >= 1")
    threads = min(n_workers, max_threads or default_workers())
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda k: _raw_trajectory(params, config, k), range(n_workers)))
    else:
        parts = [_raw_trajectory(params, config, k) for k in range(n_workers)]
    rho = np.zeros((config.dim_mode, config.dim_mode), dtype=np.complex128)
    counts = np.zeros(params.n_atoms + 1, dtype=np.int64)
    for _, r, c, _, _ in parts:
        rho += r
        counts += c
    return _finalize(params, config, [p[0] for p in parts], rho, counts,
                     [p[3] for p in parts], [p[4] for p in parts],
                     [(config.seed, k) for k in range(n_workers)])


def stationarity_check(stats: SteadyStateStats, n_sigma: float = 4.0,
                       block_length: int = 50) -> tuple[bool, float]:
    """Compare mean photon numbers of the two halves of the sample record.

    Returns (agree, z) with z the difference in units of the combined block standard error.
    """
    photons = stats.samples[:, K.M_N].real
    half = photons.size // 2
    parts = [photons[:half], photons[half: 2 * half]]
    means, errs = [], []
    for p in parts:
        blocks = _block_means(p[:, None], block_length)[:, 0]
        means.append(p.mean())
        errs.append(blocks.std(ddof=1) / np.sqrt(blocks.size))
    err = float(np.hypot(*errs))
    z = abs(means[0] - means[1]) / err if err > 0 else 0.0
    return z <= n_sigma, float(z)


def with_seed(config: TrajectoryConfig, seed: int) -> TrajectoryConfig:
    return replace(config, seed=seed)


@dataclass(frozen=True)
class Bimodality:
    peak_low: int
    trough: int
    peak_high: int
    depth: float  # 1 - trough / min(peak heights)


def histogram_bimodality(counts, min_depth: float = 0.2, smooth: int = 3,
                         floor: float = 0.01) -> Bimodality | None:
    """Deepest pair of local maxima separated by a trough at least ``min_depth`` below both.

    Counts are first smoothed with a centered ``smooth``-bin moving average, and
    maxima below ``floor`` times the global maximum are ignored so that isolated
    counts in the sparse tail do not register as peaks. Returns None when no pair
    qualifies.
    """
    c = np.asarray(counts, dtype=float)
    if smooth > 1:
        c = np.convolve(np.pad(c, smooth // 2, mode="edge"), np.ones(smooth) / smooth, mode="valid")
    if c.size < 3 or c.max() <= 0:
        return None
    pad = np.concatenate(([-np.inf], c, [-np.inf]))
    peaks = [i for i in range(c.size)
             if c[i] > pad[i] and c[i] >= pad[i + 2] and c[i] >= floor * c.max()]
    best = None
    for a in range(len(peaks)):
        for b in range(a + 1, len(peaks)):
            i, j = peaks[a], peaks[b]
            k = i + int(np.argmin(c[i: j + 1]))
            depth = 1.0 - c[k] / min(c[i], c[j])
            if depth >= min_depth and (best is None or depth > best.depth):
                best = Bimodality(i, k, j, float(depth))
    return best
