import numpy as np
import pytest
import scipy.linalg as sla
from scipy import stats as sps

from obsim.errors import DegenerateStateError, InvalidArgumentError, StepSizeError
from obsim.hilbert import BasisLayout, StateVector, basis_state
from obsim.mcwf import (CAVITY, TrajectoryConfig, atom_channel, channel_name, histogram_bimodality,
                        jump_rates, propagate_no_jump, run_ensemble, run_trajectory, sample_jump,
                        stationarity_check, trajectory_rng, with_seed)
from obsim.params import SystemParams

from oracles import dense_heff, steady_moments


def random_state(layout, seed):
    rng = np.random.default_rng(seed)
    v = rng.normal(size=layout.dim_total) + 1j * rng.normal(size=layout.dim_total)
    return StateVector(v / np.linalg.norm(v), layout)


def test_config_defaults_and_validation():
    c = TrajectoryConfig()
    assert c.dt_max == 0.01 and c.n_bins == 100
    assert c.n_samples == int((c.total_time - c.burn_in) / c.sample_interval)
    p = SystemParams(1, 1.0, 0.5)
    assert np.isclose(c.histogram_range(p), 1.5 * np.sqrt(0.5 * 40))
    for bad in (dict(dim_mode=1), dict(dt_max=0), dict(burn_in=100, total_time=50),
                dict(seed=-1), dict(seed=2**64), dict(n_bins=0), dict(sample_interval=0)):
        with pytest.raises(InvalidArgumentError):
            TrajectoryConfig(**bad)
    assert with_seed(c, 9).seed == 9


def test_channel_names():
    assert channel_name(CAVITY) == "cavity"
    assert atom_channel(0) == 1
    assert channel_name(atom_channel(0)) == "atom0"


@pytest.mark.parametrize("n_atoms,dim", [(1, 10), (2, 6)])
def test_no_jump_step_matches_matrix_exponential(n_atoms, dim):
    p = SystemParams(n_atoms, g=1.2, kappa=0.5, delta_m=0.2, delta_a=-0.1, eta=0.8)
    lay = BasisLayout(n_atoms, dim)
    psi = random_state(lay, 3)
    step = propagate_no_jump(psi, 0.01, p)
    exact = sla.expm(-1j * 0.01 * dense_heff(p, dim)) @ psi.amplitudes
    assert np.allclose(step.amplitudes, exact, atol=1e-10)
    assert step.norm2() < psi.norm2()


def test_no_jump_step_errors():
    p = SystemParams(1, g=5.0, kappa=0.5, eta=0.0)
    lay = BasisLayout(1, 12)
    psi = random_state(lay, 0)
    with pytest.raises(InvalidArgumentError):
        propagate_no_jump(psi, 0.02, p)
    with pytest.raises(StepSizeError):
        propagate_no_jump(psi, 1.0, p, dt_max=1.0)


def test_jump_rates_on_basis_state():
    p = SystemParams(2, g=1.0, kappa=0.5, gamma=1.0)
    lay = BasisLayout(2, 4)
    r = jump_rates(basis_state(lay, 1, "eg"), p)
    assert np.allclose(r, [2 * 0.5 * 1, 2 * 1.0, 0.0])


def test_sample_jump_frequencies_follow_rates():
    p = SystemParams(2, g=1.0, kappa=0.5, gamma=1.0)
    lay = BasisLayout(2, 4)
    v = (basis_state(lay, 1, "eg").amplitudes + basis_state(lay, 2, "ge").amplitudes) / np.sqrt(2)
    psi = StateVector(v, lay)
    rates = jump_rates(psi, p)
    prob = rates / rates.sum()
    rng = trajectory_rng(123)
    n = 20000
    counts = np.zeros(3)
    for _ in range(n):
        ch, after = sample_jump(psi, rng, p)
        counts[ch] += 1
        assert np.isclose(after.norm2(), 1.0)
    z = np.abs(counts / n - prob) / np.sqrt(prob * (1 - prob) / n)
    assert np.all(z < 4.5)


def test_sample_jump_dark_state():
    p = SystemParams(1, g=1.0, kappa=0.5)
    lay = BasisLayout(1, 3)
    with pytest.raises(DegenerateStateError):
        sample_jump(basis_state(lay, 0, "g"), trajectory_rng(0), p)


def test_rng_streams():
    a = trajectory_rng(5, 0).random(4)
    assert np.array_equal(a, trajectory_rng(5, 0).random(4))
    assert not np.array_equal(a, trajectory_rng(5, 1).random(4))
    assert not np.array_equal(a, trajectory_rng(6, 0).random(4))


@pytest.mark.parametrize("case", [
    dict(n_atoms=1, g=1.0, kappa=0.5, eta=0.5, dim=10, T=4000.0),
    dict(n_atoms=2, g=0.8, kappa=0.5, eta=0.6, dim=8, T=4000.0),
])
def test_steady_state_agrees_with_liouvillian(case):
    p = SystemParams(case["n_atoms"], g=case["g"], kappa=case["kappa"], eta=case["eta"])
    exact = steady_moments(p, case["dim"])
    st = run_ensemble(p, TrajectoryConfig(dim_mode=case["dim"], total_time=case["T"], seed=11), 2)
    checks = [
        (st.mean_photon_number, exact["photon_number"], "photon_number"),
        (st.mean_atom_excitation, exact["atom_excitation"], "atom_excitation"),
        (st.mean_a.real, exact["a"].real, "re_a"),
        (st.mean_adag_Sigma.real, exact["adag_Sigma"].real, "re_adag_Sigma"),
        (st.mean_Sigma.real, exact["Sigma"].real, "re_Sigma"),
    ]
    for est, ref, key in checks:
        se = st.std_errors[key]
        assert abs(est - ref) <= 4 * se + 1e-12, (key, est, ref, se)
    rho_exact = exact["rho"].reshape(case["dim"], 2 ** p.n_atoms, case["dim"], 2 ** p.n_atoms)
    rho_exact = np.einsum("mbnb->mn", rho_exact)
    assert np.max(np.abs(st.mode_density - rho_exact)) < 0.03


def test_decoupled_mode_is_coherent_and_jumps_are_poisson():
    # g = 0: the field relaxes to |alpha = eta/kappa>, and cavity jumps leave it unchanged
    p = SystemParams(1, g=0.0, kappa=0.5, eta=1.0)
    cfg = TrajectoryConfig(dim_mode=30, total_time=3000.0, burn_in=50.0, seed=4)
    st = run_trajectory(p, cfg)
    assert abs(st.mean_photon_number - 4.0) < 1e-6
    assert abs(st.quad_var_x - 0.25) < 1e-6 and abs(st.quad_var_y - 0.25) < 1e-6
    assert abs(st.mean_a - 2.0) < 1e-6
    assert st.n_jumps_per_channel[1] == 0
    t = np.asarray(st.jump_times[0])
    t = t[t > cfg.burn_in]
    waits = np.diff(t)
    rate = 2 * p.kappa * 4.0
    assert abs(waits.mean() * rate - 1.0) < 4 / np.sqrt(waits.size)
    assert sps.kstest(waits, "expon", args=(0, 1 / rate)).pvalue > 1e-3


def test_jump_channel_ratio_matches_rates():
    p = SystemParams(2, g=1.0, kappa=0.5, eta=0.9)
    cfg = TrajectoryConfig(dim_mode=12, total_time=6000.0, seed=21)
    st = run_trajectory(p, cfg)
    t = np.asarray(st.jump_times[0])
    ch = np.asarray(st.jump_channels[0])
    keep = t > cfg.burn_in
    span = cfg.n_samples * cfg.sample_interval
    cav = np.count_nonzero(ch[keep] == CAVITY)
    atoms = np.count_nonzero(ch[keep] != CAVITY)
    exp_cav = 2 * p.kappa * st.mean_photon_number * span
    exp_atoms = 2 * p.gamma * st.mean_atom_excitation * span
    # jump counts carry their own shot noise plus that of the time averages
    assert abs(cav / exp_cav - 1) < 0.05
    assert abs(atoms / exp_atoms - 1) < 0.05
    assert sum(st.n_jumps_per_channel) == len(st.jump_times[0])


def test_determinism_and_thread_independence():
    p = SystemParams(2, g=1.0, kappa=0.5, eta=0.9)
    cfg = TrajectoryConfig(dim_mode=10, total_time=400.0, seed=77)
    a = run_trajectory(p, cfg)
    b = run_trajectory(p, cfg)
    assert np.array_equal(a.samples, b.samples)
    assert np.array_equal(a.mode_density, b.mode_density)
    c = run_trajectory(p, with_seed(cfg, 78))
    assert not np.array_equal(a.samples, c.samples)
    e1 = run_ensemble(p, cfg, 3, max_threads=1)
    e3 = run_ensemble(p, cfg, 3, max_threads=3)
    assert np.array_equal(e1.samples, e3.samples)
    assert e1.summary() == e3.summary()
    # worker 0 of an ensemble is the single-trajectory stream
    assert np.array_equal(e1.samples[: a.n_samples], a.samples)


def test_histogram_and_summary_bookkeeping():
    p = SystemParams(1, g=1.0, kappa=0.5, eta=0.8)
    cfg = TrajectoryConfig(dim_mode=12, total_time=500.0, seed=2, n_bins=17)
    st = run_trajectory(p, cfg)
    edges, counts = st.amplitude_histogram
    assert edges.size == 18 and counts.sum() == st.n_samples
    s = st.summary()
    assert s["n_samples"] == st.n_samples
    assert set(s["std_errors"]) >= {"photon_number", "quad_var_x", "re_corr_adag_Sigma"}
    ev = st.jump_events()
    assert len(ev) == len(st.jump_times[0])
    assert all(e.channel_name in ("cavity", "atom0") for e in ev)
    ok, z = stationarity_check(st)
    assert np.isfinite(z)


def test_truncation_warning(caplog):
    p = SystemParams(1, g=0.0, kappa=0.5, eta=1.0)
    st = run_trajectory(p, TrajectoryConfig(dim_mode=5, total_time=200.0, seed=1))
    assert st.truncation_warning and st.max_top_population > 1e-6
    assert any("dim_mode" in r.message for r in caplog.records)


def test_histogram_bimodality_detector():
    assert histogram_bimodality([1, 5, 9, 5, 1]) is None
    b = histogram_bimodality([0, 10, 40, 10, 2, 1, 2, 12, 30, 12, 0], smooth=1)
    assert b is not None and b.peak_low == 2 and b.peak_high == 8 and b.depth > 0.9
    # shallow dip below the required depth
    assert histogram_bimodality([10, 30, 28, 27, 30, 10], smooth=1) is None
    # isolated tail counts do not count as a second peak
    assert histogram_bimodality([0, 500, 200, 50, 0, 0, 2, 0, 1], smooth=1) is None
