import math

import pytest
from hypothesis import given, settings, strategies as st

from obsim import config as cfgmod
from obsim.errors import InvalidArgumentError
from obsim.mcwf import TrajectoryConfig
from obsim.params import SystemParams

TEXT = """
[params]
n_atoms = 8
cooperativity = 10
kappa = 0.5
eta = 2.0

[trajectory]
dim_mode = 30
total_time = 1000
seed = 42

[sweep]
variable = n_atoms
values = 2, 4, 6, 8
scaling_lock = true
"""


def test_parse_cooperativity_and_sections():
    cfg = cfgmod.loads(TEXT)
    assert cfg.params.g == pytest.approx(1.1180339887498949, rel=1e-15)
    assert cfg.trajectory.seed == 42 and cfg.trajectory.dim_mode == 30
    assert cfg.sweep.values == (2, 4, 6, 8) and cfg.scaling_lock


def test_resolve_scaling_examples():
    plist = cfgmod.resolve_scaling(cfgmod.loads(TEXT))
    assert [p.n_atoms for p in plist] == [2, 4, 6, 8]
    assert plist[0].g == pytest.approx(math.sqrt(10 / 2), rel=1e-14)
    assert plist[0].g == pytest.approx(2.2361, abs=1e-4)
    for p in plist:
        assert abs(p.cooperativity() - 10.0) < 1e-14 * 10
        assert p.eta / math.sqrt(p.n_atoms) == pytest.approx(2.0 / math.sqrt(8), rel=1e-14)


def test_resolve_without_lock_passes_through():
    cfg = cfgmod.loads(TEXT.replace("scaling_lock = true", "scaling_lock = false"))
    plist = cfgmod.resolve_scaling(cfg)
    assert all(p.g == cfg.params.g and p.eta == cfg.params.eta for p in plist)
    single = cfgmod.resolve_scaling(cfgmod.loads(TEXT.split("[sweep]")[0]))
    assert single == [cfgmod.loads(TEXT).params]


def test_eta_sweep_range_syntax():
    cfg = cfgmod.loads(TEXT.split("[sweep]")[0] + "[sweep]\nvariable = eta\nstart = 1\nstop = 2\nnum = 3\n")
    assert cfg.sweep.values == (1.0, 1.5, 2.0)
    assert [p.eta for p in cfgmod.resolve_scaling(cfg)] == [1.0, 1.5, 2.0]


@pytest.mark.parametrize("bad", [
    "[trajectory]\nseed = 1\n",
    "[params]\nn_atoms = 2\nkappa = 0.5\n",
    "[params]\nn_atoms = 2\ng = 1\ncooperativity = 3\nkappa = 0.5\n",
    "[params]\nn_atoms = 2\ng = 1\nkappa = 0.5\nfoo = 1\n",
    "[params]\nn_atoms = 2\ng = x\nkappa = 0.5\n",
    "[params]\nn_atoms = 2\ng = 1\nkappa = 0.5\n[sweep]\nvariable = gamma\nvalues = 1\n",
    "[params]\nn_atoms = 2\ng = 1\nkappa = 0.5\n[sweep]\nvariable = eta\nvalues = 1, nan\n",
    "[params]\nn_atoms = 2\ng = 1\nkappa = 0.5\n[sweep]\nvariable = n_atoms\nvalues = 0, 2\n",
    "[params]\nn_atoms = 2\ng = 1\nkappa = 0.5\n[extra]\na = 1\n",
    "not an ini file",
])
def test_invalid_configs(bad):
    with pytest.raises(InvalidArgumentError):
        cfgmod.loads(bad)


def test_unreadable_file(tmp_path):
    with pytest.raises(InvalidArgumentError, match="cannot read"):
        cfgmod.load(tmp_path / "missing.ini")


def test_hash_stable_under_reordering():
    a = cfgmod.loads(TEXT)
    lines = TEXT.strip().split("\n\n")
    b = cfgmod.loads("\n\n".join(reversed(lines)))
    c = cfgmod.loads(TEXT.replace("n_atoms = 8\ncooperativity = 10", "cooperativity = 10\nn_atoms = 8"))
    assert a.config_hash() == b.config_hash() == c.config_hash()
    assert a.with_seed(43).config_hash() != a.config_hash()
    # the output location is not part of the numerical identity
    assert cfgmod.loads(TEXT + "[output]\ndirectory = elsewhere\n").config_hash() == a.config_hash()


finite = st.floats(-5, 5, allow_nan=False)


@settings(max_examples=60, deadline=None)
@given(n=st.integers(1, 8), g=st.floats(0, 5), kappa=st.floats(0.01, 5), dm=finite, da=finite,
       eta=st.floats(0, 10), inv=st.one_of(st.none(), st.floats(0.1, 3)),
       seed=st.integers(0, 2**64 - 1), hist=st.one_of(st.none(), st.floats(0.5, 10)),
       sweep=st.one_of(st.none(), st.lists(st.floats(0, 5), min_size=1, max_size=5)),
       lock=st.booleans(), workers=st.integers(1, 8))
def test_round_trip(n, g, kappa, dm, da, eta, inv, seed, hist, sweep, lock, workers):
    cfg = cfgmod.RunConfig(
        SystemParams(n, g, kappa, delta_m=dm, delta_a=da, eta=eta, inversion_decay=inv),
        TrajectoryConfig(seed=seed, hist_max=hist),
        cfgmod.SweepSpec("eta", tuple(sweep)) if sweep else None, lock, workers=workers)
    text = cfgmod.dumps(cfg)
    again = cfgmod.loads(text)
    assert again == cfg
    assert cfgmod.dumps(again) == text


@pytest.mark.parametrize("kind", cfgmod.PRESET_KINDS)
@pytest.mark.parametrize("scale", cfgmod.PRESET_SCALES)
def test_presets_round_trip(kind, scale):
    cfg = cfgmod.preset(kind, scale)
    assert cfgmod.loads(cfgmod.dumps(cfg)) == cfg
    if scale == "desk":
        assert cfg.params.n_atoms <= 4 and cfg.trajectory.dim_mode <= 100
    assert cfg.params.cooperativity() == pytest.approx(10.0)


def test_unknown_preset():
    with pytest.raises(InvalidArgumentError):
        cfgmod.preset("nope")
    with pytest.raises(InvalidArgumentError):
        cfgmod.preset("scurve", "huge")


def test_inline_comments():
    cfg = cfgmod.loads("[params]\nn_atoms = 2  # atoms\ncooperativity = 10 ; C\nkappa = 0.5\n")
    assert cfg.params.n_atoms == 2 and cfg.params.cooperativity() == pytest.approx(10.0)
