"""Run configuration: INI-style files, canonical hashing, N-scaling and presets.

File grammar (``configparser`` syntax, ``#`` comments, keys case-insensitive)::

    [params]        n_atoms, kappa, gamma, delta_m, delta_a, eta, and either g or
                    cooperativity; optional inversion_decay
    [trajectory]    dim_mode, dt_max, burn_in, sample_interval, total_time, seed,
                    norm_tolerance, n_bins, hist_max, block_length, workers
    [sweep]         variable, values (comma list) or start/stop/num, scaling_lock
    [meanfield]     eta_min, eta_max, n_eta  (S-curve and fluctuation grid, same units as eta)
    [wigner]        state (vacuum | fock:K | coherent:RE,IM | file), density_file,
                    method, x_min, x_max, y_min, y_max, nx, ny
    [output]        directory

Every section except ``[params]`` is optional. Empty values mean "default".
"""
from __future__ import annotations

import configparser
import hashlib
import io
import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .errors import InvalidArgumentError
from .mcwf import TrajectoryConfig
from .params import SystemParams

SWEEP_VARIABLES = ("eta", "n_atoms", "g", "kappa", "delta_m", "delta_a")
WIGNER_METHODS = ("auto", "formula", "laguerre")


@dataclass(frozen=True)
class SweepSpec:
    variable: str
    values: tuple

    def __post_init__(self):
        if self.variable not in SWEEP_VARIABLES:
            raise InvalidArgumentError(
                f"sweep variable must be one of {', '.join(SWEEP_VARIABLES)}, got {self.variable!r}")
        vals = tuple(float(v) for v in self.values)
        if not vals:
            raise InvalidArgumentError("sweep grid is empty")
        if not all(math.isfinite(v) for v in vals):
            raise InvalidArgumentError("sweep grid contains non-finite values")
        if self.variable == "n_atoms":
            if any(v != int(v) or v < 1 for v in vals):
                raise InvalidArgumentError("n_atoms sweep values must be positive integers")
            vals = tuple(int(v) for v in vals)
        object.__setattr__(self, "values", vals)


@dataclass(frozen=True)
class MeanFieldGrid:
    eta_min: float = 0.0
    eta_max: float = 3.0
    n_eta: int = 301

    def __post_init__(self):
        if self.n_eta < 1 or not (self.eta_max >= self.eta_min >= 0):
            raise InvalidArgumentError("meanfield grid needs n_eta >= 1 and 0 <= eta_min <= eta_max")

    def values(self) -> np.ndarray:
        return np.linspace(self.eta_min, self.eta_max, self.n_eta)


@dataclass(frozen=True)
class WignerSpec:
    state: str = "file"
    density_file: str = ""
    method: str = "auto"
    x_min: float = -6.0
    x_max: float = 6.0
    y_min: float = -6.0
    y_max: float = 6.0
    nx: int = 201
    ny: int = 201

    def __post_init__(self):
        if self.method not in WIGNER_METHODS:
            raise InvalidArgumentError(f"wigner method must be one of {WIGNER_METHODS}")


@dataclass(frozen=True)
class RunConfig:
    params: SystemParams
    trajectory: TrajectoryConfig = field(default_factory=TrajectoryConfig)
    sweep: SweepSpec | None = None
    scaling_lock: bool = False
    meanfield: MeanFieldGrid = field(default_factory=MeanFieldGrid)
    wigner: WignerSpec = field(default_factory=WignerSpec)
    workers: int = 1
    output_dir: str = "obsim-out"

    def __post_init__(self):
        if self.workers < 1:
            raise InvalidArgumentError("workers must be >= 1")

    def with_seed(self, seed: int) -> "RunConfig":
        return replace(self, trajectory=replace(self.trajectory, seed=int(seed)))

    def to_dict(self) -> dict:
        """Numerical content only; the output directory does not affect results."""
        return {
            "params": asdict(self.params),
            "trajectory": asdict(self.trajectory),
            "sweep": None if self.sweep is None else {"variable": self.sweep.variable,
                                                      "values": list(self.sweep.values)},
            "scaling_lock": self.scaling_lock,
            "meanfield": asdict(self.meanfield),
            "wigner": asdict(self.wigner),
            "workers": self.workers,
        }

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def dumps(cfg: RunConfig) -> str:
    cp = configparser.ConfigParser(interpolation=None)
    cp["params"] = {k: _fmt(v) for k, v in asdict(cfg.params).items()}
    traj = {k: _fmt(v) for k, v in asdict(cfg.trajectory).items()}
    traj["workers"] = str(cfg.workers)
    cp["trajectory"] = traj
    if cfg.sweep is not None or cfg.scaling_lock:
        cp["sweep"] = {"variable": cfg.sweep.variable if cfg.sweep else "eta",
                       "values": ", ".join(_fmt(v) for v in cfg.sweep.values) if cfg.sweep else "",
                       "scaling_lock": _fmt(cfg.scaling_lock)}
    cp["meanfield"] = {k: _fmt(v) for k, v in asdict(cfg.meanfield).items()}
    cp["wigner"] = {k: _fmt(v) for k, v in asdict(cfg.wigner).items()}
    cp["output"] = {"directory": cfg.output_dir}
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def _typed(section, cls, skip=()) -> dict:
    out = {}
    known = {f.name: f for f in fields(cls)}
    for key, raw in section.items():
        if key in skip:
            continue
        if key not in known:
            raise InvalidArgumentError(f"unknown key {key!r} in [{section.name}]")
        raw = raw.strip()
        if raw == "":
            continue
        default = known[key].default
        try:
            if isinstance(default, bool):
                out[key] = section.getboolean(key)
            elif isinstance(default, int) or key in ("n_atoms", "dim_mode", "seed", "n_bins",
                                                     "block_length", "nx", "ny", "n_eta"):
                out[key] = int(raw)
            elif isinstance(default, str):
                out[key] = raw
            else:
                out[key] = float(raw)
        except ValueError as exc:
            raise InvalidArgumentError(f"bad value for {key} in [{section.name}]: {raw!r}") from exc
    return out


def loads(text: str) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise InvalidArgumentError(f"cannot parse config: {exc}") from exc
    if "params" not in cp:
        raise InvalidArgumentError("config has no [params] section")
    known = {"params", "trajectory", "sweep", "meanfield", "wigner", "output"}
    extra = set(cp.sections()) - known
    if extra:
        raise InvalidArgumentError(f"unknown config sections: {sorted(extra)}")

    psec = cp["params"]
    coop = psec.get("cooperativity", "").strip()
    pkw = _typed(psec, SystemParams, skip=("cooperativity",))
    if coop:
        if "g" in pkw:
            raise InvalidArgumentError("give either g or cooperativity in [params], not both")
        n = pkw.get("n_atoms")
        if n is None or "kappa" not in pkw:
            raise InvalidArgumentError("cooperativity needs n_atoms and kappa")
        pkw["g"] = math.sqrt(2.0 * pkw["kappa"] * pkw.get("gamma", 1.0) * float(coop) / n)
    try:
        params = SystemParams(**pkw)
    except TypeError as exc:
        raise InvalidArgumentError(f"incomplete [params]: {exc}") from exc

    workers = 1
    traj = TrajectoryConfig()
    if "trajectory" in cp:
        tsec = cp["trajectory"]
        w = tsec.get("workers", "").strip()
        workers = int(w) if w else 1
        traj = TrajectoryConfig(**_typed(tsec, TrajectoryConfig, skip=("workers",)))

    sweep, lock = None, False
    if "sweep" in cp:
        s = cp["sweep"]
        lock = s.getboolean("scaling_lock", fallback=False)
        var = s.get("variable", "eta").strip()
        if s.get("values", "").strip():
            vals = [float(v) for v in s["values"].split(",") if v.strip()]
        elif s.get("start", "").strip():
            vals = np.linspace(float(s["start"]), float(s["stop"]), int(s.get("num", "11"))).tolist()
        else:
            vals = []
        # a [sweep] section without values only carries the scaling flag
        sweep = SweepSpec(var, tuple(vals)) if vals else None

    mfg = MeanFieldGrid(**_typed(cp["meanfield"], MeanFieldGrid)) if "meanfield" in cp else MeanFieldGrid()
    wsp = WignerSpec(**_typed(cp["wigner"], WignerSpec)) if "wigner" in cp else WignerSpec()
    out = cp["output"].get("directory", "obsim-out").strip() if "output" in cp else "obsim-out"
    return RunConfig(params, traj, sweep, lock, mfg, wsp, workers, out or "obsim-out")


def load(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InvalidArgumentError(f"cannot read config {path}: {exc.strerror}") from exc
    return loads(text)


def resolve_scaling(cfg: RunConfig) -> list[SystemParams]:
    """One SystemParams per sweep grid value.

    With ``scaling_lock`` and an ``n_atoms`` sweep, g and eta follow the base
    values so that N g^2 and eta / sqrt(N) stay fixed.
    """
    base = cfg.params
    if cfg.sweep is None:
        return [base]
    var = cfg.sweep.variable
    out = []
    for v in cfg.sweep.values:
        if var == "n_atoms":
            n = int(v)
            if n < 1:
                raise InvalidArgumentError("n_atoms must be >= 1")
            if cfg.scaling_lock:
                ratio = base.n_atoms / n
                out.append(base.with_(n_atoms=n, g=base.g * math.sqrt(ratio),
                                      eta=base.eta / math.sqrt(ratio)))
            else:
                out.append(base.with_(n_atoms=n))
        else:
            out.append(base.with_(**{var: float(v)}))
    return out


# presets: kind -> scale -> builder
def _preset(kind: str, scale: str) -> RunConfig:
    desk = scale == "desk"
    n_max = 4 if desk else 8
    base = SystemParams.from_cooperativity(2, 10.0, 0.5)
    dim = 60 if desk else 200
    traj = TrajectoryConfig(dim_mode=dim, total_time=2e4 if desk else 2e5, seed=1)
    if kind == "scurve":
        return RunConfig(base.with_(eta=1.56), traj, meanfield=MeanFieldGrid(0.0, 3.0, 601))
    if kind == "histograms":
        p = SystemParams.from_cooperativity(n_max, 10.0, 0.5)
        eta_scale = math.sqrt(n_max / 2)
        vals = tuple(round(x * eta_scale, 6) for x in np.linspace(0.5, 2.5, 21 if desk else 41))
        return RunConfig(p, replace(traj, total_time=2e4 if desk else 1e5), SweepSpec("eta", vals),
                         meanfield=MeanFieldGrid(0.0, 3.0 * eta_scale, 601))
    if kind == "atom-number":
        ns = (2, 4) if desk else (2, 4, 6, 8)
        return RunConfig(base.with_(eta=1.56), traj, SweepSpec("n_atoms", ns), scaling_lock=True)
    if kind == "wigner":
        n = 4 if desk else 6
        p = SystemParams.from_cooperativity(n, 10.0, 0.5, eta=round(1.56 * math.sqrt(n / 2), 6))
        return RunConfig(p, traj, wigner=WignerSpec(state="file", density_file="mode_density.csv"))
    if kind == "fluctuations":
        n = 4
        p = SystemParams.from_cooperativity(n, 10.0, 0.5)
        return RunConfig(p, traj, meanfield=MeanFieldGrid(0.0, 3.0 * math.sqrt(2.0), 1201))
    raise InvalidArgumentError(f"unknown preset {kind!r}; choose from {', '.join(PRESET_KINDS)}")


PRESET_KINDS = ("scurve", "histograms", "atom-number", "wigner", "fluctuations")
PRESET_SCALES = ("desk", "paper")


def preset(kind: str, scale: str = "desk") -> RunConfig:
    if scale not in PRESET_SCALES:
        raise InvalidArgumentError(f"scale must be one of {PRESET_SCALES}")
    return _preset(kind, scale)
