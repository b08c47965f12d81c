"""``obsim`` command-line front end.

    obsim <trajectory|sweep|meanfield|fluct|wigner> --config PATH [--seed U64] [--out DIR] [--overwrite]
    obsim preset KIND [--scale desk|paper] [--out FILE]

Exit status: 0 success, 1 computation error, 2 bad arguments or config,
3 output directory collision.
"""
from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from . import config as cfgmod
from . import fluctuations as fl
from . import meanfield as mf
from .errors import DomainError, InvalidArgumentError, ObsimError
from .mcwf import default_workers, run_ensemble, stationarity_check
from .output import OutputCollisionError, OutputWriter, Provenance, read_mode_density
from .wigner import PhaseSpaceGrid, coherent_density, local_maxima, wigner, wigner_moments

log = logging.getLogger("obsim")

COMMANDS = {
    "trajectory": "one quantum trajectory: histogram, moments, reduced mode density",
    "sweep": "trajectories and mean-field overlays over a parameter grid",
    "meanfield": "mean-field S-curve and turning points",
    "fluct": "linearized quadrature variances along both outer branches",
    "wigner": "Wigner function of a mode density on a phase-space grid",
}
HIST_COLUMNS = ["bin_low[sqrt(gamma)]", "bin_high[sqrt(gamma)]", "count"]
SCURVE_COLUMNS = ["eta[gamma]", "branch_label", "alpha_re", "alpha_im", "S_re", "S_im", "S_z",
                  "stable", "out_amplitude[sqrt(gamma)]"]
FLUCT_COLUMNS = ["eta[gamma]", "branch", "var_x", "var_y", "re_corr", "im_corr",
                 "re_corr_scaled", "im_corr_scaled", "stable"]


def _hist_rows(stats, prefix=()):
    e = stats.hist_edges
    return [(*prefix, e[i], e[i + 1], int(c)) for i, c in enumerate(stats.hist_counts)]


def _params_summary(p) -> dict:
    d = p.to_dict()
    d["cooperativity"] = p.cooperativity()
    return d


def _scurve_rows(params, etas, prefix=()):
    rows = []
    for br in mf.trace_scurve(params, etas):
        p = params.with_(eta=float(br.eta))
        for sol in br.solutions:
            st = sol.state
            rows.append((*prefix, br.eta, sol.label, st.alpha.real, st.alpha.imag, st.s.real,
                         st.s.imag, st.s_z, sol.stable, mf.output_amplitude(st, p)))
    return rows


def _fluct_rows(params, etas, prefix=()):
    rows = []
    for branch in ("lower", "upper"):
        for r in fl.variance_scan(params, etas, branch):
            rows.append((*prefix, r.eta, branch, r.var_x, r.var_y, r.corr.real, r.corr.imag,
                         r.corr_scaled.real, r.corr_scaled.imag, r.stable))
    return rows


def _turning_summary(params) -> dict | None:
    try:
        tp = mf.turning_points(params)
    except DomainError:
        return None
    return {"eta_low": tp.eta_low, "eta_high": tp.eta_high, "alpha_low": tp.alpha_low,
            "alpha_high": tp.alpha_high, "midpoint": tp.midpoint()}


def cmd_trajectory(cfg, out: OutputWriter) -> dict:
    stats = run_ensemble(cfg.params, cfg.trajectory, cfg.workers)
    out.write_csv("trajectory_histogram.csv", HIST_COLUMNS, _hist_rows(stats))
    rho = stats.mode_density
    out.write_csv("mode_density.csv", ["m", "n", "re", "im"],
                  [(m, n, rho[m, n].real, rho[m, n].imag)
                   for m in range(rho.shape[0]) for n in range(rho.shape[1])])
    ok, z = stationarity_check(stats)
    return {"params": _params_summary(cfg.params), "stats": stats.summary(),
            "stationarity": {"halves_agree": ok, "z": z}}


def _run_point(args):
    p, traj, workers = args
    return run_ensemble(p, traj, workers, max_threads=1)


def cmd_sweep(cfg, out: OutputWriter) -> dict:
    if cfg.sweep is None:
        return {"params": _params_summary(cfg.params), "points": 0}
    plist = cfgmod.resolve_scaling(cfg)
    values = cfg.sweep.values
    jobs = [(p, cfg.trajectory, cfg.workers) for p in plist]
    threads = min(len(jobs), default_workers())
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_run_point, jobs))
    else:
        results = [_run_point(j) for j in jobs]

    point_rows, hist_rows, mf_rows, fl_rows, warn = [], [], [], [], []
    for v, p, st in zip(values, plist, results):
        point_rows.append((v, p.n_atoms, p.g, p.eta, st.mean_photon_number,
                           st.std_errors["photon_number"], st.out_amplitude, st.mean_atom_excitation,
                           st.quad_var_x, st.quad_var_y, st.corr_adag_Sigma.real,
                           st.corr_adag_Sigma.imag, st.n_samples, st.truncation_warning))
        hist_rows.extend(_hist_rows(st, (v,)))
        mf_rows.extend(_scurve_rows(p, [p.eta], (v,)))
        fl_rows.extend(_fluct_rows(p, [p.eta], (v,)))
        if st.truncation_warning:
            warn.append(v)
    var = cfg.sweep.variable
    out.write_csv("sweep_points.csv",
                  [var, "n_atoms", "g[gamma]", "eta[gamma]", "mean_photon_number", "se_photon_number",
                   "out_amplitude[sqrt(gamma)]", "mean_atom_excitation", "quad_var_x", "quad_var_y",
                   "re_corr", "im_corr", "n_samples", "truncation_warning"], point_rows)
    out.write_csv("sweep_histograms.csv", [var] + HIST_COLUMNS, hist_rows)
    out.write_csv("sweep_meanfield.csv", [var] + SCURVE_COLUMNS, mf_rows)
    out.write_csv("sweep_fluct.csv", [var] + FLUCT_COLUMNS, fl_rows)
    return {"params": _params_summary(cfg.params), "sweep_variable": var, "points": len(values),
            "scaling_lock": cfg.scaling_lock, "truncation_warning_at": list(warn)}


def cmd_meanfield(cfg, out: OutputWriter) -> dict:
    out.write_csv("meanfield_scurve.csv", SCURVE_COLUMNS,
                  _scurve_rows(cfg.params, cfg.meanfield.values()))
    return {"params": _params_summary(cfg.params), "turning_points": _turning_summary(cfg.params)}


def cmd_fluct(cfg, out: OutputWriter) -> dict:
    out.write_csv("fluct_table.csv", FLUCT_COLUMNS, _fluct_rows(cfg.params, cfg.meanfield.values()))
    return {"params": _params_summary(cfg.params), "turning_points": _turning_summary(cfg.params)}


def _fock_state(dim, k):
    rho = np.zeros((dim, dim), dtype=complex)
    rho[k, k] = 1.0
    return rho


def density_from_spec(spec: cfgmod.WignerSpec, base_dir: Path) -> np.ndarray:
    state = spec.state.strip().lower()
    if state == "vacuum":
        return _fock_state(1, 0)
    if state.startswith("fock:"):
        k = int(state.split(":", 1)[1])
        return _fock_state(k + 1, k)
    if state.startswith("coherent:"):
        re, im = (float(t) for t in state.split(":", 1)[1].split(","))
        return coherent_density(complex(re, im))
    if state == "file":
        if not spec.density_file:
            raise InvalidArgumentError("[wigner] state = file needs density_file")
        path = Path(spec.density_file)
        if not path.is_absolute():
            path = base_dir / path
        if not path.exists():
            raise InvalidArgumentError(f"density file {path} does not exist")
        if path.suffix == ".npy":
            return np.load(path)
        return read_mode_density(path)
    raise InvalidArgumentError(f"unknown [wigner] state {spec.state!r}")


def cmd_wigner(cfg, out: OutputWriter, base_dir: Path) -> dict:
    spec = cfg.wigner
    rho = density_from_spec(spec, base_dir)
    grid = PhaseSpaceGrid(spec.x_min, spec.x_max, spec.y_min, spec.y_max, spec.nx, spec.ny)
    field = wigner(rho, grid, spec.method)
    xs, ys, W = grid.xs, grid.ys, field.values
    out.write_csv("wigner_field.csv", ["x", "y", "w"],
                  [(xs[i], ys[j], W[i, j]) for i in range(grid.nx) for j in range(grid.ny)])
    out.write_array("wigner_field.bin", W, {"axes": ["x", "y"],
                                            "bounds": [spec.x_min, spec.x_max, spec.y_min, spec.y_max]})
    mom = wigner_moments(field)
    i, j = np.unravel_index(int(np.argmax(W)), W.shape)
    peaks = [(float(xs[a]), float(ys[b]), float(W[a, b])) for a, b in local_maxima(W)]
    return {"method": spec.method, "fock_dimension": int(rho.shape[0]),
            "moments": {"norm": mom.norm, "mean_x": mom.mean_x, "mean_y": mom.mean_y,
                        "var_x": mom.var_x, "var_y": mom.var_y},
            "max": {"x": float(xs[i]), "y": float(ys[j]), "w": float(W[i, j])},
            "min_w": float(W.min()), "local_maxima": peaks}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="obsim", description="Optical bistability simulator")
    ap.add_argument("--version", action="version", version=f"obsim {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, text in COMMANDS.items():
        sp = sub.add_parser(name, help=text)
        sp.add_argument("--config", required=True, help="INI configuration file")
        sp.add_argument("--seed", type=int, help="override the trajectory seed (unsigned 64-bit)")
        sp.add_argument("--out", help="output directory (overrides [output] directory)")
        sp.add_argument("--overwrite", action="store_true",
                        help="replace an existing non-empty output directory")
        sp.add_argument("-v", "--verbose", action="store_true")
    pp = sub.add_parser("preset", help="write a ready-made configuration")
    pp.add_argument("kind", choices=cfgmod.PRESET_KINDS)
    pp.add_argument("--scale", choices=cfgmod.PRESET_SCALES, default="desk")
    pp.add_argument("--out", help="file to write (default: stdout)")
    return ap


def run(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="obsim: %(levelname)s: %(message)s")
    try:
        if args.command == "preset":
            text = cfgmod.dumps(cfgmod.preset(args.kind, args.scale))
            if args.out:
                Path(args.out).write_text(text)
            else:
                sys.stdout.write(text)
            return 0
        cfg = cfgmod.load(args.config)
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise InvalidArgumentError("--seed must be an unsigned 64-bit integer")
            cfg = cfg.with_seed(args.seed)
        base_dir = Path(args.config).resolve().parent
        out_dir = Path(args.out) if args.out else base_dir / cfg.output_dir
        prov = Provenance(args.command, cfg.trajectory.seed, cfg.config_hash())
    except InvalidArgumentError as exc:
        print(f"obsim: error: {exc}", file=sys.stderr)
        return 2
    except (ObsimError, OSError) as exc:
        print(f"obsim: error: {exc}", file=sys.stderr)
        return 1
    try:
        writer = OutputWriter(out_dir, prov, overwrite=args.overwrite)
    except OutputCollisionError as exc:
        print(f"obsim: error: {exc}", file=sys.stderr)
        return 3
    except ObsimError as exc:
        print(f"obsim: error: {exc}", file=sys.stderr)
        return 1
    try:
        if args.command == "trajectory":
            summary = cmd_trajectory(cfg, writer)
        elif args.command == "sweep":
            summary = cmd_sweep(cfg, writer)
        elif args.command == "meanfield":
            summary = cmd_meanfield(cfg, writer)
        elif args.command == "fluct":
            summary = cmd_fluct(cfg, writer)
        else:
            summary = cmd_wigner(cfg, writer, base_dir)
        summary["config"] = cfg.to_dict()
        writer.finish(summary)
    except InvalidArgumentError as exc:
        print(f"obsim: error: {exc}", file=sys.stderr)
        return 2
    except ObsimError as exc:
        print(f"obsim: error: {exc}", file=sys.stderr)
        return 1
    log.info("wrote %d files to %s", len(writer.files) + 1, out_dir)
    return 0


def main(argv=None):
    sys.exit(run(argv))
