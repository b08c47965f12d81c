"""Deterministic file output with provenance headers and a hashed manifest.

CSV files start with ``#`` lines carrying the provenance block, then one header
row of column names (units in brackets where they apply), then data rows.
Floats are written with ``repr`` so they round-trip exactly. Nothing
time-dependent is written, so identical inputs give byte-identical files.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import shutil
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ObsimError

MANIFEST = "manifest.json"
SUMMARY = "summary.json"


class OutputError(ObsimError, OSError):
    """File-system problem while writing results."""


class OutputCollisionError(OutputError):
    """Output directory already holds results and overwriting was not requested."""


@dataclass(frozen=True)
class Provenance:
    command: str
    seed: int
    config_hash: str
    version: str = __version__

    def lines(self) -> list[str]:
        return [f"obsim {self.command}", f"version: {self.version}", f"seed: {self.seed}",
                f"config_sha256: {self.config_hash}"]

    def to_dict(self) -> dict:
        return {"command": self.command, "version": self.version, "seed": self.seed,
                "config_sha256": self.config_hash}


def fmt_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return repr(v) if math.isfinite(v) else ("nan" if math.isnan(v) else repr(v))
    return str(v)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, (complex, np.complexfloating)):
        return [_jsonable(obj.real), _jsonable(obj.imag)]
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


@dataclass
class OutputWriter:
    """Writes into one directory and records every file for the manifest."""

    directory: Path
    provenance: Provenance
    overwrite: bool = False
    files: dict = field(default_factory=dict)

    def __post_init__(self):
        self.directory = Path(self.directory)
        try:
            if self.directory.exists():
                if not self.directory.is_dir():
                    raise OutputError(f"{self.directory} exists and is not a directory")
                if any(self.directory.iterdir()):
                    if not self.overwrite:
                        raise OutputCollisionError(
                            f"output directory {self.directory} is not empty; pass --overwrite")
                    shutil.rmtree(self.directory)
            self.directory.mkdir(parents=True, exist_ok=True)
        except OutputError:
            raise
        except OSError as exc:
            raise OutputError(f"cannot prepare output directory {self.directory}: {exc}") from exc

    def _write_bytes(self, name: str, data: bytes) -> Path:
        path = self.directory / name
        try:
            path.write_bytes(data)
        except OSError as exc:
            raise OutputError(f"cannot write {path}: {exc}") from exc
        self.files[name] = hashlib.sha256(data).hexdigest()
        return path

    def write_csv(self, name: str, columns, rows) -> Path:
        buf = io.StringIO()
        for line in self.provenance.lines():
            buf.write(f"# {line}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt_value(v) for v in row])
        return self._write_bytes(name, buf.getvalue().encode())

    def write_json(self, name: str, payload: dict) -> Path:
        body = {"provenance": self.provenance.to_dict(), **_jsonable(payload)}
        text = json.dumps(body, indent=2, sort_keys=True) + "\n"
        return self._write_bytes(name, text.encode())

    def write_array(self, name: str, array: np.ndarray, meta: dict) -> Path:
        """Row-major little-endian float64 data after a one-line JSON header."""
        arr = np.ascontiguousarray(array, dtype="<f8")
        header = {"provenance": self.provenance.to_dict(), "dtype": "<f8",
                  "shape": list(arr.shape), "order": "C", **_jsonable(meta)}
        head = (json.dumps(header, sort_keys=True, separators=(",", ":")) + "\n").encode()
        return self._write_bytes(name, head + arr.tobytes())

    def finish(self, summary: dict) -> dict:
        """Write the summary and the manifest; returns the manifest mapping."""
        self.write_json(SUMMARY, summary)
        manifest = {"provenance": self.provenance.to_dict(),
                    "files": [{"name": k, "sha256": v} for k, v in sorted(self.files.items())]}
        data = (json.dumps(manifest, indent=2, sort_keys=True) + "\n").encode()
        path = self.directory / MANIFEST
        try:
            path.write_bytes(data)
        except OSError as exc:
            raise OutputError(f"cannot write {path}: {exc}") from exc
        return manifest


def read_array(path) -> tuple[np.ndarray, dict]:
    raw = Path(path).read_bytes()
    cut = raw.index(b"\n")
    header = json.loads(raw[:cut])
    arr = np.frombuffer(raw[cut + 1:], dtype=header["dtype"]).reshape(header["shape"])
    return arr, header


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    """Columns and raw string rows, skipping provenance comment lines."""
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    return rows[0], rows[1:]


def read_mode_density(path) -> np.ndarray:
    """Inverse of the ``m, n, re, im`` density CSV written by the trajectory command."""
    cols, rows = read_csv(path)
    if cols[:4] != ["m", "n", "re", "im"]:
        raise OutputError(f"{path} is not a mode density file (columns {cols})")
    idx = np.array([[int(r[0]), int(r[1])] for r in rows])
    dim = int(idx.max()) + 1
    rho = np.zeros((dim, dim), dtype=complex)
    for (m, n), r in zip(idx, rows):
        rho[m, n] = complex(float(r[2]), float(r[3]))
    return rho
