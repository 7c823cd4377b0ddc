"""On-disk formats: energy CSV, snapshots, checkpoints, sweep outputs.

Every write is whole-file atomic (temporary file in the target
directory, then rename), so a crash never leaves a half-written file
behind.  Floating-point values are serialized with ``repr``, which
round-trips doubles exactly and keeps repeated runs byte identical.

Snapshot format (one ``.json`` header plus one ``.bin`` payload):
the header records the format version, grid size, time, and the
configuration hash; the payload is raw little-endian float64 physical
samples of u1, u2, b1, b2, theta in that order, each an n x n block in
row-major order (5 n^2 values total).

Checkpoint format (single file): a JSON header line with grid size,
time, format version and a SHA-256 of the payload, followed by the raw
little-endian complex128 spectral coefficients of u, b, theta.  A
loaded checkpoint is bit identical to the saved state, which is what
makes interrupted and uninterrupted runs agree exactly.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile

import numpy as np

from .diagnostics import EnergyRecord
from .dynamics import State
from .spectral import Grid, to_physical

__all__ = [
    "atomic_write_bytes",
    "atomic_write_text",
    "write_energy_csv",
    "read_energy_csv",
    "save_snapshot",
    "load_snapshot",
    "checkpoint_save",
    "checkpoint_load",
    "CheckpointError",
    "SNAPSHOT_FORMAT_VERSION",
    "CHECKPOINT_FORMAT_VERSION",
]

SNAPSHOT_FORMAT_VERSION = 1
CHECKPOINT_FORMAT_VERSION = 1
_CHECKPOINT_MAGIC = b"calmed-mhdb-checkpoint\n"


def atomic_write_bytes(path, data: bytes) -> None:
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


# ---------------------------------------------------------------------------
# energy CSV


def write_energy_csv(path, records) -> None:
    lines = [EnergyRecord.csv_header()]
    lines.extend(rec.csv_row() for rec in records)
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_energy_csv(path):
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    if not lines or lines[0] != EnergyRecord.csv_header():
        raise ValueError(f"{path} does not start with the energy CSV header")
    return [EnergyRecord.from_csv_row(ln) for ln in lines[1:]]


# ---------------------------------------------------------------------------
# physical snapshots


def save_snapshot(directory, step: int, state: State, config_digest: str) -> str:
    """Write snap_<step>.json / snap_<step>.bin; returns the bin path."""
    grid = state.grid
    u = to_physical(grid, state.u_hat)
    b = to_physical(grid, state.b_hat)
    th = to_physical(grid, state.theta_hat)
    payload = b"".join(
        np.ascontiguousarray(block, dtype="<f8").tobytes()
        for block in (u[0], u[1], b[0], b[1], th)
    )
    header = {
        "format_version": SNAPSHOT_FORMAT_VERSION,
        "grid_n": grid.n,
        "t": state.t,
        "config_hash": config_digest,
        "layout": "u1,u2,b1,b2,theta",
        "dtype": "<f8",
        "order": "C",
    }
    base = os.path.join(os.fspath(directory), f"snap_{step:08d}")
    atomic_write_bytes(base + ".bin", payload)
    atomic_write_text(base + ".json", json.dumps(header, sort_keys=True) + "\n")
    return base + ".bin"


def load_snapshot(bin_path):
    """Read a snapshot back as (header, fields) with physical samples."""
    bin_path = os.fspath(bin_path)
    json_path = bin_path[: -len(".bin")] + ".json"
    with open(json_path, "r", encoding="utf-8") as fh:
        header = json.load(fh)
    n = int(header["grid_n"])
    raw = np.fromfile(bin_path, dtype="<f8")
    if raw.size != 5 * n * n:
        raise ValueError(f"snapshot payload has {raw.size} values, expected {5 * n * n}")
    blocks = raw.reshape(5, n, n)
    fields = {
        "u": np.stack([blocks[0], blocks[1]]),
        "b": np.stack([blocks[2], blocks[3]]),
        "theta": blocks[4],
    }
    return header, fields


# ---------------------------------------------------------------------------
# spectral checkpoints


class CheckpointError(ValueError):
    """Unreadable, mismatched or corrupted checkpoint file."""


def checkpoint_save(state: State, path) -> None:
    payload = b"".join(
        np.ascontiguousarray(arr, dtype="<c16").tobytes()
        for arr in (state.u_hat, state.b_hat, state.theta_hat)
    )
    header = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "grid_n": state.grid.n,
        "t": state.t,
        "payload_sha256": hashlib.sha256(payload).hexdigest(),
    }
    data = _CHECKPOINT_MAGIC + json.dumps(header, sort_keys=True).encode() + b"\n" + payload
    atomic_write_bytes(path, data)


def checkpoint_load(path) -> State:
    with open(path, "rb") as fh:
        blob = fh.read()
    if not blob.startswith(_CHECKPOINT_MAGIC):
        raise CheckpointError(f"{path} is not a checkpoint file (bad magic)")
    rest = blob[len(_CHECKPOINT_MAGIC) :]
    newline = rest.find(b"\n")
    if newline < 0:
        raise CheckpointError(f"{path}: truncated before header end")
    try:
        header = json.loads(rest[:newline].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: unreadable header ({exc})") from exc
    for field in ("format_version", "grid_n", "t", "payload_sha256"):
        if field not in header:
            raise CheckpointError(f"{path}: header is missing field {field!r}")
    if header["format_version"] != CHECKPOINT_FORMAT_VERSION:
        raise CheckpointError(
            f"{path}: unsupported format_version {header['format_version']!r}"
        )
    if not isinstance(header["grid_n"], int):
        raise CheckpointError(f"{path}: header field 'grid_n' must be an integer")
    n = header["grid_n"]
    payload = rest[newline + 1 :]
    expected = 5 * n * n * 16  # complex128 entries of u (2), b (2), theta (1)
    if len(payload) != expected:
        raise CheckpointError(
            f"{path}: payload has {len(payload)} bytes, expected {expected}"
        )
    digest = hashlib.sha256(payload).hexdigest()
    if digest != header["payload_sha256"]:
        raise CheckpointError(f"{path}: payload checksum mismatch (field 'payload_sha256')")
    grid = Grid(n)
    arr = np.frombuffer(payload, dtype="<c16").reshape(5, n, n)
    return State(
        grid,
        np.stack([arr[0], arr[1]]),
        np.stack([arr[2], arr[3]]),
        arr[4].copy(),
        float(header["t"]),
    )


# ---------------------------------------------------------------------------
# sweep outputs


def write_sweep_csv(path, result) -> None:
    lines = ["epsilon,e_inf,e_int"]
    for row in result.rows:
        lines.append(f"{row.epsilon!r},{row.e_inf!r},{row.e_int!r}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def _fit_dict(fit):
    if fit is None:
        return None
    return {
        "slope": fit.slope,
        "intercept": fit.intercept,
        "residuals": list(fit.residuals),
        "r_squared": fit.r_squared,
    }


def write_ratefit_json(path, result) -> None:
    plan = result.plan
    doc = {
        "plan": {
            "grid_n": plan.grid_n,
            "nu": plan.params.nu,
            "mu": plan.params.mu,
            "kappa": plan.params.kappa,
            "g": plan.params.g,
            "alpha": plan.params.alpha,
            "family": plan.family,
            "epsilon_ladder": list(plan.epsilon_ladder),
            "dt": plan.dt,
            "t_final": plan.t_final,
            "initial": plan.initial,
            "seed": plan.seed,
            "record_every": plan.record_every,
            "cfl_safety": plan.cfl_safety,
        },
        "rows": [
            {"epsilon": r.epsilon, "e_inf": r.e_inf, "e_int": r.e_int, "max_curl": r.max_curl}
            for r in result.rows
        ],
        "reference_tail": result.reference_tail,
        "fit_inf": _fit_dict(result.fit_inf),
        "fit_int": _fit_dict(result.fit_int),
        "zero_error": result.zero_error,
        "monotone_inf": result.monotone_inf,
        "expected_order": None if result.expected_order != result.expected_order else result.expected_order,
    }
    atomic_write_text(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")
