"""Result and truth-trajectory persistence.

The results CSV is fully deterministic: rows are sorted, floats are written
with repr (shortest round-trip), and text is UTF-8 with '\\n' newlines.  The
truth cache is a small binary container: a 16-byte header (magic + version),
little-endian 64-bit dimensions, raw float64 payloads, and a trailing CRC32
checksum, written atomically so concurrent creators cannot corrupt it.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
import threading
import zlib
from pathlib import Path

import numpy as np

from ..core import ConfigurationError
from ..dynamics.truth import TruthBundle

MAGIC = b"ENFFDA01"
VERSION = 1

_creation_locks: dict[str, threading.Lock] = {}
_locks_guard = threading.Lock()


def _lock_for(path: Path) -> threading.Lock:
    with _locks_guard:
        return _creation_locks.setdefault(str(path), threading.Lock())


def _pack_array(a: np.ndarray) -> bytes:
    a = np.ascontiguousarray(a, dtype="<f8")
    head = struct.pack("<Q", a.ndim) + b"".join(struct.pack("<Q", d) for d in a.shape)
    return head + a.tobytes()


def _unpack_array(buf: memoryview, off: int):
    (ndim,) = struct.unpack_from("<Q", buf, off)
    off += 8
    shape = struct.unpack_from(f"<{ndim}Q", buf, off)
    off += 8 * ndim
    count = int(np.prod(shape)) if shape else 1
    a = np.frombuffer(buf, dtype="<f8", count=count, offset=off).reshape(shape)
    return a.astype(np.float64), off + 8 * count


def save_truth(path: str | Path, bundle: TruthBundle) -> None:
    obs_steps = np.array([float(j) for j, _ in bundle.observations])
    obs_values = (np.stack([y for _, y in bundle.observations])
                  if bundle.observations else np.empty((0, bundle.states.shape[1])))
    body = struct.pack("<Q", 3)
    for a in (bundle.states, obs_steps, obs_values):
        body += _pack_array(a)
    blob = MAGIC + struct.pack("<Q", VERSION) + body
    blob += struct.pack("<Q", zlib.crc32(blob))
    path = Path(path)
    tmp = path.with_name(path.name + f".tmp{os.getpid()}")
    tmp.parent.mkdir(parents=True, exist_ok=True)
    tmp.write_bytes(blob)
    os.replace(tmp, path)


def load_truth(path: str | Path) -> TruthBundle:
    blob = Path(path).read_bytes()
    if len(blob) < 24 or blob[:8] != MAGIC:
        raise ConfigurationError(f"{path} is not a truth cache (bad magic)")
    (version,) = struct.unpack_from("<Q", blob, 8)
    if version != VERSION:
        raise ConfigurationError(f"unsupported truth cache version {version}")
    (stored_crc,) = struct.unpack_from("<Q", blob, len(blob) - 8)
    if zlib.crc32(blob[:-8]) != stored_crc:
        raise ConfigurationError(f"{path} failed its checksum; delete and regenerate")
    view = memoryview(blob)
    (n_arrays,) = struct.unpack_from("<Q", view, 16)
    off = 24
    arrays = []
    for _ in range(n_arrays):
        a, off = _unpack_array(view, off)
        arrays.append(a)
    states, obs_steps, obs_values = arrays
    observations = tuple((int(j), obs_values[i]) for i, j in enumerate(obs_steps))
    return TruthBundle(states=states, observations=observations)


def truth_cache_path(cache_dir: str | Path, system: str, protocol_key: str, seed: int) -> Path:
    return Path(cache_dir) / f"truth_{system}_{protocol_key}_{seed}.bin"


def ensure_truth(path: Path, make) -> TruthBundle:
    """Load the cached bundle at ``path``, creating it with ``make()`` once."""
    if path.exists():
        return load_truth(path)
    with _lock_for(path):
        if not path.exists():
            save_truth(path, make())
    return load_truth(path)


def stable_hash(payload) -> str:
    """Short deterministic hash of a JSON-serialisable payload."""
    canon = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:12]


CSV_HEADER = ("system,filter,flow,guidance,T,N,seed,param1_name,param1,"
              "param2_name,param2,summary_rmse,diverged,wall_ms_per_step")


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def emit_csv(records, path: str | Path) -> Path:
    """Write run records to the delimited report (sorted, deterministic)."""
    records = list(records)
    if not records:
        raise ConfigurationError("no records to write")
    rows = []
    for r in records:
        p = list(r.params) + [("", "")] * (2 - len(r.params))
        rows.append((
            r.system, r.filter_name, r.flow, r.guidance, str(r.sampling_steps),
            str(r.ensemble_size), str(r.seed),
            p[0][0], _fmt(p[0][1]), p[1][0], _fmt(p[1][1]),
            _fmt(r.summary_rmse), "true" if r.diverged else "false",
            _fmt(r.wall_ms_per_step),
        ))
    rows.sort()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(CSV_HEADER + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")
    return path


def read_csv(path: str | Path) -> list[dict]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != CSV_HEADER:
        raise ConfigurationError(f"{path} does not match the results schema")
    cols = CSV_HEADER.split(",")
    return [dict(zip(cols, line.split(","))) for line in lines[1:] if line]
