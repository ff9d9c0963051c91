"""NGRD binary grids, JSON sidecars, CSV results and run manifests.

NGRD layout (little-endian): b"NGRD", u32 version = 1, u8 d, u64 dims[d],
f64 origin[d], f64 spacing, f64 values (row-major, last axis fastest).
"""

from __future__ import annotations

import hashlib
import io
import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .errors import GridFormatError
from .sampler import FieldRealization

MAGIC = b"NGRD"
VERSION = 1
CSV_HEADER = "model,R,i,mean,std,ci_lo,ci_hi,N"


def atomic_write(path, data: bytes):
    """Write to a temporary file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def grid_bytes(realization: FieldRealization) -> bytes:
    d = realization.dimension
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<IB", VERSION, d))
    buf.write(struct.pack(f"<{d}Q", *realization.dims))
    buf.write(struct.pack(f"<{d}d", *map(float, realization.origin)))
    buf.write(struct.pack("<d", float(realization.spacing)))
    buf.write(np.ascontiguousarray(realization.values, dtype="<f8").tobytes())
    return buf.getvalue()


def parse_grid(data: bytes) -> FieldRealization:
    if len(data) < 4 or data[:4] != MAGIC:
        raise GridFormatError("bad magic")
    if len(data) < 9:
        raise GridFormatError("truncated payload")
    version, d = struct.unpack_from("<IB", data, 4)
    if version != VERSION:
        raise GridFormatError("version unsupported")
    if d < 1:
        raise GridFormatError("truncated payload")
    off = 9
    head = off + 8 * d + 8 * d + 8
    if len(data) < head:
        raise GridFormatError("truncated payload")
    dims = struct.unpack_from(f"<{d}Q", data, off)
    origin = struct.unpack_from(f"<{d}d", data, off + 8 * d)
    (spacing,) = struct.unpack_from("<d", data, off + 16 * d)
    count = int(np.prod(dims, dtype=np.int64))
    if len(data) != head + 8 * count:
        raise GridFormatError("truncated payload")
    values = np.frombuffer(data, dtype="<f8", count=count, offset=head).astype(float).reshape(dims)
    return FieldRealization(tuple(origin), spacing, values)


def write_grid(path, realization: FieldRealization, sidecar=True):
    atomic_write(path, grid_bytes(realization))
    if sidecar and realization.meta:
        write_json(sidecar_path(path), realization.meta)


def sidecar_path(path):
    return Path(str(path) + ".json")


def read_grid(path) -> FieldRealization:
    real = parse_grid(Path(path).read_bytes())
    side = sidecar_path(path)
    if side.exists():
        meta = json.loads(side.read_text())
        real.meta = meta
        real.seed = meta.get("seed")
        real.method = meta.get("method", real.method)
    return real


def json_bytes(obj) -> bytes:
    return (json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n").encode()


def _jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not JSON serialisable: {type(x).__name__}")


def write_json(path, obj):
    atomic_write(path, json_bytes(obj))


def fmt(x):
    """17 significant digits, stable across runs."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def results_csv(result) -> bytes:
    lines = [CSV_HEADER]
    for r in result.rows:
        lines.append(",".join([result.model, fmt(r.R), str(r.i), fmt(r.mean), fmt(r.std), fmt(r.ci_lo), fmt(r.ci_hi), str(r.N)]))
    return ("\n".join(lines) + "\n").encode()


def census_csv(result) -> bytes:
    """Per (R, class): mean count per unit volume with its replicate count."""
    from .harness import student_ci
    from .topology import ball_volume

    lines = ["model,R,class,rate,std,ci_lo,ci_hi,N"]
    for R, samples in result.census_samples.items():
        vol = ball_volume(result.dimension, R)
        labels = sorted({k for c in samples for k in c}, key=lambda s: (len(s), s))
        for lab in labels:
            mean, std, lo, hi = student_ci([c.get(lab, 0) / vol for c in samples])
            lines.append(",".join([result.model, fmt(R), lab, fmt(mean), fmt(std), fmt(lo), fmt(hi), str(len(samples))]))
    return ("\n".join(lines) + "\n").encode()


def sha256_file(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(path, config_hash, master_seed, seeds, outputs, version, timestamps=None):
    """Record digests of already-written outputs.  Timestamps only when given."""
    manifest = {
        "config_hash": config_hash,
        "master_seed": master_seed,
        "version": version,
        "seeds": seeds,
        "outputs": {Path(p).name: sha256_file(p) for p in outputs},
        "started": None,
        "finished": None,
    }
    if timestamps:
        manifest["started"], manifest["finished"] = timestamps
    write_json(path, manifest)
    return manifest


def verify_manifest(path):
    """True when every recorded digest matches the file next to the manifest."""
    path = Path(path)
    manifest = json.loads(path.read_text())
    for name, digest in manifest["outputs"].items():
        target = path.parent / name
        if not target.exists() or sha256_file(target) != digest:
            return False
    return True
