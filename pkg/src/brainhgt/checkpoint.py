"""Binary parameter checkpoints.

Layout (little-endian)::

    b"BHCK" | u32 version | u32 count |
    count x ( u32 name_len | name utf-8 | u32 rank | rank x u32 dim | f64 payload )

A JSON manifest next to the binary lists names, shapes and the SHA-256 of the
binary; loading verifies the digest when the manifest is present.
"""

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .errors import ChecksumMismatch, IoError, MissingArtifact

MAGIC = b"BHCK"
VERSION = 1


def encode(params):
    parts = [MAGIC, struct.pack("<II", VERSION, len(params))]
    for name, arr in params.items():
        raw = name.encode("utf-8")
        arr = np.asarray(arr, dtype="<f8")
        parts.append(struct.pack("<I", len(raw)))
        parts.append(raw)
        parts.append(struct.pack("<I", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(np.ascontiguousarray(arr).tobytes())
    return b"".join(parts)


def decode(blob):
    try:
        if blob[:4] != MAGIC:
            raise ChecksumMismatch("bad checkpoint magic")
        version, count = struct.unpack_from("<II", blob, 4)
        if version != VERSION:
            raise ChecksumMismatch(f"unsupported checkpoint version {version}")
        off = 12
        params = {}
        for _ in range(count):
            (nlen,) = struct.unpack_from("<I", blob, off)
            off += 4
            name = blob[off:off + nlen].decode("utf-8")
            off += nlen
            (rank,) = struct.unpack_from("<I", blob, off)
            off += 4
            dims = struct.unpack_from(f"<{rank}I", blob, off)
            off += 4 * rank
            size = int(np.prod(dims)) if rank else 1
            arr = np.frombuffer(blob, dtype="<f8", count=size, offset=off).reshape(dims)
            off += 8 * size
            params[name] = arr.astype(np.float64)
        if off != len(blob):
            raise ChecksumMismatch("trailing bytes in checkpoint")
        return params
    except (struct.error, ValueError, UnicodeDecodeError) as exc:
        raise ChecksumMismatch(f"corrupted checkpoint: {exc}") from exc


def save(params, path):
    path = Path(path)
    blob = encode(params)
    path.write_bytes(blob)
    manifest = {
        "format": "BHCK",
        "version": VERSION,
        "sha256": hashlib.sha256(blob).hexdigest(),
        "tensors": [{"name": k, "shape": list(np.shape(v))} for k, v in params.items()],
    }
    path.with_suffix(".json").write_text(json.dumps(manifest, indent=2) + "\n")
    return path


def load(path, verify=True):
    path = Path(path)
    if not path.exists():
        raise MissingArtifact(f"checkpoint not found: {path}")
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise IoError(str(exc)) from exc
    side = path.with_suffix(".json")
    if verify and side.exists():
        expected = json.loads(side.read_text()).get("sha256")
        if expected and hashlib.sha256(blob).hexdigest() != expected:
            raise ChecksumMismatch(f"checkpoint digest mismatch: {path}")
    return decode(blob)
