"""Flat binary parameter archives.

Layout (all integers little-endian):

    magic   8 bytes  b"SERLCKP1"
    u32     header length, then that many bytes of UTF-8 JSON
            (carries at least "config_hash" and "seed")
    u32     number of parameter records
    record  u16 name length, name bytes,
            u8 rank, rank x u32 dims,
            float64 little-endian values (row-major)

Records are written in sorted name order so identical parameter dicts
produce byte-identical files.
"""

from __future__ import annotations

import hashlib
import json
import struct

import numpy as np

from ..errors import CheckpointError

_MAGIC = b"SERLCKP1"


def config_hash(config: dict) -> str:
    """Stable hash of a JSON-serializable config snapshot."""
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def save_checkpoint(path, params: dict[str, np.ndarray], header: dict):
    if "config_hash" not in header or "seed" not in header:
        raise CheckpointError("header must carry 'config_hash' and 'seed'")
    hdr = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<I", len(hdr)))
        f.write(hdr)
        f.write(struct.pack("<I", len(params)))
        for name in sorted(params):
            arr = np.ascontiguousarray(params[name], dtype="<f8")
            nb = name.encode()
            f.write(struct.pack("<H", len(nb)))
            f.write(nb)
            f.write(struct.pack("<B", arr.ndim))
            f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            f.write(arr.tobytes())


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    with open(path, "rb") as f:
        blob = f.read()
    view = memoryview(blob)
    if view[:8].tobytes() != _MAGIC:
        raise CheckpointError(f"{path}: not a parameter archive")
    off = 8
    try:
        (hlen,) = struct.unpack_from("<I", view, off)
        off += 4
        header = json.loads(view[off:off + hlen].tobytes().decode())
        off += hlen
        (count,) = struct.unpack_from("<I", view, off)
        off += 4
        params: dict[str, np.ndarray] = {}
        for _ in range(count):
            (nlen,) = struct.unpack_from("<H", view, off)
            off += 2
            name = view[off:off + nlen].tobytes().decode()
            off += nlen
            (ndim,) = struct.unpack_from("<B", view, off)
            off += 1
            shape = struct.unpack_from(f"<{ndim}I", view, off)
            off += 4 * ndim
            n = int(np.prod(shape)) if ndim else 1
            arr = np.frombuffer(view, dtype="<f8", count=n, offset=off)
            off += 8 * n
            params[name] = arr.reshape(shape).astype(np.float64)
    except (struct.error, ValueError, UnicodeDecodeError) as exc:
        raise CheckpointError(f"{path}: truncated or corrupt archive "
                              f"({exc})") from exc
    if off != len(blob):
        raise CheckpointError(f"{path}: {len(blob) - off} trailing bytes")
    return params, header
