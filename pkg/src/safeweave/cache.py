"""Value-function cache: the converged game value, its gradient fields, a
parameter fingerprint, and solve metadata, with a checksummed binary format.

File layout (little-endian):

    magic   4s   = b"HJVC"
    version u32  = 1
    fingerprint  32 bytes (SHA-256 of params + terminal data + grid)
    ndim    u32
    per dim:     lo f64, hi f64, count u32, periodic u8
    meta_len u32, meta JSON (UTF-8)
    V array      float64, row-major
    ndim gradient arrays, float64, row-major
    crc64   u64  over every preceding byte

Wall-clock solve time is kept on the in-memory object only, so solves with
identical inputs serialize to identical bytes.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .crc64 import crc64
from .grid import GridField, GridSpec

__all__ = ["CacheError", "ValueCache", "fingerprint", "save_cache", "load_cache"]

_MAGIC = b"HJVC"
_VERSION = 1


class CacheError(Exception):
    """Unusable cache file: bad magic/version, checksum, or fingerprint."""


def fingerprint(params, terminal_values: np.ndarray, spec: GridSpec) -> bytes:
    """SHA-256 over the physics and geometry the cache was solved with."""
    payload = {
        "params": {k: float(v).hex() for k, v in sorted(params.to_dict().items())},
        "grid": {
            "lo": [float(v).hex() for v in spec.lo],
            "hi": [float(v).hex() for v in spec.hi],
            "shape": list(spec.shape),
            "periodic": list(spec.periodic),
        },
    }
    h = hashlib.sha256(json.dumps(payload, sort_keys=True).encode())
    h.update(np.ascontiguousarray(terminal_values, dtype="<f8").tobytes())
    return h.digest()


@dataclass
class ValueCache:
    spec: GridSpec
    v: GridField
    grads: list
    fingerprint: bytes
    meta: dict
    wall_time: float = field(default=0.0, compare=False)

    @property
    def converged(self) -> bool:
        return bool(self.meta.get("converged", False))

    def require_converged(self):
        if not self.converged:
            raise CacheError("cache is flagged unconverged; refusing safety-critical use")


def save_cache(cache: ValueCache, path) -> None:
    spec = cache.spec
    parts = [_MAGIC, struct.pack("<I", _VERSION), cache.fingerprint, struct.pack("<I", spec.ndim)]
    for d in range(spec.ndim):
        parts.append(
            struct.pack("<ddIB", spec.lo[d], spec.hi[d], spec.shape[d], int(spec.periodic[d]))
        )
    meta_blob = json.dumps(cache.meta, sort_keys=True).encode()
    parts.append(struct.pack("<I", len(meta_blob)))
    parts.append(meta_blob)
    parts.append(np.ascontiguousarray(cache.v.values, dtype="<f8").tobytes())
    for g in cache.grads:
        parts.append(np.ascontiguousarray(g.values, dtype="<f8").tobytes())
    payload = b"".join(parts)
    trailer = struct.pack("<Q", crc64(payload))
    with open(path, "wb") as fh:
        fh.write(payload)
        fh.write(trailer)


def load_cache(path, params=None, terminal_values=None) -> ValueCache:
    """Read and verify a cache file.

    If `params` and `terminal_values` are given, the stored fingerprint is
    checked against them and a mismatch raises CacheError.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 8 + 4 + 4 + 32 + 4:
        raise CacheError("truncated cache file")
    payload, trailer = blob[:-8], blob[-8:]
    (stored_crc,) = struct.unpack("<Q", trailer)
    if crc64(payload) != stored_crc:
        raise CacheError("checksum mismatch: corrupt cache payload")

    off = 0
    if payload[:4] != _MAGIC:
        raise CacheError("bad magic: not a value cache file")
    off += 4
    (version,) = struct.unpack_from("<I", payload, off)
    off += 4
    if version != _VERSION:
        raise CacheError(f"unsupported cache version {version}")
    fp = payload[off : off + 32]
    off += 32
    (ndim,) = struct.unpack_from("<I", payload, off)
    off += 4
    lo, hi, shape, periodic = [], [], [], []
    for _ in range(ndim):
        a, b, n, p = struct.unpack_from("<ddIB", payload, off)
        off += struct.calcsize("<ddIB")
        lo.append(a)
        hi.append(b)
        shape.append(n)
        periodic.append(bool(p))
    spec = GridSpec(lo=tuple(lo), hi=tuple(hi), shape=tuple(shape), periodic=tuple(periodic))
    (meta_len,) = struct.unpack_from("<I", payload, off)
    off += 4
    meta = json.loads(payload[off : off + meta_len].decode())
    off += meta_len

    count = spec.num_nodes
    nbytes = count * 8
    arrays = []
    for _ in range(ndim + 1):
        if off + nbytes > len(payload):
            raise CacheError("truncated cache payload")
        arrays.append(np.frombuffer(payload, dtype="<f8", count=count, offset=off).reshape(spec.shape).copy())
        off += nbytes
    if off != len(payload):
        raise CacheError("trailing bytes in cache payload")

    cache = ValueCache(
        spec=spec,
        v=GridField(spec, arrays[0]),
        grads=[GridField(spec, a) for a in arrays[1:]],
        fingerprint=fp,
        meta=meta,
    )
    if params is not None and terminal_values is not None:
        expect = fingerprint(params, terminal_values, spec)
        if expect != fp:
            raise CacheError("fingerprint mismatch: cache was solved with different inputs")
    return cache
