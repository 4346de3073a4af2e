"""CRC-64/XZ checksum (reflected poly 0xC96C5795D7870F42, init/xorout all
ones), with a chunk-parallel numpy path so multi-megabyte cache payloads
hash in well under a second.

The parallel path splits the message into equal chunks, runs a vectorized
slice-by-8 update across all chunks simultaneously, and folds the chunk
CRCs together with GF(2) shift matrices (the crc32_combine construction).
"""

from __future__ import annotations

import numpy as np

__all__ = ["crc64"]

_POLY = 0xC96C5795D7870F42
_INIT = 0xFFFFFFFFFFFFFFFF
_XOROUT = 0xFFFFFFFFFFFFFFFF
_MASK = 0xFFFFFFFFFFFFFFFF


def _make_tables():
    t0 = []
    for b in range(256):
        crc = b
        for _ in range(8):
            crc = (crc >> 1) ^ _POLY if crc & 1 else crc >> 1
        t0.append(crc)
    tables = [t0]
    for _ in range(7):
        prev = tables[-1]
        tables.append([(prev[b] >> 8) ^ t0[prev[b] & 0xFF] for b in range(256)])
    return tables


_TABLES = _make_tables()
_NP_TABLES = [np.array(t, dtype=np.uint64) for t in _TABLES]


def _crc_bytes(data, crc: int) -> int:
    t0 = _TABLES[0]
    for b in data:
        crc = t0[(crc ^ b) & 0xFF] ^ (crc >> 8)
    return crc


def _zero_op_matrix():
    """GF(2) matrix of the one-zero-byte state advance, as 64 column masks."""
    t0 = _TABLES[0]
    return [t0[(1 << i) & 0xFF] ^ ((1 << i) >> 8) for i in range(64)]


def _mat_times(mat, vec: int) -> int:
    out = 0
    i = 0
    while vec:
        if vec & 1:
            out ^= mat[i]
        vec >>= 1
        i += 1
    return out


def _mat_square(mat):
    return [_mat_times(mat, col) for col in mat]


def _shift_matrix(nbytes: int):
    """Matrix advancing the CRC state across nbytes zero bytes."""
    mat = _zero_op_matrix()
    out = None
    n = nbytes
    while n:
        if n & 1:
            out = mat if out is None else [_mat_times(mat, col) for col in out]
        n >>= 1
        if n:
            mat = _mat_square(mat)
    if out is None:  # nbytes == 0
        return [1 << i for i in range(64)]
    return out


_CHUNKS = 1024
_PARALLEL_MIN = 1 << 16


def crc64(data) -> int:
    """CRC-64/XZ of a bytes-like object."""
    buf = memoryview(data).cast("B")
    n = len(buf)
    if n < _PARALLEL_MIN:
        return _crc_bytes(buf, _INIT) ^ _XOROUT

    words_per_chunk = n // (8 * _CHUNKS)
    chunk_len = 8 * words_per_chunk
    bulk = chunk_len * _CHUNKS
    words = np.frombuffer(buf[:bulk], dtype="<u8").reshape(_CHUNKS, words_per_chunk)

    state = np.zeros(_CHUNKS, dtype=np.uint64)
    t = _NP_TABLES
    eight = np.uint64(8)
    mask = np.uint64(0xFF)
    for w in range(words_per_chunk):
        x = state ^ words[:, w]
        acc = t[7][(x & mask).astype(np.intp)]
        for i in range(1, 8):
            x = x >> eight
            acc = acc ^ t[7 - i][(x & mask).astype(np.intp)]
        state = acc

    shift = _shift_matrix(chunk_len)
    crc = _INIT
    for raw in state.tolist():
        crc = _mat_times(shift, crc) ^ raw
    crc = _crc_bytes(buf[bulk:], crc)
    return crc ^ _XOROUT
