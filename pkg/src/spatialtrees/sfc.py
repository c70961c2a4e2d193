"""Morton (Z-order) and Hilbert curve codes for 2-d and 3-d integer points.

Codes are unsigned 64-bit. Bit budget per dimension is 32 in 2-d and 21 in
3-d. Morton places bit ``i`` of dimension ``d`` at output bit ``i*D + d``,
so dimension 0 takes the least-significant slot of every group.

The Hilbert code uses Skilling's transpose formulation (Gray code plus
per-level reflect/rotate), vectorised over whole coordinate arrays.
"""

from __future__ import annotations

import enum
from typing import NamedTuple

import numpy as np

from .geometry import Point

__all__ = [
    "SfcKind",
    "SfcCode",
    "SfcEncodingError",
    "default_bits",
    "morton_encode",
    "morton_encode_array",
    "morton_decode_array",
    "hilbert_encode",
    "hilbert_encode_array",
    "hilbert_decode",
    "hilbert_decode_array",
    "encode_array",
]


class SfcKind(enum.Enum):
    MORTON = "morton"
    HILBERT = "hilbert"


class SfcCode(NamedTuple):
    code: int
    id: int


class SfcEncodingError(ValueError):
    def __init__(self, message: str, dim: int | None = None, point_id: int | None = None):
        super().__init__(message)
        self.dim = dim
        self.point_id = point_id


_BITS = {2: 32, 3: 21}

_U = np.uint64


def default_bits(dims: int) -> int:
    try:
        return _BITS[dims]
    except KeyError:
        raise ValueError(f"only 2-d and 3-d points are supported, got D={dims}") from None


def _spread2(x: np.ndarray) -> np.ndarray:
    x = x & _U(0xFFFFFFFF)
    x = (x | (x << _U(16))) & _U(0x0000FFFF0000FFFF)
    x = (x | (x << _U(8))) & _U(0x00FF00FF00FF00FF)
    x = (x | (x << _U(4))) & _U(0x0F0F0F0F0F0F0F0F)
    x = (x | (x << _U(2))) & _U(0x3333333333333333)
    x = (x | (x << _U(1))) & _U(0x5555555555555555)
    return x


def _compact2(x: np.ndarray) -> np.ndarray:
    x = x & _U(0x5555555555555555)
    x = (x | (x >> _U(1))) & _U(0x3333333333333333)
    x = (x | (x >> _U(2))) & _U(0x0F0F0F0F0F0F0F0F)
    x = (x | (x >> _U(4))) & _U(0x00FF00FF00FF00FF)
    x = (x | (x >> _U(8))) & _U(0x0000FFFF0000FFFF)
    x = (x | (x >> _U(16))) & _U(0xFFFFFFFF)
    return x


def _spread3(x: np.ndarray) -> np.ndarray:
    x = x & _U(0x1FFFFF)
    x = (x | (x << _U(32))) & _U(0x1F00000000FFFF)
    x = (x | (x << _U(16))) & _U(0x1F0000FF0000FF)
    x = (x | (x << _U(8))) & _U(0x100F00F00F00F00F)
    x = (x | (x << _U(4))) & _U(0x10C30C30C30C30C3)
    x = (x | (x << _U(2))) & _U(0x1249249249249249)
    return x


def _compact3(x: np.ndarray) -> np.ndarray:
    x = x & _U(0x1249249249249249)
    x = (x | (x >> _U(2))) & _U(0x10C30C30C30C30C3)
    x = (x | (x >> _U(4))) & _U(0x100F00F00F00F00F)
    x = (x | (x >> _U(8))) & _U(0x1F0000FF0000FF)
    x = (x | (x >> _U(16))) & _U(0x1F00000000FFFF)
    x = (x | (x >> _U(32))) & _U(0x1FFFFF)
    return x


_SPREAD = {2: _spread2, 3: _spread3}
_COMPACT = {2: _compact2, 3: _compact3}


def _check_range(coords: np.ndarray, bits: int, ids=None) -> None:
    if len(coords) == 0:
        return
    limit = 1 << bits
    bad = (coords < 0) | (coords >= limit)
    if bad.any():
        rows, cols = np.nonzero(bad)
        r, d = int(rows[0]), int(cols[0])
        pid = int(ids[r]) if ids is not None else None
        raise SfcEncodingError(
            f"coordinate {int(coords[r, d])} in dimension {d} is outside [0, 2**{bits})"
            + (f" (point id {pid})" if pid is not None else ""),
            dim=d,
            point_id=pid,
        )


def _prepare(coords, bits: int | None, ids=None):
    coords = np.asarray(coords, dtype=np.int64)
    if coords.ndim != 2:
        raise ValueError("coords must be an (n, D) array")
    dims = coords.shape[1]
    full = default_bits(dims)
    if bits is None:
        bits = full
    elif not 1 <= bits <= full:
        raise ValueError(f"bits must be in [1, {full}] for D={dims}")
    _check_range(coords, bits, ids)
    return coords, dims, bits


def morton_encode_array(coords, bits: int | None = None, ids=None) -> np.ndarray:
    coords, dims, bits = _prepare(coords, bits, ids)
    spread = _SPREAD[dims]
    u = coords.astype(np.uint64)
    code = spread(u[:, 0])
    for d in range(1, dims):
        code |= spread(u[:, d]) << _U(d)
    return code


def morton_decode_array(codes, dims: int) -> np.ndarray:
    codes = np.asarray(codes, dtype=np.uint64)
    compact = _COMPACT[dims]
    return np.stack([compact(codes >> _U(d)) for d in range(dims)], axis=1).astype(np.int64)


_BLOCK = 1 << 16


def _hilbert_block(coords: np.ndarray, dims: int, bits: int) -> np.ndarray:
    X = [coords[:, i].astype(np.uint64) for i in range(dims)]
    one, zero = _U(1), _U(0)
    m, t, tmp = np.empty_like(X[0]), np.empty_like(X[0]), np.empty_like(X[0])

    def bit_mask(x, k):
        # all-ones where bit k of x is set
        np.right_shift(x, _U(k), out=m)
        np.bitwise_and(m, one, out=m)
        np.subtract(zero, m, out=m)

    # inverse undo, branch-free
    for k in range(bits - 1, 0, -1):
        P = _U((1 << k) - 1)
        for i in range(dims):
            bit_mask(X[i], k)
            np.bitwise_and(m, P, out=tmp)
            if i == 0:
                np.bitwise_xor(X[0], tmp, out=X[0])
                continue
            np.bitwise_xor(X[0], X[i], out=t)
            np.bitwise_and(t, P, out=t)
            np.bitwise_and(t, ~m, out=t)
            np.bitwise_or(tmp, t, out=tmp)
            np.bitwise_xor(X[0], tmp, out=X[0])
            np.bitwise_xor(X[i], t, out=X[i])
    # gray encode
    for i in range(1, dims):
        X[i] ^= X[i - 1]
    t[...] = 0
    for k in range(bits - 1, 0, -1):
        bit_mask(X[dims - 1], k)
        np.bitwise_and(m, _U((1 << k) - 1), out=m)
        np.bitwise_xor(t, m, out=t)
    spread = _SPREAD[dims]
    code = np.zeros_like(X[0])
    for i in range(dims):
        code |= spread(X[i] ^ t) << _U(dims - 1 - i)
    return code


def hilbert_encode_array(coords, bits: int | None = None, ids=None) -> np.ndarray:
    coords, dims, bits = _prepare(coords, bits, ids)
    n = len(coords)
    if n <= _BLOCK:
        return _hilbert_block(coords, dims, bits)
    out = np.empty(n, dtype=np.uint64)
    for a in range(0, n, _BLOCK):
        out[a:a + _BLOCK] = _hilbert_block(coords[a:a + _BLOCK], dims, bits)
    return out


def hilbert_decode_array(codes, dims: int, bits: int | None = None) -> np.ndarray:
    if bits is None:
        bits = default_bits(dims)
    codes = np.asarray(codes, dtype=np.uint64)
    compact = _COMPACT[dims]
    X = [compact(codes >> _U(dims - 1 - i)) for i in range(dims)]
    zero = _U(0)
    # gray decode
    t = X[dims - 1] >> _U(1)
    for i in range(dims - 1, 0, -1):
        X[i] = X[i] ^ X[i - 1]
    X[0] = X[0] ^ t
    # undo excess work
    q = 2
    while q != (2 << (bits - 1)):
        Q, P = _U(q), _U(q - 1)
        for i in range(dims - 1, -1, -1):
            high = (X[i] & Q) != zero
            if i == 0:
                X[0] = np.where(high, X[0] ^ P, X[0])
                continue
            t = np.where(high, zero, (X[0] ^ X[i]) & P)
            X[0] = X[0] ^ np.where(high, P, t)
            X[i] = X[i] ^ t
        q <<= 1
    return np.stack(X, axis=1).astype(np.int64)


def encode_array(coords, kind: SfcKind, bits: int | None = None, ids=None) -> np.ndarray:
    if kind is SfcKind.MORTON:
        return morton_encode_array(coords, bits, ids)
    if kind is SfcKind.HILBERT:
        return hilbert_encode_array(coords, bits, ids)
    raise ValueError(f"unknown curve kind {kind!r}")


def _point_args(p, dims):
    coords = p.coords if isinstance(p, Point) else tuple(p)
    pid = p.id if isinstance(p, Point) else -1
    if dims is not None and len(coords) != dims:
        raise ValueError(f"point has {len(coords)} coordinates, expected {dims}")
    return np.array([coords], dtype=np.int64), pid


def morton_encode(p, dims: int | None = None, bits: int | None = None) -> SfcCode:
    arr, pid = _point_args(p, dims)
    return SfcCode(int(morton_encode_array(arr, bits, ids=[pid])[0]), pid)


def hilbert_encode(p, dims: int | None = None, bits: int | None = None) -> SfcCode:
    arr, pid = _point_args(p, dims)
    return SfcCode(int(hilbert_encode_array(arr, bits, ids=[pid])[0]), pid)


def hilbert_decode(code: int, dims: int, bits: int | None = None) -> Point:
    if bits is None:
        bits = default_bits(dims)
    if not 0 <= code < (1 << (bits * dims)):
        raise ValueError(f"code {code} outside [0, 2**{bits * dims})")
    xs = hilbert_decode_array(np.array([code], dtype=np.uint64), dims, bits)[0]
    return Point(tuple(int(v) for v in xs))
