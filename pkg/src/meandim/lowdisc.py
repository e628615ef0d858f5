"""Sobol' points, nested uniform scrambling and midpoint grids.

Points carry 32 bits of precision. Direction numbers are read from a
Joe--Kuo style text file (``d s a m_1 ... m_s`` per line); the package
ships the 21201-dimension table under ``meandim/data``.
"""

from __future__ import annotations

import functools
import hashlib
import io
import os
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, TextIO

import numpy as np

BITS = 32
ZERO_REPLACEMENT = 2.0 ** -33
DEFAULT_DIRECTION_FILE = "new-joe-kuo-6.21201"
DEFAULT_DIRECTION_SHA256 = "bab952c1594010f4dce869b64e343f6fdf8afb0f6d466450997393f635007194"
DIRS_ENV_VAR = "MEANDIM_DIRS"

_MASK64 = np.uint64(0xFFFFFFFFFFFFFFFF)


class DirectionTableError(ValueError):
    pass


@dataclass(frozen=True)
class DirectionRecord:
    dim: int
    degree: int
    poly: int
    m: tuple[int, ...]


@dataclass(frozen=True, eq=False)
class DirectionTable:
    """Direction numbers for dimensions ``1..max_dim``.

    ``v[j, k-1]`` is the 32-bit direction integer v_{j+1,k}; row 0 is the
    van der Corput column ``2**(32-k)``.
    """

    records: tuple[DirectionRecord, ...]
    v: np.ndarray = field(repr=False)

    @property
    def max_dim(self) -> int:
        return self.v.shape[0]

    def check_dim(self, dim: int) -> None:
        if dim < 1:
            raise ValueError(f"dimension must be >= 1, got {dim}")
        if dim > self.max_dim:
            raise DirectionTableError(
                f"direction table supports {self.max_dim} dimensions, {dim} requested"
            )


def _direction_integers(rec: DirectionRecord) -> np.ndarray:
    s, a = rec.degree, rec.poly
    m = list(rec.m)
    for k in range(s, BITS):
        new = m[k - s] ^ (m[k - s] << s)
        for i in range(1, s):
            if (a >> (s - 1 - i)) & 1:
                new ^= m[k - i] << i
        m.append(new)
    return np.array([m[k] << (BITS - 1 - k) for k in range(BITS)], dtype=np.uint64)


def load_direction_table(stream: TextIO | Iterable[str], max_dim: int | None = None) -> DirectionTable:
    """Parse a direction-number file.

    Records must start at d=2 and be contiguous. A single leading header
    line that starts with a non-digit is skipped. Parsing stops once
    ``max_dim`` dimensions are available.
    """
    records: list[DirectionRecord] = []
    seen_data = False
    for lineno, line in enumerate(stream, start=1):
        text = line.strip()
        if not text:
            continue
        if not seen_data and not records and not text[0].isdigit():
            if lineno != 1:
                raise DirectionTableError(f"line {lineno}: header only allowed on first line")
            continue
        seen_data = True
        try:
            fields = [int(tok) for tok in text.split()]
        except ValueError:
            raise DirectionTableError(f"line {lineno}: non-integer field in {text!r}") from None
        if len(fields) < 4:
            raise DirectionTableError(f"line {lineno}: expected 'd s a m_1 ... m_s'")
        d, s, a, *m = fields
        expected = len(records) + 2
        if d != expected:
            raise DirectionTableError(f"line {lineno}: dimension gap, expected d={expected}, got {d}")
        if s < 1 or len(m) != s:
            raise DirectionTableError(f"line {lineno}: degree {s} but {len(m)} initial values")
        if a < 0 or a >= 1 << max(s - 1, 0):
            raise DirectionTableError(f"line {lineno}: polynomial code {a} out of range for degree {s}")
        for i, mi in enumerate(m, start=1):
            if mi % 2 == 0:
                raise DirectionTableError(f"line {lineno}: m_{i}={mi} is even")
            if not 0 < mi < 1 << i:
                raise DirectionTableError(f"line {lineno}: m_{i}={mi} not below 2^{i}")
        records.append(DirectionRecord(d, s, a, tuple(m)))
        if max_dim is not None and len(records) + 1 >= max_dim:
            break
    if not records:
        raise DirectionTableError("no records")
    v = np.empty((len(records) + 1, BITS), dtype=np.uint64)
    v[0] = [1 << (BITS - 1 - k) for k in range(BITS)]
    for row, rec in enumerate(records, start=1):
        v[row] = _direction_integers(rec)
    v.setflags(write=False)
    return DirectionTable(tuple(records), v)


def direction_file_path(path: str | os.PathLike | None = None) -> str:
    """Resolve a direction file: explicit path, then $MEANDIM_DIRS, then the shipped table."""
    if path:
        return os.fspath(path)
    env = os.environ.get(DIRS_ENV_VAR)
    if env:
        return env
    return str(resources.files("meandim") / "data" / DEFAULT_DIRECTION_FILE)


def file_sha256(path: str | os.PathLike) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


@functools.lru_cache(maxsize=8)
def _cached_table(path: str, max_dim: int | None) -> DirectionTable:
    with open(path) as fh:
        return load_direction_table(fh, max_dim=max_dim)


def default_direction_table(max_dim: int | None = 4096, path: str | None = None) -> DirectionTable:
    """Load (and cache) the direction table from ``path`` or the default location."""
    return _cached_table(direction_file_path(path), max_dim)


@dataclass(frozen=True, eq=False)
class PointBatch:
    """An immutable ``n x dim`` block of points in (0, 1).

    ``bits`` keeps the 32-bit integer digits the values were made from;
    ``scramble_seed`` is None for raw Sobol' and midpoint batches.
    """

    values: np.ndarray
    bits: np.ndarray | None = field(default=None, repr=False)
    replicate_id: int = 0
    scramble_seed: int | None = None

    def __post_init__(self):
        self.values.setflags(write=False)
        if self.bits is not None:
            self.bits.setflags(write=False)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]


def _bits_to_unit(bits: np.ndarray) -> np.ndarray:
    values = bits.astype(np.float64) * 2.0 ** -BITS
    values[values == 0.0] = ZERO_REPLACEMENT
    return values


def _log2_exact(n: int) -> int:
    if n < 1 or n & (n - 1):
        raise ValueError(f"n must be a power of two, got {n}")
    m = n.bit_length() - 1
    if m > BITS:
        raise ValueError(f"n = 2^{m} exceeds 2^{BITS}")
    return m


def sobol_bits(table: DirectionTable, n: int, dim: int) -> np.ndarray:
    """Raw 32-bit Sobol' digits in Gray-code order, shape ``(n, dim)``."""
    _log2_exact(n)
    table.check_dim(dim)
    v = table.v[:dim]
    out = np.zeros((n, dim), dtype=np.uint64)
    if n > 1:
        i = np.arange(1, n, dtype=np.int64)
        # index of the lowest set bit of i picks the direction integer to XOR in
        ctz = np.log2(i & -i).astype(np.int64)
        out[1:] = np.bitwise_xor.accumulate(v[:, ctz].T, axis=0)
    return out


def sobol_bits_direct(table: DirectionTable, n: int, dim: int) -> np.ndarray:
    """Sobol' digits by direct binary expansion of the Gray code of each index."""
    _log2_exact(n)
    table.check_dim(dim)
    idx = np.arange(n, dtype=np.uint64)
    gray = idx ^ (idx >> np.uint64(1))
    out = np.zeros((n, dim), dtype=np.uint64)
    for k in range(BITS):
        sel = ((gray >> np.uint64(k)) & np.uint64(1)).astype(bool)
        if not sel.any():
            break
        out[sel] ^= table.v[:dim, k]
    return out


def sobol_points(table: DirectionTable, n: int, dim: int, replicate_id: int = 0) -> PointBatch:
    """First ``n`` Sobol' points in ``dim`` dimensions (unscrambled)."""
    bits = sobol_bits(table, n, dim)
    return PointBatch(_bits_to_unit(bits), bits, replicate_id=replicate_id)


def _mix64(x: np.ndarray) -> np.ndarray:
    # splitmix64 finalizer; uint64 arithmetic wraps
    x = x ^ (x >> np.uint64(30))
    x = x * np.uint64(0xBF58476D1CE4E5B9)
    x = x ^ (x >> np.uint64(27))
    x = x * np.uint64(0x94D049BB133111EB)
    return x ^ (x >> np.uint64(31))


def _coordinate_keys(seed: int, dim: int) -> np.ndarray:
    if not 0 <= seed < 1 << 64:
        raise ValueError("scramble seed must be a 64-bit unsigned integer")
    with np.errstate(over="ignore"):
        base = _mix64(np.array([seed], dtype=np.uint64) ^ np.uint64(0x9E3779B97F4A7C15))
        coords = _mix64(np.arange(dim, dtype=np.uint64) + np.uint64(0x632BE59BD9B4E019))
        return _mix64(base ^ coords)


def owen_scramble_bits(bits: np.ndarray, seed: int) -> np.ndarray:
    """Nested uniform scramble of 32-bit digits.

    Digit k of coordinate j is flipped by a hash of (seed, j, k leading
    input digits), i.e. an independent random bit per node of the binary
    permutation tree.
    """
    n, dim = bits.shape
    keys = _coordinate_keys(seed, dim)
    out = np.zeros_like(bits)
    one = np.uint64(1)
    with np.errstate(over="ignore"):
        for k in range(BITS):
            shift = np.uint64(BITS - k)
            prefix = bits >> shift if k else np.zeros_like(bits)
            node = prefix | (one << np.uint64(k))
            flip = _mix64(node ^ keys) >> np.uint64(63)
            digit = (bits >> np.uint64(BITS - 1 - k)) & one
            out |= (digit ^ flip) << np.uint64(BITS - 1 - k)
    return out


def owen_scramble(batch: PointBatch, seed: int, replicate_id: int | None = None) -> PointBatch:
    """Apply a nested uniform scramble to an unscrambled Sobol' batch."""
    if batch.bits is None:
        raise ValueError("batch has no digit representation to scramble")
    if batch.scramble_seed is not None:
        raise ValueError("batch is already scrambled")
    bits = owen_scramble_bits(batch.bits, int(seed))
    rid = batch.replicate_id if replicate_id is None else replicate_id
    return PointBatch(_bits_to_unit(bits), bits, replicate_id=rid, scramble_seed=int(seed))


def scrambled_sobol(table: DirectionTable, n: int, dim: int, seed: int, replicate_id: int = 0) -> PointBatch:
    return owen_scramble(sobol_points(table, n, dim), seed, replicate_id=replicate_id)


def midpoint_grid(n: int) -> PointBatch:
    """Values ``(i + 0.5) / n`` for ``i = 0..n-1`` as an ``n x 1`` batch."""
    if n < 1:
        raise ValueError(f"midpoint grid needs n >= 1, got {n}")
    values = ((np.arange(n, dtype=np.float64) + 0.5) / n).reshape(n, 1)
    return PointBatch(values)


def dyadic_counts(batch: PointBatch, k: int) -> np.ndarray:
    """Counts per elementary interval ``[a 2^-k, (a+1) 2^-k)``, shape ``(dim, 2^k)``."""
    if batch.bits is not None:
        cells = (batch.bits >> np.uint64(BITS - k)).astype(np.int64)
    else:
        cells = np.floor(batch.values * 2 ** k).astype(np.int64)
    return np.stack([np.bincount(cells[:, j], minlength=2 ** k) for j in range(batch.dim)])


def table_from_text(text: str, max_dim: int | None = None) -> DirectionTable:
    return load_direction_table(io.StringIO(text), max_dim=max_dim)
