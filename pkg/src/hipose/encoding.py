"""Hierarchical balanced binary surface encoding.

Every vertex of a 2**d-vertex mesh receives a unique d-bit code by recursive
balanced bisection: at each level a surface of L vertices is split by 2-means
into halves of floor(L/2) and L - floor(L/2) vertices, the half containing the
lowest vertex index takes bit 0, and the recursion continues until single
vertices remain. A k-bit prefix therefore names a sub-surface; the encoding
stores, for every level, the member vertex ids and the centroid of every
prefix.
"""

from __future__ import annotations

import os
import struct
import zlib

import numpy as np

from .errors import EncodingError, InputError, InvariantError
from .mesh import TriangleMesh

_KMEANS_MAX_ITER = 20
_KMEANS_REL_TOL = 1e-6

_MAGIC = b"HSENC\x00\x00\x00"
_VERSION = 1
_MAX_BITS = 24


class SurfaceEncoding:
    """Immutable per-vertex d-bit codes plus per-level prefix lookup tables.

    Attributes
    ----------
    d : bit depth; the mesh has exactly N = 2**d vertices.
    vertices : (N, 3) float64, model coordinates in mm.
    codes : (N,) uint32, codes[i] is the code of vertex i; a bijection onto
        range(N), so the inverse map decode_vertex[code] is well defined.
    """

    def __init__(self, vertices: np.ndarray, codes: np.ndarray, d: int):
        vertices = np.ascontiguousarray(np.asarray(vertices, dtype=np.float64))
        codes = np.ascontiguousarray(np.asarray(codes, dtype=np.uint32))
        n = len(vertices)
        if d < 1 or d > _MAX_BITS:
            raise InvariantError(f"bit depth must be in [1, {_MAX_BITS}], got {d}")
        if n != (1 << d):
            raise InvariantError(f"need 2^{d} = {1 << d} vertices, got {n}")
        if codes.shape != (n,):
            raise EncodingError(f"codes shape {codes.shape} != ({n},)")
        order = np.argsort(codes).astype(np.int64)
        if not np.array_equal(codes[order], np.arange(n, dtype=np.uint32)):
            raise EncodingError("codes are not a bijection onto {0,1}^d")

        self.d = int(d)
        self.n = n
        self.vertices = vertices
        self.codes = codes
        # decode_vertex[c] = vertex id whose code is c
        self.decode_vertex = order.copy()

        # Per level k: member ids of prefix p are a contiguous block of
        # 2^(d-k) entries, ascending within the block; centroids are the
        # arithmetic mean (np.mean over ascending-id members) of each block.
        self._level_ids: list[np.ndarray] = []
        self._level_centroids: list[np.ndarray] = []
        for k in range(d + 1):
            blocks = order.reshape(1 << k, 1 << (d - k))
            ids = np.sort(blocks, axis=1)
            cents = np.mean(vertices[ids], axis=1)
            ids = np.ascontiguousarray(ids.reshape(-1).astype(np.int64))
            cents = np.ascontiguousarray(cents)
            ids.flags.writeable = False
            cents.flags.writeable = False
            self._level_ids.append(ids)
            self._level_centroids.append(cents)
        for arr in (self.vertices, self.codes, self.decode_vertex):
            arr.flags.writeable = False

    # -- queries ------------------------------------------------------------

    def surface(self, level: int, prefix_value: int) -> tuple[np.ndarray, np.ndarray]:
        """Member vertex ids (ascending) and centroid of a prefix given as an
        integer at an explicit level. O(1): returns views into level tables."""
        if not 0 <= level <= self.d:
            raise InputError(f"level {level} outside [0, {self.d}]")
        if not 0 <= prefix_value < (1 << level):
            raise InputError(f"prefix value {prefix_value} invalid at level {level}")
        size = 1 << (self.d - level)
        ids = self._level_ids[level][prefix_value * size : (prefix_value + 1) * size]
        return ids, self._level_centroids[level][prefix_value]

    def centroids_at(self, level: int) -> np.ndarray:
        """(2^level, 3) centroid table for a whole level."""
        if not 0 <= level <= self.d:
            raise InputError(f"level {level} outside [0, {self.d}]")
        return self._level_centroids[level]

    def members_at(self, level: int) -> np.ndarray:
        """(2^level * block,) flat member-id table; block = 2^(d-level)."""
        if not 0 <= level <= self.d:
            raise InputError(f"level {level} outside [0, {self.d}]")
        return self._level_ids[level]

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, SurfaceEncoding)
            and self.d == other.d
            and np.array_equal(self.codes, other.codes)
            and np.array_equal(self.vertices, other.vertices)
        )


def surface_lookup(enc: SurfaceEncoding, prefix: str) -> tuple[np.ndarray, np.ndarray]:
    """Resolve a bitstring prefix ("" .. d bits of '0'/'1') to its sub-surface:
    (ascending vertex ids, centroid)."""
    if len(prefix) > enc.d:
        raise InputError(f"prefix {prefix!r} longer than d = {enc.d}")
    if any(ch not in "01" for ch in prefix):
        raise InputError(f"prefix must be a bitstring, got {prefix!r}")
    value = int(prefix, 2) if prefix else 0
    return enc.surface(len(prefix), value)


# ---------------------------------------------------------------------------
# Construction: recursive balanced 2-means
# ---------------------------------------------------------------------------


def build_encoding(mesh: TriangleMesh | np.ndarray, d: int, seed: int = 0) -> SurfaceEncoding:
    """Build the d-bit encoding of a mesh with exactly 2**d vertices.

    Deterministic for a fixed seed; different seeds may partition differently
    but always satisfy the balance and prefix invariants.
    """
    vertices = mesh.vertices if isinstance(mesh, TriangleMesh) else np.asarray(mesh, dtype=np.float64)
    n = len(vertices)
    if d < 1 or d > _MAX_BITS:
        raise InvariantError(f"bit depth must be in [1, {_MAX_BITS}], got {d}")
    if n != (1 << d):
        raise InvariantError(f"build_encoding needs exactly 2^{d} = {1 << d} vertices, got {n}")
    codes = encode_vertices(vertices, d, seed)
    return SurfaceEncoding(vertices, codes, d)


def encode_vertices(vertices: np.ndarray, d: int, seed: int = 0) -> np.ndarray:
    """Assign a unique d-bit code to each of the 2**d input points by
    recursive balanced bisection. Returns (N,) uint32 codes."""
    vertices = np.asarray(vertices, dtype=np.float64)
    n = len(vertices)
    codes = np.zeros(n, dtype=np.uint32)
    # iterative DFS over (member ids ascending, level, prefix value)
    stack = [(np.arange(n, dtype=np.int64), 0, 0)]
    while stack:
        members, level, prefix = stack.pop()
        if level == d or len(members) <= 1:
            codes[members] = prefix << (d - level)
            continue
        left, right = _balanced_split(vertices, members, seed, level, prefix)
        stack.append((left, level + 1, prefix << 1))
        stack.append((right, level + 1, (prefix << 1) | 1))
    return codes


def _balanced_split(
    vertices: np.ndarray, members: np.ndarray, seed: int, level: int, prefix: int
) -> tuple[np.ndarray, np.ndarray]:
    """2-means with k-means++ seeding, then a one-shot rebalance transferring
    the points closest to the opposite centroid until the sizes are
    floor(L/2) and L - floor(L/2). The half containing the lowest vertex id
    becomes bit 0. Ties break on lowest vertex id everywhere."""
    pts = vertices[members]
    length = len(members)
    rng = np.random.default_rng(np.random.SeedSequence((seed, level, prefix)))

    # k-means++ for k = 2
    i0 = int(rng.integers(length))
    d0 = _sqdist(pts, pts[i0])
    total = d0.sum()
    if total > 0.0:
        i1 = int(rng.choice(length, p=d0 / total))
    else:
        i1 = (i0 + 1) % length  # all points coincide
    c0, c1 = pts[i0].copy(), pts[i1].copy()

    scale = float(np.abs(pts).max()) + 1.0
    assign = None
    for _ in range(_KMEANS_MAX_ITER):
        assign = _sqdist(pts, c1) < _sqdist(pts, c0)  # ties stay in cluster 0
        if not assign.any():
            assign[int(np.argmax(_sqdist(pts, c0)))] = True
        elif assign.all():
            assign[int(np.argmax(_sqdist(pts, c1)))] = False
        new_c0 = pts[~assign].mean(axis=0)
        new_c1 = pts[assign].mean(axis=0)
        moved = max(np.linalg.norm(new_c0 - c0), np.linalg.norm(new_c1 - c1))
        c0, c1 = new_c0, new_c1
        if moved <= _KMEANS_REL_TOL * scale:
            break

    in0 = np.flatnonzero(~assign)
    in1 = np.flatnonzero(assign)
    small = length // 2
    big = length - small
    if len(in0) > big:
        # move the in0 points closest to c1 over to cluster 1
        excess = len(in0) - big
        move = in0[np.argsort(_sqdist(pts[in0], c1), kind="stable")[:excess]]
        in1 = np.sort(np.concatenate([in1, move]))
        in0 = np.setdiff1d(in0, move, assume_unique=True)
    elif len(in1) > big:
        excess = len(in1) - big
        move = in1[np.argsort(_sqdist(pts[in1], c0), kind="stable")[:excess]]
        in0 = np.sort(np.concatenate([in0, move]))
        in1 = np.setdiff1d(in1, move, assume_unique=True)

    a, b = members[in0], members[in1]
    # bit 0 goes to the half holding the lowest vertex id
    return (a, b) if a[0] < b[0] else (b, a)


def _sqdist(pts: np.ndarray, center: np.ndarray) -> np.ndarray:
    diff = pts - center
    return (diff * diff).sum(axis=1)


# ---------------------------------------------------------------------------
# Verification
# ---------------------------------------------------------------------------


def verify_encoding(enc: SurfaceEncoding) -> None:
    """Exhaustively check all type invariants; raises EncodingError on the
    first violation. Intended for small d (cost grows as N * d)."""
    n, d = enc.n, enc.d
    if sorted(enc.codes.tolist()) != list(range(n)):
        raise EncodingError("codes are not a bijection")
    for k in range(d + 1):
        size = 1 << (d - k)
        for p in range(1 << k):
            ids, cent = enc.surface(k, p)
            if len(ids) != size:
                raise EncodingError(f"level {k} prefix {p}: size {len(ids)} != {size}")
            expected = np.flatnonzero((enc.codes >> (d - k)) == p)
            if not np.array_equal(ids, expected):
                raise EncodingError(f"level {k} prefix {p}: member set mismatch")
            if not np.array_equal(cent, np.mean(enc.vertices[ids], axis=0)):
                raise EncodingError(f"level {k} prefix {p}: centroid != vertex mean")
            if k < d:
                kids0, _ = enc.surface(k + 1, 2 * p)
                kids1, _ = enc.surface(k + 1, 2 * p + 1)
                if abs(len(kids0) - len(kids1)) > 1:
                    raise EncodingError(f"level {k} prefix {p}: unbalanced children")
                if len(kids0) != len(ids) // 2:
                    raise EncodingError(f"level {k} prefix {p}: child sizes not floor/ceil")
                union = np.sort(np.concatenate([kids0, kids1]))
                if not np.array_equal(union, ids):
                    raise EncodingError(f"level {k} prefix {p}: children do not partition parent")


# ---------------------------------------------------------------------------
# File format: little-endian header + f64 coords + packed codes + CRC32
# ---------------------------------------------------------------------------


def save_encoding(enc: SurfaceEncoding, path: str | os.PathLike) -> None:
    """Write the encoding as a .hsenc file (bit-exact round trip)."""
    header = _MAGIC + struct.pack("<IIQ", _VERSION, enc.d, enc.n)
    coords = np.ascontiguousarray(enc.vertices, dtype="<f8").tobytes()
    code_dtype = "<u2" if enc.d <= 16 else "<u4"
    codes = np.ascontiguousarray(enc.codes.astype(code_dtype)).tobytes()
    payload = header + coords + codes
    crc = struct.pack("<I", zlib.crc32(payload) & 0xFFFFFFFF)
    tmp = os.fspath(path) + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(payload + crc)
    os.replace(tmp, path)


def load_encoding(path: str | os.PathLike) -> SurfaceEncoding:
    """Read a .hsenc file, verifying magic, version, sizes, and checksum."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < len(_MAGIC) + 16 + 4:
        raise EncodingError(f"truncated encoding file: {path}")
    if blob[: len(_MAGIC)] != _MAGIC:
        raise EncodingError(f"bad magic, not an encoding file: {path}")
    stored_crc = struct.unpack("<I", blob[-4:])[0]
    if zlib.crc32(blob[:-4]) & 0xFFFFFFFF != stored_crc:
        raise EncodingError(f"checksum failure (corrupt or truncated): {path}")
    version, d, n = struct.unpack("<IIQ", blob[len(_MAGIC) : len(_MAGIC) + 16])
    if version != _VERSION:
        raise EncodingError(f"unsupported encoding version {version}: {path}")
    if d < 1 or d > _MAX_BITS or n != (1 << d):
        raise EncodingError(f"header inconsistent: d={d}, N={n}: {path}")
    code_width = 2 if d <= 16 else 4
    expected = len(_MAGIC) + 16 + n * 24 + n * code_width + 4
    if len(blob) != expected:
        raise EncodingError(
            f"format error: payload is {len(blob)} bytes, header implies {expected}: {path}"
        )
    off = len(_MAGIC) + 16
    coords = np.frombuffer(blob, dtype="<f8", count=3 * n, offset=off).reshape(n, 3)
    code_dtype = "<u2" if d <= 16 else "<u4"
    codes = np.frombuffer(blob, dtype=code_dtype, count=n, offset=off + n * 24)
    return SurfaceEncoding(coords.astype(np.float64), codes.astype(np.uint32), d)
