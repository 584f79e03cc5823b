"""Numpy implementation of the point-to-surface distance kernel.

This is the reference semantics for the compiled kernel: for every query
point, the minimum Euclidean distance between the point and the posed
vertices of its surface. Both backends evaluate, per vertex,

    dx = r00*vx + r01*vy + r02*vz + t0 - px        (left to right)
    sq = dx*dx + dy*dy + dz*dz

take the min of sq over the surface, and sqrt once. Every step is a
correctly-rounded IEEE double operation in the same order, so the two
backends return bit-identical results (the extension is compiled with
fp-contract off to keep it that way).
"""

from __future__ import annotations

import numpy as np

# cap on elements of the (group, count) scratch matrices
_CHUNK_ELEMENTS = 4_000_000


def min_dist_uniform(
    vertices: np.ndarray,
    ids: np.ndarray,
    starts: np.ndarray,
    count: int,
    rotation: np.ndarray,
    translation: np.ndarray,
    points: np.ndarray,
) -> np.ndarray:
    """For each query g, min over i in [0, count) of
    ||rotation @ vertices[ids[starts[g] + i]] + translation - points[g]||.

    All groups share one surface size `count`; `ids` is a flat vertex-id
    table and `starts[g]` is the offset of group g's block within it.
    """
    starts = np.asarray(starts, dtype=np.int64)
    n_groups = len(starts)
    out = np.empty(n_groups, dtype=np.float64)
    if n_groups == 0:
        return out
    r = rotation
    t0, t1, t2 = translation
    span = np.arange(count, dtype=np.int64)
    chunk = max(1, _CHUNK_ELEMENTS // max(count, 1))
    for lo in range(0, n_groups, chunk):
        hi = min(lo + chunk, n_groups)
        idx = ids[starts[lo:hi, None] + span[None, :]]
        vx = vertices[idx, 0]
        vy = vertices[idx, 1]
        vz = vertices[idx, 2]
        px = points[lo:hi, 0, None]
        py = points[lo:hi, 1, None]
        pz = points[lo:hi, 2, None]
        dx = r[0, 0] * vx + r[0, 1] * vy + r[0, 2] * vz + t0 - px
        dy = r[1, 0] * vx + r[1, 1] * vy + r[1, 2] * vz + t1 - py
        dz = r[2, 0] * vx + r[2, 1] * vy + r[2, 2] * vz + t2 - pz
        sq = dx * dx + dy * dy + dz * dz
        out[lo:hi] = np.sqrt(sq.min(axis=1))
    return out
