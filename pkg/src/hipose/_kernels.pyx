# cython: boundscheck=False, wraparound=False, initializedcheck=False
"""Compiled point-to-surface distance kernel.

Bit-for-bit compatible with hipose._kernels_np.min_dist_uniform: identical
operation order per vertex, no fused multiply-add (built with
-ffp-contract=off), min over squared distances, one sqrt per group.
"""

from libc.math cimport sqrt, INFINITY

import numpy as np

cimport numpy as cnp

cnp.import_array()


def min_dist_uniform(
    const double[:, ::1] vertices,
    const cnp.int64_t[::1] ids,
    const cnp.int64_t[::1] starts,
    Py_ssize_t count,
    const double[:, ::1] rotation,
    const double[::1] translation,
    const double[:, ::1] points,
):
    """See hipose._kernels_np.min_dist_uniform."""
    cdef Py_ssize_t n_groups = starts.shape[0]
    out = np.empty(n_groups, dtype=np.float64)
    cdef double[::1] out_mv = out
    cdef double r00 = rotation[0, 0], r01 = rotation[0, 1], r02 = rotation[0, 2]
    cdef double r10 = rotation[1, 0], r11 = rotation[1, 1], r12 = rotation[1, 2]
    cdef double r20 = rotation[2, 0], r21 = rotation[2, 1], r22 = rotation[2, 2]
    cdef double t0 = translation[0], t1 = translation[1], t2 = translation[2]
    cdef Py_ssize_t g, i, base
    cdef cnp.int64_t vid
    cdef double px, py, pz, vx, vy, vz, dx, dy, dz, sq, best
    for g in range(n_groups):
        px = points[g, 0]
        py = points[g, 1]
        pz = points[g, 2]
        base = starts[g]
        best = INFINITY
        for i in range(count):
            vid = ids[base + i]
            vx = vertices[vid, 0]
            vy = vertices[vid, 1]
            vz = vertices[vid, 2]
            dx = r00 * vx + r01 * vy + r02 * vz + t0 - px
            dy = r10 * vx + r11 * vy + r12 * vz + t1 - py
            dz = r20 * vx + r21 * vy + r22 * vz + t2 - pz
            sq = dx * dx + dy * dy + dz * dz
            if sq < best:
                best = sq
        out_mv[g] = sqrt(best)
    return out
