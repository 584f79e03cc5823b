"""Soft binary code predictions per 3D point: quantization, per-bit
confidence, trust bits, and the JSON-lines correspondence format.

A soft code is a length-d vector in [0, 1] (one scalar per bit, most
significant first). All operations accept a single (d,) vector or a batch
(P, d); the bit axis is always the last one.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .errors import InputError, InvariantError


@dataclass(frozen=True)
class Correspondence:
    """One observed camera-frame point with its soft code prediction and,
    for benchmarks only, the ground-truth vertex id (None when unknown or when
    the point is a synthetic gross outlier)."""

    point: np.ndarray  # (3,) mm, camera frame
    soft_code: np.ndarray  # (d,) in [0, 1]
    gt_vertex: int | None = None


def quantize(soft: np.ndarray) -> np.ndarray:
    """Round each soft value to its nearest bit; exact 0.5 quantizes to 1."""
    soft = np.asarray(soft, dtype=np.float64)
    return (soft >= 0.5).astype(np.uint8)


def confidence(soft: np.ndarray) -> np.ndarray:
    """Per-bit correctness confidence: 1 - |soft - quantized|, in [0.5, 1]."""
    soft = np.asarray(soft, dtype=np.float64)
    return 1.0 - np.abs(soft - quantize(soft))


def trust_bit(conf: np.ndarray, tau: float) -> np.ndarray | int:
    """Length of the maximal leading run of bits with confidence >= 0.5 + tau.

    The code is hierarchical: bit k is only meaningful when bits 0..k-1 are
    already trusted, so the first under-threshold bit ends the trusted prefix.
    Returns an int for a single vector, an int64 array for a batch.
    """
    if not 0.0 < tau < 0.5:
        raise InvariantError(f"trust margin must be in (0, 0.5), got {tau}")
    conf = np.asarray(conf, dtype=np.float64)
    ok = conf >= 0.5 + tau
    d = ok.shape[-1]
    all_ok = ok.all(axis=-1)
    first_bad = np.argmin(ok, axis=-1)  # index of first False (0 if all True)
    j = np.where(all_ok, d, first_bad)
    return int(j) if conf.ndim == 1 else j.astype(np.int64)


def initial_bit(j: np.ndarray | int, m_default: int, d: int) -> np.ndarray | int:
    """Starting level m = max(trust bit, m_default), clamped to d."""
    if not 1 <= m_default <= d:
        raise InvariantError(f"m_default must be in [1, {d}], got {m_default}")
    m = np.minimum(np.maximum(j, m_default), d)
    return int(m) if isinstance(j, (int, np.integer)) else m.astype(np.int64)


# ---------------------------------------------------------------------------
# JSON-lines correspondence files
# ---------------------------------------------------------------------------
# One record per point: {"p": [x, y, z], "code": [d floats], "gt_vertex": int?}


def write_correspondences(corrs: list[Correspondence], path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for c in corrs:
            rec = {"p": [float(x) for x in c.point],
                   "code": [float(x) for x in c.soft_code]}
            if c.gt_vertex is not None:
                rec["gt_vertex"] = int(c.gt_vertex)
            fh.write(json.dumps(rec) + "\n")


def read_correspondences(path: str | os.PathLike) -> list[Correspondence]:
    corrs: list[Correspondence] = []
    d = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                point = np.asarray(rec["p"], dtype=np.float64)
                code = np.asarray(rec["code"], dtype=np.float64)
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise InputError(f"{path}:{lineno}: bad correspondence record: {exc}") from exc
            if point.shape != (3,) or not np.all(np.isfinite(point)):
                raise InputError(f"{path}:{lineno}: point must be 3 finite numbers")
            if code.ndim != 1 or len(code) < 1:
                raise InputError(f"{path}:{lineno}: code must be a flat list")
            if d is None:
                d = len(code)
            elif len(code) != d:
                raise InputError(f"{path}:{lineno}: code length {len(code)} != {d}")
            if np.any(code < 0.0) or np.any(code > 1.0) or not np.all(np.isfinite(code)):
                raise InputError(f"{path}:{lineno}: code values must lie in [0, 1]")
            gt = rec.get("gt_vertex")
            corrs.append(Correspondence(point, code, None if gt is None else int(gt)))
    if not corrs:
        raise InputError(f"no correspondence records in {path}")
    return corrs


def stack_correspondences(corrs: list[Correspondence]) -> tuple[np.ndarray, np.ndarray]:
    """(P, 3) points and (P, d) soft codes as contiguous arrays."""
    points = np.ascontiguousarray([c.point for c in corrs], dtype=np.float64)
    soft = np.ascontiguousarray([c.soft_code for c in corrs], dtype=np.float64)
    return points, soft
