"""Pose accuracy metrics: ADD, ADD-S, threshold recall, AUC, and the
per-iteration outlier precision of a solve report against a synthetic scene."""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from .errors import InputError
from .pose import Pose

AUC_MAX_THRESHOLD = 100.0  # mm
PRECISION_DISTANCE = 10.0  # mm
RECALL_DIAMETER_FRACTION = 0.1


def add_error(pose_est: Pose, pose_gt: Pose, vertices: np.ndarray) -> float:
    """Mean distance between identically-indexed model vertices under the two
    poses."""
    vertices = np.asarray(vertices, dtype=np.float64)
    diff = pose_est.apply(vertices) - pose_gt.apply(vertices)
    return float(np.mean(np.linalg.norm(diff, axis=1)))


def adds_error(pose_est: Pose, pose_gt: Pose, vertices: np.ndarray) -> float:
    """Symmetric variant: mean distance from each estimated-pose vertex to its
    nearest ground-truth-pose vertex."""
    vertices = np.asarray(vertices, dtype=np.float64)
    est = pose_est.apply(vertices)
    gt = pose_gt.apply(vertices)
    nearest, _ = cKDTree(gt).query(est, k=1)
    return float(np.mean(nearest))


def is_success(error: float, diameter: float) -> bool:
    """A pose counts as recalled when its error is strictly below one tenth of
    the object diameter."""
    return error < RECALL_DIAMETER_FRACTION * diameter


def auc_of_errors(errors, max_threshold: float = AUC_MAX_THRESHOLD) -> float:
    """Normalized area under the recall-vs-threshold curve on
    [0, max_threshold]: the exact integral of the empirical step function,
    mean_i max(0, 1 - e_i / max_threshold)."""
    errors = np.asarray(errors, dtype=np.float64)
    if errors.size == 0:
        raise InputError("auc needs at least one error value")
    if np.any(errors < 0) or np.any(np.isnan(errors)):
        raise InputError("errors must be non-negative")
    return float(np.mean(np.clip(1.0 - errors / max_threshold, 0.0, 1.0)))


def outlier_precision(report, scenario, threshold: float = PRECISION_DISTANCE) -> list[float]:
    """Fraction of retained correspondences whose decoded model point lies
    within `threshold` mm of the ground-truth model point, after each pruning
    iteration and for the final inlier set. Synthetic gross outliers have no
    ground-truth vertex and always count as false."""
    if scenario.gt_vertices is None:
        raise InputError("scenario lacks ground-truth vertex annotations")
    good = scenario.true_correspondence_mask(threshold)
    out = []
    for rec in report.iterations:
        ids = rec.inlier_ids
        out.append(float(good[ids].sum() / len(ids)) if len(ids) else 0.0)
    ids = report.final_inlier_ids
    out.append(float(good[ids].sum() / len(ids)) if len(ids) else 0.0)
    return out
