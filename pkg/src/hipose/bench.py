"""Synthetic benchmark: a parameterized corruption oracle standing in for a
correspondence-predicting network, plus scenario scoring and preset ablation
runs.

A scenario samples a ground-truth pose, picks encoded vertices, and corrupts
the resulting correspondences three ways: per-bit code flips whose
probability grows with bit depth (later bits are harder), soft-value jitter
toward 0.5 (shrinking per-bit confidence), and gross outliers with random
positions and random codes. Points may also be dropped or perturbed with
Gaussian position noise.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .codes import Correspondence, quantize
from .encoding import SurfaceEncoding
from .errors import InputError, InvariantError, SolverError
from .mesh import TriangleMesh, make_sphere, upsample_mesh
from .metrics import add_error, adds_error, auc_of_errors, is_success
from .pose import Pose, random_rotation
from .solver import RansacParams, SolverConfig, hierarchical_solve, plain_kabsch_solve, ransac_kabsch_solve

_JITTER_CAP = 0.499  # keeps jitter from crossing 0.5 and silently flipping a bit

SOLVER_NAMES = ("plain", "ransac", "hierarchical")


@dataclass(frozen=True)
class ScenarioConfig:
    """Knobs of the corruption oracle. Positions are mm."""

    n_points: int = 2730
    seed: int = 0
    translation_center: tuple[float, float, float] = (0.0, 0.0, 1000.0)
    translation_half_extent: float = 200.0
    flip_prob_first: float = 0.01  # flip probability of bit 0
    flip_prob_last: float = 0.30  # flip probability of bit d-1
    sigma_code: float = 0.3  # scale of soft-value jitter toward 0.5
    sigma_xyz: float = 0.0  # Gaussian position noise, mm
    outlier_fraction: float = 0.0
    drop_fraction: float = 0.0
    outlier_box_scale: float = 1.0  # outlier box half-extent, in object diameters

    def __post_init__(self):
        if self.n_points < 4:
            raise InvariantError(f"n_points must be >= 4, got {self.n_points}")
        for name in ("flip_prob_first", "flip_prob_last"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise InvariantError(f"{name} must be in [0, 1], got {p}")
        if self.flip_prob_last < self.flip_prob_first:
            raise InvariantError("flip schedule must be non-decreasing in bit index")
        if self.sigma_code < 0 or self.sigma_xyz < 0:
            raise InvariantError("noise scales must be non-negative")
        if not 0.0 <= self.outlier_fraction < 1.0:
            raise InvariantError(f"outlier_fraction must be in [0, 1), got {self.outlier_fraction}")
        if not 0.0 <= self.drop_fraction < 1.0:
            raise InvariantError(f"drop_fraction must be in [0, 1), got {self.drop_fraction}")

    def flip_schedule(self, d: int) -> np.ndarray:
        """Per-bit flip probability, linear from flip_prob_first to
        flip_prob_last across the d bits."""
        if d == 1:
            return np.array([self.flip_prob_first])
        ramp = np.arange(d) / (d - 1)
        return self.flip_prob_first + (self.flip_prob_last - self.flip_prob_first) * ramp


@dataclass(frozen=True)
class Scenario:
    """One synthetic scene: ground truth pose, corrupted correspondences, and
    the encoding they refer to. gt_vertices[i] is -1 for gross outliers."""

    pose: Pose
    points: np.ndarray  # (P, 3) camera frame
    soft_codes: np.ndarray  # (P, d)
    gt_vertices: np.ndarray  # (P,) int64, -1 marks replaced points
    encoding: SurfaceEncoding
    diameter: float

    @property
    def outlier_mask(self) -> np.ndarray:
        return self.gt_vertices < 0

    def correspondences(self) -> list[Correspondence]:
        return [
            Correspondence(self.points[i], self.soft_codes[i],
                           None if self.gt_vertices[i] < 0 else int(self.gt_vertices[i]))
            for i in range(len(self.points))
        ]

    def true_correspondence_mask(self, threshold: float) -> np.ndarray:
        """Points whose fully decoded model vertex lies within `threshold` mm
        of the ground-truth vertex (model frame); outliers are always false."""
        enc = self.encoding
        bits = quantize(self.soft_codes).astype(np.int64)
        weights = 1 << np.arange(enc.d - 1, -1, -1, dtype=np.int64)
        decoded = enc.vertices[enc.decode_vertex[bits @ weights]]
        gt = enc.vertices[np.maximum(self.gt_vertices, 0)]
        dist = np.linalg.norm(decoded - gt, axis=1)
        return (self.gt_vertices >= 0) & (dist <= threshold)


def generate_scenario(enc: SurfaceEncoding, mesh: TriangleMesh, cfg: ScenarioConfig) -> Scenario:
    """Sample a pose and a corrupted correspondence set. Byte-identical for a
    fixed config (including the seed)."""
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))
    d = enc.d
    n = cfg.n_points

    rotation = random_rotation(rng)
    center = np.asarray(cfg.translation_center, dtype=np.float64)
    translation = center + rng.uniform(-cfg.translation_half_extent,
                                       cfg.translation_half_extent, 3)
    pose = Pose(rotation, translation)

    vertex_ids = rng.integers(0, enc.n, size=n)
    camera = pose.apply(enc.vertices[vertex_ids])
    camera = camera + rng.standard_normal((n, 3)) * cfg.sigma_xyz

    shifts = np.arange(d - 1, -1, -1, dtype=np.int64)
    bits = ((enc.codes[vertex_ids].astype(np.int64)[:, None] >> shifts) & 1).astype(np.float64)
    flips = rng.random((n, d)) < cfg.flip_schedule(d)[None, :]
    bits[flips] = 1.0 - bits[flips]
    jitter = np.minimum(np.abs(rng.standard_normal((n, d))) * cfg.sigma_code, _JITTER_CAP)
    soft = np.abs(bits - jitter)

    gt_vertices = vertex_ids.astype(np.int64)
    n_outliers = int(cfg.outlier_fraction * n)
    if n_outliers:
        out_ids = rng.choice(n, size=n_outliers, replace=False)
        # gross outliers live anywhere in the scene box (the whole region the
        # object could occupy, plus margin), not around the object itself
        half = cfg.translation_half_extent + cfg.outlier_box_scale * mesh.diameter
        camera[out_ids] = center + rng.uniform(-half, half, (n_outliers, 3))
        soft[out_ids] = rng.random((n_outliers, d))
        gt_vertices[out_ids] = -1

    n_drop = int(cfg.drop_fraction * n)
    if n_drop:
        dropped = rng.choice(n, size=n_drop, replace=False)
        keep = np.setdiff1d(np.arange(n), dropped)
        camera, soft, gt_vertices = camera[keep], soft[keep], gt_vertices[keep]

    return Scenario(
        pose=pose,
        points=np.ascontiguousarray(camera),
        soft_codes=np.ascontiguousarray(soft),
        gt_vertices=gt_vertices,
        encoding=enc,
        diameter=mesh.diameter,
    )


def save_scenario(scn: Scenario, corrs_path, sidecar_path) -> None:
    """Write the correspondence JSON-lines file plus the ground-truth sidecar."""
    from .codes import write_correspondences

    write_correspondences(scn.correspondences(), corrs_path)
    sidecar = {
        "pose": scn.pose.to_dict(),
        "diameter": scn.diameter,
        "outlier_indices": np.flatnonzero(scn.outlier_mask).tolist(),
    }
    with open(sidecar_path, "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, sort_keys=True, indent=1)


def load_scenario(enc: SurfaceEncoding, corrs_path, sidecar_path) -> Scenario:
    from .codes import read_correspondences, stack_correspondences

    corrs = read_correspondences(corrs_path)
    with open(sidecar_path, "r", encoding="utf-8") as fh:
        sidecar = json.load(fh)
    points, soft = stack_correspondences(corrs)
    gt = np.array([-1 if c.gt_vertex is None else c.gt_vertex for c in corrs], dtype=np.int64)
    return Scenario(
        pose=Pose.from_dict(sidecar["pose"]),
        points=points,
        soft_codes=soft,
        gt_vertices=gt,
        encoding=enc,
        diameter=float(sidecar["diameter"]),
    )


# ---------------------------------------------------------------------------
# Benchmark runner
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BenchRow:
    solver: str
    seed: int
    add: float
    add_s: float
    auc: float
    time_ms: float
    iterations: int
    final_inliers: int
    failed: bool = False
    message: str = ""


@dataclass(frozen=True)
class MetricReport:
    """Aggregate over one solver's rows. The per-iteration precision curve is
    only available for the hierarchical solver (see precision_curves)."""

    solver: str
    add_recall: float
    adds_recall: float
    auc: float
    mean_time_ms: float
    n_failed: int
    median_precision: tuple[float, ...] | None = None


CSV_COLUMNS = ("solver", "seed", "add", "add_s", "auc", "time_ms", "iterations", "final_inliers")


def derive_seed(*parts: int) -> int:
    """Stable independent stream id for a (base seed, index, tag) tuple."""
    return int(np.random.SeedSequence(tuple(parts)).generate_state(1)[0])


def _solve_one(enc, scenario, solver, solver_cfg, ransac_params, ransac_seed):
    corrs = scenario.correspondences()
    t0 = time.perf_counter()
    report = None
    if solver == "plain":
        pose = plain_kabsch_solve(enc, corrs)
        iterations = 0
        final_inliers = len(corrs)
    elif solver == "ransac":
        params = dataclasses.replace(ransac_params, seed=ransac_seed)
        pose = ransac_kabsch_solve(enc, corrs, params)
        iterations = params.iterations
        residual = np.linalg.norm(pose.apply(_decoded_model(enc, scenario)) - scenario.points, axis=1)
        final_inliers = int((residual < params.inlier_threshold).sum())
    elif solver == "hierarchical":
        report = hierarchical_solve(enc, corrs, solver_cfg)
        pose = report.pose
        iterations = len(report.iterations)
        final_inliers = len(report.final_inlier_ids)
    else:
        raise InputError(f"unknown solver {solver!r}; expected one of {SOLVER_NAMES}")
    elapsed_ms = (time.perf_counter() - t0) * 1000.0
    return pose, iterations, final_inliers, elapsed_ms, report


def _decoded_model(enc, scenario):
    bits = quantize(scenario.soft_codes).astype(np.int64)
    weights = 1 << np.arange(enc.d - 1, -1, -1, dtype=np.int64)
    return enc.vertices[enc.decode_vertex[bits @ weights]]


def run_single(enc, mesh, cfg: ScenarioConfig, solver: str, seed_index: int,
               base_seed: int = 0, solver_cfg: SolverConfig | None = None,
               ransac_params: RansacParams | None = None,
               metric_vertices: np.ndarray | None = None) -> BenchRow:
    """Generate the scenario for one seed index and score one solver on it."""
    solver_cfg = solver_cfg or SolverConfig()
    ransac_params = ransac_params or RansacParams()
    scn_cfg = dataclasses.replace(cfg, seed=derive_seed(base_seed, seed_index))
    scenario = generate_scenario(enc, mesh, scn_cfg)
    verts = mesh.vertices if metric_vertices is None else metric_vertices
    try:
        pose, iterations, final_inliers, elapsed_ms, _ = _solve_one(
            enc, scenario, solver, solver_cfg, ransac_params,
            derive_seed(base_seed, seed_index, 7),
        )
    except SolverError as exc:
        return BenchRow(solver, seed_index, float("inf"), float("inf"), 0.0,
                        0.0, 0, 0, failed=True, message=str(exc))
    add = add_error(pose, scenario.pose, verts)
    add_s = adds_error(pose, scenario.pose, verts)
    return BenchRow(
        solver=solver,
        seed=seed_index,
        add=add,
        add_s=add_s,
        auc=auc_of_errors([add_s]),
        time_ms=elapsed_ms,
        iterations=iterations,
        final_inliers=final_inliers,
    )


_WORKER_STATE: dict = {}


def _bench_init(payload):
    _WORKER_STATE["payload"] = payload


def _bench_task(task):
    solver, seed_index = task
    enc, mesh, cfg, base_seed, solver_cfg, ransac_params, metric_vertices = _WORKER_STATE["payload"]
    return run_single(enc, mesh, cfg, solver, seed_index, base_seed,
                      solver_cfg, ransac_params, metric_vertices)


def run_benchmark(enc, mesh, cfg: ScenarioConfig, solvers: list[str], n_seeds: int,
                  base_seed: int = 0, threads: int = 1,
                  solver_cfg: SolverConfig | None = None,
                  ransac_params: RansacParams | None = None,
                  metric_vertices: np.ndarray | None = None) -> list[BenchRow]:
    """Score each solver on n_seeds independently corrupted scenarios.

    (solver, seed) pairs run in parallel when threads > 1; every pair derives
    its own RNG streams, so serial and parallel runs produce the same rows.
    """
    for solver in solvers:
        if solver not in SOLVER_NAMES:
            raise InputError(f"unknown solver {solver!r}; expected one of {SOLVER_NAMES}")
    tasks = [(solver, i) for solver in solvers for i in range(n_seeds)]
    payload = (enc, mesh, cfg, base_seed, solver_cfg, ransac_params, metric_vertices)
    if threads <= 1 or len(tasks) <= 1:
        _bench_init(payload)
        return [_bench_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=threads, initializer=_bench_init,
                             initargs=(payload,)) as pool:
        return list(pool.map(_bench_task, tasks, chunksize=4))


def summarize(rows: list[BenchRow], diameter: float) -> list[MetricReport]:
    """Per-solver aggregate: recalls at 0.1 * diameter, AUC, mean runtime.
    Failed rows count as misses."""
    reports = []
    for solver in dict.fromkeys(row.solver for row in rows):
        mine = [r for r in rows if r.solver == solver]
        ok = [r for r in mine if not r.failed]
        add_recall = np.mean([is_success(r.add, diameter) for r in mine]) if mine else 0.0
        adds_recall = np.mean([is_success(r.add_s, diameter) for r in mine]) if mine else 0.0
        auc = auc_of_errors([min(r.add_s, 1e9) for r in mine]) if mine else 0.0
        mean_time = float(np.mean([r.time_ms for r in ok])) if ok else 0.0
        reports.append(MetricReport(solver, float(add_recall), float(adds_recall),
                                    float(auc), mean_time, len(mine) - len(ok)))
    return reports


def write_rows_csv(rows: list[BenchRow], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for r in rows:
            writer.writerow([r.solver, r.seed, r.add, r.add_s, r.auc,
                             r.time_ms, r.iterations, r.final_inliers])


# ---------------------------------------------------------------------------
# Presets: the paper-shaped ablation runs
# ---------------------------------------------------------------------------

PRESET_NAMES = ("table3", "table2", "fig4", "noise")

_DEFAULT_BITS = 16
_CONTAMINATED = ScenarioConfig(outlier_fraction=0.2)
FIG4_SWEEP = tuple(range(5, 17))


def default_bench_assets(bits: int = _DEFAULT_BITS, seed: int = 0):
    """Synthetic benchmark object: a 100 mm sphere, upsampled and encoded at
    the requested depth. Returns (base mesh for metrics, encoding)."""
    # deepest octasphere (4 * 4^L + 2 vertices, capped at L = 4) fitting 2^bits
    level = max(l for l in range(5) if 4 * 4**l + 2 <= (1 << bits)) if bits >= 3 else 0
    base = make_sphere(radius=100.0, subdivisions=level)
    dense = upsample_mesh(base, bits, seed=seed)
    enc_mesh = TriangleMesh(dense.vertices, dense.faces, diameter=base.diameter)
    from .encoding import build_encoding

    return base, build_encoding(enc_mesh, bits, seed)


def preset_solver_config(d: int) -> SolverConfig:
    """Preset solver defaults scale with the encoding: the canonical depth of
    16 starts at bit 10, shallower encodings keep the same six pruning
    iterations where possible."""
    return SolverConfig(m_default=max(1, min(10, d - 6)))


def run_preset(name: str, out_dir, n_seeds: int = 100, threads: int = 1,
               base_seed: int = 0, enc: SurfaceEncoding | None = None,
               mesh: TriangleMesh | None = None,
               scenario_overrides: dict | None = None) -> dict:
    """Run one named ablation preset, write its CSV into out_dir, and return
    a summary dict (also what the CLI prints). scenario_overrides lets a
    config file adjust the preset's corruption knobs (field name -> value)."""
    if name not in PRESET_NAMES:
        raise InputError(f"unknown preset {name!r}; expected one of {PRESET_NAMES}")
    os.makedirs(out_dir, exist_ok=True)
    if enc is None or mesh is None:
        mesh, enc = default_bench_assets()
    csv_path = os.path.join(out_dir, f"{name}.csv")
    solver_cfg = preset_solver_config(enc.d)
    try:
        base_cfg = dataclasses.replace(_CONTAMINATED, **(scenario_overrides or {}))
    except TypeError as exc:
        raise InputError(f"bad scenario override: {exc}") from exc

    if name == "table3":
        rows = run_benchmark(enc, mesh, base_cfg, list(SOLVER_NAMES), n_seeds,
                             base_seed=base_seed, threads=threads, solver_cfg=solver_cfg,
                             metric_vertices=mesh.vertices)
        write_rows_csv(rows, csv_path)
        reports = summarize(rows, mesh.diameter)
        return {
            "preset": name,
            "csv": csv_path,
            "add_recall": {rep.solver: rep.add_recall for rep in reports},
            "adds_recall": {rep.solver: rep.adds_recall for rep in reports},
            "auc": {rep.solver: rep.auc for rep in reports},
            "median_add_mm": {
                rep.solver: float(np.median([r.add for r in rows if r.solver == rep.solver]))
                for rep in reports
            },
            "mean_time_ms": {rep.solver: rep.mean_time_ms for rep in reports},
            "n_rows": len(rows),
            "n_failed": sum(r.failed for r in rows),
        }

    if name == "table2":
        curves = precision_curves(enc, mesh, base_cfg, n_seeds,
                                  base_seed=base_seed, threads=threads,
                                  solver_cfg=solver_cfg)
        n_cols = curves.shape[1]
        with open(csv_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["seed"] + [f"it{i + 1}" for i in range(n_cols - 1)] + ["final"])
            for i, row in enumerate(curves):
                writer.writerow([i] + [("" if np.isnan(v) else v) for v in row])
        failed = int(np.isnan(curves).all(axis=1).sum())
        median = np.nanmedian(curves, axis=0)
        return {"preset": name, "csv": csv_path, "median_precision": median.tolist(),
                "n_rows": n_seeds, "n_failed": failed}

    if name == "fig4":
        sweep = tuple(m for m in FIG4_SWEEP if m <= enc.d)
        if not sweep:
            raise InvariantError(f"fig4 preset needs an encoding of depth >= {FIG4_SWEEP[0]}")
        errors = np.empty((n_seeds, len(sweep)))
        n_failed = 0
        for col, m_default in enumerate(sweep):
            cfg = SolverConfig(m_default=m_default)
            rows = run_benchmark(enc, mesh, base_cfg, ["hierarchical"], n_seeds,
                                 base_seed=base_seed, threads=threads, solver_cfg=cfg,
                                 metric_vertices=mesh.vertices)
            errors[:, col] = [r.add for r in rows]
            n_failed += sum(r.failed for r in rows)
        with open(csv_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow([str(m) for m in sweep])
            for row in errors:
                writer.writerow(list(row))
        recalls = {m: float(np.mean([is_success(e, mesh.diameter) for e in errors[:, c]]))
                   for c, m in enumerate(sweep)}
        return {"preset": name, "csv": csv_path, "add_recall_by_m_default": recalls,
                "n_rows": errors.size, "n_failed": n_failed}

    # noise: robustness of the hierarchical solver to position noise and drops
    variants = {
        "baseline": base_cfg,
        "gauss10mm": dataclasses.replace(base_cfg, sigma_xyz=10.0),
        "drop20": dataclasses.replace(base_cfg, drop_fraction=0.2),
    }
    all_rows = []
    recalls = {}
    n_failed = 0
    for variant, cfg in variants.items():
        rows = run_benchmark(enc, mesh, cfg, ["hierarchical"], n_seeds,
                             base_seed=base_seed, threads=threads, solver_cfg=solver_cfg,
                             metric_vertices=mesh.vertices)
        recalls[variant] = float(np.mean([is_success(r.add, mesh.diameter) for r in rows]))
        n_failed += sum(r.failed for r in rows)
        all_rows.extend((variant, r) for r in rows)
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(("variant",) + CSV_COLUMNS)
        for variant, r in all_rows:
            writer.writerow([variant, r.solver, r.seed, r.add, r.add_s, r.auc,
                             r.time_ms, r.iterations, r.final_inliers])
    return {"preset": name, "csv": csv_path, "add_recall": recalls,
            "n_rows": len(all_rows), "n_failed": n_failed}


def _precision_task(task):
    (solver, seed_index) = task
    enc, mesh, cfg, base_seed, solver_cfg, ransac_params, _ = _WORKER_STATE["payload"]
    from .metrics import outlier_precision

    scn_cfg = dataclasses.replace(cfg, seed=derive_seed(base_seed, seed_index))
    scenario = generate_scenario(enc, mesh, scn_cfg)
    try:
        report = hierarchical_solve(enc, scenario.correspondences(), solver_cfg)
    except SolverError:
        return None
    return outlier_precision(report, scenario)


def precision_curves(enc, mesh, cfg: ScenarioConfig, n_seeds: int,
                     base_seed: int = 0, threads: int = 1,
                     solver_cfg: SolverConfig | None = None) -> np.ndarray:
    """(n_seeds, n_iterations + 1) per-iteration outlier precision of the
    hierarchical solver; rows of NaN mark failed solves."""
    solver_cfg = solver_cfg or SolverConfig()
    payload = (enc, mesh, cfg, base_seed, solver_cfg, RansacParams(), None)
    tasks = [("hierarchical", i) for i in range(n_seeds)]
    if threads <= 1 or len(tasks) <= 1:
        _bench_init(payload)
        results = [_precision_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=threads, initializer=_bench_init,
                                 initargs=(payload,)) as pool:
            results = list(pool.map(_precision_task, tasks, chunksize=4))
    width = max((len(r) for r in results if r is not None), default=1)
    curves = np.full((n_seeds, width), np.nan)
    for i, r in enumerate(results):
        if r is not None:
            curves[i, : len(r)] = r
    return curves
