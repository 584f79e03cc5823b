import csv
import dataclasses

import numpy as np
import pytest

import hipose
from hipose.bench import (
    FIG4_SWEEP,
    ScenarioConfig,
    default_bench_assets,
    derive_seed,
    generate_scenario,
    load_scenario,
    precision_curves,
    run_benchmark,
    run_preset,
    save_scenario,
    summarize,
)
from hipose.errors import InvariantError
from hipose.metrics import add_error, is_success
from hipose.pose import rotation_geodesic_error


@pytest.fixture(scope="module")
def small_assets():
    # d = 8 keeps preset smoke tests quick
    return default_bench_assets(bits=8, seed=0)


def test_scenario_deterministic(enc_sphere_d10, sphere258):
    cfg = ScenarioConfig(n_points=123, seed=5, outlier_fraction=0.1, sigma_xyz=2.0)
    a = generate_scenario(enc_sphere_d10, sphere258, cfg)
    b = generate_scenario(enc_sphere_d10, sphere258, cfg)
    assert np.array_equal(a.points, b.points)
    assert np.array_equal(a.soft_codes, b.soft_codes)
    assert np.array_equal(a.gt_vertices, b.gt_vertices)
    assert a.pose.to_dict() == b.pose.to_dict()
    c = generate_scenario(enc_sphere_d10, sphere258, dataclasses.replace(cfg, seed=6))
    assert not np.array_equal(a.points, c.points)


def test_drop_fraction_survivor_count(enc_sphere_d10, sphere258):
    cfg = ScenarioConfig(n_points=2730, seed=1, drop_fraction=0.2)
    scn = generate_scenario(enc_sphere_d10, sphere258, cfg)
    assert len(scn.points) == 2184


def test_truth_codes_match_encoding(enc_sphere_d10, sphere258):
    cfg = ScenarioConfig(n_points=300, seed=9, flip_prob_first=0.0, flip_prob_last=0.0,
                         sigma_code=0.0)
    scn = generate_scenario(enc_sphere_d10, sphere258, cfg)
    bits = hipose.quantize(scn.soft_codes).astype(np.int64)
    weights = 1 << np.arange(enc_sphere_d10.d - 1, -1, -1, dtype=np.int64)
    assert np.array_equal(enc_sphere_d10.codes[scn.gt_vertices], (bits @ weights).astype(np.uint32))


def test_zero_corruption_chain(enc_sphere_d10, sphere258):
    cfg = ScenarioConfig(n_points=400, seed=8, flip_prob_first=0.0, flip_prob_last=0.0,
                         sigma_code=0.0)
    scn = generate_scenario(enc_sphere_d10, sphere258, cfg)
    report = hipose.hierarchical_solve(enc_sphere_d10, scn.correspondences(),
                                       hipose.SolverConfig(m_default=6))
    assert rotation_geodesic_error(report.pose.rotation, scn.pose.rotation) < 1e-8
    assert np.linalg.norm(report.pose.translation - scn.pose.translation) < 1e-6


def test_sigma_xyz_perturbs_points(enc_sphere_d10, sphere258):
    clean = ScenarioConfig(n_points=500, seed=3)
    noisy = dataclasses.replace(clean, sigma_xyz=10.0)
    a = generate_scenario(enc_sphere_d10, sphere258, clean)
    b = generate_scenario(enc_sphere_d10, sphere258, noisy)
    offsets = np.linalg.norm(a.points - b.points, axis=1)
    assert 12.0 < offsets.mean() < 22.0  # 3D Gaussian with sigma 10 -> ~16


def test_scenario_roundtrip(tmp_path, enc_sphere_d10, sphere258):
    cfg = ScenarioConfig(n_points=50, seed=2, outlier_fraction=0.2)
    scn = generate_scenario(enc_sphere_d10, sphere258, cfg)
    save_scenario(scn, tmp_path / "scene.jsonl", tmp_path / "scene.gt.json")
    back = load_scenario(enc_sphere_d10, tmp_path / "scene.jsonl", tmp_path / "scene.gt.json")
    assert np.allclose(back.points, scn.points)
    assert np.allclose(back.soft_codes, scn.soft_codes)
    assert np.array_equal(back.gt_vertices, scn.gt_vertices)
    assert back.pose.to_dict() == scn.pose.to_dict()
    assert back.diameter == scn.diameter


def test_config_validation():
    with pytest.raises(InvariantError):
        ScenarioConfig(outlier_fraction=1.0)
    with pytest.raises(InvariantError):
        ScenarioConfig(flip_prob_first=0.5, flip_prob_last=0.1)
    with pytest.raises(InvariantError):
        ScenarioConfig(sigma_xyz=-1.0)


def test_run_benchmark_deterministic_rows(small_assets):
    mesh, enc = small_assets
    cfg = ScenarioConfig(n_points=150, outlier_fraction=0.2)
    kwargs = dict(base_seed=3, solver_cfg=hipose.SolverConfig(m_default=5))
    a = run_benchmark(enc, mesh, cfg, ["plain", "hierarchical"], 3, **kwargs)
    b = run_benchmark(enc, mesh, cfg, ["plain", "hierarchical"], 3, **kwargs)
    for ra, rb in zip(a, b):
        assert dataclasses.replace(ra, time_ms=0.0) == dataclasses.replace(rb, time_ms=0.0)


def test_run_benchmark_threads_agree(small_assets):
    mesh, enc = small_assets
    cfg = ScenarioConfig(n_points=150, outlier_fraction=0.2)
    kwargs = dict(base_seed=3, solver_cfg=hipose.SolverConfig(m_default=5))
    serial = run_benchmark(enc, mesh, cfg, ["plain", "hierarchical"], 4, threads=1, **kwargs)
    parallel = run_benchmark(enc, mesh, cfg, ["plain", "hierarchical"], 4, threads=3, **kwargs)
    for ra, rb in zip(serial, parallel):
        assert dataclasses.replace(ra, time_ms=0.0) == dataclasses.replace(rb, time_ms=0.0)


def test_solver_ordering_recall(small_assets):
    mesh, enc = small_assets
    cfg = ScenarioConfig(n_points=250, outlier_fraction=0.2)
    rows = run_benchmark(enc, mesh, cfg, ["plain", "ransac", "hierarchical"], 20,
                         base_seed=1, solver_cfg=hipose.SolverConfig(m_default=5))
    recall = {rep.solver: rep.add_recall for rep in summarize(rows, mesh.diameter)}
    assert recall["plain"] <= recall["ransac"] <= recall["hierarchical"]


def test_monotone_degradation_in_outlier_fraction(small_assets):
    mesh, enc = small_assets
    recalls = []
    for rho in (0.0, 0.3, 0.6):
        cfg = ScenarioConfig(n_points=250, outlier_fraction=rho)
        rows = run_benchmark(enc, mesh, cfg, ["plain"], 25, base_seed=2)
        recalls.append(np.mean([is_success(r.add, mesh.diameter) for r in rows]))
    assert recalls[0] + 0.01 >= recalls[1] >= recalls[2] - 0.01


def test_precision_trend_rises(small_assets):
    mesh, enc = small_assets
    cfg = ScenarioConfig(n_points=300, outlier_fraction=0.2)
    curves = precision_curves(enc, mesh, cfg, 25, base_seed=5,
                              solver_cfg=hipose.SolverConfig(m_default=5))
    med = np.nanmedian(curves, axis=0)
    assert med[-1] > med[0]
    assert np.all(np.diff(med) >= -0.02)


@pytest.mark.parametrize("preset", ["table3", "table2", "fig4", "noise"])
def test_presets_smoke(tmp_path, small_assets, preset):
    mesh, enc = small_assets
    summary = run_preset(preset, tmp_path, n_seeds=3, enc=enc, mesh=mesh)
    assert summary["preset"] == preset
    assert summary["n_failed"] == 0
    with open(summary["csv"], newline="") as fh:
        rows = list(csv.reader(fh))
    if preset == "fig4":
        # d = 8 clamps the sweep to bits 5..8; the full 12 columns need d = 16
        assert rows[0] == [str(m) for m in FIG4_SWEEP if m <= enc.d]
        assert len(rows) == 1 + 3
    elif preset == "table3":
        assert rows[0][:2] == ["solver", "seed"]
        assert len(rows) == 1 + 3 * 3
    elif preset == "table2":
        assert rows[0][0] == "seed" and rows[0][-1] == "final"
    else:
        assert rows[0][0] == "variant"
        assert len(rows) == 1 + 3 * 3


def test_preset_solver_config_scales():
    from hipose.bench import preset_solver_config

    assert preset_solver_config(16).m_default == 10
    assert preset_solver_config(8).m_default == 2
    assert preset_solver_config(4).m_default == 1
