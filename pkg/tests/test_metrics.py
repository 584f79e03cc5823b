import numpy as np
import pytest

from hipose import Pose, SolverConfig, hierarchical_solve
from hipose.bench import ScenarioConfig, generate_scenario
from hipose.errors import InputError
from hipose.metrics import add_error, adds_error, auc_of_errors, is_success, outlier_precision
from hipose.pose import random_rotation


def test_identical_poses_zero_error(cube, rng):
    pose = Pose(random_rotation(rng), rng.normal(size=3) * 100)
    assert add_error(pose, pose, cube.vertices) == 0.0
    assert adds_error(pose, pose, cube.vertices) == 0.0
    assert is_success(0.0, cube.diameter)


def test_translation_boundary_is_a_failure(cube):
    # pure translation by exactly 0.1 * diameter: every vertex moves by the
    # same amount, the mean is exact, and the strict inequality must fail
    offset = 0.1 * cube.diameter
    est = Pose(np.eye(3), np.array([offset, 0.0, 0.0]))
    err = add_error(est, Pose.identity(), cube.vertices)
    assert err == offset
    assert not is_success(err, cube.diameter)
    assert is_success(np.nextafter(err, 0.0), cube.diameter)


def test_adds_never_exceeds_add(sphere258, rng):
    for _ in range(20):
        a = Pose(random_rotation(rng), rng.normal(size=3) * 50)
        b = Pose(random_rotation(rng), rng.normal(size=3) * 50)
        assert adds_error(a, b, sphere258.vertices) <= add_error(a, b, sphere258.vertices) + 1e-12


def test_auc_trivial_values():
    assert auc_of_errors([0.0, 0.0]) == 1.0
    assert auc_of_errors([100.0, 250.0]) == 0.0
    assert auc_of_errors([50.0]) == 0.5


def test_auc_matches_grid_integration(rng):
    errors = rng.uniform(0, 150, 400)
    grid = np.linspace(0, 100, 200001)
    recall = (errors[None, :] < grid[:, None]).mean(axis=1)
    numeric = np.trapezoid(recall, grid) / 100.0
    assert auc_of_errors(errors) == pytest.approx(numeric, abs=1e-3)


def test_auc_validates():
    with pytest.raises(InputError):
        auc_of_errors([])
    with pytest.raises(InputError):
        auc_of_errors([-1.0])


def test_outlier_precision_clean_scene(enc_sphere_d10, sphere258):
    cfg = ScenarioConfig(n_points=200, seed=2, flip_prob_first=0.0, flip_prob_last=0.0,
                         sigma_code=0.0)
    scn = generate_scenario(enc_sphere_d10, sphere258, cfg)
    report = hierarchical_solve(enc_sphere_d10, scn.correspondences(), SolverConfig(m_default=6))
    prec = outlier_precision(report, scn)
    assert len(prec) == len(report.iterations) + 1
    assert all(p == 1.0 for p in prec)


def test_outlier_precision_requires_truth(enc_sphere_d10, sphere258):
    cfg = ScenarioConfig(n_points=100, seed=3)
    scn = generate_scenario(enc_sphere_d10, sphere258, cfg)
    report = hierarchical_solve(enc_sphere_d10, scn.correspondences(), SolverConfig(m_default=6))
    import dataclasses
    stripped = dataclasses.replace(scn, gt_vertices=None)
    with pytest.raises(InputError):
        outlier_precision(report, stripped)


def test_precision_counts_outliers_as_false(enc_sphere_d10, sphere258):
    cfg = ScenarioConfig(n_points=200, seed=4, outlier_fraction=0.3,
                         flip_prob_first=0.0, flip_prob_last=0.0, sigma_code=0.0)
    scn = generate_scenario(enc_sphere_d10, sphere258, cfg)
    good = scn.true_correspondence_mask(10.0)
    assert good.sum() == 200 - int(0.3 * 200)
    assert not good[scn.outlier_mask].any()
