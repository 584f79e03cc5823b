import numpy as np
import pytest

import hipose
from hipose.bench import default_bench_assets


@pytest.fixture(scope="session")
def cube():
    return hipose.make_cube(10.0)


@pytest.fixture(scope="session")
def sphere258():
    return hipose.make_sphere(100.0, subdivisions=3)


@pytest.fixture(scope="session")
def enc_cube_d3(cube):
    return hipose.build_encoding(cube, 3, seed=0)


@pytest.fixture(scope="session")
def enc_sphere_d10(sphere258):
    dense = hipose.upsample_mesh(sphere258, 10)
    return hipose.build_encoding(dense, 10, seed=0)


@pytest.fixture(scope="session")
def bench16():
    """Full-scale benchmark assets (100 mm sphere, d = 16): built once, shared
    by the acceptance suite."""
    return default_bench_assets(bits=16, seed=0)


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)
