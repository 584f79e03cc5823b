"""Hierarchical binary surface encoding with a RANSAC-free, render-free
coarse-to-fine 6DoF pose solver, plus a synthetic corruption benchmark.

The hot point-to-surface distance kernel runs on a compiled Cython core when
available and falls back to a bit-identical numpy implementation; see
hipose.backend.
"""

from .backend import BACKEND, available_backends
from .codes import Correspondence, confidence, initial_bit, quantize, read_correspondences, trust_bit, write_correspondences
from .encoding import SurfaceEncoding, build_encoding, encode_vertices, load_encoding, save_encoding, surface_lookup, verify_encoding
from .mesh import TriangleMesh, load_mesh, make_cube, make_sphere, max_pairwise_distance, upsample_mesh
from .pose import Pose, kabsch, rotation_geodesic_error
from .solver import (
    RansacParams,
    SolveReport,
    SolverConfig,
    hierarchical_solve,
    plain_kabsch_solve,
    point_surface_distance,
    ransac_kabsch_solve,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "Correspondence",
    "Pose",
    "RansacParams",
    "SolveReport",
    "SolverConfig",
    "SurfaceEncoding",
    "TriangleMesh",
    "available_backends",
    "build_encoding",
    "confidence",
    "encode_vertices",
    "hierarchical_solve",
    "initial_bit",
    "kabsch",
    "load_encoding",
    "load_mesh",
    "make_cube",
    "make_sphere",
    "max_pairwise_distance",
    "plain_kabsch_solve",
    "point_surface_distance",
    "quantize",
    "ransac_kabsch_solve",
    "read_correspondences",
    "rotation_geodesic_error",
    "save_encoding",
    "surface_lookup",
    "trust_bit",
    "upsample_mesh",
    "verify_encoding",
    "write_correspondences",
]
