"""Triangle meshes: loading (ASCII PLY / OBJ), validation, diameter, surface
upsampling, and simple generators for synthetic benchmarks.

Coordinates are millimeters throughout.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateMeshError, InvariantError, MeshError

_DIAMETER_BRUTE_FORCE_LIMIT = 4096  # pairwise O(N^2) is fine below this


@dataclass(frozen=True)
class TriangleMesh:
    """Vertices (N, 3) float64 mm, faces (F, 3) int vertex indices, and the
    cached maximum pairwise vertex distance."""

    vertices: np.ndarray
    faces: np.ndarray
    diameter: float = field(default=0.0)

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.vertices, dtype=np.float64))
        f = np.asarray(self.faces, dtype=np.int64).reshape(-1, 3)
        if v.ndim != 2 or v.shape[1] != 3:
            raise MeshError(f"vertices must be (N, 3), got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise MeshError("non-finite vertex coordinate")
        if len(f) and (f.min() < 0 or f.max() >= len(v)):
            raise MeshError(
                f"face index out of range (N={len(v)}, max index {f.max()})"
            )
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)
        if self.diameter <= 0.0:
            object.__setattr__(self, "diameter", max_pairwise_distance(v))
        v.flags.writeable = False
        f.flags.writeable = False

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    def validate(self) -> None:
        """Enforce the full mesh contract: >= 4 non-coplanar vertices and a
        strictly positive diameter."""
        if self.n_vertices < 4:
            raise DegenerateMeshError(f"degenerate mesh: {self.n_vertices} vertices (< 4)")
        if self.diameter <= 0.0:
            raise DegenerateMeshError("degenerate mesh: zero diameter")
        centered = self.vertices - self.vertices.mean(axis=0)
        if np.linalg.matrix_rank(centered, tol=1e-9 * max(self.diameter, 1.0)) < 3:
            raise DegenerateMeshError("degenerate mesh: all vertices coplanar")


def max_pairwise_distance(points: np.ndarray) -> float:
    """Exact maximum pairwise Euclidean distance of a point set.

    Large sets are reduced to their convex hull first (the diameter is attained
    at hull vertices); degenerate sets fall back to chunked brute force.
    """
    pts = np.asarray(points, dtype=np.float64)
    if len(pts) < 2:
        return 0.0
    if len(pts) > _DIAMETER_BRUTE_FORCE_LIMIT:
        try:
            from scipy.spatial import ConvexHull

            pts = pts[np.unique(ConvexHull(pts).vertices)]
        except Exception:
            pass  # flat/degenerate input: brute force below
    if len(pts) <= _DIAMETER_BRUTE_FORCE_LIMIT:
        diff = pts[:, None, :] - pts[None, :, :]
        return float(np.sqrt((diff * diff).sum(axis=2)).max())
    best = 0.0
    for start in range(0, len(pts), 1024):
        chunk = pts[start : start + 1024]
        diff = chunk[:, None, :] - pts[None, :, :]
        best = max(best, float(np.sqrt((diff * diff).sum(axis=2)).max()))
    return best


# ---------------------------------------------------------------------------
# File loading
# ---------------------------------------------------------------------------


def load_mesh(path: str | os.PathLike) -> TriangleMesh:
    """Load an ASCII PLY or OBJ mesh and validate it.

    Raises MeshError on parse failure or a degenerate mesh (< 4 vertices,
    zero diameter, out-of-range face index).
    """
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise MeshError(f"mesh file not found: {path}")
    with open(path, "r", encoding="utf-8", errors="replace") as fh:
        text = fh.read()
    first = text.lstrip().split("\n", 1)[0].strip() if text.strip() else ""
    if first == "ply":
        vertices, faces = _parse_ply(text, path)
    else:
        vertices, faces = _parse_obj(text, path)
    if len(vertices) < 4:
        raise DegenerateMeshError(f"degenerate mesh: {len(vertices)} vertices (< 4): {path}")
    mesh = TriangleMesh(np.asarray(vertices), np.asarray(faces).reshape(-1, 3))
    mesh.validate()
    return mesh


def _triangulate(idx: list[int]) -> list[list[int]]:
    # fan triangulation of a polygon face
    return [[idx[0], idx[i], idx[i + 1]] for i in range(1, len(idx) - 1)]


def _parse_ply(text: str, path: str) -> tuple[list, list]:
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("comment")]
    if not lines or lines[0] != "ply":
        raise MeshError(f"not a PLY file: {path}")
    i = 1
    elements: list[tuple[str, int, list[str]]] = []  # (name, count, properties)
    fmt_seen = False
    while i < len(lines):
        tok = lines[i].split()
        if tok[0] == "format":
            if tok[1] != "ascii":
                raise MeshError(f"only ASCII PLY supported, got {tok[1]}: {path}")
            fmt_seen = True
        elif tok[0] == "element":
            elements.append((tok[1], int(tok[2]), []))
        elif tok[0] == "property":
            if not elements:
                raise MeshError(f"PLY property before element: {path}")
            elements[-1][2].append(tok[-1])
        elif tok[0] == "end_header":
            i += 1
            break
        i += 1
    else:
        raise MeshError(f"PLY header without end_header: {path}")
    if not fmt_seen:
        raise MeshError(f"PLY header missing format line: {path}")

    vertices: list[list[float]] = []
    faces: list[list[int]] = []
    try:
        for name, count, props in elements:
            rows = lines[i : i + count]
            if len(rows) < count:
                raise MeshError(f"PLY truncated in element {name}: {path}")
            i += count
            if name == "vertex":
                try:
                    ix, iy, iz = props.index("x"), props.index("y"), props.index("z")
                except ValueError:
                    raise MeshError(f"PLY vertex element lacks x/y/z: {path}") from None
                for row in rows:
                    vals = row.split()
                    vertices.append([float(vals[ix]), float(vals[iy]), float(vals[iz])])
            elif name == "face":
                for row in rows:
                    vals = row.split()
                    n = int(vals[0])
                    if n < 3 or len(vals) < 1 + n:
                        raise MeshError(f"malformed PLY face row {row!r}: {path}")
                    faces.extend(_triangulate([int(v) for v in vals[1 : 1 + n]]))
    except (ValueError, IndexError) as exc:
        raise MeshError(f"PLY parse failure in {path}: {exc}") from exc
    return vertices, faces


def _parse_obj(text: str, path: str) -> tuple[list, list]:
    vertices: list[list[float]] = []
    faces: list[list[int]] = []
    try:
        for lineno, ln in enumerate(text.splitlines(), 1):
            tok = ln.split()
            if not tok or tok[0].startswith("#"):
                continue
            if tok[0] == "v":
                if len(tok) < 4:
                    raise MeshError(f"short vertex line {lineno}: {path}")
                vertices.append([float(tok[1]), float(tok[2]), float(tok[3])])
            elif tok[0] == "f":
                idx = []
                for part in tok[1:]:
                    raw = int(part.split("/")[0])
                    # OBJ indices are 1-based; negatives count back from the end
                    idx.append(raw - 1 if raw > 0 else len(vertices) + raw)
                if len(idx) < 3:
                    raise MeshError(f"face with < 3 vertices at line {lineno}: {path}")
                faces.extend(_triangulate(idx))
    except ValueError as exc:
        raise MeshError(f"OBJ parse failure in {path}: {exc}") from exc
    if not vertices:
        raise MeshError(f"no vertices found (not an OBJ/PLY mesh?): {path}")
    return vertices, faces


# ---------------------------------------------------------------------------
# Upsampling
# ---------------------------------------------------------------------------


def upsample_mesh(mesh: TriangleMesh, d: int, seed: int = 0) -> TriangleMesh:
    """Grow the vertex set to exactly 2**d points.

    Original vertices are kept; new points are drawn by area-weighted uniform
    sampling on the triangle faces with a seeded RNG, so the result is
    deterministic. Faces are dropped from the output: downstream consumers
    (the surface encoding and the solvers) operate on vertices only.
    """
    if d < 1:
        raise InvariantError(f"bit depth must be >= 1, got {d}")
    target = 1 << d
    n = mesh.n_vertices
    if target < n:
        raise InvariantError(f"2^{d} = {target} < {n} vertices; pick a larger bit depth")
    if target == n:
        return TriangleMesh(mesh.vertices.copy(), np.empty((0, 3), dtype=np.int64),
                            diameter=mesh.diameter)
    if len(mesh.faces) == 0:
        raise MeshError("cannot upsample a mesh without faces")

    tri = mesh.vertices[mesh.faces]  # (F, 3, 3)
    cross = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    areas = 0.5 * np.linalg.norm(cross, axis=1)
    total = areas.sum()
    if total <= 0.0:
        raise MeshError("cannot upsample: all faces are degenerate (zero area)")

    rng = np.random.default_rng(np.random.SeedSequence((seed, d, n)))
    extra = target - n
    face_ids = rng.choice(len(areas), size=extra, p=areas / total)
    # uniform barycentric sampling: fold (u, v) back into the triangle
    u = rng.random(extra)
    v = rng.random(extra)
    flip = u + v > 1.0
    u[flip] = 1.0 - u[flip]
    v[flip] = 1.0 - v[flip]
    a, b, c = tri[face_ids, 0], tri[face_ids, 1], tri[face_ids, 2]
    new_pts = a + u[:, None] * (b - a) + v[:, None] * (c - a)

    all_pts = np.vstack([mesh.vertices, new_pts])
    # sampled points are convex combinations of hull points: diameter unchanged
    return TriangleMesh(all_pts, np.empty((0, 3), dtype=np.int64),
                        diameter=mesh.diameter)


# ---------------------------------------------------------------------------
# Synthetic mesh generators (benchmark fixtures)
# ---------------------------------------------------------------------------


def make_cube(side: float = 10.0) -> TriangleMesh:
    """Axis-aligned cube centered at the origin, 8 vertices, 12 triangles."""
    s = side / 2.0
    verts = np.array(
        [[x, y, z] for x in (-s, s) for y in (-s, s) for z in (-s, s)],
        dtype=np.float64,
    )
    faces = np.array(
        [
            [0, 1, 3], [0, 3, 2],  # x = -s
            [4, 6, 7], [4, 7, 5],  # x = +s
            [0, 4, 5], [0, 5, 1],  # y = -s
            [2, 3, 7], [2, 7, 6],  # y = +s
            [0, 2, 6], [0, 6, 4],  # z = -s
            [1, 5, 7], [1, 7, 3],  # z = +s
        ],
        dtype=np.int64,
    )
    return TriangleMesh(verts, faces)


def make_sphere(radius: float = 100.0, subdivisions: int = 3) -> TriangleMesh:
    """Octahedron-based sphere: each subdivision splits every triangle in four
    and projects new vertices back onto the sphere. Vertex counts: 6, 18, 66,
    258, 1026, ... (level 0 is the octahedron itself)."""
    verts = [
        (1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1),
    ]
    faces = [
        (0, 2, 4), (2, 1, 4), (1, 3, 4), (3, 0, 4),
        (2, 0, 5), (1, 2, 5), (3, 1, 5), (0, 3, 5),
    ]
    verts = [np.array(v, dtype=np.float64) for v in verts]
    for _ in range(subdivisions):
        midpoint_cache: dict[tuple[int, int], int] = {}

        def midpoint(i, j):
            key = (i, j) if i < j else (j, i)
            if key not in midpoint_cache:
                m = verts[i] + verts[j]
                verts.append(m / np.linalg.norm(m))
                midpoint_cache[key] = len(verts) - 1
            return midpoint_cache[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new_faces
    return TriangleMesh(radius * np.array(verts), np.array(faces, dtype=np.int64))
