"""Exception hierarchy shared by all hipose modules.

Each class carries the CLI exit code its category maps to: 1 for unreadable
or malformed inputs, 2 for contract/invariant violations, 3 for solver
failures.
"""


class HiposeError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1


class MeshError(HiposeError):
    """Malformed or unreadable mesh file."""


class DegenerateMeshError(MeshError):
    """Mesh violating geometric invariants: too few vertices, zero diameter,
    coplanar vertex set."""

    exit_code = 2


class EncodingError(HiposeError):
    """Corrupt or inconsistent encoding file."""


class InvariantError(HiposeError):
    """Operation input violating a documented contract (wrong vertex count,
    bit depth out of range, invalid configuration value)."""

    exit_code = 2


class InputError(HiposeError):
    """Malformed runtime input (correspondence files, configs, prefixes)."""


class SolverError(HiposeError):
    """Base class for pose solver failures."""

    exit_code = 3


class DegenerateGeometryError(SolverError):
    """Point configuration does not determine a rotation (rank-deficient
    cross-covariance: coincident or collinear points)."""


class InlierCollapseError(SolverError):
    """Active correspondence count fell below the configured minimum."""

    def __init__(self, message, iteration):
        super().__init__(message)
        self.iteration = iteration
