"""Exception hierarchy, split along the CLI exit-code contract.

InputError subclasses map to exit code 2 (unreadable or malformed input),
GeometryError subclasses to exit code 3 (degenerate geometry), everything
else under SymnormError to exit code 1.
"""


class SymnormError(Exception):
    """Base class for errors raised by this package."""


class InputError(SymnormError):
    """Unreadable or malformed input."""


class MeshParseError(InputError):
    """OBJ stream violated the supported subset."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class EmptyMeshError(MeshParseError):
    """OBJ stream held no vertices or no faces."""


class UndefinedAPError(InputError):
    """Average precision requested with zero ground-truth orientations."""


class NoForegroundError(InputError):
    """Normal metrics requested for a map with an empty foreground mask."""


class GeometryError(SymnormError):
    """Geometry too degenerate for the requested operation."""


class NoSamplableAreaError(GeometryError):
    """Every face of the mesh has zero area."""


class InsufficientGeometryError(GeometryError):
    """Fewer than two distinct points available for hypothesis voting."""


class RefinementDivergedError(GeometryError):
    """ICP rejected every correspondence; the hypothesis should be dropped."""


class DegenerateCorrespondencesError(GeometryError):
    """Too few displaced correspondences to fit a reflection plane."""
