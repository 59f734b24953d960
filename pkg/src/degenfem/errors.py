"""Exception hierarchy for degenfem."""


class DegenfemError(Exception):
    """Base class for all degenfem errors."""


class DegenerateTriangle(DegenfemError):
    """Triangle is collinear within tolerance."""


class ZeroVector(DegenfemError):
    """A direction vector with zero length was supplied."""


class NonConforming(DegenfemError):
    """Mesh has hanging nodes, overlapping elements or edges shared by >2 triangles."""


class InvertedElement(DegenfemError):
    """Element with non-positive signed area (wrong orientation)."""


class DuplicateVertex(DegenfemError):
    """Two mesh vertices coincide within tolerance."""


class InvalidRowSpec(DegenfemError):
    """Row specification for the strip generator is malformed."""


class InvalidParameters(DegenfemError):
    """Generator parameters out of range."""


class BlockOutOfRange(DegenfemError):
    """Cluster block does not fit inside the grid with a one-cell margin."""


class NonpositiveRadius(DegenfemError):
    """Bump radius must be positive."""


class InconsistentClassification(DegenfemError):
    """Element classification does not match the triangulation."""


class InadmissibleCorrection(DegenfemError):
    """Correction spec failed its admissibility checks."""


class SolverBreakdown(DegenfemError):
    """Linear solver could not reach the residual target."""


class BoundaryMismatch(DegenfemError):
    """Candidate field does not share the solution's boundary values."""


class BandInconsistent(DegenfemError):
    """Band record does not describe a valid band on the triangulation."""


class InvalidConfiguration(DegenfemError):
    """Three-element triplet is not in the required configuration."""
