"""Exception hierarchy shared across the package."""


class UrbanflowError(Exception):
    """Base class for all package errors."""


# --- ingest ---------------------------------------------------------------

class BadMagic(UrbanflowError):
    """Geometry file does not start with the expected file code."""


class UnsupportedShapeType(UrbanflowError):
    """Shape type other than Null, PolyLine or PolyLineZ."""


class TruncatedRecord(UrbanflowError):
    """Declared record or file length runs past the available bytes."""


class BadHeader(UrbanflowError):
    """Attribute table header is malformed."""


class FieldOverflow(UrbanflowError):
    """Declared record length inconsistent with the field widths."""


class CountMismatch(UrbanflowError):
    """Geometry and attribute record counts differ."""


class MissingRequiredColumn(UrbanflowError):
    """A required logical field has neither a mapped column nor a default."""


class BadSpec(UrbanflowError):
    """Synthetic network specification out of range."""


# --- topology -------------------------------------------------------------

class DanglingGeometry(UrbanflowError):
    """A polyline run did not terminate at a vertex (internal bug)."""


class ZeroLengthSegment(UrbanflowError):
    """Two consecutive identical geometry points."""


# --- routing --------------------------------------------------------------

class NoDrivableEdges(UrbanflowError):
    """Network contains no edge a vehicle may travel."""


class DegreeOverflow(UrbanflowError):
    """Vertex out-degree exceeds what a one-byte hop entry can encode."""


class Unreachable(UrbanflowError):
    """No path exists between the requested vertices."""


class UnknownEdge(UrbanflowError):
    """Edge id does not exist in the network."""


# --- scenario -------------------------------------------------------------

class NoFeasiblePair(UrbanflowError):
    """Could not draw a distinct, mutually reachable origin/destination."""


class ConfigError(UrbanflowError):
    """Scenario configuration failed validation."""


class NetworkBuildError(UrbanflowError):
    """Network construction from the configured source failed."""


class MalformedEvent(UrbanflowError):
    """Scripted or live event does not match any known schema."""


class SimulationInvariantError(UrbanflowError):
    """An internal world invariant was violated; aborts the run."""
