"""Exception hierarchy shared across the package."""


class GcadError(Exception):
    """Base class for all library errors."""


class ParseError(GcadError):
    """A dataset file could not be parsed; carries path and line number."""

    def __init__(self, path, line_no, message):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = str(path)
        self.line_no = line_no


class BoundsError(GcadError):
    """A node index fell outside [0, n)."""


class GraphValidationError(GcadError):
    """A graph invariant was violated; carries the list of violations."""

    def __init__(self, violations):
        super().__init__("; ".join(violations))
        self.violations = list(violations)


class CapacityError(GcadError):
    """Not enough nodes/edges/non-edges available for the requested operation."""


class DegenerateDegreeError(GcadError):
    """Diffusion requested on a graph with zero-degree nodes."""


class NumericalError(GcadError):
    """A numerical guard tripped (solver residual, non-finite loss or gradient)."""


class DimensionError(GcadError):
    """Array shapes do not conform."""


class SamplingError(GcadError):
    """Negative sampling produced an invalid pairing (e.g. a fixed point)."""


class ConfigError(GcadError):
    """A run configuration is malformed or inconsistent."""


class CheckpointError(GcadError):
    """A checkpoint file is corrupt, truncated or from an incompatible version."""


class MetricUndefinedError(GcadError):
    """A metric is undefined for the given inputs (e.g. single-class AUC)."""
