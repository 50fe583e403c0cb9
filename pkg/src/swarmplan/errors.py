"""Exception types shared across the package."""


class DegenerateGeometryError(ValueError):
    """Raised when a separating direction cannot be defined (coincident points)."""


class StalePredictionError(RuntimeError):
    """Raised when horizon predictions from different planning cycles are mixed."""


class ScenarioGenerationError(RuntimeError):
    """Raised when rejection sampling cannot place agents within the attempt budget."""
