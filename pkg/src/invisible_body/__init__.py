"""Bodies invisible from two points: confocal-conic construction, billiard
verification, lemma checks and the body of revolution."""
from .construction import ConstructionParams, build_body, derive_points, validate_configuration
from .errors import InvalidConfiguration, InvisibleBodyError

__all__ = [
    "ConstructionParams",
    "InvalidConfiguration",
    "InvisibleBodyError",
    "build_body",
    "derive_points",
    "validate_configuration",
]
__version__ = "0.1.0"
