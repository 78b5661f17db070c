"""Exception hierarchy shared across the package.

CLI exit codes map onto the three roots: ConfigError -> 2,
DataError -> 3, NumericError -> 4.
"""


class TriprecError(Exception):
    pass


class ConfigError(TriprecError):
    """Invalid or inconsistent configuration."""


class DataError(TriprecError):
    """Problems with input data or derived corpora."""


class ParseError(DataError):
    """Malformed input row; message carries the line number."""


class IntegrityError(DataError):
    """Referential integrity violation (duplicate ids, unknown references)."""


class ValidationError(DataError):
    """Value outside its documented domain."""


class LoopTripError(ValidationError):
    """Trip whose first and last POI coincide; no query can be derived."""


class VocabularyError(DataError):
    """POI id not present in the model vocabulary."""


class SamplingError(DataError):
    """Contrastive sampling cannot satisfy its contract (e.g. no negatives)."""


class InfeasibleError(DataError):
    """Recommendation request that no valid trip can satisfy (n > |vocabulary|)."""


class NumericError(TriprecError):
    """Non-finite values or degenerate numeric input."""


class ShapeError(NumericError):
    """Operand shapes incompatible for an op; message names both shapes."""
