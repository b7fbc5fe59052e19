"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Operand shapes are incompatible for the requested operation."""


class DegenerateInputError(ValueError):
    """Input is structurally empty (all-masked, zero tokens, empty set)."""


class GraphError(RuntimeError):
    """Autodiff contract violation (non-scalar loss, non-deterministic builder)."""


class ParseError(ValueError):
    """A data file line could not be parsed; message carries the line number."""


class FormatError(ValueError):
    """A data file does not match its documented format."""


class GenerationError(ValueError):
    """Pair generation cannot satisfy the request (e.g. an empty stance pool)."""


class DataError(ValueError):
    """Runtime data problem (empty filtered dataset, all-OOV pair, bad label)."""


class CheckpointError(ValueError):
    """Checkpoint file is missing, corrupt, or from an incompatible version."""


class TrainingError(RuntimeError):
    """Training aborted (NaN loss or gradient, empty split)."""
