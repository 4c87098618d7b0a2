"""Exception taxonomy shared across the toolkit.

Each class maps to one error category named in the module contracts; the CLI
assigns every category a distinct exit code.
"""


class WdselError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(WdselError):
    """Invalid configuration value or unsupported option."""


class SchemaError(ConfigError):
    """Config file fails schema validation (unknown keys, wrong types)."""


class InputError(WdselError):
    """Invalid data handed to an operation (shape, finiteness, emptiness)."""


class StructureError(WdselError):
    """Internally inconsistent composite object (shape or length mismatch)."""


class DecompositionError(WdselError):
    """Signal cannot be decomposed as requested."""


class DegenerateMatrixError(WdselError):
    """Category matrix has a zero column; Gram normalization undefined."""


class RegularizerSaturationError(WdselError):
    """Dictionary entropy fell below the configured floor."""


class EmptySelectionError(WdselError):
    """Every classifier activation fell below the truncation threshold."""


class AnalysisError(WdselError):
    """An analysis could not identify any usable structure in its input."""


class AlignmentError(WdselError):
    """Trajectory alignment is ill-posed (degenerate reference geometry)."""


class CheckpointError(WdselError):
    """Base class for checkpoint load failures."""


class CorruptCheckpointError(CheckpointError):
    """File is truncated or not a checkpoint at all."""


class CheckpointVersionError(CheckpointError):
    """Checkpoint format version is not supported by this build."""


class ArchitectureMismatchError(CheckpointError):
    """Checkpoint was written by a model with a different architecture."""


class DataFormatError(WdselError):
    """A CSV or dataset directory does not match its documented layout."""
