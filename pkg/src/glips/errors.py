"""Exception hierarchy for the toolkit.

Two families matter to callers: ``InputError`` covers bad files, values,
and configuration (CLI exit code 2), while ``BackendError`` covers model
loading and inference failures (CLI exit code 3).
"""


class GlipsError(Exception):
    """Base class for all toolkit errors."""


class InputError(GlipsError):
    """Invalid user-supplied data, file, or configuration."""


class BackendError(GlipsError):
    """Model loading or inference failure."""


# --- imagery ---------------------------------------------------------------

class UnsupportedFormatError(InputError):
    """Image file is not PNG or JPEG."""


class CorruptImageError(InputError):
    """Image file has a known signature but cannot be decoded."""


class InvalidSpecError(InputError):
    """Preprocessing or grid specification is inconsistent."""


class IndexOutOfRangeError(InputError):
    """Patch index outside the grid."""


# --- backend ---------------------------------------------------------------

class ModelLoadError(BackendError):
    """Model file missing, unreadable, or runtime unavailable."""


class MissingOutputError(BackendError):
    """A named graph output declared in the manifest is absent."""


class ShapeMismatchError(BackendError):
    """Declared tensor sizes disagree with the loaded graph."""


class InferenceError(BackendError):
    """A forward pass failed or produced malformed tensors."""


# --- scoring ---------------------------------------------------------------

class EmptyAttentionError(InputError):
    """Attention map holds no scores."""


class LengthMismatchError(InputError):
    """Paired vectors have different lengths."""


class ValueOutOfRangeError(InputError):
    """Values fall outside the documented domain."""


class SelectionLengthMismatchError(InputError):
    """Salient selections to be paired have different lengths."""


class EmptyPairingError(InputError):
    """Spatial-index pairing found no common patch indices."""


class UnresolvedHyperparameterError(InputError):
    """Kernel still carries a median-heuristic placeholder."""


class EmptyFeatureSetError(InputError):
    """A feature set holds no tokens."""


# --- baselines -------------------------------------------------------------

class DimensionMismatchError(InputError):
    """Compared images or summaries have different dimensions."""


class TooSmallForScalesError(InputError):
    """Image too small for the multi-scale pyramid."""


class InsufficientSamplesError(InputError):
    """Too few feature vectors to fit a Gaussian summary."""


class EigenFailureError(InputError):
    """Eigendecomposition failed during the distribution distance."""


class ZeroHumanScoreError(InputError):
    """Percentage error undefined for a zero human score."""


class EmptyInputError(InputError):
    """An operation received an empty sequence."""


# --- binning ---------------------------------------------------------------

class MalformedBinConfigError(InputError):
    """Bin-table configuration cannot be parsed or validated."""


class OverlappingBinsError(InputError):
    """Published metric ranges of two bins overlap."""


class MissingLikertSpanError(InputError):
    """A table does not cover all five Likert categories."""


class NonFiniteInputError(InputError):
    """Classification requires a finite value."""


class ScoreOutOfRangeError(InputError):
    """Likert score outside [0, 5] or [1, 5] where required."""


class UnknownMetricError(InputError):
    """No bin table registered under the requested metric name."""


# --- harness ---------------------------------------------------------------

class MalformedCsvError(InputError):
    """Human-score CSV is empty or has the wrong schema."""


class MissingHumanScoreError(InputError):
    """A model in the dataset manifest has no human average."""


class EmptyLambdaListError(InputError):
    """The sweep was given no balance values to evaluate."""
