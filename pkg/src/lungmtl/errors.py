"""Exception taxonomy shared by all lungmtl modules.

Every error raised by the library derives from :class:`LungMtlError`, so
callers (and the CLI) can catch one base class. Warning categories are used
where the contract is "warn and continue" rather than "fail".
"""

from sklearn.exceptions import NotFittedError


class LungMtlError(Exception):
    """Base class for all lungmtl errors."""


# --- corpus / audio ---------------------------------------------------------

class MalformedHeaderError(LungMtlError):
    """WAV container is not a readable RIFF/WAVE file."""


class UnsupportedEncodingError(LungMtlError):
    """WAV payload uses a codec other than PCM16 or IEEE float32."""


class EmptyAudioError(LungMtlError):
    """WAV file contains no samples."""


class MalformedRowError(LungMtlError):
    """Annotation row is non-numeric or has end <= start."""


class EmptyFileError(LungMtlError):
    """A required input file contains no usable rows."""


class BadTokenCountError(LungMtlError):
    """Recording filename does not have the five expected tokens."""


class MissingDiagnosisWarning(UserWarning):
    """A recording's patient has no (parseable) diagnosis; it is skipped."""


class ClassTooSmallWarning(UserWarning):
    """A label class has < 2 members; the split falls back to unstratified."""


# --- dsp --------------------------------------------------------------------

class BadFftSizeError(LungMtlError):
    """FFT length is not a power of two."""


class DegenerateFilterError(LungMtlError):
    """Adjacent mel filter edges collapse onto the same FFT bin."""


# --- tensor engine / models -------------------------------------------------

class ShapeMismatchError(LungMtlError):
    """Operand shapes do not conform."""


class BadTargetError(LungMtlError):
    """A class target index is outside [0, K)."""


class StaleCacheError(LungMtlError):
    """backward() called without a matching cached forward pass."""


class DivergenceError(LungMtlError):
    """A non-finite value appeared during training."""


class UnknownArchError(LungMtlError):
    """Requested architecture id is not registered."""


class UnresolvedShapeError(LungMtlError):
    """FLOP accounting needs layer shapes that are not resolved."""


# --- metrics ----------------------------------------------------------------

class LabelOutOfRangeError(LungMtlError):
    """A label lies outside [0, K)."""


class EmptyMatrixError(LungMtlError):
    """Confusion matrix has no entries."""


class SingleClassOnlyError(LungMtlError):
    """ROC/AUC is undefined: a class has zero positives or zero negatives."""


# --- risk -------------------------------------------------------------------

class OutOfRubricError(LungMtlError):
    """Demographic record falls outside the risk rule table (age < 35)."""


class EmptyTrainingSetError(LungMtlError):
    """fit() called with no training examples."""


class NoConvergenceError(LungMtlError):
    """SMO hit its iteration cap before meeting the KKT tolerance."""


class UnfittedModelError(LungMtlError, NotFittedError):
    """predict() called before fit(). Also a sklearn NotFittedError."""


# --- cli / persistence ------------------------------------------------------

class IoError(LungMtlError):
    """A required input file is missing or unreadable."""


class BadConfigError(LungMtlError):
    """Run config file or override has unknown keys or invalid values."""


class ConfigMismatchError(LungMtlError):
    """Feature/checkpoint fingerprint disagrees with the active config."""


class UnreadableCheckpointError(LungMtlError):
    """Checkpoint file is missing, unparseable, or has a bad version."""
