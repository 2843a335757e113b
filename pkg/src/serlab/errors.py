"""Exception types shared across the package."""


class SerlabError(Exception):
    """Base class for all package-specific errors."""


class ShapeError(SerlabError):
    """Tensor/array dimensions do not satisfy an operation's contract."""


class NumericsError(SerlabError):
    """Non-finite or otherwise unusable numeric input."""


class ConfigError(SerlabError):
    """Invalid configuration value or combination."""


class ManifestError(SerlabError):
    """Malformed corpus manifest (duplicate ids, unknown labels, ...)."""


class FileFormatError(SerlabError):
    """A binary artifact (spectrogram matrix, embedding store, ...) does
    not match its documented layout."""


class MalformedWavError(FileFormatError):
    """WAV file exists but its RIFF structure is broken or truncated."""


class UnsupportedWavError(FileFormatError):
    """WAV file is well-formed but uses a codec we do not decode."""


class MetricError(SerlabError):
    """A metric is undefined for the given confusion matrix."""


class CheckpointError(FileFormatError):
    """Checkpoint archive is malformed or inconsistent."""
