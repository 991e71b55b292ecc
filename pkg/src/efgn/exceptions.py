"""Exceptions raised by the efgn package."""


class EfgnError(Exception):
    """Base exception for efgn operations."""
    pass


class ShapeError(EfgnError, ValueError):
    """Raised when tensor extents are incompatible with an operation."""
    pass


class AutogradError(EfgnError):
    """Raised when backward() is called on something that cannot be differentiated."""
    pass


class GradCheckError(EfgnError):
    """Raised when a finite-difference check evaluates to a non-finite value."""
    pass


class AudioError(EfgnError):
    """Base exception for audio ingestion problems."""
    pass


class SilentClipError(AudioError):
    """Raised when a clip's peak is below the silence threshold."""
    pass


class AudioFormatError(AudioError):
    """Raised when a WAV file is not 16-bit PCM mono."""
    pass


class StftError(EfgnError):
    """Raised for clips shorter than one hop, odd n_fft, negative magnitudes, or non-COLA window/hop pairs."""
    pass


class ConfigError(EfgnError):
    """Raised when a configuration value or file is invalid."""
    pass


class PruningError(EfgnError):
    """Raised for empty prune scopes, invalid amounts, or mismatched masks."""
    pass


class MetricError(EfgnError):
    """Raised when an objective metric cannot be computed."""
    pass


class NonFiniteLossError(EfgnError):
    """Raised when a training step produces a non-finite tensor."""

    def __init__(self, tensor_name: str, message: str | None = None):
        self.tensor_name = tensor_name
        super().__init__(message or f"Non-finite values in '{tensor_name}'")


class CheckpointError(EfgnError):
    """Base exception for checkpoint persistence."""
    pass


class CheckpointMagicError(CheckpointError):
    """Raised when a file does not start with the checkpoint magic."""
    pass


class CheckpointVersionError(CheckpointError):
    """Raised when a checkpoint was written by an unsupported format version."""
    pass


class CheckpointChecksumError(CheckpointError):
    """Raised when the stored checksum does not match the payload."""
    pass


class CheckpointTruncatedError(CheckpointError):
    """Raised when a checkpoint file ends before its declared contents."""
    pass


class SpectralNormError(EfgnError):
    """Raised when a normalized discriminator kernel drifts from unit spectral norm."""
    pass
