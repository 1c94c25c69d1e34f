"""Exception types shared across the package."""


class SpikeDelaysError(Exception):
    """Base class for all package errors."""


# --- event files / datasets ---

class BadMagic(SpikeDelaysError):
    """File does not start with the event-file magic bytes."""


class TruncatedFile(SpikeDelaysError):
    """Event file declares more payload than it contains."""


class ChannelOutOfRange(SpikeDelaysError):
    """Event references a channel >= the declared channel count."""


class MissingFile(SpikeDelaysError):
    """A manifest entry points at a file that cannot be read."""


# --- network / training ---

class ShapeMismatch(SpikeDelaysError):
    """Array dimensions do not agree with the layer/network configuration."""


class TraceMissing(SpikeDelaysError):
    """Backward pass requested but the forward ran without retention."""


class NonConvergence(SpikeDelaysError):
    """Adaptive delay-cap schedule hit the hard ceiling without stopping."""


# --- harness ---

class ConfigInvalid(SpikeDelaysError):
    """Run configuration failed validation."""


class DatasetMissing(SpikeDelaysError):
    """Configured dataset path does not exist or is unreadable."""


class VersionMismatch(SpikeDelaysError):
    """Checkpoint was written by an incompatible format version."""


class CorruptPayload(SpikeDelaysError):
    """Checkpoint payload failed its length or checksum validation."""


class IoError(SpikeDelaysError):
    """Underlying I/O failure while reading or writing an artifact."""
