"""Exception types shared across the toolkit."""


class StreamBatchError(Exception):
    """Base class for all errors raised by this package."""


class ManifestError(StreamBatchError):
    """A manifest or shard file could not be parsed; message carries file/line context."""


class ConfigurationError(StreamBatchError):
    """Inputs are well-formed but inconsistent (bad weights, shape mismatches, ...)."""


class ShardReadError(StreamBatchError):
    """A shard failed to read during iteration."""

    def __init__(self, path, cause=None):
        self.path = str(path)
        msg = f"failed to read shard {self.path}"
        if cause is not None:
            msg = f"{msg}: {cause}"
        super().__init__(msg)


class UnsatisfiableBatchSizeError(StreamBatchError):
    """Even a batch of one example does not fit; carries the grid cell when known."""

    def __init__(self, message, cell=None):
        self.cell = cell
        super().__init__(message)


class ContractViolationError(StreamBatchError):
    """A step runner reported outcomes inconsistent with monotonicity in batch size."""
