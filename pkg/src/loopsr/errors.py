"""Exception types shared across the library.

The CLI maps these onto process exit codes: ConfigError -> 1,
data/contract errors -> 2, backend errors -> 3.
"""


class LoopsrError(Exception):
    """Base class for all library errors."""


class ConfigError(LoopsrError):
    """Invalid configuration value (quality, step, gain, CLI flags...)."""


class ContractViolation(LoopsrError):
    """A documented precondition was not met by the caller."""


class ImageTooSmallError(ContractViolation):
    """Image too small for the requested operation."""


class PpmParseError(LoopsrError):
    """Malformed Netpbm payload; carries the offending byte offset."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class MetricError(LoopsrError):
    """Metric cannot be evaluated on these inputs."""


class DivergenceError(LoopsrError):
    """The feedback iteration is blowing up instead of settling."""

    def __init__(self, gain, iteration, initial, current):
        super().__init__(
            f"residual diverged at iteration {iteration}: "
            f"{current:.6g} > 10 x initial {initial:.6g} (gain={gain})"
        )
        self.gain = gain
        self.iteration = iteration


class LoopIterationError(LoopsrError):
    """Wraps an operator/backend failure with the iteration that hit it."""

    def __init__(self, iteration, cause):
        super().__init__(f"iteration {iteration}: {cause}")
        self.iteration = iteration


class BackendError(LoopsrError):
    """External SR backend failed; message carries the protocol diagnostic."""


class HandshakeError(BackendError):
    """Backend handshake failed (timeout, bad magic, version mismatch)."""


class BackendTimeoutError(BackendError):
    """Backend did not answer within the configured timeout."""


class BrokenBackendError(BackendError):
    """Backend process died or closed its stream mid-conversation."""


class ProtocolError(BackendError):
    """Malformed or unexpected frame on the wire."""
