"""Exception types shared across the package.

Every error carries a stable machine-readable ``code`` (its class name) that
the HTTP service mirrors into error response bodies.
"""


class LelsdError(Exception):
    """Base class for all package errors."""

    @property
    def code(self) -> str:
        return type(self).__name__


class InvalidInput(LelsdError):
    """A value violates a documented precondition (non-finite, out of range, ...)."""


class SpaceMismatch(LelsdError):
    """Two latent-space-bound objects do not share the same space."""


class InvalidEdit(LelsdError):
    """An edit operation is malformed (e.g. non-finite strength)."""


class ShapeMismatch(LelsdError):
    """Tensor or mask shapes are incompatible."""


class UnknownPart(LelsdError):
    """A part label is not in the segmenter's vocabulary."""


class UnsupportedCapability(LelsdError):
    """The backend cannot perform the requested operation (e.g. gradients)."""


class TrainingDiverged(LelsdError):
    """The objective or a gradient became non-finite during training."""


class CalibrationOutOfRange(LelsdError):
    """The requested distance is unreachable within the strength search range."""


class NonMonotoneDistance(LelsdError):
    """Distance decreased while expanding the strength bracket."""


class FingerprintMismatch(LelsdError):
    """A session or bank is bound to a different generator than the active one."""


class UnsupportedVersion(LelsdError):
    """A persisted file declares a format version this build cannot read."""


class MalformedBank(LelsdError):
    """A direction bank file is structurally invalid."""


class UnknownSession(LelsdError):
    """No session exists with the given id."""


class UnknownDirection(LelsdError):
    """No direction with the given name is loaded."""
