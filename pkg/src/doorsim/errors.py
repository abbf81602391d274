"""Exception hierarchy shared by every layer of the simulator."""


class DoorsimError(Exception):
    """Base class for all errors raised by this package."""

    code = "error"


class ValidationError(DoorsimError):
    """Input violates a documented contract (bad range, bad config, ...)."""

    code = "validation"


class ConflictError(DoorsimError):
    """Uniqueness violated: duplicate device, event sequence, or job name."""

    code = "conflict"


class NotFoundError(DoorsimError):
    """Referenced entity does not exist."""

    code = "not_found"


class AuthError(DoorsimError):
    """Authentication failed or a session token was missing/invalid."""

    code = "auth_failed"


class RoutingError(DoorsimError):
    """Frame or request reached a component it was not routed for."""

    code = "routing"


class DatasetError(DoorsimError):
    """Manifest or motion script references data that does not exist."""

    code = "dataset"


class ProtocolError(DoorsimError):
    """Malformed wire request or response."""

    code = "protocol"


class DetectionFailedError(DoorsimError):
    """A detection backend was unavailable or failed for one frame."""

    code = "detection_failed"


class TransientTransportError(DoorsimError):
    """Retryable delivery failure injected by the transport."""

    code = "transport"


class DeliveryFailedError(DoorsimError):
    """All delivery attempts were exhausted; record went to the dead-letter queue."""

    code = "delivery_failed"
