"""Error codes shared by every queue layer."""

import enum


class ErrorCode(enum.Enum):
    QUEUE_FULL = "queue_full"
    QUEUE_EMPTY = "queue_empty"
    INVALID_REGION = "invalid_region"
    INVALID_BUFFER = "invalid_buffer"
    REGION_OVERLAP = "region_overlap"
    REGION_BUSY = "region_busy"
    OWNERSHIP_VIOLATION = "ownership_violation"
    BACKEND_ERROR = "backend_error"


class CleanQError(Exception):
    """Base class; ``code`` names exactly one :class:`ErrorCode`."""

    code: ErrorCode = ErrorCode.BACKEND_ERROR

    def __init__(self, message: str = "", token=None):
        super().__init__(message or self.code.value)
        # the buffer involved, when there is one (e.g. a dequeued token that
        # failed a check still changed hands and must not be lost)
        self.token = token


class QueueFull(CleanQError):
    code = ErrorCode.QUEUE_FULL


class QueueEmpty(CleanQError):
    code = ErrorCode.QUEUE_EMPTY


class InvalidRegion(CleanQError):
    code = ErrorCode.INVALID_REGION


class InvalidBuffer(CleanQError):
    code = ErrorCode.INVALID_BUFFER


class RegionOverlap(CleanQError):
    code = ErrorCode.REGION_OVERLAP


class RegionBusy(CleanQError):
    code = ErrorCode.REGION_BUSY


class OwnershipViolation(CleanQError):
    code = ErrorCode.OWNERSHIP_VIOLATION


class BackendError(CleanQError):
    code = ErrorCode.BACKEND_ERROR


def result_string(exc: BaseException | None) -> str:
    """Map an operation outcome onto the trace ``result`` field."""
    if exc is None:
        return "ok"
    if isinstance(exc, QueueFull):
        return "full"
    if isinstance(exc, QueueEmpty):
        return "empty"
    if isinstance(exc, CleanQError):
        return "err:" + exc.code.value
    return "err:" + type(exc).__name__.lower()
