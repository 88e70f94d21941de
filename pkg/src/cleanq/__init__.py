"""Descriptor queues with explicit buffer ownership transfer."""

from .core import BufferToken, Layer, Module, Queue, Region, RegionTable, layers, stack
from .errors import (
    BackendError,
    CleanQError,
    ErrorCode,
    InvalidBuffer,
    InvalidRegion,
    OwnershipViolation,
    QueueEmpty,
    QueueFull,
    RegionBusy,
    RegionOverlap,
)
from .qmods import DebugModule, NullModule, debug_dump_log, debug_wrap, null_wrap
from .ringq import loopback_create, ring_attach, ring_create_pair

__version__ = "0.1.0"

__all__ = [
    "BackendError", "BufferToken", "CleanQError", "DebugModule", "ErrorCode",
    "InvalidBuffer", "InvalidRegion", "Layer", "Module", "NullModule",
    "OwnershipViolation", "Queue", "QueueEmpty", "QueueFull", "Region",
    "RegionBusy", "RegionOverlap", "RegionTable", "debug_dump_log", "debug_wrap",
    "layers", "loopback_create", "null_wrap", "ring_attach", "ring_create_pair", "stack",
]
