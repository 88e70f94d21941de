"""Executable ownership model: set, list and ring levels plus checkers."""

from .buffers import BufferId, ModelError
from .checks import Violation, check_interference, check_invariants, check_refinement, replay
from .state import (
    ListState,
    ModelState,
    RingModelState,
    model_dequeue,
    model_deregister,
    model_enqueue,
    model_register,
    strict_enqueue_post,
    weak_enqueue_post,
)
from .trace import OpTrace, TraceEntry, dump_trace, entry, load_trace, read_trace, save_trace

__all__ = [
    "BufferId", "ModelError", "ModelState", "ListState", "RingModelState",
    "model_register", "model_deregister", "model_enqueue", "model_dequeue",
    "weak_enqueue_post", "strict_enqueue_post",
    "check_invariants", "check_refinement", "check_interference", "replay", "Violation",
    "OpTrace", "TraceEntry", "entry", "dump_trace", "load_trace", "save_trace", "read_trace",
]
