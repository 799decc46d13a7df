"""Elicitation backend: sessions, validation, persistence, export."""

from .app import build_service, create_app
from .core import (
    AnnotationStore,
    BatchPlan,
    MalformedPayloadError,
    NoBatchesError,
    ServiceError,
    Session,
    SessionManager,
    SessionNotActiveError,
    SessionState,
    Slot,
    UnknownSessionError,
    load_batch_plans,
    plan_batches,
    save_batch_plans,
)

__all__ = [
    "AnnotationStore",
    "BatchPlan",
    "MalformedPayloadError",
    "NoBatchesError",
    "ServiceError",
    "Session",
    "SessionManager",
    "SessionNotActiveError",
    "SessionState",
    "Slot",
    "UnknownSessionError",
    "build_service",
    "create_app",
    "load_batch_plans",
    "plan_batches",
    "save_batch_plans",
]
