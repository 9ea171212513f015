"""Key distribution sessions (BB84, B92, EPR) and their post-processing."""

from .config import ProtocolConfig
from .messages import NegotiationError, ProtocolViolation
from .postprocess import (
    KeyMaterial,
    SiftedKey,
    Verdict,
    binary_entropy,
    check_abort,
    estimate_qber,
    final_length,
    privacy_amplify,
    reconcile,
    sift,
    verify_equal,
)
from .session import Session, SessionStats, replay, run_b92, run_bb84, run_epr, run_session

__all__ = [
    "KeyMaterial", "NegotiationError", "ProtocolConfig", "ProtocolViolation", "Session",
    "SessionStats", "SiftedKey", "Verdict", "binary_entropy", "check_abort", "estimate_qber",
    "final_length", "privacy_amplify", "reconcile", "replay", "run_b92", "run_bb84", "run_epr",
    "run_session", "sift", "verify_equal",
]
