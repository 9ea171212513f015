"""Protocol messages as plain dicts, one JSON object each on the wire.

Tags: hello, pulse, bases, sift, sample, sample_v, qber, parity, fp, pa, done.
A parity message without "v" is Bob's query; Alice answers with "v".
"""

from __future__ import annotations

from ..channel import Pulse
from ..qsim import PureState

TAGS = ("hello", "pulse", "bases", "sift", "sample", "sample_v", "qber", "parity", "fp", "pa", "done")


class ProtocolViolation(Exception):
    """Malformed or out-of-order message."""


class NegotiationError(Exception):
    """The two parties were configured for different sessions."""


def pulse_msg(pulse: Pulse) -> dict:
    return {
        "t": "pulse",
        "id": pulse.id,
        "ph": [[[p.h.real, p.h.imag], [p.v.real, p.v.imag]] for p in pulse.photons],
    }


def msg_pulse(msg: dict) -> Pulse:
    try:
        photons = [PureState(complex(h[0], h[1]), complex(v[0], v[1])) for h, v in msg["ph"]]
        return Pulse(int(msg["id"]), photons)
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise ProtocolViolation(f"bad pulse message: {exc}") from exc


def field(msg: dict, name: str, kind=None):
    try:
        v = msg[name]
    except KeyError:
        raise ProtocolViolation(f"{msg.get('t')!r} message lacks field {name!r}") from None
    if kind is not None and not isinstance(v, kind):
        raise ProtocolViolation(f"field {name!r} of {msg.get('t')!r} has wrong type")
    if kind is list and not all(isinstance(x, int) and not isinstance(x, bool) for x in v):
        raise ProtocolViolation(f"field {name!r} of {msg.get('t')!r} must hold integers")
    return v


def validate(msg) -> dict:
    if not isinstance(msg, dict) or msg.get("t") not in TAGS:
        raise ProtocolViolation(f"unknown message {str(msg)[:80]!r}")
    return msg
