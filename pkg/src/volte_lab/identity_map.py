"""Link network identities to phone numbers.

Passive: the attacker dials a number and looks for the Incoming call that
shows up at the relay moments later.  Active: one corrupted M-TMSI in an
Attach Request makes the core fall back to an Identity Request, answered in
plaintext with the IMSI.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Iterable, Optional, Sequence

from .sip_classify import CallDirection, CallRecord

TAMPERED_M_TMSI = 0x12345678


class NasKind(str, enum.Enum):
    ATTACH_REQUEST = "AttachRequest"
    IDENTITY_REQUEST = "IdentityRequest"
    IDENTITY_RESPONSE = "IdentityResponse"
    AUTH_REQUEST = "AuthRequest"
    AUTH_RESPONSE = "AuthResponse"


class IdentityKind(str, enum.Enum):
    GUTI = "GUTI"
    IMSI = "IMSI"
    SUCI = "SUCI"
    NONE = "none"


class Method(str, enum.Enum):
    PASSIVE = "Passive"
    ACTIVE = "Active"


class Confidence(str, enum.Enum):
    UNIQUE = "Unique"
    AMBIGUOUS = "Ambiguous"


class NotAGutiAttach(ValueError):
    pass


class NoExtractionOpportunity(LookupError):
    pass


@dataclass(frozen=True)
class NasRecord:
    time_ms: float
    kind: NasKind
    identity_kind: IdentityKind = IdentityKind.NONE
    identity_value: str = ""
    m_tmsi: Optional[int] = None
    integrity_valid: bool = True

    def __post_init__(self) -> None:
        if (self.kind is NasKind.ATTACH_REQUEST and self.identity_kind is IdentityKind.GUTI
                and self.m_tmsi is None):
            raise ValueError("GUTI attach without M-TMSI")
        if self.m_tmsi is not None and not 0 <= self.m_tmsi <= 0xFFFFFFFF:
            raise ValueError("M-TMSI must fit in 32 bits")


@dataclass(frozen=True)
class AttackerCall:
    phone_number: str
    dial_time_ms: float
    outcome: str = "dialled"


@dataclass(frozen=True)
class AttackerCallLog:
    entries: tuple

    def __post_init__(self) -> None:
        times = [e.dial_time_ms for e in self.entries]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("dial times must be strictly increasing")

    @classmethod
    def from_list(cls, rows: Iterable) -> "AttackerCallLog":
        entries = []
        for row in rows:
            if isinstance(row, dict):
                entries.append(AttackerCall(str(row["phone_number"]), float(row["dial_time_ms"]),
                                            str(row.get("outcome", "dialled"))))
            else:
                entries.append(AttackerCall(*row))
        return cls(tuple(entries))

    def to_list(self) -> list:
        return [{"phone_number": e.phone_number, "dial_time_ms": e.dial_time_ms,
                 "outcome": e.outcome} for e in self.entries]


@dataclass(frozen=True)
class IdentityBinding:
    identity_value: str
    phone_number: str
    established_at_ms: float
    method: Method
    confidence: Confidence
    stale: bool = False

    def to_dict(self) -> dict:
        return {"identity": self.identity_value, "phone_number": self.phone_number,
                "established_at_ms": self.established_at_ms, "method": self.method.value,
                "confidence": self.confidence.value, "stale": self.stale}


def passive_map(attacker_log: AttackerCallLog, calls: Sequence[CallRecord],
                window_ms: float = 5000.0, method: Method = Method.PASSIVE) -> list[IdentityBinding]:
    """Bind each dialled number to the Incoming call(s) seen within the window."""
    if window_ms <= 0:
        raise ValueError("window_ms must be positive")
    incoming = [c for c in calls if c.call_direction is CallDirection.INCOMING]
    bindings = []
    for dial in attacker_log.entries:
        hits = [c for c in incoming
                if dial.dial_time_ms < c.timestamp_ms <= dial.dial_time_ms + window_ms]
        confidence = Confidence.UNIQUE if len(hits) == 1 else Confidence.AMBIGUOUS
        for c in hits:
            bindings.append(IdentityBinding(c.identity, dial.phone_number, c.timestamp_ms,
                                            method, confidence))
    return bindings


def tamper_attach(request: NasRecord) -> NasRecord:
    if request.kind is not NasKind.ATTACH_REQUEST or request.identity_kind is not IdentityKind.GUTI:
        raise NotAGutiAttach("not a GUTI attach")
    return replace(request, m_tmsi=TAMPERED_M_TMSI, integrity_valid=False)


def extract_imsi(stream: Sequence[NasRecord]) -> tuple[str, dict]:
    """IMSI from the Identity Response provoked by an integrity-failed attach.

    Returns the IMSI and the indices of the attach / request / response
    triple that produced it.
    """
    attach = request = None
    for i, rec in enumerate(stream):
        if rec.kind is NasKind.ATTACH_REQUEST:
            attach = i if not rec.integrity_valid else None
            request = None
        elif rec.kind is NasKind.IDENTITY_REQUEST and attach is not None:
            request = i
        elif rec.kind is NasKind.IDENTITY_RESPONSE:
            if attach is None or request is None:
                raise NoExtractionOpportunity(
                    "no extraction opportunity: Identity Response without a provoked request")
            if rec.identity_kind is IdentityKind.IMSI:
                return rec.identity_value, {
                    "attach_index": attach, "request_index": request, "response_index": i,
                    "attach_time_ms": stream[attach].time_ms, "response_time_ms": rec.time_ms,
                }
    raise NoExtractionOpportunity("no extraction opportunity")


def binding_validity(bindings: Iterable[IdentityBinding], reallocations) -> list[IdentityBinding]:
    """Mark bindings stale when their identity was reallocated afterwards."""
    realloc = list(reallocations)
    out = []
    for b in bindings:
        stale = b.stale or any(ident == b.identity_value and t > b.established_at_ms
                               for ident, t in realloc)
        out.append(replace(b, stale=stale))
    return out
