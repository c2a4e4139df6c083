"""Map encrypted SIP message sizes to VoLTE operations and rebuild call logs."""
from __future__ import annotations

import enum
import json
import logging
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

from .pdcp_stream import Direction

log = logging.getLogger(__name__)

INVITE = "Invite"
TRYING = "100 Trying (Invite)"
SESSION_PROGRESS = "183 Session Process"
PRACK = "Pack"
OK_PRACK = "200 OK (Pack)"
UPDATE = "Update"
OK_UPDATE = "200 OK (Update)"
RING = "180 Ring (Invite)"
BUSY = "486 Busy Here"
REJECTED = "486 Call Rejected By User (Invite)"
CANCEL = "Cancel"
OK_INVITE = "200 OK (Invite)"
ACK_OK = "ACK (200 OK (Invite))"
TERMINATED = "487 Request Terminated"
ACK_487 = "ACK (487)"
BYE = "Bye"
OK_BYE = "200 OK (Bye)"
OPTIONS = "Options"
OK_OPTIONS = "200 OK (Options)"

OUT_OF_DIALOG = frozenset({OPTIONS, OK_OPTIONS})
DECLINES = (BUSY, REJECTED)

UNKNOWN = "Unknown"
UNRESOLVABLE = "Unresolvable"


class FingerprintError(ValueError):
    pass


# -- fingerprint database -----------------------------------------------------

@dataclass(frozen=True)
class SizeRange:
    center: int
    tolerance: int

    def __contains__(self, size: int) -> bool:
        return abs(size - self.center) <= self.tolerance


@dataclass(frozen=True)
class FingerprintEntry:
    operation: str
    direction: Direction
    ranges: tuple

    def matches(self, size: int) -> bool:
        return any(size in r for r in self.ranges)

    def distance(self, size: int) -> int:
        return min(abs(size - r.center) for r in self.ranges)


@dataclass(frozen=True)
class FingerprintDb:
    carrier: str
    device: str
    entries: tuple

    def entry(self, operation: str, direction: Direction) -> Optional[FingerprintEntry]:
        for e in self.entries:
            if e.operation == operation and e.direction is direction:
                return e
        return None

    def has(self, operation: str, direction: Direction) -> bool:
        return self.entry(operation, direction) is not None

    def to_dict(self) -> dict:
        return {
            "carrier": self.carrier,
            "device": self.device,
            "entries": [
                {"operation": e.operation,
                 "direction": "uplink" if e.direction is Direction.UPLINK else "downlink",
                 "ranges": [{"center": r.center, "tolerance": r.tolerance} for r in e.ranges]}
                for e in self.entries
            ],
        }


def _parse_db(data: dict) -> FingerprintDb:
    try:
        carrier = str(data["carrier"])
        device = str(data["device"])
        raw_entries = data["entries"]
    except (KeyError, TypeError) as exc:
        raise FingerprintError(f"malformed fingerprint db: {exc}") from exc

    entries = []
    seen = set()
    for i, raw in enumerate(raw_entries):
        try:
            op = str(raw["operation"])
            direction = Direction.parse(raw["direction"])
            ranges = tuple(SizeRange(int(r["center"]), int(r["tolerance"])) for r in raw["ranges"])
        except (KeyError, TypeError, ValueError) as exc:
            raise FingerprintError(f"malformed entry #{i}: {exc}") from exc
        if not ranges:
            raise FingerprintError(f"entry #{i} ({op}) has no ranges")
        if any(r.tolerance < 0 for r in ranges):
            raise FingerprintError(f"entry #{i} ({op}) has a negative tolerance")
        if (op, direction) in seen:
            raise FingerprintError(f"duplicate entry for {op} {direction.value}")
        seen.add((op, direction))
        entries.append(FingerprintEntry(op, direction, ranges))

    for d in Direction:
        if not any(e.direction is d for e in entries):
            raise FingerprintError(f"no entries for direction {d.value}")

    for a_i, a in enumerate(entries):
        for b in entries[a_i + 1:]:
            if a.direction is b.direction and any(
                    abs(ra.center - rb.center) <= ra.tolerance + rb.tolerance
                    for ra in a.ranges for rb in b.ranges):
                log.info("%s/%s: %s and %s overlap in %s", carrier, device,
                         a.operation, b.operation, a.direction.value)
    return FingerprintDb(carrier, device, tuple(entries))


def load_db(source: Union[str, Path, dict]) -> FingerprintDb:
    """Load a fingerprint database from a JSON file path, JSON text or a dict."""
    if isinstance(source, dict):
        return _parse_db(source)
    text = str(source)
    if text.lstrip().startswith("{"):
        data = json.loads(text)
    else:
        with open(source, encoding="utf-8") as fh:
            data = json.load(fh)
    return _parse_db(data)


BUNDLED_DBS = {
    ("carrier1", "s7"): "carrier1_s7.json",
    ("carrier1", "s8"): "carrier1_s8.json",
    ("carrier1", "iphone11"): "carrier1_iphone11.json",
    ("carrier2", "iphone11"): "carrier2_iphone11.json",
}


def bundled_db(carrier: str, device: str) -> FingerprintDb:
    name = BUNDLED_DBS.get((carrier.lower(), device.lower()))
    if name is None:
        raise KeyError(f"no fingerprint database for {carrier}/{device}")
    text = resources.files("volte_lab").joinpath("fingerprints", name).read_text(encoding="utf-8")
    return load_db(text)


def classify_size(size: int, direction: Direction, db: FingerprintDb) -> frozenset:
    direction = Direction.parse(direction)
    return frozenset(e.operation for e in db.entries
                     if e.direction is direction and e.matches(size))


def unique_candidate(candidates: Iterable[str]) -> Optional[str]:
    """The context-free label: only a single matching operation counts."""
    candidates = list(candidates)
    return candidates[0] if len(candidates) == 1 else None


def nearest_candidate(size: int, direction: Direction, db: FingerprintDb) -> Optional[str]:
    """Closest range centre among the matches; ties go to database order."""
    direction = Direction.parse(direction)
    best = None
    for e in db.entries:
        if e.direction is direction and e.matches(size):
            d = e.distance(size)
            if best is None or d < best[0]:
                best = (d, e.operation)
    return best[1] if best else None


# -- call-flow automaton ------------------------------------------------------

class Scenario(enum.IntEnum):
    CALLER_CANCEL_RINGING = 1
    CALLER_BYE = 2
    CALLEE_DECLINE = 3
    CALLEE_BYE = 4


@dataclass(frozen=True)
class Step:
    ops: tuple           # alternatives, first listed preferred by generators
    sender: str          # "caller" or "callee"
    required: bool = False


CONVERSATION = Step((), "both")  # marks where DRB3 audio flows; consumes no message

_PREFIX = (
    Step((INVITE,), "caller", True),
    Step((TRYING,), "callee"),
    Step((SESSION_PROGRESS,), "callee"),
    Step((PRACK,), "caller"),
    Step((OK_PRACK,), "callee"),
    Step((UPDATE,), "caller"),
    Step((OK_UPDATE,), "callee"),
    Step((RING,), "callee", True),
)

SCENARIO_SCRIPTS = {
    Scenario.CALLER_CANCEL_RINGING: _PREFIX + (
        Step((CANCEL,), "caller", True),
        Step((TERMINATED,), "callee"),
        Step((ACK_487,), "caller"),
    ),
    Scenario.CALLER_BYE: _PREFIX + (
        Step((OK_INVITE,), "callee", True),
        Step((ACK_OK,), "caller"),
        CONVERSATION,
        Step((BYE,), "caller", True),
        Step((OK_BYE,), "callee"),
    ),
    Scenario.CALLEE_DECLINE: _PREFIX + (
        Step(DECLINES, "callee", True),
    ),
    Scenario.CALLEE_BYE: _PREFIX + (
        Step((OK_INVITE,), "callee", True),
        Step((ACK_OK,), "caller"),
        CONVERSATION,
        Step((BYE,), "callee", True),
        Step((OK_BYE,), "caller"),
    ),
}


class CallAutomaton:
    """Union of the per-scenario call flows as one nondeterministic automaton.

    A state is ``(scenario, position)``; optional steps may be skipped.  An
    Invite always (re)starts a call, and out-of-dialog keep-alives are
    accepted anywhere without moving the state.
    """

    IDLE = frozenset()

    def __init__(self, scripts=None):
        scripts = scripts or SCENARIO_SCRIPTS
        self.scripts = {s: tuple(st for st in steps if st.ops) for s, steps in scripts.items()}

    def start(self) -> frozenset:
        return frozenset((s, 1) for s in self.scripts)

    def advance(self, states: frozenset, op: str) -> frozenset:
        if op in OUT_OF_DIALOG:
            return states
        if op == INVITE:
            return self.start()
        nxt = set()
        for scenario, pos in states:
            steps = self.scripts[scenario]
            j = pos
            while j < len(steps):
                if op in steps[j].ops:
                    nxt.add((scenario, j + 1))
                if steps[j].required:
                    break
                j += 1
        return frozenset(nxt)

    def accepts(self, states: frozenset) -> bool:
        """True if some live path has no required step left."""
        for scenario, pos in states:
            if all(not st.required for st in self.scripts[scenario][pos:]):
                return True
        return False


@dataclass(frozen=True)
class SipEvent:
    time_ms: float
    direction: Direction
    payload_size: int
    candidates: frozenset = frozenset()
    resolved: Optional[str] = None
    call_index: Optional[int] = None
    seqs: tuple = ()

    def __post_init__(self) -> None:
        if self.resolved not in (None, UNKNOWN, UNRESOLVABLE) and self.resolved not in self.candidates:
            raise ValueError(f"resolved {self.resolved!r} not among candidates")


def revise_log(events: Sequence[SipEvent], rules: Optional[CallAutomaton] = None) -> list[SipEvent]:
    """Resolve ambiguous sizes with call-flow context.

    Each event keeps the one candidate that leaves a live automaton path.
    Empty candidate sets become Unknown; zero or several surviving
    operations leave the event Unresolvable and the state untouched.
    """
    rules = rules or CallAutomaton()
    states = CallAutomaton.IDLE
    call = -1
    out = []
    for ev in events:
        if not ev.candidates:
            out.append(replace(ev, resolved=UNKNOWN, call_index=call if call >= 0 else None))
            continue
        survivors = {}
        for op in sorted(ev.candidates):
            nxt = rules.advance(states, op)
            if nxt:
                survivors[op] = nxt
        if len(survivors) == 1:
            (op, states), = survivors.items()
            if op == INVITE:
                call += 1
            out.append(replace(ev, resolved=op, call_index=call))
        else:
            out.append(replace(ev, resolved=UNRESOLVABLE, call_index=call if call >= 0 else None))
    return out


# -- call records -------------------------------------------------------------

class CallDirection(str, enum.Enum):
    INCOMING = "Incoming"
    OUTGOING = "Outgoing"


class EstablishStatus(str, enum.Enum):
    ACCEPTED = "Accepted"
    DECLINED = "Declined"
    MISSED = "Missed"


class TerminationCause(str, enum.Enum):
    CALLER_CANCEL_RINGING = "CallerCancelRinging"
    CALLER_BYE = "CallerBye"
    CALLEE_BUSY = "CalleeBusy"
    CALLEE_BYE = "CalleeBye"


SCENARIO_CAUSE = {
    Scenario.CALLER_CANCEL_RINGING: TerminationCause.CALLER_CANCEL_RINGING,
    Scenario.CALLER_BYE: TerminationCause.CALLER_BYE,
    Scenario.CALLEE_DECLINE: TerminationCause.CALLEE_BUSY,
    Scenario.CALLEE_BYE: TerminationCause.CALLEE_BYE,
}


@dataclass(frozen=True)
class CallRecord:
    identity: str
    timestamp_ms: float
    call_direction: CallDirection
    establish_status: Optional[EstablishStatus]
    termination_cause: Optional[TerminationCause]
    duration_s: float = 0.0
    incomplete: bool = False
    drb3_lifetime_s: Optional[float] = None
    drb3_consistent: Optional[bool] = None
    conversation_ms: Optional[tuple] = None  # (start, end) when Accepted

    def to_dict(self) -> dict:
        return {
            "identity": self.identity,
            "timestamp_ms": self.timestamp_ms,
            "call_direction": self.call_direction.value,
            "establish_status": self.establish_status.value if self.establish_status else None,
            "termination_cause": self.termination_cause.value if self.termination_cause else None,
            "duration_s": self.duration_s,
            "incomplete": self.incomplete,
            "drb3_lifetime_s": self.drb3_lifetime_s,
            "drb3_consistent": self.drb3_consistent,
        }


def _split_calls(events: Sequence[SipEvent]) -> list[list[SipEvent]]:
    calls: list[list[SipEvent]] = []
    for ev in events:
        if ev.resolved == INVITE:
            calls.append([ev])
        elif calls:
            calls[-1].append(ev)
    return calls


def _call_record(call: list[SipEvent], identity: str, lifetimes, tolerance_s: float) -> CallRecord:
    invite = call[0]
    outgoing = invite.direction is Direction.UPLINK
    status = cause = None
    answered = ack = bye = None
    for ev in call[1:]:
        op = ev.resolved
        if op == OK_INVITE and status is None:
            status, answered = EstablishStatus.ACCEPTED, ev
        elif op == ACK_OK and answered is not None and ack is None:
            ack = ev
        elif op in DECLINES and status is None:
            status, cause = EstablishStatus.DECLINED, TerminationCause.CALLEE_BUSY
        elif op == CANCEL and status is None:
            status, cause = EstablishStatus.MISSED, TerminationCause.CALLER_CANCEL_RINGING
        elif op == BYE and status is EstablishStatus.ACCEPTED and bye is None:
            bye = ev
            same_side = ev.direction is invite.direction
            cause = TerminationCause.CALLER_BYE if same_side else TerminationCause.CALLEE_BYE

    duration = 0.0
    conversation = None
    incomplete = cause is None
    if status is EstablishStatus.ACCEPTED and bye is not None:
        start = (ack or answered).time_ms
        duration = round((bye.time_ms - start) / 1000.0, 3)
        conversation = (start, bye.time_ms)

    lifetime_s = consistent = None
    if lifetimes:
        end_bound = call[-1].time_ms
        for lo, hi in lifetimes:
            if hi >= invite.time_ms and lo <= end_bound:
                lifetime_s = round((hi - lo) / 1000.0, 3)
                break
        if status is EstablishStatus.ACCEPTED and bye is not None:
            consistent = lifetime_s is not None and abs(lifetime_s - duration) <= tolerance_s
        else:
            consistent = lifetime_s is None

    return CallRecord(
        identity=identity,
        timestamp_ms=invite.time_ms,
        call_direction=CallDirection.OUTGOING if outgoing else CallDirection.INCOMING,
        establish_status=status,
        termination_cause=cause,
        duration_s=duration,
        incomplete=incomplete,
        drb3_lifetime_s=lifetime_s,
        drb3_consistent=consistent,
        conversation_ms=conversation,
    )


def extract_call_records(events: Sequence[SipEvent], drb3_lifetime=None, identity: str = "",
                         tolerance_s: float = 1.0) -> list[CallRecord]:
    """One record per resolved Invite.

    ``drb3_lifetime`` is either one ``(start_ms, end_ms)`` pair or a list of
    them; a lifetime overlapping a call is used to cross-check its duration.
    """
    if drb3_lifetime and not isinstance(drb3_lifetime[0], (tuple, list)):
        drb3_lifetime = [drb3_lifetime]
    return [_call_record(c, identity, drb3_lifetime or [], tolerance_s)
            for c in _split_calls(events)]
