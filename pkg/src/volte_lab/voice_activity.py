"""Speaking/silence timelines from DRB3 packet sizes and cadence.

AMR produces a fixed-size speech frame every 20 ms while the speaker talks
and a small comfort-noise (SID) frame every 160 ms while they are silent.
Each packet therefore vouches for the state of the span just before it.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .pdcp_stream import Direction


class FrameClass(str, enum.Enum):
    AUDIO = "Audio"
    COMFORT_NOISE = "ComfortNoise"
    ROHC_INIT = "RohcInit"


class VoiceState(str, enum.Enum):
    SPEAKING = "Speaking"
    SILENT = "Silent"


@dataclass(frozen=True)
class RtpRecord:
    direction: Direction
    time_ms: float
    payload_len: int

    def __post_init__(self) -> None:
        if self.payload_len < 1:
            raise ValueError("payload_len must be >= 1")


@dataclass(frozen=True)
class Interval:
    start_ms: float  # exclusive
    end_ms: float    # inclusive
    state: VoiceState

    def to_dict(self) -> dict:
        return {"start_ms": self.start_ms, "end_ms": self.end_ms, "state": self.state.value}


@dataclass(frozen=True)
class ActivityTimeline:
    intervals: dict  # Direction -> tuple[Interval, ...]
    window_ms: int = 20

    def to_dict(self) -> dict:
        return {"window_ms": self.window_ms,
                **{d.value: [i.to_dict() for i in iv] for d, iv in self.intervals.items()}}


AUDIO_CADENCE_MS = 20
CN_CADENCE_MS = 160


def filter_rtcp(packets: Iterable, rtcp_sizes) -> tuple[list, int]:
    """Drop packets whose size is one of the carrier's fixed RTCP sizes.

    Works on anything with ``payload_len``, ``pdu_len`` or ``total_len``.
    Returns the kept packets and how many were removed.
    """
    rtcp_sizes = set(rtcp_sizes)
    if not rtcp_sizes:
        raise ValueError("rtcp_sizes must not be empty")
    kept = []
    removed = 0
    for pkt in packets:
        size = _size(pkt)
        if size in rtcp_sizes:
            removed += 1
        else:
            kept.append(pkt)
    return kept, removed


def _size(pkt) -> int:
    if isinstance(pkt, int):
        return pkt
    for name in ("payload_len", "pdu_len", "total_len"):
        if hasattr(pkt, name):
            return getattr(pkt, name)
    raise TypeError(f"cannot size {pkt!r}")


def classify_frame(payload_len: int, cn_threshold: int = 10, max_audio: int = 70) -> FrameClass:
    if cn_threshold <= 0:
        raise ValueError("cn_threshold must be positive")
    if payload_len <= cn_threshold:
        return FrameClass.COMFORT_NOISE
    if payload_len > max_audio:
        return FrameClass.ROHC_INIT
    return FrameClass.AUDIO


def activity_timeline(stream: Sequence[RtpRecord], audio_ms: float = AUDIO_CADENCE_MS,
                      cn_ms: float = CN_CADENCE_MS, *, cn_threshold: int = 10,
                      max_audio: int = 70, start_ms: Optional[float] = None,
                      end_ms: Optional[float] = None) -> list[Interval]:
    """Timeline for one direction.

    A comfort-noise frame at t marks (t - cn_ms, t] silent; any other frame
    marks (t - audio_ms, t] speaking and wins over silence.  Spans no packet
    vouches for keep the preceding state.  The result is clipped to
    ``start_ms`` (default: first mark, not before 0) and extended to
    ``end_ms`` with the last state.
    """
    if not stream:
        return []
    marks = []
    for rec in stream:
        cls = classify_frame(rec.payload_len, cn_threshold, max_audio)
        speaking = cls is not FrameClass.COMFORT_NOISE
        width = audio_ms if speaking else cn_ms
        marks.append((rec.time_ms - width, rec.time_ms, speaking))

    lo = min(m[0] for m in marks)
    lo = max(lo, 0.0) if start_ms is None else start_ms
    hi = max(m[1] for m in marks)

    # sweep over elementary segments between mark endpoints
    events = []
    for a, b, speaking in marks:
        events.append((a, 1, speaking))
        events.append((b, -1, speaking))
    events.sort(key=lambda e: e[0])
    points = sorted({lo, hi, *(e[0] for e in events if lo < e[0] < hi)})

    segments = []
    speak = silent = 0
    k = 0
    state = None
    for left, right in zip(points, points[1:]):
        while k < len(events) and events[k][0] <= left:
            _, delta, speaking = events[k]
            if speaking:
                speak += delta
            else:
                silent += delta
            k += 1
        if speak > 0:
            state = VoiceState.SPEAKING
        elif silent > 0:
            state = VoiceState.SILENT
        elif state is None:
            continue
        segments.append([left, right, state])

    if end_ms is not None and segments and end_ms > segments[-1][1]:
        segments[-1][1] = end_ms
    merged: list[list] = []
    for seg in segments:
        if merged and merged[-1][2] is seg[2] and merged[-1][1] == seg[0]:
            merged[-1][1] = seg[1]
        else:
            merged.append(seg)
    return [Interval(round(a, 3), round(b, 3), s) for a, b, s in merged]


def build_activity(records: Iterable[RtpRecord], **kwargs) -> ActivityTimeline:
    by_dir: dict = {Direction.UPLINK: [], Direction.DOWNLINK: []}
    for rec in records:
        by_dir[rec.direction].append(rec)
    intervals = {d: tuple(activity_timeline(sorted(rs, key=lambda r: r.time_ms), **kwargs))
                 for d, rs in by_dir.items() if rs}
    return ActivityTimeline(intervals)


def state_at(intervals: Sequence[Interval], t: float) -> Optional[VoiceState]:
    for iv in intervals:
        if iv.start_ms < t <= iv.end_ms:
            return iv.state
    return None


def window_agreement(recovered: Sequence[Interval], truth: Sequence[Interval],
                     window_ms: float = 20) -> float:
    """Fraction of truth windows whose midpoint state the timeline reproduces."""
    if not truth:
        return 1.0
    start, end = truth[0].start_ms, truth[-1].end_ms
    n = int(round((end - start) / window_ms))
    if n <= 0:
        return 1.0
    hits = 0
    for i in range(n):
        mid = start + (i + 0.5) * window_ms
        if state_at(recovered, mid) is state_at(truth, mid):
            hits += 1
    return hits / n


def transition_errors(recovered: Sequence[Interval], truth: Sequence[Interval]) -> list[float]:
    """For each truth state change, distance to the nearest matching recovered change."""
    def changes(ivs):
        return [(b.start_ms, a.state, b.state) for a, b in zip(ivs, ivs[1:]) if a.state is not b.state]

    found = changes(recovered)
    errors = []
    for t, before, after in changes(truth):
        same = [abs(t - u) for u, b, a in found if b is before and a is after]
        errors.append(min(same) if same else float("inf"))
    return errors
