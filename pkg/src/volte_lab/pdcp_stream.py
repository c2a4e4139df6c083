"""Encrypted PDCP record streams: fragmentation, reassembly, header accounting.

The relay sees only direction, arrival time, bearer and length of each PDCP
PDU.  IP packets larger than the MTU are cut into full-MTU fragments plus a
shorter tail, which is enough to glue them back together.
"""
from __future__ import annotations

import enum
import math
from collections import defaultdict
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional


class Direction(str, enum.Enum):
    UPLINK = "UL"
    DOWNLINK = "DL"

    @classmethod
    def parse(cls, value) -> "Direction":
        if isinstance(value, Direction):
            return value
        text = str(value).strip().lower()
        if text in ("ul", "uplink", "up", "↑"):
            return cls.UPLINK
        if text in ("dl", "downlink", "down", "↓"):
            return cls.DOWNLINK
        raise ValueError(f"unknown direction {value!r}")

    @property
    def opposite(self) -> "Direction":
        return Direction.DOWNLINK if self is Direction.UPLINK else Direction.UPLINK


class ReassemblyError(ValueError):
    pass


class PayloadUnderflow(ValueError):
    pass


@dataclass(frozen=True)
class PdcpRecord:
    direction: Direction
    time_ms: float
    seq: int
    lcid: int
    drb: int
    pdu_len: int

    def __post_init__(self) -> None:
        if self.pdu_len < 1:
            raise ValueError("pdu_len must be positive")


@dataclass(frozen=True)
class MtuConfig:
    uplink_mtu: int
    downlink_mtu: int

    def __post_init__(self) -> None:
        if self.uplink_mtu < 576 or self.downlink_mtu < 576:
            raise ValueError("MTU below 576 bytes")

    def for_direction(self, direction: Direction) -> int:
        return self.uplink_mtu if Direction.parse(direction) is Direction.UPLINK else self.downlink_mtu


@dataclass(frozen=True)
class IpPacketMeta:
    direction: Direction
    time_ms: float  # arrival of the last fragment
    total_len: int
    fragment_count: int
    bearer: int
    seqs: tuple = ()
    unterminated: bool = False
    tag: Optional[str] = None  # SYNC / SYNC_ACK / ACK for TCP control packets


class Protocol(str, enum.Enum):
    TCP = "TCP"
    UDP = "UDP"


class IpsecMode(str, enum.Enum):
    NONE = "none"
    PLAIN = "plain"          # ESP with null encryption: header/trailer only
    ENCRYPTED = "encrypted"  # ESP with a block cipher, padding folded into the constant


TCP_HEADER = {"data": 20, "SYNC": 40, "SYNC_ACK": 32, "ACK": 20}
UDP_HEADER = 8
CI_ROLES = ("SYNC", "SYNC_ACK", "ACK")


@dataclass(frozen=True)
class TransportContext:
    protocol: Protocol = Protocol.TCP
    ipsec_mode: IpsecMode = IpsecMode.NONE
    ip_header_bytes: int = 40  # IPv6
    ipsec_overhead_bytes: int = 0
    tcp_header_bytes: dict = field(default_factory=lambda: dict(TCP_HEADER))
    udp_header_bytes: int = UDP_HEADER

    def __post_init__(self) -> None:
        values = [self.ip_header_bytes, self.udp_header_bytes, *self.tcp_header_bytes.values()]
        if any(v <= 0 for v in values) or self.ipsec_overhead_bytes < 0:
            raise ValueError("header overheads must be positive")

    def overhead(self, role: str = "data") -> int:
        if self.protocol is Protocol.TCP:
            transport = self.tcp_header_bytes[role]
        else:
            transport = self.udp_header_bytes
        ipsec = self.ipsec_overhead_bytes if self.ipsec_mode is not IpsecMode.NONE else 0
        return self.ip_header_bytes + ipsec + transport


def split_to_pdcp(ip_len: int, direction: Direction, mtu: MtuConfig, start_seq: int,
                  time_ms: float, *, lcid: int = 4, drb: int = 2,
                  fragment_gap_ms: float = 1.0) -> list[PdcpRecord]:
    """Cut one IP packet into full-MTU PDUs plus a tail of 1..MTU bytes."""
    if ip_len < 1:
        raise ValueError("ip_len must be >= 1")
    direction = Direction.parse(direction)
    size = mtu.for_direction(direction)
    count = math.ceil(ip_len / size)
    records = []
    for i in range(count):
        length = size if i < count - 1 else ip_len - (count - 1) * size
        records.append(PdcpRecord(direction, round(time_ms + i * fragment_gap_ms, 3),
                                  start_seq + i, lcid, drb, length))
    return records


def _close(run: list[PdcpRecord], unterminated: bool) -> IpPacketMeta:
    last = run[-1]
    return IpPacketMeta(
        direction=last.direction,
        time_ms=last.time_ms,
        total_len=sum(r.pdu_len for r in run),
        fragment_count=len(run),
        bearer=last.drb,
        seqs=tuple(r.seq for r in run),
        unterminated=unterminated,
    )


def reassemble(records: Iterable[PdcpRecord], mtu: MtuConfig,
               max_gap_ms: Optional[float] = None) -> list[IpPacketMeta]:
    """Rebuild IP packet metadata from PDCP records.

    Each (direction, bearer) stream is handled separately: a run of full-MTU
    records closes at the first shorter record.  A run still open when the
    stream ends is emitted as one packet flagged ``unterminated``.  With
    ``max_gap_ms`` set, a silence longer than that also closes an open run
    (flagged the same way), which resolves exact-MTU packets followed later
    by unrelated traffic.
    """
    streams: dict = defaultdict(list)
    for rec in records:
        streams[(rec.direction, rec.drb)].append(rec)

    packets: list[IpPacketMeta] = []
    for (direction, _), stream in streams.items():
        size = mtu.for_direction(direction)
        run: list[PdcpRecord] = []
        for rec in stream:
            if rec.pdu_len > size:
                raise ReassemblyError(f"oversized PDU: {rec.pdu_len} > MTU {size}")
            if run and max_gap_ms is not None and rec.time_ms - run[-1].time_ms > max_gap_ms:
                packets.append(_close(run, unterminated=True))
                run = []
            run.append(rec)
            if rec.pdu_len < size:
                packets.append(_close(run, unterminated=False))
                run = []
        if run:
            packets.append(_close(run, unterminated=True))
    packets.sort(key=lambda p: (p.time_ms, p.direction.value))
    return packets


def detect_control_info(packets: Iterable[IpPacketMeta], ctx: TransportContext) -> list[IpPacketMeta]:
    """Tag TCP connection-control packets by their header-only size."""
    if ctx.protocol is not Protocol.TCP:
        return list(packets)
    by_size = {ctx.overhead(role): role for role in CI_ROLES}
    tagged = []
    for pkt in packets:
        role = by_size.get(pkt.total_len)
        tagged.append(replace(pkt, tag=role) if role else pkt)
    return tagged


def sip_payload_size(packet: IpPacketMeta, ctx: TransportContext) -> int:
    payload = packet.total_len - ctx.overhead("data")
    if payload <= 0:
        raise PayloadUnderflow("underflow: not a SIP-bearing packet")
    return payload
