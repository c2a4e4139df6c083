"""Seeded synthesis of the metadata a mobile relay would see.

Every generator returns records together with the ground truth that produced
them, so each analysis stage can be checked against an exact oracle.  All
randomness comes from one ``random.Random`` seeded by the caller.
"""
from __future__ import annotations

import enum
import math
import random
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

from .identity_map import (AttackerCallLog, IdentityKind, NasKind, NasRecord,
                           tamper_attach)
from .pdcp_stream import Direction, split_to_pdcp
from .phy_sched import (CqiConfig, ObsKind, PucchObservation, SrConfig, Tti,
                        TTI_WRAP, cqi_pmi_expand, ri_config_expand, sr_config_lookup)
from .profiles import RTP_DRB, SIP_DRB, CarrierProfile, get_profile
from .sip_classify import (BYE, CONVERSATION, RING, SCENARIO_CAUSE,
                           SCENARIO_SCRIPTS, CallDirection, EstablishStatus,
                           FingerprintDb, Scenario, bundled_db)

AUDIO_PAYLOAD = 64      # AMR-WB 23.85k frame (60) + AMR header (1) + ROHC (3)
CN_PAYLOAD = 10         # SID frame (6) + AMR header (1) + ROHC (3)
ROHC_INIT_PAYLOAD = 121  # audio frame behind uncompressed IPv6/UDP/RTP headers
ROHC_INIT_FRAMES = 3
RTCP_INTERVAL_MS = 5000
RTCP_SIZE = {Direction.UPLINK: 128, Direction.DOWNLINK: 140}
FRAGMENT_GAP_MS = 1.0
VICTIM_TA_US = 0.5
VICTIM_SNR_DB = (20.0, 30.0)
OTHER_TA_US = 20.0
OTHER_SNR_DB = (-10.0, 0.0)
PUCCH_RESOURCES = 100


class ScenarioMismatch(ValueError):
    pass


class Side(str, enum.Enum):
    VICTIM = "Victim"
    REMOTE = "Remote"


@dataclass(frozen=True)
class Subscriber:
    imsi: str
    phone_number: str
    m_tmsi: int
    plmn: str = "00101"
    mme_group: int = 0x8001
    mme_code: int = 0x01

    @property
    def guti(self) -> str:
        return f"{self.plmn}-{self.mme_group:04X}-{self.mme_code:02X}-{self.m_tmsi:08X}"

    @property
    def suci(self) -> str:
        # scheme 0 (null) keeps the MSIN visible; only an opaque label here
        return f"suci-0-{self.plmn}-0-0-{self.imsi[len(self.plmn):]}"

    def network_identity(self, kind: str = "GUTI") -> str:
        return self.suci if kind == "SUCI" else self.guti

    @classmethod
    def from_seed(cls, seed: int) -> "Subscriber":
        rng = random.Random(f"subscriber:{seed}")
        return cls(
            imsi="00101" + "".join(str(rng.randrange(10)) for _ in range(10)),
            phone_number="+1555" + "".join(str(rng.randrange(10)) for _ in range(7)),
            m_tmsi=rng.randrange(1, 0xFFFFFFFF),
        )


DEFAULT_SUBSCRIBER = Subscriber("001010123456789", "+15550100", 0xC0FFEE12)


@dataclass(frozen=True)
class ScenarioSpec:
    scenario: Scenario
    carrier: str = "carrier1"
    device: str = "s7"
    victim: Subscriber = DEFAULT_SUBSCRIBER
    caller_side: Side = Side.VICTIM
    vad_pattern: Optional[dict] = None  # Direction -> [(start_ms, end_ms, speaking)], call-relative
    conversation_length_ms: int = 30000
    seed: int = 0
    invite_at_ms: Optional[float] = None
    speaking_fraction: tuple = (0.5, 0.5)  # (uplink, downlink) when vad_pattern is None
    handshake_gap_ms: tuple = (50.0, 300.0)
    ringing_ms: tuple = (1500.0, 6000.0)
    interference_per_s: float = 10.0
    include_attach: bool = True
    tamper_attach: bool = False
    tcp_handshake: bool = True
    sr_lcid: int = 5

    def __post_init__(self) -> None:
        if self.conversation_length_ms <= 0:
            raise ValueError("conversation_length_ms must be positive")
        for intervals in (self.vad_pattern or {}).values():
            for start, end, _ in intervals:
                if not 0 <= start < end <= self.conversation_length_ms:
                    raise ValueError("VAD interval outside the conversation span")


@dataclass
class GroundTruth:
    scenario: Optional[int] = None
    carrier: str = ""
    device: str = ""
    sip_messages: list = field(default_factory=list)
    packets: list = field(default_factory=list)  # lineage: packet -> fragment seqs
    sr_config: Optional[SrConfig] = None
    cqi_config: Optional[CqiConfig] = None
    sr_events: dict = field(default_factory=dict)
    identities: list = field(default_factory=list)
    vad: dict = field(default_factory=dict)  # Direction -> [(start, end, speaking)] absolute
    conversation_ms: Optional[tuple] = None
    call: Optional[dict] = None
    nas: Optional[dict] = None

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "carrier": self.carrier,
            "device": self.device,
            "sip_messages": self.sip_messages,
            "packets": self.packets,
            "sr_config": asdict(self.sr_config) if self.sr_config else None,
            "cqi_config": asdict(self.cqi_config) if self.cqi_config else None,
            "sr_events": self.sr_events,
            "identities": self.identities,
            "vad": {d.value: [list(iv) for iv in ivs] for d, ivs in self.vad.items()},
            "conversation_ms": list(self.conversation_ms) if self.conversation_ms else None,
            "call": self.call,
            "nas": self.nas,
        }


@dataclass
class Trace:
    records: list          # PucchObservation | NasRecord | PdcpRecord
    truth: list            # one dict per record, same order
    ground: GroundTruth

    def __post_init__(self) -> None:
        if len(self.records) != len(self.truth):
            raise ValueError("every record needs a ground-truth row")

    def of_type(self, cls) -> list:
        return [r for r in self.records if isinstance(r, cls)]


# -- PHY ------------------------------------------------------------------------

def _weighted(rng: random.Random, dist: Sequence) -> int:
    values = [v for v, _ in dist]
    weights = [w for _, w in dist]
    return rng.choices(values, weights=weights)[0]


def sample_phy_config(profile: CarrierProfile, rng: random.Random,
                      lcid: int = 5) -> tuple[SrConfig, Optional[CqiConfig]]:
    """Draw one connection's configuration: fixed fields constant, the rest sampled."""
    period = profile.sr_periodicity_by_lcid[lcid]
    offset = rng.randrange(period)
    index = sr_config_lookup(period, offset) if profile.rat == "lte" else None
    sr = SrConfig(period, offset, index, _weighted(rng, profile.sr_pucch_dist),
                  profile.dsr_trans_max)
    if not profile.cqi_pmi_ranges:
        return sr, None
    first, last = rng.choice(profile.cqi_pmi_ranges)
    pmi = rng.randint(first, last)
    ri = _weighted(rng, profile.ri_dist) if profile.mimo else None
    return sr, CqiConfig(_weighted(rng, profile.cqi_pucch_dist), pmi, ri)


def _train(start: int, period: int, count: int) -> list[int]:
    """Absolute (unwrapped) times of a periodic train's first ``count`` instances."""
    return [start + k * period for k in range(count)]


def gen_phy_stream(sr: SrConfig, cqi: Optional[CqiConfig], rng: random.Random, *,
                   interference_per_s: float = 10.0, loss: float = 0.0,
                   n_sr: int = 4, n_cqi: int = 4, n_ri: int = 3) -> tuple[list, list, dict]:
    """Victim SR/CQI/RI trains plus interference from other UEs.

    Returns observations in arrival order, a truth row for each and a summary
    of the relay's drop/re-send interaction.  ``loss`` removes each
    observation independently after generation, modelling decode misses.
    """
    base = rng.randrange(TTI_WRAP)  # absolute ms at which monitoring starts
    events = []  # (abs_ms, kind, pucch, origin)
    sr_first = base + (sr.subframe_offset - base) % sr.periodicity_ms
    for t in _train(sr_first, sr.periodicity_ms, n_sr):
        events.append((t, ObsKind.SR, sr.sr_pucch_resource_index, "Victim"))
    if cqi is not None:
        npd, off = cqi_pmi_expand(cqi.cqi_pmi_config_index)
        cqi_first = base + (off - base) % npd
        for t in _train(cqi_first, npd, n_cqi):
            events.append((t, ObsKind.CQI, cqi.cqi_pucch_resource_index, "Victim"))
        if cqi.ri_config_index is not None:
            ri_period, ri_off = ri_config_expand(cqi.ri_config_index, cqi.cqi_pmi_config_index)
            ri_first = base + (ri_off - base) % ri_period
            for t in _train(ri_first, ri_period, n_ri):
                events.append((t, ObsKind.RI, cqi.cqi_pucch_resource_index, "Victim"))

    span = max(e[0] for e in events) - base + 1
    taken = {(e[0], e[2]) for e in events}
    n_other = max(3, math.ceil(interference_per_s * span / 1000.0)) if interference_per_s > 0 else 0
    kinds = [ObsKind.SR, ObsKind.CQI] + ([ObsKind.RI] if cqi and cqi.ri_config_index is not None else [])
    while n_other:
        t = base + rng.randrange(span)
        pucch = rng.randrange(PUCCH_RESOURCES)
        if (t, pucch) in taken:
            continue
        taken.add((t, pucch))
        events.append((t, rng.choice(kinds), pucch, "Other"))
        n_other -= 1

    events.sort(key=lambda e: (e[0], e[2]))
    observations, truth = [], []
    # separate stream so a lossy trace is an exact subset of its lossless twin
    drop = random.Random(rng.randrange(2**32))
    for t, kind, pucch, origin in events:
        if origin == "Victim":
            ta = rng.uniform(-VICTIM_TA_US, VICTIM_TA_US)
            snr = rng.uniform(*VICTIM_SNR_DB)
        else:
            ta = rng.uniform(-OTHER_TA_US, OTHER_TA_US)
            snr = rng.uniform(*OTHER_SNR_DB)
        if loss > 0 and drop.random() < loss:
            continue
        observations.append(PucchObservation(kind, Tti.from_index(t), pucch,
                                             round(ta, 3), round(snr, 2)))
        truth.append({"role": kind.value.lower(), "origin": origin})

    # the relay flushes the first SR; the UE re-sends one period later and the
    # forwarded copy earns an uplink grant four subframes after it
    resend = sr_first + sr.periodicity_ms
    summary = {"dropped_sr_tti": sr_first % TTI_WRAP, "resent_sr_tti": resend % TTI_WRAP,
               "ul_grant_tti": (resend + 4) % TTI_WRAP}
    return observations, truth, summary


@dataclass
class CorpusItem:
    stream: list
    sr_config: SrConfig
    cqi_config: Optional[CqiConfig]
    lcid: int
    lossless: list


def gen_phy_param_corpus(n: int, profile, seed: int, loss: float = 0.0,
                         interference_per_s: float = 10.0) -> list[CorpusItem]:
    """``n`` independent connections, each with its own sampled configuration."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0.0 <= loss < 1.0:
        raise ValueError("loss must be in [0, 1)")
    if isinstance(profile, str):
        profile = get_profile(profile)
    rng = random.Random(seed)
    lcids = sorted(profile.sr_periodicity_by_lcid)
    items = []
    for _ in range(n):
        lcid = rng.choice(lcids)
        sr, cqi = sample_phy_config(profile, rng, lcid)
        stream_seed = rng.randrange(2**32)
        lossless, _, _ = gen_phy_stream(sr, cqi, random.Random(stream_seed),
                                        interference_per_s=interference_per_s)
        if loss:
            stream, _, _ = gen_phy_stream(sr, cqi, random.Random(stream_seed),
                                          interference_per_s=interference_per_s, loss=loss)
        else:
            stream = lossless
        items.append(CorpusItem(stream, sr, cqi, lcid, lossless))
    return items


# -- NAS --------------------------------------------------------------------------

def _attach_records(subscriber: Subscriber, rng: random.Random, start_ms: float,
                    tampered: bool, identity_kind: str = "GUTI") -> list[NasRecord]:
    t = start_ms
    gaps = [round(rng.uniform(20.0, 80.0), 3) for _ in range(4)]
    if identity_kind == "SUCI":
        attach = NasRecord(t, NasKind.ATTACH_REQUEST, IdentityKind.SUCI, subscriber.suci)
    else:
        attach = NasRecord(t, NasKind.ATTACH_REQUEST, IdentityKind.GUTI, subscriber.guti,
                           m_tmsi=subscriber.m_tmsi)
    records = []
    if tampered and identity_kind != "SUCI":
        records.append(tamper_attach(attach))
        t = round(t + gaps[0], 3)
        records.append(NasRecord(t, NasKind.IDENTITY_REQUEST))
        t = round(t + gaps[1], 3)
        records.append(NasRecord(t, NasKind.IDENTITY_RESPONSE, IdentityKind.IMSI, subscriber.imsi))
    else:
        records.append(attach)
    t = round(t + gaps[2], 3)
    records.append(NasRecord(t, NasKind.AUTH_REQUEST))
    t = round(t + gaps[3], 3)
    records.append(NasRecord(t, NasKind.AUTH_RESPONSE))
    return records


def gen_attach_trace(identity: Subscriber, tampered: bool, seed: int,
                     start_ms: float = 0.0, identity_kind: str = "GUTI") -> Trace:
    """The simulated core answers an integrity failure with an Identity Request."""
    rng = random.Random(f"attach:{seed}")
    records = _attach_records(identity, rng, start_ms, tampered, identity_kind)
    truth = [{"role": "nas", "kind": r.kind.value} for r in records]
    ground = GroundTruth(
        identities=[_identity_row(identity, identity_kind)],
        nas={"tampered": bool(tampered), "imsi": identity.imsi,
             "extractable": bool(tampered and identity_kind != "SUCI")},
    )
    return Trace(records, truth, ground)


def _identity_row(sub: Subscriber, kind: str = "GUTI") -> dict:
    return {"identity": sub.network_identity(kind), "imsi": sub.imsi,
            "phone_number": sub.phone_number, "m_tmsi": f"0x{sub.m_tmsi:08X}"}


# -- VAD ----------------------------------------------------------------------------

def build_vad_pattern(length_ms: int, speaking_fraction: float, rng: random.Random, *,
                      spurt_ms: tuple = (600.0, 3000.0), grid_ms: int = 20) -> list[tuple]:
    """Alternating talk spurts and pauses on a 20 ms grid covering [0, length]."""
    if not 0.0 <= speaking_fraction <= 1.0:
        raise ValueError("speaking_fraction must be in [0, 1]")
    length = int(length_ms // grid_ms * grid_ms)
    if length <= 0:
        raise ValueError("length too short")
    if speaking_fraction in (0.0, 1.0):
        return [(0, length, speaking_fraction == 1.0)]

    talk_total = speaking_fraction * length
    n = max(1, round(talk_total / (sum(spurt_ms) / 2)))
    talks = [rng.uniform(*spurt_ms) for _ in range(n)]
    lead_silent = rng.random() < 0.5
    n_pauses = n - 1 + (1 if lead_silent else 0) + (1 if rng.random() < 0.5 else 0)
    if n_pauses == 0:
        n_pauses, lead_silent = 1, False
    pauses = [rng.uniform(0.5, 1.5) for _ in range(n_pauses)]
    scale_t = talk_total / sum(talks)
    scale_p = (length - talk_total) / sum(pauses)
    talks = [x * scale_t for x in talks]
    pauses = [x * scale_p for x in pauses]

    segments = []  # (length, speaking)
    t_i = p_i = 0
    speaking = not lead_silent
    while t_i < len(talks) or p_i < len(pauses):
        if speaking and t_i < len(talks):
            segments.append((talks[t_i], True))
            t_i += 1
        elif not speaking and p_i < len(pauses):
            segments.append((pauses[p_i], False))
            p_i += 1
        speaking = not speaking

    pattern = []
    edge = 0.0
    prev = 0
    for seg_len, state in segments:
        edge += seg_len
        end = min(length, int(round(edge / grid_ms)) * grid_ms)
        if end <= prev:
            continue
        if pattern and pattern[-1][2] == state:
            pattern[-1] = (pattern[-1][0], end, state)
        else:
            pattern.append((prev, end, state))
        prev = end
    if prev < length:
        last = pattern[-1]
        pattern[-1] = (last[0], length, last[2])
    return pattern


def rtp_schedule(pattern: Sequence[tuple], origin_ms: float, end_ms: float,
                 audio_ms: int = 20, cn_ms: int = 160) -> list[tuple]:
    """Frame times and kinds for one direction of a conversation.

    Speech frames land every 20 ms inside talk spurts; in a pause the first
    SID follows 20 ms after the last speech frame and then every 160 ms.
    """
    frames = []
    for start, end, speaking in pattern:
        a, b = origin_ms + start, min(origin_ms + end, end_ms)
        step = audio_ms if speaking else cn_ms
        t = a + audio_ms
        while t <= b + 1e-9:
            frames.append((round(t, 3), "audio" if speaking else "cn"))
            t += step
    return frames


# -- SIP / PDCP ---------------------------------------------------------------------

@dataclass
class _Packet:
    time_ms: float
    direction: Direction
    drb: int
    ip_len: int
    role: str
    operation: Optional[str] = None
    pid: int = -1


def _sample_size(db: FingerprintDb, op: str, direction: Direction, rng: random.Random) -> int:
    entry = db.entry(op, direction)
    rng_range = rng.choice(entry.ranges)
    return rng.randint(rng_range.center - rng_range.tolerance,
                       rng_range.center + rng_range.tolerance)


def _emit_pdcp(packets: list[_Packet], profile: CarrierProfile) -> tuple[list, list, list]:
    """Fragment packets onto PDCP, keeping each (direction, bearer) stream in order."""
    streams: dict = {}
    for p in packets:
        streams.setdefault((p.direction, p.drb), []).append(p)
    out = []  # (time, direction, drb, seq, record, truth)
    lineage = []
    for (direction, drb), stream in streams.items():
        stream.sort(key=lambda p: (p.time_ms, p.pid))
        seq = 0
        busy_until = -math.inf
        mtu = profile.mtu.for_direction(direction)
        for p in stream:
            start = max(p.time_ms, busy_until)
            frags = split_to_pdcp(p.ip_len, direction, profile.mtu, seq, start,
                                  lcid=profile.lcid(drb), drb=drb, fragment_gap_ms=FRAGMENT_GAP_MS)
            seq += len(frags)
            busy_until = frags[-1].time_ms
            lineage.append({"packet": p.pid, "direction": direction.value, "drb": drb,
                            "ip_len": p.ip_len, "role": p.role, "operation": p.operation,
                            "seqs": [f.seq for f in frags], "time_ms": frags[-1].time_ms,
                            "exact_mtu": p.ip_len % mtu == 0})
            for i, f in enumerate(frags):
                out.append((f.time_ms, direction.value, drb, f.seq, f,
                            {"role": p.role, "packet": p.pid, "fragment": i,
                             "fragments": len(frags), "operation": p.operation}))
    out.sort(key=lambda x: x[:4])
    lineage.sort(key=lambda x: x["packet"])
    return [x[4] for x in out], [x[5] for x in out], lineage


def _script_messages(spec: ScenarioSpec, db: FingerprintDb) -> list[tuple]:
    """(operation, sender) pairs for the scenario, skipping steps the device never sends."""
    victim_role = "caller" if spec.caller_side is Side.VICTIM else "callee"
    messages = []
    for step in SCENARIO_SCRIPTS[spec.scenario]:
        if step is CONVERSATION:
            messages.append((None, "both", None))
            continue
        direction = Direction.UPLINK if step.sender == victim_role else Direction.DOWNLINK
        op = next((o for o in step.ops if db.has(o, direction)), None)
        if op is None:
            if step.required:
                raise ScenarioMismatch(
                    f"scenario/device mismatch: {db.device}/{db.carrier} has no "
                    f"{'/'.join(step.ops)} {direction.value} for scenario {int(spec.scenario)}")
            continue
        messages.append((op, step.sender, direction))
    return messages


def gen_call_trace(spec: ScenarioSpec, db: Optional[FingerprintDb] = None) -> Trace:
    """One call of the given scenario as seen by the relay, with full ground truth."""
    profile = get_profile(spec.carrier)
    if spec.device.lower() not in profile.devices:
        raise ScenarioMismatch(f"scenario/device mismatch: {spec.device} not on {spec.carrier}")
    db = db or bundled_db(spec.carrier, spec.device)
    ctx = profile.transport()
    rng = random.Random(spec.seed)
    ground = GroundTruth(scenario=int(spec.scenario), carrier=profile.name, device=spec.device)
    identity = spec.victim.network_identity(profile.identity_kind)
    ground.identities = [_identity_row(spec.victim, profile.identity_kind)]

    # PHY: the connection the call rides on
    sr, cqi = sample_phy_config(profile, rng, spec.sr_lcid)
    phy, phy_truth, sr_events = gen_phy_stream(sr, cqi, random.Random(rng.randrange(2**32)),
                                               interference_per_s=spec.interference_per_s)
    ground.sr_config, ground.cqi_config, ground.sr_events = sr, cqi, sr_events

    invite_at = spec.invite_at_ms if spec.invite_at_ms is not None else round(
        rng.uniform(1000.0, 1500.0), 3)

    nas, nas_truth = [], []
    if spec.include_attach:
        nas = _attach_records(spec.victim, rng, max(0.0, invite_at - 900.0),
                              spec.tamper_attach, profile.identity_kind)
        nas_truth = [{"role": "nas", "kind": r.kind.value} for r in nas]

    packets: list[_Packet] = []

    def add(t, direction, drb, ip_len, role, op=None):
        packets.append(_Packet(round(t, 3), direction, drb, ip_len, role, op, len(packets)))

    if spec.tcp_handshake:
        first = Direction.UPLINK
        for k, role in enumerate(("SYNC", "SYNC_ACK", "ACK")):
            d = first if role != "SYNC_ACK" else first.opposite
            add(invite_at - 60.0 + 15.0 * k, d, SIP_DRB, ctx.overhead(role), role)

    t = t_prev = invite_at
    conv_start = None
    bye_at = None
    messages = _script_messages(spec, db)
    for op, sender, direction in messages:
        if op is None:
            conv_start = t_prev
            t = conv_start + spec.conversation_length_ms
            continue
        payload = _sample_size(db, op, direction, rng)
        add(t, direction, SIP_DRB, payload + ctx.overhead("data"), "sip", op)
        # the receiving TCP stack acknowledges a few ms later
        add(t + rng.uniform(2.0, 8.0), direction.opposite, SIP_DRB, ctx.overhead("ACK"), "ACK")
        ground.sip_messages.append({"operation": op, "direction": direction.value,
                                    "time_ms": round(t, 3), "payload": payload,
                                    "packet": len(packets) - 2})
        if op == BYE:
            bye_at = round(t, 3)
        t_prev = round(t, 3)
        if op == RING:
            t += rng.uniform(*spec.ringing_ms)
        else:
            t += rng.uniform(*spec.handshake_gap_ms)

    if conv_start is not None and bye_at is not None:
        ground.conversation_ms = (conv_start, bye_at)
        length = bye_at - conv_start
        pattern = spec.vad_pattern
        if pattern is None:
            pattern = {Direction.UPLINK: build_vad_pattern(length, spec.speaking_fraction[0], rng),
                       Direction.DOWNLINK: build_vad_pattern(length, spec.speaking_fraction[1], rng)}
        pattern = {Direction.parse(d): [tuple(iv) for iv in ivs] for d, ivs in pattern.items()}
        ground.vad = {d: [(round(conv_start + a, 3), round(conv_start + b, 3), s) for a, b, s in ivs]
                      for d, ivs in pattern.items()}
        for d in (Direction.UPLINK, Direction.DOWNLINK):
            audio_seen = 0
            for ft, kind in rtp_schedule(pattern.get(d, []), conv_start, bye_at):
                if kind == "cn":
                    size, role = CN_PAYLOAD, "cn"
                elif audio_seen < ROHC_INIT_FRAMES:
                    size, role = ROHC_INIT_PAYLOAD, "rohc"
                    audio_seen += 1
                else:
                    size, role = AUDIO_PAYLOAD, "rtp"
                add(ft, d, RTP_DRB, size + profile.pdcp_overhead_bytes, role)
            rt = conv_start + RTCP_INTERVAL_MS / 2
            while rt < bye_at:
                add(rt + (0.0 if d is Direction.UPLINK else 7.0), d, profile.rtcp_bearer,
                    RTCP_SIZE[d], "rtcp")
                rt += RTCP_INTERVAL_MS

    pdcp, pdcp_truth, lineage = _emit_pdcp(packets, profile)
    ground.packets = lineage

    outgoing = spec.caller_side is Side.VICTIM
    status = {Scenario.CALLER_CANCEL_RINGING: EstablishStatus.MISSED,
              Scenario.CALLEE_DECLINE: EstablishStatus.DECLINED}.get(spec.scenario,
                                                                      EstablishStatus.ACCEPTED)
    duration = round((bye_at - conv_start) / 1000.0, 3) if ground.conversation_ms else 0.0
    ground.call = {"identity": identity, "timestamp_ms": round(invite_at, 3),
                   "call_direction": (CallDirection.OUTGOING if outgoing else CallDirection.INCOMING).value,
                   "establish_status": status.value,
                   "termination_cause": SCENARIO_CAUSE[spec.scenario].value,
                   "duration_s": duration}

    records = phy + nas + pdcp
    truth = phy_truth + nas_truth + pdcp_truth
    return Trace(records, truth, ground)


# -- populations ----------------------------------------------------------------------

@dataclass
class Population:
    traces: list           # one Trace per victim
    attacker_log: AttackerCallLog
    table: dict            # network identity -> phone number


def gen_population(n: int = 10, seed: int = 0, carrier: str = "carrier1",
                   devices: Sequence[str] = ("s7", "s8", "iphone11"),
                   spacing_ms: float = 60000.0, latency_ms: tuple = (300.0, 1500.0)) -> Population:
    """``n`` victims, each called once by the attacker, who hangs up while it rings."""
    rng = random.Random(seed)
    traces, dials, table = [], [], {}
    profile = get_profile(carrier)
    for i in range(n):
        victim = Subscriber.from_seed(seed * 1000 + i)
        dial = 10000.0 + i * spacing_ms + round(rng.uniform(0, 1000), 3)
        spec = ScenarioSpec(Scenario.CALLER_CANCEL_RINGING, carrier=carrier,
                            device=devices[i % len(devices)], victim=victim,
                            caller_side=Side.REMOTE, seed=rng.randrange(2**32),
                            invite_at_ms=round(dial + rng.uniform(*latency_ms), 3))
        traces.append(gen_call_trace(spec))
        dials.append((victim.phone_number, dial, "cancelled"))
        table[victim.network_identity(profile.identity_kind)] = victim.phone_number
    return Population(traces, AttackerCallLog.from_list(dials), table)
