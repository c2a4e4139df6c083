"""End-to-end analysis of one relay trace: PHY guessing, SIP log, calls, voice activity."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Sequence

from .identity_map import (AttackerCallLog, IdentityBinding, IdentityKind, Method,
                           NasKind, NasRecord, NoExtractionOpportunity, extract_imsi,
                           passive_map)
from .pdcp_stream import (Direction, PdcpRecord, detect_control_info, reassemble,
                          sip_payload_size)
from .phy_sched import ObsKind, PhyError, PucchObservation, guess_cqi_config, guess_sr_config
from .profiles import RTP_DRB, SIP_DRB, CarrierProfile
from .sip_classify import (CallRecord, FingerprintDb, SipEvent, classify_size,
                           extract_call_records, revise_log)
from .voice_activity import ActivityTimeline, RtpRecord, activity_timeline, filter_rtcp


@dataclass(frozen=True)
class AnalysisConfig:
    cn_threshold: int = 10
    ta_tolerance_us: float = 2.0
    snr_min_db: float = 10.0
    window_ms: float = 5000.0
    max_gap_ms: float = 20.0      # closes exact-MTU runs; fragments arrive 1 ms apart
    drb3_gap_ms: float = 1000.0   # silence that separates two DRB3 lifetimes
    use_priors: bool = True
    sr_lcid: int = 5

    def __post_init__(self) -> None:
        for name in ("cn_threshold", "ta_tolerance_us", "snr_min_db", "window_ms", "max_gap_ms"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class PhyResult:
    sr_config: Optional[dict] = None
    cqi_config: Optional[dict] = None
    actions: dict = field(default_factory=dict)
    errors: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"sr_config": self.sr_config, "cqi_config": self.cqi_config,
                "actions": self.actions, "errors": self.errors}


@dataclass
class AnalysisResult:
    identity: str
    phy: PhyResult
    events: list
    calls: list
    activity: ActivityTimeline
    imsi: Optional[str] = None
    imsi_provenance: Optional[dict] = None


def guess_phy(observations: Sequence[PucchObservation], profile: CarrierProfile,
              cfg: AnalysisConfig = AnalysisConfig()) -> PhyResult:
    result = PhyResult()
    if not observations:
        return result
    thresholds = {"ta_tolerance_us": cfg.ta_tolerance_us, "snr_min_db": cfg.snr_min_db}
    known = profile.sr_periodicity_by_lcid.get(cfg.sr_lcid) if cfg.use_priors else None
    try:
        sr, log = guess_sr_config(observations, known, profile.dsr_trans_max,
                                  rat=profile.rat, **thresholds)
        result.sr_config = asdict(sr)
        result.actions["sr"] = {"consumed": log.consumed, "dropped": log.dropped,
                                "skipped": log.skipped, "log": log.entries}
    except PhyError as exc:
        result.errors.append(f"sr: {exc}")
    if any(o.kind is ObsKind.CQI for o in observations):
        known_ri = profile.fixed_ri_config_index if cfg.use_priors else None
        try:
            cqi, log = guess_cqi_config(observations, profile.mimo, known_ri, **thresholds)
            result.cqi_config = asdict(cqi)
            result.actions["cqi"] = {"consumed": log.consumed, "dropped": log.dropped,
                                     "skipped": log.skipped, "log": log.entries}
        except PhyError as exc:
            result.errors.append(f"cqi: {exc}")
    return result


def sip_events(records: Sequence[PdcpRecord], profile: CarrierProfile, db: FingerprintDb,
               cfg: AnalysisConfig = AnalysisConfig()) -> list[SipEvent]:
    """Reassemble DRB2, drop RTCP and TCP control packets, classify the rest."""
    drb2 = [r for r in records if r.drb == SIP_DRB]
    packets = reassemble(drb2, profile.mtu, max_gap_ms=cfg.max_gap_ms)
    if profile.rtcp_bearer == SIP_DRB:
        packets = [p for p in packets if p.total_len not in profile.rtcp_sizes]
    ctx = profile.transport()
    events = []
    for pkt in detect_control_info(packets, ctx):
        if pkt.tag:
            continue
        size = sip_payload_size(pkt, ctx)
        events.append(SipEvent(pkt.time_ms, pkt.direction, size,
                               classify_size(size, pkt.direction, db), seqs=pkt.seqs))
    return events


def drb3_lifetimes(times: Sequence[float], gap_ms: float) -> list[tuple]:
    spans = []
    for t in sorted(times):
        if spans and t - spans[-1][1] <= gap_ms:
            spans[-1][1] = t
        else:
            spans.append([t, t])
    return [tuple(s) for s in spans]


def rtp_records(records: Sequence[PdcpRecord], profile: CarrierProfile) -> list[RtpRecord]:
    drb3 = [r for r in records if r.drb == RTP_DRB]
    if profile.rtcp_bearer == RTP_DRB and drb3:
        drb3, _ = filter_rtcp(drb3, profile.rtcp_sizes)
    return [RtpRecord(r.direction, r.time_ms, max(1, r.pdu_len - profile.pdcp_overhead_bytes))
            for r in drb3]


def network_identity(nas: Sequence[NasRecord]) -> str:
    ident = ""
    for rec in nas:
        if rec.kind is NasKind.ATTACH_REQUEST and rec.identity_kind in (IdentityKind.GUTI,
                                                                         IdentityKind.SUCI):
            if rec.integrity_valid:
                ident = rec.identity_value
    return ident


def analyze_records(records: Sequence, profile: CarrierProfile, db: FingerprintDb,
                    cfg: AnalysisConfig = AnalysisConfig()) -> AnalysisResult:
    phy = [r for r in records if isinstance(r, PucchObservation)]
    pdcp = [r for r in records if isinstance(r, PdcpRecord)]
    nas = sorted((r for r in records if isinstance(r, NasRecord)), key=lambda r: r.time_ms)

    identity = network_identity(nas)
    imsi = provenance = None
    if nas:
        try:
            imsi, provenance = extract_imsi(nas)
        except NoExtractionOpportunity:
            pass
    if not identity:
        identity = imsi or ""

    events = revise_log(sip_events(pdcp, profile, db, cfg))
    rtp = rtp_records(pdcp, profile)
    lifetimes = drb3_lifetimes([r.time_ms for r in rtp], cfg.drb3_gap_ms)
    calls = extract_call_records(events, lifetimes, identity)

    end_ms = None
    for call in calls:
        if call.conversation_ms:
            end_ms = call.conversation_ms[1]
    intervals = {}
    for d in (Direction.UPLINK, Direction.DOWNLINK):
        stream = sorted((r for r in rtp if r.direction is d), key=lambda r: r.time_ms)
        if stream:
            last = stream[-1].time_ms
            intervals[d] = tuple(activity_timeline(
                stream, cn_threshold=cfg.cn_threshold, max_audio=profile.max_audio_bytes,
                end_ms=end_ms if end_ms is not None and end_ms >= last else None))
    return AnalysisResult(identity, guess_phy(phy, profile, cfg), events, calls,
                          ActivityTimeline(intervals), imsi, provenance)


def map_identities(attacker_log: AttackerCallLog, results: Sequence[AnalysisResult],
                   window_ms: float = 5000.0) -> list[IdentityBinding]:
    """Passive bindings from call timing; an extracted IMSI inherits its trace's number."""
    calls: list[CallRecord] = [c for r in results for c in r.calls]
    bindings = passive_map(attacker_log, calls, window_ms)
    imsi_of = {r.identity: r.imsi for r in results if r.imsi}
    out = []
    for b in bindings:
        imsi = imsi_of.get(b.identity_value)
        if imsi == b.identity_value:
            # the only identity this trace revealed came from the tampered attach
            out.append(replace(b, method=Method.ACTIVE))
            continue
        out.append(b)
        if imsi:
            out.append(replace(b, identity_value=imsi, method=Method.ACTIVE))
    return out


def event_dict(ev: SipEvent) -> dict:
    return {"time_ms": ev.time_ms, "direction": ev.direction.value,
            "payload_size": ev.payload_size, "candidates": sorted(ev.candidates),
            "resolved": ev.resolved, "call_index": ev.call_index}
