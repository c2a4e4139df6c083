"""PUCCH timing arithmetic and recovery of SR / CQI reporting configuration.

The relay opens every PUCCH resource after an RRCConnectionReconfiguration
and watches where the victim UE transmits.  Two observations of a periodic
message give the period by subtraction, the first observation's TTI modulo
the period gives the subframe offset, and the 36.213 tables turn the pair
into the configuration index the eNodeB actually signalled.
"""
from __future__ import annotations

import enum
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

TTI_WRAP = 10240  # 1024 system frames x 10 subframes

# 36.213 Table 10.1.5-1 (UE-specific SR periodicity and subframe offset).
# (first index, last index, periodicity ms); offset = index - first index.
SR_CONFIG_TABLE = (
    (0, 4, 5),
    (5, 14, 10),
    (15, 34, 20),
    (35, 74, 40),
    (75, 154, 80),
    (155, 156, 2),
    (157, 157, 1),
)
SR_PERIODICITIES = (1, 2, 5, 10, 20, 40, 80)

# 36.213 Table 7.2.2-1A, FDD mapping of cqi-pmi-ConfigIndex to Npd / N_OFFSET,CQI.
# Index 317 and 542..1023 are reserved.
CQI_PMI_TABLE = (
    (0, 1, 2),
    (2, 6, 5),
    (7, 16, 10),
    (17, 36, 20),
    (37, 76, 40),
    (77, 156, 80),
    (157, 316, 160),
    (318, 349, 32),
    (350, 413, 64),
    (414, 541, 128),
)

# 36.213 Table 7.2.2-1B: ri-ConfigIndex -> (M_RI, N_OFFSET,RI = -(index - first)).
RI_CONFIG_TABLE = (
    (0, 160, 1),
    (161, 321, 2),
    (322, 482, 4),
    (483, 643, 8),
    (644, 804, 16),
    (805, 965, 32),
)

# 5G-SA schedulingRequestResourceConfig periodicityAndOffset choices at
# 15 kHz SCS, where one slot is one millisecond (symbol-level choices omitted).
NR_SR_PERIODICITIES = (1, 2, 4, 5, 8, 10, 16, 20, 40, 80, 160, 320, 640)


class PhyError(ValueError):
    """Base error for PHY parameter recovery."""


class ZeroPeriod(PhyError):
    pass


class NoTableRow(PhyError):
    pass


class InsufficientObservations(PhyError):
    pass


class LookupFailure(PhyError):
    pass


@dataclass(frozen=True, order=True)
class Tti:
    sfn: int
    subframe: int

    def __post_init__(self) -> None:
        if not 0 <= self.sfn <= 1023:
            raise ValueError(f"sfn out of range: {self.sfn}")
        if not 0 <= self.subframe <= 9:
            raise ValueError(f"subframe out of range: {self.subframe}")

    @property
    def index(self) -> int:
        return 10 * self.sfn + self.subframe

    @classmethod
    def from_index(cls, index: int) -> "Tti":
        index %= TTI_WRAP
        return cls(index // 10, index % 10)

    def __add__(self, ms: int) -> "Tti":
        return Tti.from_index(self.index + ms)


class ObsKind(str, enum.Enum):
    SR = "SR"
    CQI = "CQI"
    RI = "RI"


class Origin(str, enum.Enum):
    VICTIM = "Victim"
    OTHER = "Other"


@dataclass(frozen=True)
class PucchObservation:
    kind: ObsKind
    tti: Tti
    pucch_index: int
    ta_us: float
    snr_db: float

    def __post_init__(self) -> None:
        if self.pucch_index < 0:
            raise ValueError("pucch_index must be non-negative")
        if not math.isfinite(self.ta_us):
            raise ValueError("ta_us must be finite")


@dataclass(frozen=True)
class SrConfig:
    periodicity_ms: int
    subframe_offset: int
    sr_config_index: Optional[int]  # None on NR, where no index table exists
    sr_pucch_resource_index: int
    dsr_trans_max: int

    @property
    def periodicity_and_offset(self) -> str:
        """NR-style rendering, e.g. ``sl20:15``."""
        return f"sl{self.periodicity_ms}:{self.subframe_offset}"


@dataclass(frozen=True)
class CqiConfig:
    cqi_pucch_resource_index: int
    cqi_pmi_config_index: int
    ri_config_index: Optional[int] = None
    format_indicator: str = "widebandCQI"

    @property
    def cqi_periodicity_ms(self) -> int:
        return cqi_pmi_expand(self.cqi_pmi_config_index)[0]

    @property
    def cqi_offset(self) -> int:
        return cqi_pmi_expand(self.cqi_pmi_config_index)[1]

    @property
    def ri_periodicity_ms(self) -> Optional[int]:
        if self.ri_config_index is None:
            return None
        return ri_config_expand(self.ri_config_index, self.cqi_pmi_config_index)[0]

    @property
    def ri_offset(self) -> Optional[int]:
        if self.ri_config_index is None:
            return None
        return ri_config_expand(self.ri_config_index, self.cqi_pmi_config_index)[1]


@dataclass
class ActionLog:
    """What the relay did with each observation while guessing."""

    entries: list[str] = field(default_factory=list)
    consumed: int = 0
    dropped: int = 0
    skipped: int = 0

    def note(self, text: str) -> None:
        self.entries.append(text)


@dataclass(frozen=True)
class CandidateRanking:
    parameter: str
    ranking: tuple  # ((value, frequency), ...) by descending frequency


# -- TTI arithmetic ---------------------------------------------------------

def tti_delta(earlier: Tti, later: Tti) -> int:
    """Milliseconds from ``earlier`` to ``later``, wrapping at 10240."""
    delta = (later.index - earlier.index) % TTI_WRAP
    if delta == 0:
        raise ZeroPeriod("zero period")
    return delta


# -- table lookups ------------------------------------------------------------

def _lookup(table, period: int, offset: int, what: str) -> int:
    for first, last, p in table:
        if p == period:
            if not 0 <= offset <= last - first:
                raise NoTableRow(f"no table row: {what} offset {offset} outside period {period}")
            return first + offset
    raise NoTableRow(f"no table row: {what} periodicity {period}")


def _expand(table, index: int, what: str) -> tuple[int, int]:
    for first, last, p in table:
        if first <= index <= last:
            return p, index - first
    raise NoTableRow(f"{what} index {index} out of range")


def sr_config_lookup(periodicity_ms: int, subframe_offset: int) -> int:
    return _lookup(SR_CONFIG_TABLE, periodicity_ms, subframe_offset, "sr-ConfigIndex")


def sr_config_expand(sr_config_index: int) -> tuple[int, int]:
    return _expand(SR_CONFIG_TABLE, sr_config_index, "sr-ConfigIndex")


def cqi_pmi_lookup(periodicity_ms: int, offset: int) -> int:
    return _lookup(CQI_PMI_TABLE, periodicity_ms, offset, "cqi-pmi-ConfigIndex")


def cqi_pmi_expand(cqi_pmi_config_index: int) -> tuple[int, int]:
    return _expand(CQI_PMI_TABLE, cqi_pmi_config_index, "cqi-pmi-ConfigIndex")


def ri_config_lookup(ri_periodicity_ms: int, ri_offset: int, cqi_pmi_config_index: int) -> int:
    """Index of the RI configuration reporting at ``ri_offset`` every ``ri_periodicity_ms``.

    RI instances satisfy (tti - N_OFFSET,CQI - N_OFFSET,RI) mod (M_RI * Npd) == 0,
    so the recovered offset is only meaningful relative to the CQI offset.
    """
    npd, cqi_off = cqi_pmi_expand(cqi_pmi_config_index)
    if ri_periodicity_ms % npd:
        raise NoTableRow(f"no table row: RI period {ri_periodicity_ms} not a multiple of Npd {npd}")
    multiplier = ri_periodicity_ms // npd
    back = (cqi_off - ri_offset) % ri_periodicity_ms  # N_OFFSET,RI = -back
    for first, last, m in RI_CONFIG_TABLE:
        if m == multiplier:
            if back > last - first:
                raise NoTableRow(f"no table row: RI offset -{back} beyond table")
            return first + back
    raise NoTableRow(f"no table row: RI multiplier {multiplier}")


def ri_config_expand(ri_config_index: int, cqi_pmi_config_index: int) -> tuple[int, int]:
    multiplier, back = _expand(RI_CONFIG_TABLE, ri_config_index, "ri-ConfigIndex")
    npd, cqi_off = cqi_pmi_expand(cqi_pmi_config_index)
    period = multiplier * npd
    return period, (cqi_off - back) % period


# -- origin classification ----------------------------------------------------

def classify_origin(obs: PucchObservation, ta_tolerance_us: float = 2.0,
                    snr_min_db: float = 10.0) -> Origin:
    """Victim UEs are timing-aligned to the relay and heard loudly."""
    if abs(obs.ta_us) <= ta_tolerance_us and obs.snr_db >= snr_min_db:
        return Origin.VICTIM
    return Origin.OTHER


def _victim_stream(stream: Iterable[PucchObservation], kind: ObsKind, log: ActionLog,
                   ta_tolerance_us: float, snr_min_db: float):
    for obs in stream:
        if obs.kind is not kind:
            continue
        if classify_origin(obs, ta_tolerance_us, snr_min_db) is Origin.OTHER:
            log.skipped += 1
            continue
        yield obs


# -- guessing -----------------------------------------------------------------

def guess_sr_config(stream: Iterable[PucchObservation], known_periodicity: Optional[int] = None,
                    dsr_trans_max: int = 64, *, ta_tolerance_us: float = 2.0,
                    snr_min_db: float = 10.0, rat: str = "lte") -> tuple[SrConfig, ActionLog]:
    """Recover schedulingRequestConfig from the victim's SR transmissions.

    Without a known periodicity the first victim SR is flushed so the UE
    re-sends it one period later; with one, the first SR is enough.
    Observations classified as coming from other UEs are ignored.
    """
    log = ActionLog()
    first: Optional[PucchObservation] = None
    period = None
    last = None
    for obs in _victim_stream(stream, ObsKind.SR, log, ta_tolerance_us, snr_min_db):
        log.consumed += 1
        if known_periodicity:
            period, first, last = known_periodicity, obs, obs
            log.note(f"SR @{obs.tti.index} pucch {obs.pucch_index}: processed (known periodicity {period})")
            break
        if first is None:
            if dsr_trans_max < 2:
                raise InsufficientObservations(
                    f"dsr-TransMax {dsr_trans_max} leaves no re-send after dropping the first SR")
            first = obs
            log.dropped += 1
            log.note(f"SR @{obs.tti.index} pucch {obs.pucch_index}: dropped (flush)")
            continue
        period = tti_delta(first.tti, obs.tti)
        last = obs
        log.note(f"SR @{obs.tti.index} pucch {obs.pucch_index}: processed, periodicity {period}")
        break
    if period is None:
        raise InsufficientObservations("insufficient observations")

    offset = first.tti.index % period
    if rat == "nr":
        if period not in NR_SR_PERIODICITIES:
            raise LookupFailure(f"lookup failure: NR periodicity {period}")
        index = None
    else:
        try:
            index = sr_config_lookup(period, offset)
        except NoTableRow as exc:
            raise LookupFailure(f"lookup failure: {exc}") from exc
    config = SrConfig(period, offset, index, last.pucch_index, dsr_trans_max)
    return config, log


def _period_and_offset(obs: Sequence[PucchObservation]) -> tuple[int, int]:
    period = tti_delta(obs[0].tti, obs[1].tti)
    return period, obs[0].tti.index % period


def guess_cqi_config(stream: Iterable[PucchObservation], mimo: bool = False,
                     known_ri_config_index: Optional[int] = None, *,
                     format_indicator: str = "widebandCQI", ta_tolerance_us: float = 2.0,
                     snr_min_db: float = 10.0) -> tuple[CqiConfig, ActionLog]:
    """Recover cqi-ReportConfig.  CQIs steer downlink MCS, so none are dropped."""
    stream = list(stream)
    log = ActionLog()
    cqis = list(_victim_stream(stream, ObsKind.CQI, log, ta_tolerance_us, snr_min_db))[:2]
    if len(cqis) < 2:
        raise InsufficientObservations("insufficient observations")
    log.consumed += 2
    for obs in cqis:
        log.note(f"CQI @{obs.tti.index} pucch {obs.pucch_index}: processed")
    period, offset = _period_and_offset(cqis)
    try:
        pmi_index = cqi_pmi_lookup(period, offset)
    except NoTableRow as exc:
        raise LookupFailure(f"lookup failure: {exc}") from exc

    ri_index = None
    if mimo:
        if known_ri_config_index is not None:
            ri_index = known_ri_config_index
            log.note(f"RI: fixed by carrier profile, index {ri_index}")
        else:
            ris = list(_victim_stream(stream, ObsKind.RI, log, ta_tolerance_us, snr_min_db))[:2]
            if len(ris) < 2:
                raise InsufficientObservations("insufficient observations (RI)")
            log.consumed += 2
            for obs in ris:
                log.note(f"RI @{obs.tti.index} pucch {obs.pucch_index}: processed")
            ri_period, ri_offset = _period_and_offset(ris)
            try:
                ri_index = ri_config_lookup(ri_period, ri_offset, pmi_index)
            except NoTableRow as exc:
                raise LookupFailure(f"lookup failure: {exc}") from exc

    config = CqiConfig(cqis[0].pucch_index, pmi_index, ri_index, format_indicator)
    return config, log


def rank_candidates(history: Sequence, parameter: str = "") -> CandidateRanking:
    """Order observed parameter values by how often they occurred.

    Ties keep first-occurrence order, so replays of the same history agree.
    """
    if not history:
        raise ValueError("empty history")
    counts = Counter(history)  # insertion-ordered by first occurrence
    total = len(history)
    ordered = sorted(counts.items(), key=lambda kv: -kv[1])
    return CandidateRanking(parameter, tuple((value, n / total) for value, n in ordered))
