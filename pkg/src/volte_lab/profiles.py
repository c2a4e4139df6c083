"""Carrier and device profiles driving both generation and analysis."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .pdcp_stream import IpsecMode, MtuConfig, Protocol, TransportContext

# bearer -> (LCID, QCI); the same for every carrier
DRB_MAP = {2: (4, 5), 3: (5, 1)}
SIP_DRB = 2
RTP_DRB = 3


class ProfileError(KeyError):
    pass


def _carrier2_sr_pucch() -> tuple:
    # 28 options: the top one carries 53.14 %, the top five 83 %
    head = ((36, 5314), (37, 1200), (12, 800), (48, 600), (60, 386))
    rest_values = [v for v in range(0, 80, 3) if v not in {36, 37, 12, 48, 60}][:23]
    share, extra = divmod(10000 - sum(w for _, w in head), len(rest_values))
    rest = tuple((v, share + (1 if i < extra else 0)) for i, v in enumerate(rest_values))
    return head + rest


@dataclass(frozen=True)
class CarrierProfile:
    name: str
    mtu: MtuConfig
    ipsec_mode: IpsecMode
    ipsec_overhead_bytes: int
    rtcp_sizes: frozenset
    rtcp_bearer: int
    sr_periodicity_by_lcid: dict
    sr_pucch_dist: tuple         # ((value, weight), ...)
    cqi_pucch_dist: tuple
    cqi_pmi_ranges: tuple        # ((first, last), ...) sampled uniformly
    ri_dist: tuple = ()          # empty unless MIMO
    dsr_trans_max: int = 64
    mimo: bool = False
    pdcp_overhead_bytes: int = 0
    rat: str = "lte"
    devices: tuple = ()
    identity_kind: str = "GUTI"
    protocol: Protocol = Protocol.TCP
    max_audio_bytes: int = 70
    drb_map: dict = field(default_factory=lambda: dict(DRB_MAP))

    def __post_init__(self) -> None:
        if self.ipsec_overhead_bytes < 0 or self.pdcp_overhead_bytes < 0:
            raise ValueError("overheads must be non-negative")
        if self.rtcp_bearer not in (SIP_DRB, RTP_DRB):
            raise ValueError("RTCP rides on DRB2 or DRB3")
        if self.drb_map != DRB_MAP:
            raise ValueError("DRB2/DRB3 mapping is fixed")
        if self.mimo != bool(self.ri_dist):
            raise ValueError("ri_dist must be given exactly when MIMO is used")

    def transport(self) -> TransportContext:
        return TransportContext(self.protocol, self.ipsec_mode,
                                ipsec_overhead_bytes=self.ipsec_overhead_bytes)

    @property
    def fixed_ri_config_index(self) -> Optional[int]:
        """The RI index when the carrier never varies it."""
        if len(self.ri_dist) == 1:
            return self.ri_dist[0][0]
        return None

    def lcid(self, drb: int) -> int:
        return self.drb_map[drb][0]


PROFILES = {
    "carrier1": CarrierProfile(
        name="carrier1",
        mtu=MtuConfig(1212, 1212),
        ipsec_mode=IpsecMode.PLAIN,
        ipsec_overhead_bytes=22,
        rtcp_sizes=frozenset({128, 140}),
        rtcp_bearer=RTP_DRB,
        sr_periodicity_by_lcid={5: 10, 6: 20, 7: 20},
        sr_pucch_dist=((4, 40), (6, 25), (8, 15), (10, 10), (14, 6), (18, 4)),
        cqi_pucch_dist=((2, 1),),
        cqi_pmi_ranges=((37, 76),),
        ri_dist=((162, 1),),
        mimo=True,
        pdcp_overhead_bytes=0,
        devices=("s7", "s8", "iphone11"),
    ),
    "carrier2": CarrierProfile(
        name="carrier2",
        mtu=MtuConfig(1308, 1276),
        ipsec_mode=IpsecMode.ENCRYPTED,
        ipsec_overhead_bytes=46,
        rtcp_sizes=frozenset({128, 140}),
        rtcp_bearer=SIP_DRB,
        sr_periodicity_by_lcid={5: 20, 6: 10, 7: 10},
        sr_pucch_dist=_carrier2_sr_pucch(),
        cqi_pucch_dist=((1, 50), (3, 30), (5, 20)),
        cqi_pmi_ranges=((17, 36), (37, 76)),
        pdcp_overhead_bytes=2,
        devices=("iphone11",),
    ),
    "lab5g": CarrierProfile(
        name="lab5g",
        mtu=MtuConfig(1308, 1276),
        ipsec_mode=IpsecMode.ENCRYPTED,
        ipsec_overhead_bytes=46,
        rtcp_sizes=frozenset({128, 140}),
        rtcp_bearer=RTP_DRB,
        sr_periodicity_by_lcid={5: 20, 6: 10, 7: 40},
        sr_pucch_dist=((0, 60), (1, 30), (2, 10)),
        cqi_pucch_dist=(),
        cqi_pmi_ranges=(),
        rat="nr",
        identity_kind="SUCI",
    ),
}


def get_profile(name: str) -> CarrierProfile:
    try:
        return PROFILES[name.lower()]
    except KeyError:
        raise ProfileError(f"unknown carrier profile {name!r}") from None
