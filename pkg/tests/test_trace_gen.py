import random

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from volte_lab.pdcp_stream import Direction, PdcpRecord, reassemble
from volte_lab.phy_sched import PucchObservation, TTI_WRAP, guess_cqi_config, guess_sr_config
from volte_lab.profiles import PROFILES, RTP_DRB, SIP_DRB, ProfileError, get_profile
from volte_lab.sip_classify import CANCEL, INVITE, RING, Scenario, bundled_db
from volte_lab.trace_gen import (
    AUDIO_PAYLOAD, CN_PAYLOAD, ScenarioMismatch, ScenarioSpec, Side, Subscriber,
    gen_call_trace, gen_phy_param_corpus, gen_phy_stream, gen_population, sample_phy_config,
)
from volte_lab.traceio import record_to_dict

UL, DL = Direction.UPLINK, Direction.DOWNLINK


def pdcp(trace, drb=None):
    return [r for r in trace.of_type(PdcpRecord) if drb is None or r.drb == drb]


class TestProfiles:
    def test_unknown(self):
        with pytest.raises(ProfileError):
            get_profile("carrier9")

    def test_case_insensitive(self):
        assert get_profile("CARRIER1") is PROFILES["carrier1"]

    def test_carrier2_distribution_shape(self):
        dist = get_profile("carrier2").sr_pucch_dist
        weights = sorted((w for _, w in dist), reverse=True)
        assert len(dist) == 28 and sum(weights) == 10000
        assert weights[0] == 5314 and sum(weights[:5]) == 8300


class TestScenarioOne:
    @pytest.fixture(scope="class")
    @staticmethod
    def trace():
        return gen_call_trace(ScenarioSpec(Scenario.CALLER_CANCEL_RINGING, seed=7))

    def test_message_order(self, trace):
        ops = [m["operation"] for m in trace.ground.sip_messages]
        assert ops[0] == INVITE
        assert ops.index(RING) < ops.index(CANCEL)

    def test_no_bearer_three(self, trace):
        assert pdcp(trace, RTP_DRB) == []

    def test_sizes_inside_fingerprints(self, trace):
        db = bundled_db("carrier1", "s7")
        for m in trace.ground.sip_messages:
            entry = db.entry(m["operation"], Direction.parse(m["direction"]))
            assert entry.matches(m["payload"])

    def test_truth_row_per_record(self, trace):
        assert len(trace.truth) == len(trace.records)

    def test_call_truth(self, trace):
        assert trace.ground.call["termination_cause"] == "CallerCancelRinging"
        assert trace.ground.call["call_direction"] == "Outgoing"


@pytest.mark.parametrize("scenario", list(Scenario))
def test_bearer_three_only_for_answered_calls(scenario):
    side = Side.REMOTE if scenario in (Scenario.CALLEE_DECLINE, Scenario.CALLEE_BYE) else Side.VICTIM
    trace = gen_call_trace(ScenarioSpec(scenario, seed=1, caller_side=side,
                                        conversation_length_ms=3000))
    answered = scenario in (Scenario.CALLER_BYE, Scenario.CALLEE_BYE)
    assert bool(pdcp(trace, RTP_DRB)) == answered


@settings(max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(st.sampled_from(["carrier1", "carrier2"]), st.integers(0, 2**31))
def test_lineage_matches_reassembly(carrier, seed):
    profile = get_profile(carrier)
    device = profile.devices[seed % len(profile.devices)]
    trace = gen_call_trace(ScenarioSpec(Scenario.CALLER_BYE, carrier=carrier, device=device,
                                        seed=seed, conversation_length_ms=2000))
    packets = reassemble(pdcp(trace), profile.mtu, max_gap_ms=20)
    got = sorted((p.direction.value, p.bearer, p.seqs) for p in packets)
    want = sorted((lin["direction"], lin["drb"], tuple(lin["seqs"])) for lin in trace.ground.packets)
    assert got == want


def test_rtp_cadence():
    trace = gen_call_trace(ScenarioSpec(Scenario.CALLER_BYE, seed=3, conversation_length_ms=20000))
    profile = get_profile("carrier1")
    for d in (UL, DL):
        stream = [r for r in pdcp(trace, RTP_DRB) if r.direction is d
                  and r.pdu_len not in profile.rtcp_sizes]
        for a, b in zip(stream, stream[1:]):
            gap = round(b.time_ms - a.time_ms, 3)
            if a.pdu_len == b.pdu_len == AUDIO_PAYLOAD:
                assert gap >= 20
            if a.pdu_len == b.pdu_len == CN_PAYLOAD:
                assert gap == 160


def test_long_call_downlink_count():
    # a 105 s call in which the remote party talks a little over half the time
    spec = ScenarioSpec(Scenario.CALLER_BYE, seed=2, conversation_length_ms=105000,
                        speaking_fraction=(0.5, 0.57))
    trace = gen_call_trace(spec)
    rtcp = get_profile("carrier1").rtcp_sizes
    dl = [r for r in pdcp(trace, RTP_DRB) if r.direction is DL and r.pdu_len not in rtcp]
    assert 3000 <= len(dl) <= 3700


class TestMismatch:
    def test_s7_cannot_send_busy_downlink(self):
        with pytest.raises(ScenarioMismatch, match="scenario/device mismatch"):
            gen_call_trace(ScenarioSpec(Scenario.CALLEE_DECLINE, caller_side=Side.VICTIM))

    def test_device_not_on_carrier(self):
        with pytest.raises(ScenarioMismatch):
            gen_call_trace(ScenarioSpec(Scenario.CALLER_BYE, carrier="carrier2", device="s7"))


class TestDeterminism:
    def test_same_seed_same_bytes(self):
        spec = ScenarioSpec(Scenario.CALLEE_BYE, caller_side=Side.REMOTE, seed=9,
                            conversation_length_ms=3000)
        a, b = gen_call_trace(spec), gen_call_trace(spec)
        assert [record_to_dict(r) for r in a.records] == [record_to_dict(r) for r in b.records]
        assert a.truth == b.truth and a.ground.to_dict() == b.ground.to_dict()

    def test_different_seed_differs(self):
        a = gen_call_trace(ScenarioSpec(Scenario.CALLER_BYE, seed=1, conversation_length_ms=2000))
        b = gen_call_trace(ScenarioSpec(Scenario.CALLER_BYE, seed=2, conversation_length_ms=2000))
        assert [record_to_dict(r) for r in a.records] != [record_to_dict(r) for r in b.records]


class TestPhyStream:
    @given(st.sampled_from(["carrier1", "carrier2"]), st.integers(0, 2**31))
    def test_sr_events(self, carrier, seed):
        rng = random.Random(seed)
        sr, cqi = sample_phy_config(get_profile(carrier), rng)
        _, _, summary = gen_phy_stream(sr, cqi, rng)
        assert summary["resent_sr_tti"] == (summary["dropped_sr_tti"] + sr.periodicity_ms) % TTI_WRAP
        assert summary["ul_grant_tti"] == (summary["resent_sr_tti"] + 4) % TTI_WRAP

    @given(st.integers(0, 2**31))
    def test_interference_labels(self, seed):
        rng = random.Random(seed)
        sr, cqi = sample_phy_config(get_profile("carrier1"), rng)
        obs, truth, _ = gen_phy_stream(sr, cqi, rng)
        assert any(t["origin"] == "Other" for t in truth)
        for o, t in zip(obs, truth):
            if t["origin"] == "Other":
                assert abs(o.ta_us) <= 20 and o.snr_db < 0
            else:
                assert abs(o.ta_us) <= 2 and o.snr_db >= 10

    @given(st.sampled_from(["carrier1", "carrier2", "lab5g"]), st.integers(0, 2**31))
    def test_lossless_stream_recovers_config(self, carrier, seed):
        profile = get_profile(carrier)
        rng = random.Random(seed)
        sr, cqi = sample_phy_config(profile, rng)
        obs, _, _ = gen_phy_stream(sr, cqi, rng)
        assert guess_sr_config(obs, rat=profile.rat)[0] == sr
        if cqi is not None:
            assert guess_cqi_config(obs, profile.mimo)[0] == cqi


class TestCorpus:
    def test_n_validated(self):
        with pytest.raises(ValueError):
            gen_phy_param_corpus(0, "carrier1", seed=1)
        with pytest.raises(ValueError):
            gen_phy_param_corpus(1, "carrier1", seed=1, loss=1.0)

    def test_reproducible(self):
        a = gen_phy_param_corpus(3, "carrier2", seed=4)
        b = gen_phy_param_corpus(3, "carrier2", seed=4)
        assert [i.stream for i in a] == [i.stream for i in b]

    def test_loss_keeps_ground_truth(self):
        clean = gen_phy_param_corpus(30, "carrier1", seed=6)
        lossy = gen_phy_param_corpus(30, "carrier1", seed=6, loss=0.05)
        for c, l in zip(clean, lossy):
            assert (c.sr_config, c.cqi_config) == (l.sr_config, l.cqi_config)
            assert l.lossless == c.stream
            assert set(l.stream) <= set(c.stream)

    def test_all_lossless_items_recoverable(self):
        for item in gen_phy_param_corpus(60, "carrier2", seed=8):
            assert guess_sr_config(item.stream)[0] == item.sr_config
            assert all(isinstance(o, PucchObservation) for o in item.stream)


class TestPopulation:
    def test_shape(self):
        pop = gen_population(4, seed=2, devices=("s7",))
        assert len(pop.traces) == len(pop.attacker_log.entries) == len(pop.table) == 4
        for trace, dial in zip(pop.traces, pop.attacker_log.entries):
            assert trace.ground.call["call_direction"] == "Incoming"
            assert 0 < trace.ground.call["timestamp_ms"] - dial.dial_time_ms <= 5000

    def test_distinct_subscribers(self):
        subs = {Subscriber.from_seed(i).imsi for i in range(50)}
        assert len(subs) == 50


def test_sip_bearer_constant():
    assert SIP_DRB == 2 and RTP_DRB == 3
