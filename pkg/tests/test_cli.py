import hashlib
import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from volte_lab.cli import (EXIT_CONFIG, EXIT_MISMATCH, EXIT_MISSING, EXIT_OK, EXIT_SCHEMA,
                           EXIT_USAGE, main)
from volte_lab.identity_map import IdentityKind, NasKind, NasRecord
from volte_lab.pdcp_stream import Direction, PdcpRecord
from volte_lab.phy_sched import ObsKind, PucchObservation, Tti
from volte_lab.traceio import (SchemaError, read_trace, read_truth, record_from_dict,
                               record_to_dict, sidecar_paths, write_trace)


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def call_trace(tmp_path_factory):
    path = tmp_path_factory.mktemp("call") / "c1.jsonl"
    assert run("gen", "--what", "call", "--scenario", 1, "--seed", 7, "--out", path) == EXIT_OK
    return path


def digest(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


class TestTraceIo:
    records = [
        PucchObservation(ObsKind.SR, Tti(3, 4), 9, 0.25, 21.5),
        PdcpRecord(Direction.UPLINK, 12.5, 3, 4, 2, 1212),
        NasRecord(1.0, NasKind.ATTACH_REQUEST, IdentityKind.GUTI, "g", 0xC0FFEE12, False),
        NasRecord(2.0, NasKind.IDENTITY_RESPONSE, IdentityKind.IMSI, "001010000000001"),
    ]

    def test_round_trip(self, tmp_path):
        path = tmp_path / "t.jsonl"
        write_trace(path, self.records, [{"role": "x"}] * 4, {"k": 1})
        assert read_trace(path) == self.records
        rows, meta = read_truth(path)
        assert [r["index"] for r in rows] == [0, 1, 2, 3] and meta == {"k": 1}

    def test_truth_length_checked(self, tmp_path):
        with pytest.raises(ValueError):
            write_trace(tmp_path / "t.jsonl", self.records, [{}])

    def test_sidecars_do_not_match_trace_glob(self):
        truth, meta = sidecar_paths("dir/x.jsonl")
        assert not truth.name.endswith(".jsonl") and not meta.name.endswith(".jsonl")

    @pytest.mark.parametrize("obj,msg", [
        ({"kind": "phy"}, "missing field"),
        ({"kind": "pdcp", "direction": "UL", "time_ms": 0, "seq": "1", "lcid": 4, "drb": 2,
          "pdu_len": 10}, "wrong type"),
        ({"kind": "pdcp", "direction": "UL", "time_ms": 0, "seq": True, "lcid": 4, "drb": 2,
          "pdu_len": 10}, "wrong type"),
        ({"kind": "pdcp", "direction": "UL", "time_ms": 0, "seq": 1, "lcid": 4, "drb": 2,
          "pdu_len": 0}, "pdu_len"),
        ({"kind": "radio"}, "unknown record kind"),
    ])
    def test_schema_errors(self, obj, msg):
        with pytest.raises(SchemaError, match=msg):
            record_from_dict(obj)

    def test_line_numbers(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"kind":"radio"}\n')
        with pytest.raises(SchemaError, match="line 1"):
            read_trace(path)

    @given(st.integers(0, 1023), st.integers(0, 9), st.integers(0, 99),
           st.floats(-20, 20), st.floats(-10, 30))
    def test_phy_round_trip(self, sfn, sf, pucch, ta, snr):
        rec = PucchObservation(ObsKind.CQI, Tti(sfn, sf), pucch, ta, snr)
        assert record_from_dict(json.loads(json.dumps(record_to_dict(rec)))) == rec


class TestCommands:
    def test_analyze_scenario_one(self, call_trace, tmp_path):
        out = tmp_path / "a.json"
        assert run("analyze", "--in", call_trace, "--out", out) == EXIT_OK
        [rec] = json.loads(out.read_text())["call_records"]
        assert (rec["establish_status"], rec["termination_cause"]) == ("Missed", "CallerCancelRinging")

    def test_guess(self, call_trace, tmp_path):
        out = tmp_path / "g.json"
        assert run("guess", "--in", call_trace, "--out", out) == EXIT_OK
        [entry] = json.loads(out.read_text())["phy_params"]
        _, meta = read_truth(call_trace)
        assert entry["sr_config"] == meta["sr_config"]
        assert entry["cqi_config"] == meta["cqi_config"]

    def test_report_sections_and_text(self, call_trace, tmp_path):
        out = tmp_path / "r.json"
        assert run("report", "--in", call_trace, "--out", out) == EXIT_OK
        report = json.loads(out.read_text())
        for key in ("provenance", "phy_params", "signalling_log", "call_records", "activity",
                    "bindings"):
            assert key in report
        assert "[call]" in out.with_suffix(".txt").read_text()

    def test_report_deterministic(self, call_trace, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        run("report", "--in", call_trace, "--out", a)
        run("report", "--in", call_trace, "--out", b)
        assert a.read_bytes() == b.read_bytes()

    def test_input_untouched(self, call_trace, tmp_path):
        before = digest(call_trace)
        run("report", "--in", call_trace, "--out", tmp_path / "r.json")
        assert digest(call_trace) == before

    def test_empty_trace(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("")
        out = tmp_path / "e.json"
        assert run("analyze", "--in", path, "--out", out) == EXIT_OK
        report = json.loads(out.read_text())
        assert report["call_records"] == [] and report["signalling_log"][0]["events"] == []

    def test_population_mapid(self, tmp_path):
        pop = tmp_path / "pop"
        assert run("gen", "--what", "population", "--n", 3, "--seed", 4, "--out", pop) == EXIT_OK
        out = tmp_path / "m.json"
        traces = sorted(pop.glob("victim_*.jsonl"))
        assert run("mapid", "--in", *traces, "--attacker", pop / "attacker.json", "--out", out) == 0
        bindings = json.loads(out.read_text())["bindings"]
        table = json.loads((pop / "identities.json").read_text())
        assert {(b["identity"], b["phone_number"]) for b in bindings} == set(table.items())
        assert all(b["confidence"] == "Unique" for b in bindings)

    def test_tampered_attach_reports_imsi(self, tmp_path):
        path = tmp_path / "att.jsonl"
        assert run("gen", "--what", "attach", "--tamper", "--seed", 3, "--out", path) == EXIT_OK
        out = tmp_path / "r.json"
        assert run("report", "--in", path, "--out", out) == EXIT_OK
        _, meta = read_truth(path)
        assert json.loads(out.read_text())["imsi"][0]["imsi"] == meta["nas"]["imsi"]

    def test_corpus(self, tmp_path):
        assert run("gen", "--what", "corpus", "--n", 3, "--out", tmp_path / "c") == EXIT_OK
        assert len(list((tmp_path / "c").glob("stream_*.jsonl"))) == 3


class TestExitCodes:
    def test_usage(self):
        assert run("frobnicate") == EXIT_USAGE
        assert run("analyze") == EXIT_USAGE

    def test_unknown_profile(self, call_trace):
        assert run("analyze", "--in", call_trace, "--profile", "carrier9") == EXIT_CONFIG

    def test_bad_loss(self, tmp_path):
        assert run("gen", "--what", "corpus", "--loss", 1.5, "--out", tmp_path / "x") == EXIT_CONFIG

    def test_gen_needs_out(self):
        assert run("gen") == EXIT_CONFIG

    def test_missing_file(self, tmp_path):
        assert run("analyze", "--in", tmp_path / "nope.jsonl") == EXIT_MISSING

    def test_schema(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text("{not json\n")
        assert run("analyze", "--in", path) == EXIT_SCHEMA

    def test_profile_mismatch(self, call_trace):
        assert run("analyze", "--in", call_trace, "--profile", "carrier2",
                   "--device", "iphone11") == EXIT_MISMATCH

    def test_device_not_on_carrier(self, tmp_path):
        assert run("gen", "--profile", "carrier2", "--device", "s7",
                   "--out", tmp_path / "x.jsonl") == EXIT_MISMATCH

    def test_scenario_device_mismatch(self, tmp_path):
        assert run("gen", "--scenario", 3, "--caller", "victim",
                   "--out", tmp_path / "x.jsonl") == EXIT_MISMATCH
