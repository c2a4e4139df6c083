"""Line-delimited JSON trace files and their ground-truth sidecars.

A trace ``x.jsonl`` holds one record per line tagged ``kind`` = phy, pdcp or
nas.  ``x.truth.ndjson`` has exactly one row per trace line and
``x.meta.json`` carries the scenario-level ground truth.
"""
from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Iterable, Union

from .identity_map import IdentityKind, NasKind, NasRecord
from .pdcp_stream import Direction, PdcpRecord
from .phy_sched import ObsKind, PucchObservation, Tti


class SchemaError(ValueError):
    pass


PHY_FIELDS = {"kind2": str, "sfn": int, "subframe": int, "pucch_index": int,
              "ta_us": (int, float), "snr_db": (int, float)}
PDCP_FIELDS = {"direction": str, "time_ms": (int, float), "seq": int, "lcid": int,
               "drb": int, "pdu_len": int}
NAS_FIELDS = {"time_ms": (int, float), "kind2": str, "identity_kind": str,
              "identity_value": str, "m_tmsi": (str, type(None)), "integrity_valid": bool}


def record_to_dict(rec) -> dict:
    if isinstance(rec, PucchObservation):
        return {"kind": "phy", "kind2": rec.kind.value, "sfn": rec.tti.sfn,
                "subframe": rec.tti.subframe, "pucch_index": rec.pucch_index,
                "ta_us": rec.ta_us, "snr_db": rec.snr_db}
    if isinstance(rec, PdcpRecord):
        return {"kind": "pdcp", "direction": rec.direction.value, "time_ms": rec.time_ms,
                "seq": rec.seq, "lcid": rec.lcid, "drb": rec.drb, "pdu_len": rec.pdu_len}
    if isinstance(rec, NasRecord):
        return {"kind": "nas", "time_ms": rec.time_ms, "kind2": rec.kind.value,
                "identity_kind": rec.identity_kind.value, "identity_value": rec.identity_value,
                "m_tmsi": None if rec.m_tmsi is None else f"0x{rec.m_tmsi:08X}",
                "integrity_valid": rec.integrity_valid}
    raise TypeError(f"cannot serialise {type(rec).__name__}")


def _check(obj: dict, fields: dict, where: str) -> None:
    for name, typ in fields.items():
        if name not in obj:
            raise SchemaError(f"{where}: missing field {name!r}")
        value = obj[name]
        # bool is an int subclass; only accept it where a flag is expected
        if not isinstance(value, typ) or (isinstance(value, bool) and typ is not bool):
            raise SchemaError(f"{where}: field {name!r} has wrong type")
        if isinstance(value, float) and not math.isfinite(value):
            raise SchemaError(f"{where}: field {name!r} is not finite")


def record_from_dict(obj: dict, where: str = "record"):
    if not isinstance(obj, dict):
        raise SchemaError(f"{where}: not an object")
    kind = obj.get("kind")
    try:
        if kind == "phy":
            _check(obj, PHY_FIELDS, where)
            return PucchObservation(ObsKind(obj["kind2"]), Tti(obj["sfn"], obj["subframe"]),
                                    obj["pucch_index"], float(obj["ta_us"]), float(obj["snr_db"]))
        if kind == "pdcp":
            _check(obj, PDCP_FIELDS, where)
            return PdcpRecord(Direction.parse(obj["direction"]), float(obj["time_ms"]), obj["seq"],
                              obj["lcid"], obj["drb"], obj["pdu_len"])
        if kind == "nas":
            _check(obj, NAS_FIELDS, where)
            m_tmsi = obj["m_tmsi"]
            return NasRecord(float(obj["time_ms"]), NasKind(obj["kind2"]),
                             IdentityKind(obj["identity_kind"]), obj["identity_value"],
                             None if m_tmsi is None else int(m_tmsi, 16), obj["integrity_valid"])
    except SchemaError:
        raise
    except (ValueError, TypeError) as exc:
        raise SchemaError(f"{where}: {exc}") from exc
    raise SchemaError(f"{where}: unknown record kind {kind!r}")


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def sidecar_paths(path: Union[str, Path]) -> tuple[Path, Path]:
    path = Path(path)
    stem = path.name[:-len(".jsonl")] if path.name.endswith(".jsonl") else path.name
    return path.with_name(stem + ".truth.ndjson"), path.with_name(stem + ".meta.json")


def write_trace(path: Union[str, Path], records: Iterable, truth: Iterable = None,
                meta: dict = None) -> None:
    path = Path(path)
    records = list(records)
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(_dumps(record_to_dict(rec)) + "\n")
    if truth is not None:
        truth = list(truth)
        if len(truth) != len(records):
            raise ValueError("truth must have one row per record")
        truth_path, meta_path = sidecar_paths(path)
        with open(truth_path, "w", encoding="utf-8") as fh:
            for i, row in enumerate(truth):
                fh.write(_dumps({"index": i, **row}) + "\n")
        if meta is not None:
            meta_path.write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def read_trace(path: Union[str, Path]) -> list:
    records = []
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"line {n}: invalid JSON ({exc.msg})") from exc
            records.append(record_from_dict(obj, f"line {n}"))
    return records


def read_truth(path: Union[str, Path]) -> tuple[list, dict]:
    truth_path, meta_path = sidecar_paths(path)
    with open(truth_path, encoding="utf-8") as fh:
        rows = [json.loads(line) for line in fh if line.strip()]
    meta = json.loads(meta_path.read_text(encoding="utf-8")) if meta_path.exists() else {}
    return rows, meta
