"""Serialization: JSONL streams, config files, reports, CSV tables.

Stream lines are one JSON object per line:

    {"t": 3, "p": 0.42, "s": 0.17, "H": 1.9, "boundary": false,
     "verifier": 0.83, "token": "..."}

t/p/s are required, the rest optional; unknown keys are ignored so
producers may attach their own metadata. t must be strictly
increasing. Paired-distribution lines for the diagnostics path carry
full vectors instead:

    {"t": 3, "P": [...], "S": [...], "y": 17, "H": 1.9}

All emitters sort object keys and use repr-stable floats, so a rerun
with identical inputs is byte-identical.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
from typing import IO, Iterable, Iterator

import numpy as np

from .controller import Certificate, EngineConfig, TraceRow
from .lift import TokenRecord
from .simlab import CalibrationReport, SweepCell
from .skeleton import DiagnosticsReport, DistStep

__all__ = [
    "StreamFormatError",
    "parse_stream",
    "record_to_dict",
    "write_stream",
    "parse_dist_stream",
    "certificate_to_dict",
    "trace_row_to_dict",
    "report_to_dict",
    "diagnostics_to_dict",
    "load_config_file",
    "dump_json_line",
    "write_risk_csv",
    "write_sweep_csv",
]


class StreamFormatError(ValueError):
    """A stream line failed validation; carries line number and field."""

    def __init__(self, line_no: int, field: str, message: str):
        self.line_no = line_no
        self.field = field
        super().__init__(f"line {line_no}: {field}: {message}")


def dump_json_line(obj: dict) -> str:
    """Canonical single-line JSON: sorted keys, no spaces."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


# ---------------------------------------------------------------------------
# token streams


def _req_number(obj: dict, key: str, line_no: int) -> float:
    if key not in obj:
        raise StreamFormatError(line_no, key, "missing required field")
    val = obj[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise StreamFormatError(line_no, key, f"must be a number, got {val!r}")
    if not math.isfinite(val):
        raise StreamFormatError(line_no, key, "must be finite")
    return float(val)


def parse_stream(lines: Iterable[str]) -> Iterator[TokenRecord]:
    """Validate and yield records lazily from an iterable of JSONL lines.

    Blank lines are allowed and skipped. Raises StreamFormatError with
    the offending line number and field name.
    """
    last_t: int | None = None
    for line_no, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise StreamFormatError(line_no, "json", str(exc)) from exc
        if not isinstance(obj, dict):
            raise StreamFormatError(line_no, "json", "each line must be an object")

        if "t" not in obj:
            raise StreamFormatError(line_no, "t", "missing required field")
        t = obj["t"]
        if isinstance(t, bool) or not isinstance(t, int):
            raise StreamFormatError(line_no, "t", f"must be an integer, got {t!r}")
        if t < 1:
            raise StreamFormatError(line_no, "t", f"must be >= 1, got {t}")
        if last_t is not None and t <= last_t:
            raise StreamFormatError(
                line_no, "t", f"must increase strictly, got {t} after {last_t}"
            )
        last_t = t

        p = _req_number(obj, "p", line_no)
        if not (0.0 < p <= 1.0):
            raise StreamFormatError(line_no, "p", f"must be in (0, 1], got {p}")
        s = _req_number(obj, "s", line_no)
        if not (0.0 <= s <= 1.0):
            raise StreamFormatError(line_no, "s", f"must be in [0, 1], got {s}")

        entropy = None
        if obj.get("H") is not None:
            entropy = _req_number(obj, "H", line_no)
            if entropy < 0:
                raise StreamFormatError(line_no, "H", f"must be >= 0, got {entropy}")

        boundary = obj.get("boundary", False)
        if not isinstance(boundary, bool):
            raise StreamFormatError(line_no, "boundary", "must be a boolean")

        verifier = None
        if obj.get("verifier") is not None:
            verifier = _req_number(obj, "verifier", line_no)
            if not (0.0 <= verifier <= 1.0):
                raise StreamFormatError(
                    line_no, "verifier", f"must be in [0, 1], got {verifier}"
                )

        token = obj.get("token")
        if token is not None and not isinstance(token, str):
            raise StreamFormatError(line_no, "token", "must be a string")

        yield TokenRecord(
            index=t,
            full_prob=p,
            skeleton_prob=s,
            entropy=entropy,
            is_boundary=boundary,
            verifier_score=verifier,
            token_text=token,
        )


def record_to_dict(record: TokenRecord) -> dict:
    obj: dict = {"t": record.index, "p": record.full_prob, "s": record.skeleton_prob}
    if record.entropy is not None:
        obj["H"] = record.entropy
    if record.is_boundary:
        obj["boundary"] = True
    if record.verifier_score is not None:
        obj["verifier"] = record.verifier_score
    if record.token_text is not None:
        obj["token"] = record.token_text
    return obj


def write_stream(records: Iterable[TokenRecord], fh: IO[str]) -> int:
    """Write records as JSONL. Returns the number of lines written."""
    n = 0
    for record in records:
        fh.write(dump_json_line(record_to_dict(record)) + "\n")
        n += 1
    return n


# ---------------------------------------------------------------------------
# paired-distribution streams


def parse_dist_stream(lines: Iterable[str]) -> Iterator[DistStep]:
    """Yield DistStep objects from paired-distribution JSONL lines."""
    last_t: int | None = None
    for line_no, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise StreamFormatError(line_no, "json", str(exc)) from exc
        if not isinstance(obj, dict):
            raise StreamFormatError(line_no, "json", "each line must be an object")
        t = obj.get("t")
        if isinstance(t, bool) or not isinstance(t, int) or t < 1:
            raise StreamFormatError(line_no, "t", f"must be an integer >= 1, got {t!r}")
        if last_t is not None and t <= last_t:
            raise StreamFormatError(
                line_no, "t", f"must increase strictly, got {t} after {last_t}"
            )
        last_t = t
        for key in ("P", "S"):
            if key not in obj or not isinstance(obj[key], list) or not obj[key]:
                raise StreamFormatError(line_no, key, "must be a non-empty array")
        if "y" not in obj or isinstance(obj["y"], bool) or not isinstance(obj["y"], int):
            raise StreamFormatError(line_no, "y", "must be an integer token index")
        entropy = None
        if obj.get("H") is not None:
            entropy = _req_number(obj, "H", line_no)
        try:
            full = np.asarray(obj["P"], dtype=float)
            skel = np.asarray(obj["S"], dtype=float)
        except (TypeError, ValueError) as exc:
            raise StreamFormatError(line_no, "P", f"not numeric: {exc}") from exc
        yield DistStep(full=full, skeleton=skel, token=obj["y"], entropy=entropy)


# ---------------------------------------------------------------------------
# reports


def certificate_to_dict(cert: Certificate) -> dict:
    obj = dataclasses.asdict(cert)
    obj.pop("trace", None)
    obj["reset_times"] = list(cert.reset_times)
    return obj


def trace_row_to_dict(row: TraceRow) -> dict:
    return dataclasses.asdict(row)


def report_to_dict(report: CalibrationReport) -> dict:
    obj = dataclasses.asdict(report)
    for key in ("risk_curve", "ci_low", "ci_high"):
        obj[key] = list(obj[key])
    return obj


def diagnostics_to_dict(report: DiagnosticsReport) -> dict:
    obj = dataclasses.asdict(report)
    obj["rejection_reasons"] = list(report.rejection_reasons)
    for key in ("kl_full_skeleton", "kl_skeleton_full"):
        if math.isinf(obj[key]):
            obj[key] = "inf"
        elif math.isnan(obj[key]):
            obj[key] = None
    if obj["saturation_rate"] != obj["saturation_rate"]:
        obj["saturation_rate"] = None
    if obj["mean_lift"] != obj["mean_lift"]:
        obj["mean_lift"] = None
    return obj


# ---------------------------------------------------------------------------
# config files


def load_config_file(path: str) -> EngineConfig:
    """Read an EngineConfig from a JSON file; unknown keys are errors."""
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    return EngineConfig.from_dict(data)


# ---------------------------------------------------------------------------
# CSV tables


def write_risk_csv(report: CalibrationReport, fh: IO[str]) -> None:
    """Risk curve as (t, r_t, ci_lo, ci_hi) rows."""
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["t", "r_t", "ci_lo", "ci_hi"])
    for i in range(report.length):
        writer.writerow(
            [
                i + 1,
                repr(report.risk_curve[i]),
                repr(report.ci_low[i]),
                repr(report.ci_high[i]),
            ]
        )


def write_sweep_csv(cells: Iterable[SweepCell], fh: IO[str]) -> None:
    """Sweep cells as (v_factor, eta_factor, risk, mean_stop) rows."""
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["v_factor", "eta_factor", "risk", "mean_stop"])
    for cell in cells:
        writer.writerow(
            [repr(cell.v_factor), repr(cell.eta_factor), repr(cell.risk), repr(cell.mean_stop)]
        )
