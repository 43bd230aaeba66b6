"""CSV emission and reading for traces, reports and analytic curves.

Numbers are written with 9 significant digits and no locale, so a file
re-emitted from its own parsed contents is byte-identical.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import fields
from typing import Iterable, Optional, Sequence

from .analysis import FairnessReport
from .model import FlowSample, ScenarioSpec, TraceRecord

FLOW_COLUMNS = tuple(f.name for f in fields(FlowSample))
LINK_COLUMNS = ("fwd_backlog", "bwd_backlog", "fwd_loss_rate", "ecn_mark_prob")
REPORT_COLUMNS = (
    "per_flow_mean_rate",
    "jain_index",
    "last_to_first_ratio",
    "reno_to_fast_ratio",
    "fwd_mean_backlog",
    "bwd_mean_backlog",
)


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, int):
        return str(x)
    x = float(x)
    if x == 0.0:
        return "0"  # folds -0.0 as well
    return format(x, ".9g")


def num(raw: str) -> Optional[float]:
    return None if raw == "" else float(raw)


def _write(rows: Iterable[Sequence[str]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerows(rows)
    return buf.getvalue()


def _read(text: str) -> list:
    return list(csv.reader(io.StringIO(text)))


# --- trace ---------------------------------------------------------------

def trace_header(spec: ScenarioSpec) -> list:
    cols = ["t"]
    for f in spec.flows:
        cols += [f"{c}_{f.id}" for c in FLOW_COLUMNS]
    return cols + list(LINK_COLUMNS)


def trace_csv(trace: Sequence[TraceRecord], spec: ScenarioSpec) -> str:
    def row(rec: TraceRecord) -> list:
        out = [fmt(rec.t)]
        for s in rec.flows:
            out += [fmt(s.w), fmt(s.x), fmt(s.d_hat), fmt(s.r_hat), fmt(s.q_hat)]
        out += [fmt(rec.fwd_backlog), fmt(rec.bwd_backlog), fmt(rec.fwd_loss_rate), fmt(rec.ecn_mark_prob)]
        return out

    return _write([trace_header(spec)] + [row(r) for r in trace])


def read_trace(text: str) -> list:
    rows = _read(text)
    header, body = rows[0], rows[1:]
    n = (len(header) - 1 - len(LINK_COLUMNS)) // len(FLOW_COLUMNS)
    out = []
    for r in body:
        vals = [float(v) for v in r]
        flows = tuple(
            FlowSample(*vals[1 + i * len(FLOW_COLUMNS): 1 + (i + 1) * len(FLOW_COLUMNS)]) for i in range(n)
        )
        tail = vals[1 + n * len(FLOW_COLUMNS):]
        out.append(TraceRecord(vals[0], flows, *tail))
    return out


# --- report --------------------------------------------------------------

def _report_row(rep: FairnessReport) -> list:
    return [
        ";".join(fmt(x) for x in rep.per_flow_mean_rate),
        fmt(rep.jain_index),
        fmt(rep.last_to_first_ratio),
        fmt(rep.reno_to_fast_ratio),
        fmt(rep.fwd_mean_backlog),
        fmt(rep.bwd_mean_backlog),
    ]


def _parse_report(cells: Sequence[str]) -> FairnessReport:
    rates = tuple(float(x) for x in cells[0].split(";")) if cells[0] else ()
    return FairnessReport(
        per_flow_mean_rate=rates,
        jain_index=float(cells[1]),
        last_to_first_ratio=float(cells[2]),
        reno_to_fast_ratio=num(cells[3]),
        fwd_mean_backlog=float(cells[4]),
        bwd_mean_backlog=float(cells[5]),
    )


def report_csv(rep: FairnessReport) -> str:
    return _write([REPORT_COLUMNS, _report_row(rep)])


def read_report(text: str) -> FairnessReport:
    rows = _read(text)
    if tuple(rows[0]) != REPORT_COLUMNS:
        raise ValueError(f"unexpected report header {rows[0]}")
    return _parse_report(rows[1])


def sweep_csv(axis: str, results: Sequence[tuple]) -> str:
    """``results`` holds (value, report or None, error code or '') per run."""
    rows = [(axis,) + REPORT_COLUMNS + ("error",)]
    for value, rep, err in results:
        cells = _report_row(rep) if rep is not None else [""] * len(REPORT_COLUMNS)
        rows.append([fmt(value)] + cells + [err])
    return _write(rows)


def read_sweep(text: str) -> list:
    rows = _read(text)
    out = []
    for r in rows[1:]:
        rep = _parse_report(r[1:-1]) if r[2] != "" else None
        out.append((float(r[0]), rep, r[-1]))
    return out


# --- curves --------------------------------------------------------------

def curves_csv(columns: Sequence[str], rows: Iterable[Sequence[float]]) -> str:
    return _write([list(columns)] + [[fmt(x) for x in r] for r in rows])


def read_curves(text: str) -> tuple:
    rows = _read(text)
    return tuple(rows[0]), [tuple(math.nan if c == "" else float(c) for c in r) for r in rows[1:]]
