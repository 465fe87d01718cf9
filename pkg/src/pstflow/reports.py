"""CSV and JSON serialization of analysis results.

All numbers are written with six decimals so repeated runs produce
byte-identical files. Multi-table CSV reports are split into titled
sections (a line holding only the section name, then a header row).
"""

from __future__ import annotations

import csv
import io
import json
import math
from typing import Any, Iterable, Sequence

from .ac_powerflow import PowerFlowSolution
from .dc_atc import AtcResult
from .network_matrix import AdmittanceMatrix
from .studies import ContingencyRecord, SweepResult, ViolationReport


def fmt(x: Any) -> str:
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    s = f"{x:.6f}"
    return "0.000000" if s == "-0.000000" else s


def _num(x: float | None) -> float | None:
    """JSON-safe rounded number; non-finite values become null."""
    if x is None or not math.isfinite(x):
        return None
    return round(x, 6) + 0.0


def _write_sections(sections: Iterable[tuple[str | None, Sequence[str], Iterable[Sequence[Any]]]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for title, header, rows in sections:
        if title is not None:
            w.writerow([title])
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def dumps_json(obj: Any) -> str:
    return json.dumps(obj, indent=2) + "\n"


# -- power flow ---------------------------------------------------------------

def solution_csv(sol: PowerFlowSolution) -> str:
    buses = [(bid, vm, va) for bid, vm, va in zip(sol.bus_ids, sol.vm_pu, sol.va_deg)]
    branches = [
        (f.branch_id, f.p_from_mw, f.q_from_mvar, f.p_to_mw, f.q_to_mvar, f.loading_pct)
        for f in sol.branch_flows
    ]
    return _write_sections([
        ("BUS", ["id", "vm_pu", "va_deg"], buses),
        ("BRANCH", ["id", "p_from_mw", "q_from_mvar", "p_to_mw", "q_to_mvar", "loading_pct"], branches),
    ])


def solution_dict(sol: PowerFlowSolution) -> dict:
    return {
        "converged": sol.converged,
        "iterations": sol.iterations,
        "max_mismatch_pu": sol.max_mismatch_pu,
        "use_correction": sol.use_correction,
        "total_loss_mw": _num(sol.total_loss_mw),
        "buses": [
            {"id": bid, "vm_pu": _num(vm), "va_deg": _num(va), "p_gen_mw": _num(pg), "q_gen_mvar": _num(qg)}
            for bid, vm, va, pg, qg in zip(sol.bus_ids, sol.vm_pu, sol.va_deg, sol.p_gen_mw, sol.q_gen_mvar)
        ],
        "branches": [
            {"id": f.branch_id, "in_service": f.in_service,
             "p_from_mw": _num(f.p_from_mw), "q_from_mvar": _num(f.q_from_mvar),
             "p_to_mw": _num(f.p_to_mw), "q_to_mvar": _num(f.q_to_mvar),
             "loading_pct": _num(f.loading_pct)}
            for f in sol.branch_flows
        ],
    }


# -- violations ---------------------------------------------------------------

def violations_csv(report: ViolationReport) -> str:
    return _write_sections([
        ("VOLTAGE", ["bus_id", "vm_pu", "limit", "deficit_pu"],
         [(v.bus_id, v.vm_pu, v.limit, v.deficit_pu) for v in report.voltage]),
        ("THERMAL", ["branch_id", "loading_pct", "rating_mva"],
         [(t.branch_id, t.loading_pct, t.rating_mva) for t in report.thermal]),
    ])


def violations_dict(report: ViolationReport) -> dict:
    return {
        "low_v_count": report.low_v_count,
        "high_v_count": report.high_v_count,
        "thermal_count": report.thermal_count,
        "voltage": [{"bus_id": v.bus_id, "vm_pu": _num(v.vm_pu), "limit": v.limit,
                     "deficit_pu": _num(v.deficit_pu)} for v in report.voltage],
        "thermal": [{"branch_id": t.branch_id, "loading_pct": _num(t.loading_pct),
                     "rating_mva": _num(t.rating_mva)} for t in report.thermal],
    }


# -- sweep --------------------------------------------------------------------

SWEEP_COLUMNS = ["phi_deg", "corrected", "target_flow_mw", "target_loading_pct",
                 "total_loss_mw", "extra_line_violations", "low_v_count", "high_v_count"]


def sweep_csv(result: SweepResult) -> str:
    header = SWEEP_COLUMNS + [f"vm_pu_bus_{b}" for b in result.tracked_buses]
    rows = []
    for r in result.rows:
        if not r.converged:
            # failure marker in every metric column; never interpolated
            rows.append([r.phase_shift_deg, r.corrected]
                        + ["failed"] * (len(header) - 2))
            continue
        rows.append([r.phase_shift_deg, r.corrected, r.target_flow_mw, r.target_loading_pct,
                     r.total_loss_mw, r.extra_line_violations, r.low_v_count, r.high_v_count,
                     *r.tracked_vm_pu])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def sweep_dict(result: SweepResult) -> dict:
    return {
        "pst_branch": result.pst_branch,
        "target_branch": result.target_branch,
        "tracked_buses": list(result.tracked_buses),
        "rows": [
            {"phi_deg": _num(r.phase_shift_deg), "corrected": r.corrected, "converged": r.converged,
             "target_flow_mw": _num(r.target_flow_mw), "target_loading_pct": _num(r.target_loading_pct),
             "total_loss_mw": _num(r.total_loss_mw), "extra_line_violations": r.extra_line_violations,
             "low_v_count": r.low_v_count, "high_v_count": r.high_v_count,
             "tracked_vm_pu": [_num(v) for v in r.tracked_vm_pu]}
            for r in result.rows
        ],
    }


# -- ATC ----------------------------------------------------------------------

def atc_csv(results: Sequence[AtcResult]) -> str:
    sections = [(
        "SUMMARY",
        ["transfer_name", "use_correction", "atc_mw", "binding_branch"],
        [(r.transfer_name, r.use_correction, r.atc_mw, r.binding_branch) for r in results],
    )]
    for r in results:
        sections.append((
            f"BRANCH use_correction={fmt(r.use_correction)}",
            ["branch_id", "base_flow_mw", "ptdf", "headroom_mw"],
            [(bid, r.base_flow_mw[bid], r.ptdf[bid], r.headroom_mw[bid]) for bid in sorted(r.ptdf)],
        ))
    return _write_sections(sections)


def atc_dict(results: Sequence[AtcResult]) -> dict:
    return {
        "results": [
            {"transfer_name": r.transfer_name, "use_correction": r.use_correction,
             "atc_mw": _num(r.atc_mw), "unbounded": r.unbounded, "binding_branch": r.binding_branch,
             "branches": [
                 {"branch_id": bid, "base_flow_mw": _num(r.base_flow_mw[bid]),
                  "ptdf": _num(r.ptdf[bid]), "headroom_mw": _num(r.headroom_mw[bid])}
                 for bid in sorted(r.ptdf)
             ]}
            for r in results
        ]
    }


# -- contingencies ------------------------------------------------------------

def contingency_csv(records: Sequence[ContingencyRecord]) -> str:
    return _write_sections([(
        None,
        ["outage_branch", "status", "worst_voltage_pu", "worst_loading_pct", "violation_count"],
        [(c.outage_branch, c.status, c.worst_voltage_pu, c.worst_loading_pct,
          c.report.count if c.report is not None else None) for c in records],
    )])


def contingency_dict(records: Sequence[ContingencyRecord]) -> dict:
    return {
        "contingencies": [
            {"outage_branch": c.outage_branch, "status": c.status, "converged": c.converged,
             "islanded": c.islanded, "worst_voltage_pu": _num(c.worst_voltage_pu),
             "worst_loading_pct": _num(c.worst_loading_pct),
             "violations": violations_dict(c.report) if c.report is not None else None}
            for c in records
        ]
    }


# -- admittance matrix --------------------------------------------------------

def ybus_dict(y: AdmittanceMatrix) -> dict:
    return {
        "bus_ids": list(y.bus_ids),
        "entries": [{"i": i, "k": k, "re": float(f"{v.real + 0.0:.12g}"), "im": float(f"{v.imag + 0.0:.12g}")}
                    for i, k, v in y.entries()],
    }
