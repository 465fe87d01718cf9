"""Violation scanning, phase-angle sweeps and N-1 contingency scans."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

from .ac_powerflow import (
    PowerFlowError,
    PowerFlowSolution,
    SolveOptions,
    solve,
)
from .grid_model import Network, is_connected, with_branch, with_phase_shift


@dataclass(frozen=True)
class VoltageViolation:
    bus_id: int
    vm_pu: float
    limit: str  # "low" or "high"
    deficit_pu: float  # distance past the violated limit, always > 0


@dataclass(frozen=True)
class ThermalViolation:
    branch_id: int
    loading_pct: float
    rating_mva: float


@dataclass(frozen=True)
class ViolationReport:
    voltage: tuple[VoltageViolation, ...] = ()
    thermal: tuple[ThermalViolation, ...] = ()

    @property
    def low_v_count(self) -> int:
        return sum(1 for v in self.voltage if v.limit == "low")

    @property
    def high_v_count(self) -> int:
        return sum(1 for v in self.voltage if v.limit == "high")

    @property
    def thermal_count(self) -> int:
        return len(self.thermal)

    @property
    def count(self) -> int:
        return len(self.voltage) + len(self.thermal)

    def thermal_excluding(self, branch_id: int | None) -> int:
        return sum(1 for t in self.thermal if t.branch_id != branch_id)


def scan_violations(net: Network, sol: PowerFlowSolution) -> ViolationReport:
    """Voltage and thermal limit violations of a converged solution.

    Limits are strict: a bus exactly at ``vmin_pu``/``vmax_pu`` or a branch at
    exactly 100% of its rating is not flagged. Unrated branches (rating 0)
    are never flagged.
    """
    if not sol.converged:
        raise ValueError("cannot scan an unconverged solution")
    voltage = []
    for bid, vm in zip(sol.bus_ids, sol.vm_pu):
        bus = net.bus(bid)
        if vm < bus.vmin_pu:
            voltage.append(VoltageViolation(bid, vm, "low", bus.vmin_pu - vm))
        elif vm > bus.vmax_pu:
            voltage.append(VoltageViolation(bid, vm, "high", vm - bus.vmax_pu))
    thermal = [
        ThermalViolation(f.branch_id, f.loading_pct, f.rating_mva)
        for f in sol.branch_flows
        if f.in_service and f.rating_mva > 0 and f.max_mva > f.rating_mva
    ]
    return ViolationReport(tuple(voltage), tuple(thermal))


# ---------------------------------------------------------------------------
# Angle sweep
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepRow:
    phase_shift_deg: float
    corrected: bool
    converged: bool
    target_flow_mw: float = math.nan
    target_loading_pct: float | None = None
    total_loss_mw: float = math.nan
    extra_line_violations: int = 0
    low_v_count: int = 0
    high_v_count: int = 0
    tracked_vm_pu: tuple[float, ...] = ()


@dataclass(frozen=True)
class SweepResult:
    pst_branch: int
    target_branch: int
    tracked_buses: tuple[int, ...]
    rows: tuple[SweepRow, ...]


def sweep_angles(from_deg: float, to_deg: float, step_deg: float) -> list[float]:
    """Inclusive, evenly spaced angles; float drift is rounded away."""
    if not step_deg > 0:
        raise ValueError("step must be positive")
    if to_deg < from_deg:
        raise ValueError("empty angle range")
    count = int(math.floor((to_deg - from_deg) / step_deg + 1e-9)) + 1
    return [float(round(from_deg + i * step_deg, 9)) for i in range(count)]


def angle_sweep(
    net: Network,
    pst_branch: int,
    from_deg: float,
    to_deg: float,
    step_deg: float = 1.0,
    track_branch: int | None = None,
    track_buses: Sequence[int] = (),
    opts: SolveOptions | None = None,
) -> SweepResult:
    """Solve the AC flow at each PST angle, with and without correction.

    ``track_branch`` is the monitored (target) branch; it defaults to the PST
    itself and is excluded from ``extra_line_violations``. Rows are ordered
    by angle, uncorrected first. Points that fail to converge are kept as
    rows with ``converged=False``. ``net`` is never modified.
    """
    br = net.branch(pst_branch)
    if br.transformer is None:
        raise ValueError(f"branch {pst_branch} is not a transformer")
    target = pst_branch if track_branch is None else track_branch
    net.branch(target)
    for bid in track_buses:
        net.bus(bid)
    opts = opts or SolveOptions()
    rows = []
    for phi in sweep_angles(from_deg, to_deg, step_deg):
        case = with_phase_shift(net, pst_branch, phi)
        for corrected in (False, True):
            rows.append(_sweep_point(case, phi, corrected, target, track_buses,
                                     replace(opts, use_correction=corrected)))
    return SweepResult(pst_branch, target, tuple(track_buses), tuple(rows))


def _sweep_point(case, phi, corrected, target, track_buses, opts) -> SweepRow:
    try:
        sol = solve(case, opts)
    except PowerFlowError:
        return SweepRow(phi, corrected, False)
    report = scan_violations(case, sol)
    flow = sol.flow(target)
    return SweepRow(
        phase_shift_deg=phi,
        corrected=corrected,
        converged=True,
        target_flow_mw=flow.p_from_mw,
        target_loading_pct=flow.loading_pct,
        total_loss_mw=sol.total_loss_mw,
        extra_line_violations=report.thermal_excluding(target),
        low_v_count=report.low_v_count,
        high_v_count=report.high_v_count,
        tracked_vm_pu=tuple(sol.vm(b) for b in track_buses),
    )


# ---------------------------------------------------------------------------
# Contingencies
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ContingencyRecord:
    outage_branch: int
    converged: bool
    islanded: bool
    report: ViolationReport | None = None
    solution: PowerFlowSolution | None = None

    @property
    def status(self) -> str:
        if self.islanded:
            return "islanded"
        return "ok" if self.converged else "diverged"

    @property
    def worst_voltage_pu(self) -> float | None:
        """Lowest bus voltage magnitude in the post-outage solution."""
        if self.solution is None:
            return None
        return min(self.solution.vm_pu)

    @property
    def worst_loading_pct(self) -> float | None:
        if self.solution is None:
            return None
        loads = [f.loading_pct for f in self.solution.branch_flows if f.loading_pct is not None]
        return max(loads) if loads else None


def contingency_scan(
    net: Network, outages: Sequence[int], opts: SolveOptions | None = None
) -> list[ContingencyRecord]:
    """Re-solve the AC flow with each listed branch taken out of service.

    Outages that split the network are marked islanded and not solved;
    solver failures are recorded as unconverged. The base network object is
    left untouched.
    """
    for bid in outages:
        if bid not in net.branch_by_id:
            raise KeyError(f"unknown branch {bid}")
        if not net.branch(bid).status:
            raise ValueError(f"branch {bid} is already out of service")
    opts = opts or SolveOptions()
    records = []
    for bid in outages:
        case = with_branch(net, bid, status=False)
        if not is_connected(case):
            records.append(ContingencyRecord(bid, converged=False, islanded=True))
            continue
        try:
            sol = solve(case, opts)
        except PowerFlowError:
            records.append(ContingencyRecord(bid, converged=False, islanded=False))
            continue
        records.append(ContingencyRecord(bid, True, False, scan_violations(case, sol), sol))
    return records


def in_service_branches(net: Network) -> list[int]:
    return [br.id for br in net.branches if br.status]
