from dataclasses import replace

import pytest

from conftest import case
from pstflow.ac_powerflow import BranchFlow, PowerFlowSolution, SolveOptions, solve
from pstflow.grid_model import CorrectionTable, serialize_case, with_branch
from pstflow.studies import (
    angle_sweep,
    contingency_scan,
    in_service_branches,
    scan_violations,
    sweep_angles,
)


def handmade(net, vms, loadings=()):
    """Converged-looking solution with chosen magnitudes and branch loadings (% of rating)."""
    flows = []
    for br in net.branches:
        pct = dict(loadings).get(br.id, 50.0)
        p = br.rating_mva * pct / 100.0
        flows.append(BranchFlow(br.id, True, p, 0.0, -p, 0.0, 0.0, 0.0, br.rating_mva))
    n = len(net.bus_ids)
    return PowerFlowSolution(net.bus_ids, tuple(vms), (0.0,) * n, (0.0,) * n, (0.0,) * n,
                             tuple(flows), 0.0, 1, 0.0, True)


def test_low_voltage_flagged():
    net = case("triangle")
    rep = scan_violations(net, handmade(net, [1.0, 0.94, 1.0]))
    assert rep.low_v_count == 1 and rep.high_v_count == 0
    v = rep.voltage[0]
    assert (v.bus_id, v.limit) == (2, "low")
    assert v.deficit_pu == pytest.approx(0.01)


def test_overload_flagged():
    net = case("triangle")
    rep = scan_violations(net, handmade(net, [1.0, 1.0, 1.0], {3: 102.0}))
    assert rep.thermal_count == 1
    assert rep.thermal[0].branch_id == 3
    assert rep.thermal[0].loading_pct == pytest.approx(102.0)


def test_clean_report():
    net = case("triangle")
    rep = scan_violations(net, handmade(net, [0.95, 1.05, 1.0], {1: 100.0}))
    assert rep.count == 0


@pytest.mark.parametrize("vm, flagged", [(0.95, False), (0.9499, True), (1.05, False), (1.0501, True)])
def test_voltage_boundaries(vm, flagged):
    net = case("triangle")
    rep = scan_violations(net, handmade(net, [1.0, vm, 1.0]))
    assert (rep.count == 1) is flagged


def test_per_bus_limits():
    net = case("four_bus_pst")  # bus 4 carries a 0.9 p.u. lower limit
    rep = scan_violations(net, handmade(net, [1.0, 1.0, 1.0, 0.92]))
    assert rep.count == 0


def test_unconverged_rejected():
    net = case("triangle")
    sol = replace(handmade(net, [1.0, 1.0, 1.0]), converged=False)
    with pytest.raises(ValueError):
        scan_violations(net, sol)


def test_scan_five_bus(five_bus):
    uncorrected = scan_violations(five_bus, solve(five_bus, SolveOptions(use_correction=False)))
    assert [t.branch_id for t in uncorrected.thermal] == [2]
    assert uncorrected.low_v_count == 3
    corrected = scan_violations(five_bus, solve(five_bus))
    assert corrected.count == 0


def test_sweep_angles():
    assert sweep_angles(-4, 4, 2) == [-4, -2, 0, 2, 4]
    assert sweep_angles(0, 1, 0.1)[-1] == 1.0
    assert len(sweep_angles(0, 1, 0.3)) == 4
    with pytest.raises(ValueError):
        sweep_angles(1, 0, 1)
    with pytest.raises(ValueError):
        sweep_angles(0, 1, 0)


def test_sweep_row_count_and_order(five_bus):
    res = angle_sweep(five_bus, 7, -4, 4, 2)
    assert len(res.rows) == 10
    keys = [(r.phase_shift_deg, r.corrected) for r in res.rows]
    assert keys == sorted(keys)


def test_sweep_modes_differ_at_zero(five_bus):
    res = angle_sweep(five_bus, 7, 0, 0, 1, track_branch=2)
    off, on = res.rows
    assert abs(off.target_flow_mw - on.target_flow_mw) > 1.0


def test_sweep_unity_table_modes_identical(five_bus):
    unity = CorrectionTable("table1", ((-90.0, 1.0), (90.0, 1.0)))
    net = replace(five_bus, correction_tables=(unity,))
    res = angle_sweep(net, 7, -4, 4, 2, track_branch=2, track_buses=[3, 5])
    for off, on in zip(res.rows[::2], res.rows[1::2]):
        assert on.target_flow_mw == pytest.approx(off.target_flow_mw, abs=1e-10)
        assert on.total_loss_mw == pytest.approx(off.total_loss_mw, abs=1e-10)
        assert on.tracked_vm_pu == pytest.approx(off.tracked_vm_pu, abs=1e-10)


def test_sweep_is_deterministic(five_bus):
    a = angle_sweep(five_bus, 7, -3, 3, 1, track_branch=2, track_buses=[5])
    b = angle_sweep(five_bus, 7, -3, 3, 1, track_branch=2, track_buses=[5])
    assert a == b


def test_sweep_excludes_target(five_bus):
    res = angle_sweep(five_bus, 7, 0, 0, 1, track_branch=2)
    off = res.rows[0]
    assert off.target_loading_pct > 100
    assert off.extra_line_violations == 0
    # monitoring the PST instead counts the overloaded line as an extra violation
    res = angle_sweep(five_bus, 7, 0, 0, 1)
    assert res.rows[0].extra_line_violations == 1


@pytest.mark.parametrize("corrected", [False, True])
def test_sweep_monotone_target_flow(five_bus, corrected):
    res = angle_sweep(five_bus, 7, -10, 10, 1, track_branch=2)
    flows = [r.target_flow_mw for r in res.rows if r.corrected is corrected]
    steps = [b - a for a, b in zip(flows, flows[1:])]
    assert all(s < 0 for s in steps) or all(s > 0 for s in steps)


def test_sweep_records_failures(five_bus):
    res = angle_sweep(five_bus, 7, 0, 2, 1, opts=SolveOptions(max_iterations=1))
    assert len(res.rows) == 6
    assert all(not r.converged for r in res.rows)


def test_sweep_leaves_network_untouched(five_bus):
    before = serialize_case(five_bus)
    angle_sweep(five_bus, 7, -2, 2, 2)
    assert serialize_case(five_bus) == before


def test_sweep_rejects_line(five_bus):
    with pytest.raises(ValueError, match="not a transformer"):
        angle_sweep(five_bus, 2, -1, 1, 1)


def test_parallel_outage_doubles_flow():
    net = case("parallel_pair")
    base = solve(net)
    (rec,) = contingency_scan(net, [2])
    assert rec.converged and not rec.islanded
    assert rec.solution.flow(1).p_from_mw == pytest.approx(2 * base.flow(1).p_from_mw, abs=1e-6)


def test_radial_outage_islands():
    (rec,) = contingency_scan(case("chain3"), [2])
    assert rec.islanded and not rec.converged
    assert rec.report is None and rec.status == "islanded"


def test_empty_outage_list():
    assert contingency_scan(case("triangle"), []) == []


def test_contingency_restores_base(five_bus):
    before = solve(five_bus)
    recs = contingency_scan(five_bus, in_service_branches(five_bus))
    assert len(recs) == 6
    assert solve(five_bus) == before


def test_contingency_rejects_bad_ids(five_bus):
    with pytest.raises(KeyError):
        contingency_scan(five_bus, [99])
    with pytest.raises(ValueError):
        contingency_scan(with_branch(five_bus, 2, status=False), [2])


def test_contingency_records_divergence(five_bus):
    recs = contingency_scan(five_bus, [2], SolveOptions(max_iterations=1))
    assert recs[0].status == "diverged"
