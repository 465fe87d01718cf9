"""Newton-Raphson AC power flow in polar coordinates."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .correction import table_factor
from .grid_model import CorrectionTable, Network, is_connected, validate
from .network_matrix import assemble_ybus, branch_stamp


class PowerFlowError(RuntimeError):
    """Base class for solver failures."""


class ConvergenceError(PowerFlowError):
    """Iteration limit reached (or iterates diverged) before the tolerance was met.

    ``solution`` holds the last iterate with ``converged=False``.
    """

    def __init__(self, message: str, solution: "PowerFlowSolution | None" = None):
        super().__init__(message)
        self.solution = solution


class SingularJacobianError(PowerFlowError):
    pass


class DisconnectedNetworkError(PowerFlowError):
    pass


@dataclass(frozen=True)
class SolveOptions:
    tolerance_pu: float = 1e-8
    max_iterations: int = 50
    flat_start: bool = True
    enforce_q_limits: bool = False
    use_correction: bool = True
    # complex bus voltages in ascending bus-id order, used when flat_start is off
    initial_voltage: tuple[complex, ...] | None = None

    def __post_init__(self):
        if not self.tolerance_pu > 0:
            raise ValueError("tolerance_pu must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")


@dataclass(frozen=True)
class BranchFlow:
    branch_id: int
    in_service: bool
    p_from_mw: float
    q_from_mvar: float
    p_to_mw: float
    q_to_mvar: float
    i_from_pu: float
    i_to_pu: float
    rating_mva: float

    @property
    def mva_from(self) -> float:
        return math.hypot(self.p_from_mw, self.q_from_mvar)

    @property
    def mva_to(self) -> float:
        return math.hypot(self.p_to_mw, self.q_to_mvar)

    @property
    def max_mva(self) -> float:
        return max(self.mva_from, self.mva_to)

    @property
    def loss_mw(self) -> float:
        return self.p_from_mw + self.p_to_mw

    @property
    def loading_pct(self) -> float | None:
        """Percent of rating at the more heavily loaded end; None if unrated."""
        if self.rating_mva <= 0:
            return None
        return 100.0 * self.max_mva / self.rating_mva


@dataclass(frozen=True)
class PowerFlowSolution:
    bus_ids: tuple[int, ...]
    vm_pu: tuple[float, ...]
    va_deg: tuple[float, ...]
    p_gen_mw: tuple[float, ...]
    q_gen_mvar: tuple[float, ...]
    branch_flows: tuple[BranchFlow, ...]
    total_loss_mw: float
    iterations: int
    max_mismatch_pu: float
    converged: bool
    use_correction: bool = True

    @property
    def voltages(self) -> np.ndarray:
        vm = np.asarray(self.vm_pu)
        return vm * np.exp(1j * np.radians(self.va_deg))

    def vm(self, bus_id: int) -> float:
        return self.vm_pu[self.bus_ids.index(bus_id)]

    def va(self, bus_id: int) -> float:
        return self.va_deg[self.bus_ids.index(bus_id)]

    def flow(self, branch_id: int) -> BranchFlow:
        for f in self.branch_flows:
            if f.branch_id == branch_id:
                return f
        raise KeyError(f"unknown branch {branch_id}")

    @property
    def total_generation_mw(self) -> float:
        return float(sum(self.p_gen_mw))


def _voltage_vector(net: Network, voltages) -> np.ndarray:
    if isinstance(voltages, Mapping):
        return np.array([complex(voltages[bid]) for bid in net.bus_ids])
    v = np.asarray(voltages, dtype=complex)
    if v.shape != (len(net.bus_ids),):
        raise ValueError(f"expected {len(net.bus_ids)} voltages, got shape {v.shape}")
    return v


def branch_flows(
    net: Network, voltages, use_correction: bool = True
) -> tuple[tuple[BranchFlow, ...], float]:
    """Per-branch end flows and the total real loss (MW).

    ``voltages`` is either a mapping bus id -> complex p.u. or a sequence in
    ascending bus-id order. Flows are computed from the same stamps used to
    assemble the admittance matrix.
    """
    v = _voltage_vector(net, voltages)
    idx = net.bus_index
    base = net.base_mva
    flows = []
    total = 0.0
    for br in net.branches:
        if not br.status:
            flows.append(BranchFlow(br.id, False, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, br.rating_mva))
            continue
        s = branch_stamp(net, br, use_correction)
        vi, vk = v[idx[br.from_bus]], v[idx[br.to_bus]]
        i_from = s.y_ii * vi + s.y_ik * vk
        i_to = s.y_ki * vi + s.y_kk * vk
        s_from = vi * i_from.conjugate() * base
        s_to = vk * i_to.conjugate() * base
        flows.append(BranchFlow(
            br.id, True,
            float(s_from.real), float(s_from.imag),
            float(s_to.real), float(s_to.imag),
            float(abs(i_from)), float(abs(i_to)),
            br.rating_mva,
        ))
        total += float(s_from.real + s_to.real)
    return tuple(flows), total


def pst_angle_loss(r_pu: float, table: CorrectionTable, phase_shift_deg: float, current_pu: float) -> float:
    """Loss estimate ``R * Re{K(phi) e^{j phi}} * I^2`` in p.u.

    Diagnostic only: it takes the real part of the rotated factor, which
    vanishes at 90 degrees. Solver losses come from :func:`branch_flows`,
    where the corrected branch dissipates ``K(phi) R I^2``. The two agree at
    zero shift.
    """
    if r_pu < 0:
        raise ValueError("resistance must be non-negative")
    k = table_factor(table, phase_shift_deg)
    return r_pu * k * math.cos(math.radians(phase_shift_deg)) * current_pu ** 2


# ---------------------------------------------------------------------------
# Newton-Raphson
# ---------------------------------------------------------------------------

def _solve_linear(jac: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    # Dense LU; swap in scipy.sparse.linalg.spsolve here for large cases.
    try:
        dx = np.linalg.solve(jac, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularJacobianError("Jacobian is singular") from exc
    if not np.all(np.isfinite(dx)):
        raise SingularJacobianError("Jacobian is numerically singular")
    return dx


def _specified(net: Network) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Per-bus scheduled P/Q generation and load in p.u."""
    n = len(net.bus_ids)
    idx = net.bus_index
    pg, qg, pd, qd = (np.zeros(n) for _ in range(4))
    for g in net.generators:
        pg[idx[g.bus]] += g.p_mw / net.base_mva
    for ld in net.loads:
        pd[idx[ld.bus]] += ld.p_mw / net.base_mva
        qd[idx[ld.bus]] += ld.q_mvar / net.base_mva
    return pg, qg, pd, qd


def _setpoints(net: Network) -> np.ndarray:
    """Voltage magnitude setpoint per bus: the bus value, else its first generator's."""
    vset = np.ones(len(net.bus_ids))
    gen_v: dict[int, float] = {}
    for g in net.generators:
        gen_v.setdefault(g.bus, g.v_setpoint_pu)
    for b in net.buses:
        if b.kind == "pq":
            continue
        if b.v_setpoint_pu is not None:
            vset[net.bus_index[b.id]] = b.v_setpoint_pu
        elif b.id in gen_v:
            vset[net.bus_index[b.id]] = gen_v[b.id]
    return vset


def _newton(
    y: np.ndarray,
    v0: np.ndarray,
    p_spec: np.ndarray,
    q_spec: np.ndarray,
    pv: np.ndarray,
    pq: np.ndarray,
    tol: float,
    max_it: int,
) -> tuple[np.ndarray, int, float, bool]:
    pvpq = np.concatenate([pv, pq])
    npvpq = len(pvpq)
    v = v0.copy()
    vm = np.abs(v)
    va = np.angle(v)

    def mismatch(v):
        s = v * np.conj(y @ v)
        return np.concatenate([p_spec[pvpq] - s.real[pvpq], q_spec[pq] - s.imag[pq]])

    f = mismatch(v)
    norm = float(np.max(np.abs(f))) if f.size else 0.0
    it = 0
    while norm > tol and it < max_it:
        it += 1
        ibus = y @ v
        diag_v = np.diag(v)
        ds_dva = 1j * diag_v @ np.conj(np.diag(ibus) - y @ diag_v)
        vnorm = v / np.abs(v)
        ds_dvm = diag_v @ np.conj(y @ np.diag(vnorm)) + np.conj(np.diag(ibus)) @ np.diag(vnorm)
        jac = np.block([
            [ds_dva[np.ix_(pvpq, pvpq)].real, ds_dvm[np.ix_(pvpq, pq)].real],
            [ds_dva[np.ix_(pq, pvpq)].imag, ds_dvm[np.ix_(pq, pq)].imag],
        ])
        dx = _solve_linear(jac, f)
        va[pvpq] += dx[:npvpq]
        vm[pq] += dx[npvpq:]
        v = vm * np.exp(1j * va)
        f = mismatch(v)
        norm = float(np.max(np.abs(f)))
        if not math.isfinite(norm):
            break
    return v, it, norm, norm <= tol


def solve(net: Network, opts: SolveOptions | None = None) -> PowerFlowSolution:
    """Solve the AC power flow of ``net``.

    Raises:
        ValueError: the network fails validation.
        DisconnectedNetworkError: some bus is not reachable through in-service
            branches.
        SingularJacobianError: the Newton step cannot be computed.
        ConvergenceError: tolerance not reached within ``max_iterations``;
            carries the last iterate.
    """
    opts = opts or SolveOptions()
    errors = [f for f in validate(net) if f.severity == "error"]
    if errors:
        raise ValueError("; ".join(str(f) for f in errors))
    if not is_connected(net):
        raise DisconnectedNetworkError("network is not connected by in-service branches")

    idx = net.bus_index
    n = len(net.bus_ids)
    kinds = {b.id: b.kind for b in net.buses}
    slack = idx[net.slack_buses[0].id]
    pv = [idx[bid] for bid in net.bus_ids if kinds[bid] == "pv"]
    pq = [idx[bid] for bid in net.bus_ids if kinds[bid] == "pq"]

    y = assemble_ybus(net, opts.use_correction).to_dense()
    pg, qg, pd, qd = _specified(net)
    vset = _setpoints(net)

    if opts.flat_start or opts.initial_voltage is None:
        v0 = np.ones(n, dtype=complex)
    else:
        v0 = _voltage_vector(net, opts.initial_voltage).copy()
    held = [slack] + pv
    v0[held] = vset[held] * np.exp(1j * np.angle(v0[held]))

    qmin = np.full(n, -np.inf)
    qmax = np.full(n, np.inf)
    if opts.enforce_q_limits:
        qmin[:] = qmax[:] = 0.0
        for g in net.generators:
            qmin[idx[g.bus]] += g.q_min_mvar / net.base_mva
            qmax[idx[g.bus]] += g.q_max_mvar / net.base_mva

    total_it = 0
    pv_set = list(pv)
    pq_set = list(pq)
    qfix = qg.copy()
    while True:
        v, it, norm, ok = _newton(
            y, v0, pg - pd, qfix - qd,
            np.array(pv_set, dtype=int), np.array(pq_set, dtype=int),
            opts.tolerance_pu, opts.max_iterations,
        )
        total_it += it
        if not ok or not opts.enforce_q_limits:
            break
        q_gen = (v * np.conj(y @ v)).imag + qd
        over = [i for i in pv_set if q_gen[i] > qmax[i] + opts.tolerance_pu]
        under = [i for i in pv_set if q_gen[i] < qmin[i] - opts.tolerance_pu]
        if not over and not under:
            break
        for i in over:
            qfix[i] = qmax[i]
        for i in under:
            qfix[i] = qmin[i]
        switched = set(over) | set(under)
        pv_set = [i for i in pv_set if i not in switched]
        pq_set = sorted(pq_set + list(switched))
        v0 = v

    sol = _build_solution(net, y, v, pg, qfix, pd, qd, slack, pv_set, total_it, norm, ok, opts)
    if not ok:
        raise ConvergenceError(
            f"no convergence after {opts.max_iterations} iterations "
            f"(max mismatch {norm:.3e} p.u.)",
            sol,
        )
    return sol


def _build_solution(net, y, v, pg, qg, pd, qd, slack, pv, iterations, norm, ok, opts):
    base = net.base_mva
    finite = np.all(np.isfinite(v))
    s_inj = v * np.conj(y @ v) if finite else np.full(len(v), np.nan, dtype=complex)
    p_gen = pg.copy()
    q_gen = qg.copy()
    p_gen[slack] = s_inj.real[slack] + pd[slack]
    for i in [slack] + list(pv):
        q_gen[i] = s_inj.imag[i] + qd[i]
    if finite:
        flows, loss = branch_flows(net, v, opts.use_correction)
    else:
        flows, loss = (), math.nan
    return PowerFlowSolution(
        bus_ids=net.bus_ids,
        vm_pu=tuple(float(x) for x in np.abs(v)),
        va_deg=tuple(float(x) for x in np.degrees(np.angle(v))),
        p_gen_mw=tuple(float(x) for x in p_gen * base),
        q_gen_mvar=tuple(float(x) for x in q_gen * base),
        branch_flows=flows,
        total_loss_mw=float(loss),
        iterations=iterations,
        max_mismatch_pu=float(norm),
        converged=bool(ok),
        use_correction=opts.use_correction,
    )


def total_load_mw(net: Network) -> float:
    return float(sum(ld.p_mw for ld in net.loads))
