"""DC power flow, transfer distribution factors and available transfer capability.

Branch flows follow the same sign convention as the AC transformer model: a
phase shifter with angle phi between buses i and k carries
``(theta_i - theta_k - phi) / x_eff`` from i to k, where ``x_eff`` is the
reactance scaled by the branch's correction factor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .grid_model import Network, is_connected
from .network_matrix import branch_factor

PTDF_EPS = 1e-6


class DcSolveError(RuntimeError):
    pass


@dataclass(frozen=True)
class DcSolution:
    bus_ids: tuple[int, ...]
    theta_rad: tuple[float, ...]
    injection_mw: tuple[float, ...]
    branch_ids: tuple[int, ...]
    flow_mw: tuple[float, ...]

    def flow(self, branch_id: int) -> float:
        return self.flow_mw[self.branch_ids.index(branch_id)]

    def theta(self, bus_id: int) -> float:
        return self.theta_rad[self.bus_ids.index(bus_id)]


def effective_reactance(net: Network, branch_id: int, use_correction: bool) -> float:
    br = net.branch(branch_id)
    return branch_factor(net, br, use_correction) * br.x_pu


def base_injections_mw(net: Network) -> np.ndarray:
    """Scheduled generation minus load per bus, ascending bus-id order."""
    p = np.zeros(len(net.bus_ids))
    for g in net.generators:
        p[net.bus_index[g.bus]] += g.p_mw
    for ld in net.loads:
        p[net.bus_index[ld.bus]] -= ld.p_mw
    return p


def dc_solve(
    net: Network,
    use_correction: bool = True,
    extra_injection_mw: Mapping[int, float] | None = None,
) -> DcSolution:
    """Solve ``B' theta = P`` with the slack angle fixed at zero.

    ``extra_injection_mw`` adds MW to the scheduled injection of the given
    buses (bus id -> MW). The slack bus absorbs any imbalance.
    """
    if not is_connected(net):
        raise DcSolveError("network is not connected; B' is singular")
    slacks = net.slack_buses
    if len(slacks) != 1:
        raise DcSolveError("exactly one slack bus is required")
    idx = net.bus_index
    n = len(net.bus_ids)
    base = net.base_mva

    p = base_injections_mw(net)
    if extra_injection_mw:
        for bid, mw in extra_injection_mw.items():
            p[idx[bid]] += mw
    p_pu = p / base

    bmat = np.zeros((n, n))
    shift_inj = np.zeros(n)
    active = []
    for br in net.branches:
        if not br.status:
            continue
        x = effective_reactance(net, br.id, use_correction)
        if x == 0:
            raise DcSolveError(f"branch {br.id} has zero reactance")
        b = 1.0 / x
        i, k = idx[br.from_bus], idx[br.to_bus]
        bmat[i, i] += b
        bmat[k, k] += b
        bmat[i, k] -= b
        bmat[k, i] -= b
        phi = math.radians(br.transformer.phase_shift_deg) if br.transformer else 0.0
        if phi:
            # constant -phi/x flow from i to k, moved to the right-hand side
            shift_inj[i] += phi * b
            shift_inj[k] -= phi * b
        active.append((br, i, k, b, phi))

    s = idx[slacks[0].id]
    keep = [j for j in range(n) if j != s]
    theta = np.zeros(n)
    if keep:
        rhs = p_pu[keep] + shift_inj[keep]
        try:
            theta[keep] = np.linalg.solve(bmat[np.ix_(keep, keep)], rhs)
        except np.linalg.LinAlgError as exc:
            raise DcSolveError("B' is singular") from exc

    flow_by_id = {}
    for br, i, k, b, phi in active:
        flow_by_id[br.id] = (theta[i] - theta[k] - phi) * b * base
    branch_ids = tuple(br.id for br in net.branches)
    flows = tuple(float(flow_by_id.get(bid, 0.0)) for bid in branch_ids)

    # lossless: the slack picks up whatever the other buses leave unbalanced
    inj = p.copy()
    inj[s] = 0.0
    inj[s] = -inj.sum()
    return DcSolution(
        bus_ids=net.bus_ids,
        theta_rad=tuple(float(t) for t in theta),
        injection_mw=tuple(float(x) for x in inj),
        branch_ids=branch_ids,
        flow_mw=flows,
    )


@dataclass(frozen=True)
class TransferDefinition:
    """Area-to-area transfer with per-generator and per-load participation.

    Participation keys are indices into ``Network.generators`` and
    ``Network.loads``.
    """

    seller_area: str
    buyer_area: str
    seller_participation: Mapping[int, float]
    buyer_participation: Mapping[int, float]
    name: str = ""

    @property
    def label(self) -> str:
        return self.name or f"{self.seller_area}->{self.buyer_area}"

    @classmethod
    def pro_rata(cls, net: Network, seller_area: str, buyer_area: str, name: str = "") -> "TransferDefinition":
        """Sellers share by generator capacity, buyers by load MW."""
        if seller_area == buyer_area:
            raise ValueError("seller and buyer areas must differ")
        areas = {b.id: b.area for b in net.buses}
        sellers = {n: g.capacity_mw for n, g in enumerate(net.generators)
                   if areas[g.bus] == seller_area}
        buyers = {n: ld.p_mw for n, ld in enumerate(net.loads)
                  if areas[ld.bus] == buyer_area}
        return cls(seller_area, buyer_area,
                   _normalise(sellers, f"seller area {seller_area!r}"),
                   _normalise(buyers, f"buyer area {buyer_area!r}"),
                   name)

    def injection_mw(self, net: Network, amount_mw: float = 1.0) -> dict[int, float]:
        """Bus injection changes (bus id -> MW) for ``amount_mw`` of transfer."""
        out: dict[int, float] = {}
        for n, frac in sorted(self.seller_participation.items()):
            bus = net.generators[n].bus
            out[bus] = out.get(bus, 0.0) + frac * amount_mw
        for n, frac in sorted(self.buyer_participation.items()):
            bus = net.loads[n].bus
            out[bus] = out.get(bus, 0.0) - frac * amount_mw
        return out

    def check(self, net: Network) -> None:
        if not self.seller_participation or not self.buyer_participation:
            raise ValueError("transfer needs at least one seller generator and one buyer load")
        for side, parts, items in (("seller", self.seller_participation, net.generators),
                                   ("buyer", self.buyer_participation, net.loads)):
            if any(not 0 <= n < len(items) for n in parts):
                raise ValueError(f"{side} participation references an unknown element")
            if any(f < 0 for f in parts.values()):
                raise ValueError(f"{side} participation must be non-negative")
            if abs(sum(parts.values()) - 1.0) > 1e-9:
                raise ValueError(f"{side} participation must sum to 1")


def _normalise(weights: dict[int, float], what: str) -> dict[int, float]:
    total = sum(weights.values())
    if not weights or total <= 0:
        raise ValueError(f"{what} has no participating elements")
    return {n: w / total for n, w in sorted(weights.items())}


def ptdf(net: Network, transfer: TransferDefinition, use_correction: bool = True) -> dict[int, float]:
    """MW change on each branch per MW of ``transfer`` (branch id -> factor).

    Computed as the flow difference between the base DC solve and one with a
    full base-MVA transfer added, divided back to a per-MW sensitivity.
    """
    transfer.check(net)
    base = dc_solve(net, use_correction)
    unit = net.base_mva
    shifted = dc_solve(net, use_correction, transfer.injection_mw(net, unit))
    return {
        bid: (f1 - f0) / unit
        for bid, f0, f1 in zip(base.branch_ids, base.flow_mw, shifted.flow_mw)
    }


@dataclass(frozen=True)
class AtcResult:
    transfer_name: str
    use_correction: bool
    atc_mw: float  # math.inf when no rated branch limits the transfer
    binding_branch: int | None
    ptdf: dict[int, float]
    base_flow_mw: dict[int, float]
    headroom_mw: dict[int, float]  # largest transfer each branch allows alone

    @property
    def unbounded(self) -> bool:
        return math.isinf(self.atc_mw)


def compute_atc(net: Network, transfer: TransferDefinition, use_correction: bool = True) -> AtcResult:
    """Largest additional transfer before any rated in-service branch overloads.

    Ratings apply in both directions. Branches with ``|ptdf| < 1e-6`` never
    bind. A branch already loaded past its rating in the direction of the
    transfer yields an ATC of zero.
    """
    factors = ptdf(net, transfer, use_correction)
    base = dc_solve(net, use_correction)
    base_flow = dict(zip(base.branch_ids, base.flow_mw))
    headroom: dict[int, float] = {}
    for br in net.branches:
        d = factors[br.id]
        f0 = base_flow[br.id]
        if not br.status or br.rating_mva <= 0 or abs(d) < PTDF_EPS:
            headroom[br.id] = math.inf
            continue
        limit = br.rating_mva if d > 0 else -br.rating_mva
        headroom[br.id] = max(0.0, (limit - f0) / d)
    atc = math.inf
    binding = None
    for bid in sorted(headroom):
        if headroom[bid] < atc:
            atc, binding = headroom[bid], bid
    return AtcResult(
        transfer_name=transfer.label,
        use_correction=use_correction,
        atc_mw=atc,
        binding_branch=binding,
        ptdf=factors,
        base_flow_mw=base_flow,
        headroom_mw=headroom,
    )
