"""Grid data model and JSON case-file parsing.

A case is a single JSON document. All branch impedances are per-unit on the
system MVA base; angles are in degrees. Parsed networks are immutable and can
be shared freely between analyses; derived variants are built with
:func:`dataclasses.replace` (see :func:`with_branch`).
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Any, Iterable, Mapping

BUS_KINDS = ("slack", "pv", "pq")

DEFAULT_VMIN_PU = 0.95
DEFAULT_VMAX_PU = 1.05


class CaseError(ValueError):
    """Raised when a case document cannot be turned into a valid Network."""


@dataclass(frozen=True)
class Bus:
    id: int
    base_kv: float
    kind: str
    name: str = ""
    area: str = ""
    v_setpoint_pu: float | None = None
    vmin_pu: float = DEFAULT_VMIN_PU
    vmax_pu: float = DEFAULT_VMAX_PU


@dataclass(frozen=True)
class TransformerExt:
    """Off-nominal tap and phase shift; the ideal transformer sits at from_bus."""

    tap_ratio: float = 1.0
    phase_shift_deg: float = 0.0
    correction_table: str | None = None


@dataclass(frozen=True)
class Branch:
    id: int
    from_bus: int
    to_bus: int
    r_pu: float
    x_pu: float
    b_pu: float = 0.0
    rating_mva: float = 0.0
    status: bool = True
    transformer: TransformerExt | None = None

    @property
    def is_transformer(self) -> bool:
        return self.transformer is not None


@dataclass(frozen=True)
class Generator:
    bus: int
    p_mw: float
    q_min_mvar: float = -9999.0
    q_max_mvar: float = 9999.0
    p_max_mw: float | None = None
    v_setpoint_pu: float = 1.0

    @property
    def capacity_mw(self) -> float:
        return self.p_mw if self.p_max_mw is None else self.p_max_mw


@dataclass(frozen=True)
class Load:
    bus: int
    p_mw: float
    q_mvar: float = 0.0


@dataclass(frozen=True)
class CorrectionTable:
    """Impedance scale factor as a function of phase angle.

    ``points`` is a tuple of ``(angle_deg, factor)`` pairs with strictly
    increasing angles.
    """

    id: str
    points: tuple[tuple[float, float], ...]

    @property
    def angles(self) -> tuple[float, ...]:
        return tuple(a for a, _ in self.points)

    @property
    def factors(self) -> tuple[float, ...]:
        return tuple(f for _, f in self.points)


@dataclass(frozen=True)
class Network:
    base_mva: float
    buses: tuple[Bus, ...]
    branches: tuple[Branch, ...] = ()
    generators: tuple[Generator, ...] = ()
    loads: tuple[Load, ...] = ()
    correction_tables: tuple[CorrectionTable, ...] = ()

    @cached_property
    def bus_ids(self) -> tuple[int, ...]:
        """Bus ids in ascending order; this is the matrix/vector ordering."""
        return tuple(sorted(b.id for b in self.buses))

    @cached_property
    def bus_index(self) -> dict[int, int]:
        return {bid: i for i, bid in enumerate(self.bus_ids)}

    @cached_property
    def bus_by_id(self) -> dict[int, Bus]:
        return {b.id: b for b in self.buses}

    @cached_property
    def branch_by_id(self) -> dict[int, Branch]:
        return {br.id: br for br in self.branches}

    @cached_property
    def table_by_id(self) -> dict[str, CorrectionTable]:
        return {t.id: t for t in self.correction_tables}

    @property
    def slack_buses(self) -> list[Bus]:
        return [b for b in self.buses if b.kind == "slack"]

    def bus(self, bus_id: int) -> Bus:
        return self.bus_by_id[bus_id]

    def branch(self, branch_id: int) -> Branch:
        return self.branch_by_id[branch_id]

    def table(self, table_id: str) -> CorrectionTable:
        return self.table_by_id[table_id]

    def buses_in_area(self, area: str) -> list[Bus]:
        return [b for b in self.buses if b.area == area]


@dataclass(frozen=True)
class Finding:
    severity: str  # "error" or "warning"
    message: str
    subject: str = ""

    def __str__(self) -> str:
        where = f" ({self.subject})" if self.subject else ""
        return f"{self.severity}: {self.message}{where}"


def to_per_unit(value: float, base_mva: float) -> float:
    """Convert MW or MVAr to per-unit on ``base_mva``."""
    if not base_mva > 0:
        raise ValueError(f"base MVA must be positive, got {base_mva}")
    return value / base_mva


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_TOP_KEYS = {"base_mva", "buses", "branches", "generators", "loads", "correction_tables"}
_BUS_KEYS = {"id", "name", "area", "base_kv", "kind", "v_setpoint_pu", "vmin_pu", "vmax_pu"}
_BRANCH_KEYS = {"id", "from_bus", "to_bus", "r_pu", "x_pu", "b_pu", "rating_mva", "status", "transformer"}
_XFMR_KEYS = {"tap_ratio", "phase_shift_deg", "correction_table"}
_GEN_KEYS = {"bus", "p_mw", "q_min_mvar", "q_max_mvar", "p_max_mw", "v_setpoint_pu"}
_LOAD_KEYS = {"bus", "p_mw", "q_mvar"}
_TABLE_KEYS = {"id", "points"}


def _reject_constant(token: str) -> float:
    raise CaseError(f"malformed number: {token}")


def _record(obj: Any, allowed: set[str], required: set[str], where: str) -> dict:
    if not isinstance(obj, dict):
        raise CaseError(f"{where}: expected an object")
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise CaseError(f"{where}: unknown field(s) {', '.join(unknown)}")
    missing = sorted(required - set(obj))
    if missing:
        raise CaseError(f"{where}: missing field(s) {', '.join(missing)}")
    return obj


def _num(obj: dict, key: str, where: str, default: Any = None) -> Any:
    if key not in obj:
        return default
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise CaseError(f"{where}: malformed number for '{key}': {value!r}")
    return float(value)


def _int(obj: dict, key: str, where: str) -> int:
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise CaseError(f"{where}: '{key}' must be an integer, got {value!r}")
    return value


def _str(obj: dict, key: str, where: str, default: str | None = None) -> str | None:
    if key not in obj:
        return default
    value = obj[key]
    if not isinstance(value, str):
        raise CaseError(f"{where}: '{key}' must be a string, got {value!r}")
    return value


def _array(doc: dict, key: str) -> list:
    value = doc.get(key, [])
    if not isinstance(value, list):
        raise CaseError(f"'{key}' must be an array")
    return value


def _parse_bus(obj: Any, n: int) -> Bus:
    where = f"buses[{n}]"
    _record(obj, _BUS_KEYS, {"id", "base_kv", "kind"}, where)
    kind = _str(obj, "kind", where)
    if kind not in BUS_KINDS:
        raise CaseError(f"{where}: kind must be one of {BUS_KINDS}, got {kind!r}")
    return Bus(
        id=_int(obj, "id", where),
        base_kv=_num(obj, "base_kv", where),
        kind=kind,
        name=_str(obj, "name", where, ""),
        area=_str(obj, "area", where, ""),
        v_setpoint_pu=_num(obj, "v_setpoint_pu", where),
        vmin_pu=_num(obj, "vmin_pu", where, DEFAULT_VMIN_PU),
        vmax_pu=_num(obj, "vmax_pu", where, DEFAULT_VMAX_PU),
    )


def _parse_branch(obj: Any, n: int) -> Branch:
    where = f"branches[{n}]"
    _record(obj, _BRANCH_KEYS, {"id", "from_bus", "to_bus", "r_pu", "x_pu"}, where)
    status = obj.get("status", True)
    if not isinstance(status, bool):
        raise CaseError(f"{where}: 'status' must be true or false")
    xfmr = None
    if "transformer" in obj:
        t = _record(obj["transformer"], _XFMR_KEYS, set(), f"{where}.transformer")
        xfmr = TransformerExt(
            tap_ratio=_num(t, "tap_ratio", where, 1.0),
            phase_shift_deg=_num(t, "phase_shift_deg", where, 0.0),
            correction_table=_str(t, "correction_table", where),
        )
    return Branch(
        id=_int(obj, "id", where),
        from_bus=_int(obj, "from_bus", where),
        to_bus=_int(obj, "to_bus", where),
        r_pu=_num(obj, "r_pu", where),
        x_pu=_num(obj, "x_pu", where),
        b_pu=_num(obj, "b_pu", where, 0.0),
        rating_mva=_num(obj, "rating_mva", where, 0.0),
        status=status,
        transformer=xfmr,
    )


def _parse_generator(obj: Any, n: int) -> Generator:
    where = f"generators[{n}]"
    _record(obj, _GEN_KEYS, {"bus", "p_mw"}, where)
    return Generator(
        bus=_int(obj, "bus", where),
        p_mw=_num(obj, "p_mw", where),
        q_min_mvar=_num(obj, "q_min_mvar", where, -9999.0),
        q_max_mvar=_num(obj, "q_max_mvar", where, 9999.0),
        p_max_mw=_num(obj, "p_max_mw", where),
        v_setpoint_pu=_num(obj, "v_setpoint_pu", where, 1.0),
    )


def _parse_load(obj: Any, n: int) -> Load:
    where = f"loads[{n}]"
    _record(obj, _LOAD_KEYS, {"bus", "p_mw"}, where)
    return Load(
        bus=_int(obj, "bus", where),
        p_mw=_num(obj, "p_mw", where),
        q_mvar=_num(obj, "q_mvar", where, 0.0),
    )


def _parse_table(obj: Any, n: int) -> CorrectionTable:
    where = f"correction_tables[{n}]"
    _record(obj, _TABLE_KEYS, {"id", "points"}, where)
    raw = obj["points"]
    if not isinstance(raw, list):
        raise CaseError(f"{where}: 'points' must be an array")
    points = []
    for j, pt in enumerate(raw):
        if not (isinstance(pt, list) and len(pt) == 2):
            raise CaseError(f"{where}.points[{j}]: expected [angle_deg, factor]")
        pair = dict(zip(("angle", "factor"), pt))
        points.append((_num(pair, "angle", f"{where}.points[{j}]"),
                       _num(pair, "factor", f"{where}.points[{j}]")))
    return CorrectionTable(id=_str(obj, "id", where), points=tuple(points))


def network_from_dict(doc: Mapping[str, Any]) -> Network:
    """Build a Network from an already-decoded case document and validate it."""
    if not isinstance(doc, dict):
        raise CaseError("case document must be a JSON object")
    _record(doc, _TOP_KEYS, {"base_mva", "buses"}, "case")
    net = Network(
        base_mva=_num(doc, "base_mva", "case"),
        buses=tuple(_parse_bus(o, n) for n, o in enumerate(_array(doc, "buses"))),
        branches=tuple(_parse_branch(o, n) for n, o in enumerate(_array(doc, "branches"))),
        generators=tuple(_parse_generator(o, n) for n, o in enumerate(_array(doc, "generators"))),
        loads=tuple(_parse_load(o, n) for n, o in enumerate(_array(doc, "loads"))),
        correction_tables=tuple(
            _parse_table(o, n) for n, o in enumerate(_array(doc, "correction_tables"))
        ),
    )
    errors = [f for f in validate(net) if f.severity == "error"]
    if errors:
        raise CaseError("; ".join(str(f) for f in errors))
    return net


def parse_case(text: str) -> Network:
    """Parse a JSON case document into a validated :class:`Network`.

    Raises:
        CaseError: on JSON syntax errors (line/column reported), unknown or
            missing fields, malformed numbers, duplicate ids, unknown bus or
            table references, or any other error-severity validation finding.
    """
    try:
        doc = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise CaseError(
            f"syntax error at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from None
    return network_from_dict(doc)


def load_case(path) -> Network:
    with open(path, encoding="utf-8") as fh:
        return parse_case(fh.read())


def network_to_dict(net: Network) -> dict[str, Any]:
    """Inverse of :func:`network_from_dict`; every field is written explicitly."""

    def bus(b: Bus) -> dict:
        d = {"id": b.id, "name": b.name, "area": b.area, "base_kv": b.base_kv, "kind": b.kind}
        if b.v_setpoint_pu is not None:
            d["v_setpoint_pu"] = b.v_setpoint_pu
        d["vmin_pu"] = b.vmin_pu
        d["vmax_pu"] = b.vmax_pu
        return d

    def branch(br: Branch) -> dict:
        d = {
            "id": br.id, "from_bus": br.from_bus, "to_bus": br.to_bus,
            "r_pu": br.r_pu, "x_pu": br.x_pu, "b_pu": br.b_pu,
            "rating_mva": br.rating_mva, "status": br.status,
        }
        if br.transformer is not None:
            t = {"tap_ratio": br.transformer.tap_ratio,
                 "phase_shift_deg": br.transformer.phase_shift_deg}
            if br.transformer.correction_table is not None:
                t["correction_table"] = br.transformer.correction_table
            d["transformer"] = t
        return d

    def gen(g: Generator) -> dict:
        d = {"bus": g.bus, "p_mw": g.p_mw, "q_min_mvar": g.q_min_mvar,
             "q_max_mvar": g.q_max_mvar}
        if g.p_max_mw is not None:
            d["p_max_mw"] = g.p_max_mw
        d["v_setpoint_pu"] = g.v_setpoint_pu
        return d

    return {
        "base_mva": net.base_mva,
        "buses": [bus(b) for b in net.buses],
        "branches": [branch(br) for br in net.branches],
        "generators": [gen(g) for g in net.generators],
        "loads": [{"bus": ld.bus, "p_mw": ld.p_mw, "q_mvar": ld.q_mvar} for ld in net.loads],
        "correction_tables": [
            {"id": t.id, "points": [[a, f] for a, f in t.points]}
            for t in net.correction_tables
        ],
    }


def serialize_case(net: Network) -> str:
    return json.dumps(network_to_dict(net), indent=2)


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

def _duplicates(values: Iterable) -> list:
    seen, dup = set(), []
    for v in values:
        if v in seen and v not in dup:
            dup.append(v)
        seen.add(v)
    return dup


def _is_finite(*values: float | None) -> bool:
    return all(v is None or math.isfinite(v) for v in values)


def validate(net: Network) -> list[Finding]:
    """Check every model invariant; returns one finding per violation.

    An empty list means the network is valid. Findings with severity
    ``"warning"`` do not block parsing (e.g. a disconnected network, which the
    solvers reject on their own).
    """
    out: list[Finding] = []

    def err(msg: str, subject: str = "") -> None:
        out.append(Finding("error", msg, subject))

    if not (net.base_mva > 0 and math.isfinite(net.base_mva)):
        err("base_mva must be positive")
    if not net.buses:
        err("network has no buses")

    bus_ids = {b.id for b in net.buses}
    for dup in _duplicates(b.id for b in net.buses):
        err("duplicate bus id", f"bus {dup}")
    for b in net.buses:
        subj = f"bus {b.id}"
        if b.id <= 0:
            err("bus id must be positive", subj)
        if b.kind not in BUS_KINDS:
            err(f"unknown bus kind {b.kind!r}", subj)
        if not b.base_kv > 0:
            err("base_kv must be positive", subj)
        if not _is_finite(b.vmin_pu, b.vmax_pu, b.v_setpoint_pu, b.base_kv):
            err("malformed number", subj)
        if not b.vmin_pu < b.vmax_pu:
            err("vmin_pu must be less than vmax_pu", subj)
        if b.v_setpoint_pu is not None and not b.v_setpoint_pu > 0:
            err("v_setpoint_pu must be positive", subj)

    n_slack = len(net.slack_buses)
    if net.buses and n_slack == 0:
        err("no slack bus")
    elif n_slack > 1:
        err(f"multiple slack buses ({n_slack})")

    table_ids = {t.id for t in net.correction_tables}
    for dup in _duplicates(t.id for t in net.correction_tables):
        err("duplicate correction table id", f"table {dup}")
    for t in net.correction_tables:
        subj = f"table {t.id}"
        if len(t.points) < 2:
            err("table needs at least 2 points", subj)
        if not _is_finite(*(v for pt in t.points for v in pt)):
            err("malformed number", subj)
        if any(a2 <= a1 for a1, a2 in zip(t.angles, t.angles[1:])):
            err("table angles not strictly increasing", subj)
        if any(not f > 0 for f in t.factors):
            err("table factors must be positive", subj)

    for dup in _duplicates(br.id for br in net.branches):
        err("duplicate branch id", f"branch {dup}")
    for br in net.branches:
        subj = f"branch {br.id}"
        if br.id <= 0:
            err("branch id must be positive", subj)
        for end in (br.from_bus, br.to_bus):
            if end not in bus_ids:
                err(f"unknown bus reference {end}", subj)
        if br.from_bus == br.to_bus:
            err("from_bus equals to_bus", subj)
        if not _is_finite(br.r_pu, br.x_pu, br.b_pu, br.rating_mva):
            err("malformed number", subj)
        if br.r_pu < 0:
            err("negative resistance", subj)
        if not br.r_pu ** 2 + br.x_pu ** 2 > 0:
            err("zero series impedance", subj)
        if br.rating_mva < 0:
            err("negative rating", subj)
        t = br.transformer
        if t is not None:
            if not t.tap_ratio > 0:
                err("tap_ratio must be positive", subj)
            if not -90.0 <= t.phase_shift_deg <= 90.0:
                err("phase_shift_deg outside [-90, 90]", subj)
            if t.correction_table is not None and t.correction_table not in table_ids:
                err(f"unknown correction table {t.correction_table!r}", subj)

    for n, g in enumerate(net.generators):
        subj = f"generator {n} at bus {g.bus}"
        if g.bus not in bus_ids:
            err(f"unknown bus reference {g.bus}", subj)
        if not _is_finite(g.p_mw, g.q_min_mvar, g.q_max_mvar, g.p_max_mw, g.v_setpoint_pu):
            err("malformed number", subj)
        if g.q_min_mvar > g.q_max_mvar:
            err("q_min_mvar exceeds q_max_mvar", subj)
        if g.p_max_mw is not None and g.p_max_mw < g.p_mw:
            err("p_max_mw below p_mw", subj)
    for n, ld in enumerate(net.loads):
        subj = f"load {n} at bus {ld.bus}"
        if ld.bus not in bus_ids:
            err(f"unknown bus reference {ld.bus}", subj)
        if not _is_finite(ld.p_mw, ld.q_mvar):
            err("malformed number", subj)

    if not out and not is_connected(net):
        out.append(Finding("warning", "network is not connected by in-service branches"))
    return out


# ---------------------------------------------------------------------------
# Topology helpers and derived networks
# ---------------------------------------------------------------------------

def islands(net: Network) -> list[set[int]]:
    """Groups of bus ids joined by in-service branches, ordered by smallest id."""
    adj: dict[int, list[int]] = {bid: [] for bid in net.bus_ids}
    for br in net.branches:
        if br.status and br.from_bus in adj and br.to_bus in adj:
            adj[br.from_bus].append(br.to_bus)
            adj[br.to_bus].append(br.from_bus)
    seen: set[int] = set()
    groups = []
    for start in net.bus_ids:
        if start in seen:
            continue
        group = {start}
        queue = deque([start])
        while queue:
            for nb in adj[queue.popleft()]:
                if nb not in group:
                    group.add(nb)
                    queue.append(nb)
        seen |= group
        groups.append(group)
    return groups


def is_connected(net: Network) -> bool:
    return len(islands(net)) <= 1


def with_branch(net: Network, branch_id: int, **changes: Any) -> Network:
    """Copy of ``net`` with one branch's fields replaced."""
    if branch_id not in net.branch_by_id:
        raise KeyError(f"unknown branch {branch_id}")
    branches = tuple(
        replace(br, **changes) if br.id == branch_id else br for br in net.branches
    )
    return replace(net, branches=branches)


def with_phase_shift(net: Network, branch_id: int, phase_shift_deg: float) -> Network:
    br = net.branch(branch_id)
    if br.transformer is None:
        raise ValueError(f"branch {branch_id} is not a transformer")
    xfmr = replace(br.transformer, phase_shift_deg=float(phase_shift_deg))
    return with_branch(net, branch_id, transformer=xfmr)


def strip_corrections(net: Network) -> Network:
    """Copy of ``net`` with every correction_table reference removed."""
    branches = tuple(
        replace(br, transformer=replace(br.transformer, correction_table=None))
        if br.transformer is not None and br.transformer.correction_table is not None
        else br
        for br in net.branches
    )
    return replace(net, branches=branches)
