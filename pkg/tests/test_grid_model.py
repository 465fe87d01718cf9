import json
from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import ALL_CASES, CASES, TABLE_I_POINTS, case
from pstflow.correction import interpolate_factor
from pstflow.grid_model import (
    Branch,
    Bus,
    CaseError,
    CorrectionTable,
    Network,
    TransformerExt,
    parse_case,
    serialize_case,
    strip_corrections,
    to_per_unit,
    validate,
)

MINIMAL = {
    "base_mva": 100,
    "buses": [
        {"id": 1, "base_kv": 230, "kind": "slack"},
        {"id": 2, "base_kv": 230, "kind": "pq"},
    ],
    "branches": [{"id": 1, "from_bus": 1, "to_bus": 2, "r_pu": 0, "x_pu": 0.1}],
}


def doc_with(**changes):
    d = json.loads(json.dumps(MINIMAL))
    d.update(changes)
    return d


def test_minimal_document():
    net = parse_case(json.dumps(MINIMAL))
    assert len(net.buses) == 2
    assert len(net.branches) == 1
    br = net.branch(1)
    assert br.status is True
    assert br.rating_mva == 0.0
    assert br.b_pu == 0.0
    assert net.bus(2).vmin_pu == 0.95
    assert net.bus(2).vmax_pu == 1.05


def test_unknown_bus_reference():
    d = doc_with(branches=[{"id": 1, "from_bus": 1, "to_bus": 99, "r_pu": 0, "x_pu": 0.1}])
    with pytest.raises(CaseError, match="unknown bus reference"):
        parse_case(json.dumps(d))


def test_table_i_embedded():
    d = doc_with(correction_tables=[{"id": "t1", "points": [list(p) for p in TABLE_I_POINTS]}])
    net = parse_case(json.dumps(d))
    table = net.table("t1")
    assert len(table.points) == 9
    for angle, factor in TABLE_I_POINTS:
        assert interpolate_factor(table, angle).factor == factor


def test_syntax_error_reports_position():
    with pytest.raises(CaseError, match=r"line 2 column"):
        parse_case('{"base_mva": 100,\n "buses": [}')


@pytest.mark.parametrize("payload, match", [
    (doc_with(extra=1), "unknown field"),
    (doc_with(buses=[{"id": 1, "base_kv": 230, "kind": "slack", "colour": "red"}]), "unknown field"),
    (doc_with(base_mva="100"), "malformed number"),
    (doc_with(branches=[{"id": 1, "from_bus": 1, "to_bus": 2, "r_pu": "0", "x_pu": 0.1}]), "malformed number"),
    (doc_with(buses=[{"id": 1, "base_kv": 230, "kind": "slack"},
                     {"id": 1, "base_kv": 230, "kind": "pq"}]), "duplicate bus id"),
    (doc_with(branches=[{"id": 1, "from_bus": 1, "to_bus": 2, "r_pu": 0, "x_pu": 0.1},
                        {"id": 1, "from_bus": 2, "to_bus": 1, "r_pu": 0, "x_pu": 0.1}]), "duplicate branch id"),
    (doc_with(buses=[{"id": 1, "base_kv": 230, "kind": "swing"}]), "kind must be one of"),
    (doc_with(branches=[{"id": 1, "from_bus": 1, "to_bus": 2, "r_pu": 0, "x_pu": 0.1,
                         "transformer": {"correction_table": "nope"}}]), "unknown correction table"),
])
def test_rejections(payload, match):
    with pytest.raises(CaseError, match=match):
        parse_case(json.dumps(payload))


def test_nan_literal_rejected():
    text = json.dumps(MINIMAL).replace('"x_pu": 0.1', '"x_pu": NaN')
    with pytest.raises(CaseError, match="malformed number"):
        parse_case(text)


def test_validate_valid_network_is_clean():
    assert validate(parse_case(json.dumps(MINIMAL))) == []


def test_validate_no_slack():
    net = parse_case(json.dumps(MINIMAL))
    buses = tuple(replace(b, kind="pq") for b in net.buses)
    findings = validate(replace(net, buses=buses))
    assert [f.message for f in findings] == ["no slack bus"]
    assert findings[0].severity == "error"


def test_validate_table_angles():
    net = parse_case(json.dumps(MINIMAL))
    bad = CorrectionTable("t", ((0.0, 1.0), (0.0, 2.0), (-1.0, 1.0)))
    findings = validate(replace(net, correction_tables=(bad,)))
    assert [f.message for f in findings] == ["table angles not strictly increasing"]


def test_validate_does_not_mutate():
    net = case("five_bus_pst")
    before = serialize_case(net)
    validate(net)
    assert serialize_case(net) == before


def test_validate_disconnected_is_warning():
    net = parse_case(json.dumps(MINIMAL))
    net = replace(net, branches=(replace(net.branches[0], status=False),))
    findings = validate(net)
    assert [f.severity for f in findings] == ["warning"]


@pytest.mark.parametrize("mw, base, expected", [
    (100.0, 100.0, 1.0),
    (0.0, 37.0, 0.0),
    (7239.0, 100.0, 72.39),
])
def test_to_per_unit(mw, base, expected):
    assert to_per_unit(mw, base) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("base", [0.0, -10.0])
def test_to_per_unit_rejects_bad_base(base):
    with pytest.raises(ValueError):
        to_per_unit(1.0, base)


@pytest.mark.parametrize("name", ALL_CASES)
def test_round_trip_corpus(name):
    net = case(name)
    assert parse_case(serialize_case(net)) == net


@pytest.mark.parametrize("name", ALL_CASES)
def test_parsed_corpus_has_no_errors(name):
    assert all(f.severity != "error" for f in validate(case(name)))


def test_strip_corrections():
    net = case("five_bus_pst")
    stripped = strip_corrections(net)
    assert all(br.transformer is None or br.transformer.correction_table is None
               for br in stripped.branches)
    assert net.branch(7).transformer.correction_table == "table1"


finite = st.floats(min_value=-1e3, max_value=1e3, allow_nan=False)


@st.composite
def networks(draw):
    n = draw(st.integers(min_value=2, max_value=5))
    buses = tuple(
        Bus(id=i + 1, base_kv=draw(st.floats(1, 500)), kind="slack" if i == 0 else draw(st.sampled_from(["pv", "pq"])),
            name=draw(st.text(max_size=5)), area=draw(st.sampled_from(["a", "b"])),
            vmin_pu=0.9, vmax_pu=draw(st.floats(1.0, 1.2)))
        for i in range(n)
    )
    table = CorrectionTable("t", ((-10.0, draw(st.floats(0.1, 2))), (10.0, draw(st.floats(0.1, 2)))))
    branches = []
    for i in range(1, n):
        xf = None
        if draw(st.booleans()):
            xf = TransformerExt(draw(st.floats(0.8, 1.2)), draw(st.floats(-60, 60)),
                                draw(st.sampled_from([None, "t"])))
        branches.append(Branch(id=i, from_bus=i, to_bus=i + 1, r_pu=draw(st.floats(0, 0.1)),
                               x_pu=draw(st.floats(0.01, 0.5)), b_pu=draw(st.floats(0, 0.1)),
                               rating_mva=draw(st.floats(0, 500)), status=draw(st.booleans()),
                               transformer=xf))
    return Network(base_mva=100.0, buses=buses, branches=tuple(branches), correction_tables=(table,))


@settings(max_examples=60, deadline=None)
@given(networks())
def test_round_trip_property(net):
    assert parse_case(serialize_case(net)) == net


def test_corpus_files_are_utf8_json():
    for path in CASES.glob("*.json"):
        json.loads(path.read_text(encoding="utf-8"))
