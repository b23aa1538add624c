from dataclasses import replace
from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from carldtn.config import (GROUP_KINDS, ROUTERS, GroupConfig, Scenario, Workload,
                            default_scenario, parse_scenario, parse_size, render_scenario,
                            validate)
from carldtn.errors import ParseError, ValidationError

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"

SIX_GROUPS = """\
# six groups, as in the evaluation setup
duration = 43000
router = carl
message_interval = 25,35
message_size = 100k,1M
ttl = 300
group1.count = 15
group1.kind = pedestrian
group1.mobility = rwp
group2.count = 15
group2.kind = pedestrian
group2.mobility = rwp
group3.count = 10
group3.kind = car
group3.mobility = graph
group3.speed = 2.7,13.9
group4.count = 10
group4.kind = car
group4.mobility = graph
group4.speed = 2.7,13.9
group5.count = 5
group5.kind = bus
group5.mobility = graph
group5.graph = grid:4x4
group5.speed = 7,10
group6.count = 5
group6.kind = bus
group6.mobility = graph
group6.graph = grid:4x4
group6.speed = 7,10
"""


def test_six_group_file_parses():
    s = parse_scenario(SIX_GROUPS)
    assert len(s.groups) == 6 and s.n_total == 60
    assert [g.kind for g in s.groups] == ["pedestrian"] * 2 + ["car"] * 2 + ["bus"] * 2
    assert s.workload.size == (100_000, 1_000_000) and s.workload.ttl == 300.0
    assert s.groups[4].graph == "grid:4x4"


@pytest.mark.parametrize("path", sorted(SCENARIOS.glob("*.cfg")), ids=lambda p: p.name)
def test_shipped_scenarios_parse_and_round_trip(path):
    s = parse_scenario(path.read_text())
    assert parse_scenario(render_scenario(s)) == s


def test_parse_error_reports_line_number():
    with pytest.raises(ParseError) as exc:
        parse_scenario("duration = 100\n\n# comment\nthis line has no equals\n")
    assert exc.value.line == 4


def test_duplicate_key_is_a_parse_error():
    with pytest.raises(ParseError) as exc:
        parse_scenario("seed = 1\nseed = 2\n")
    assert exc.value.line == 2


def test_negative_ttl_names_the_key():
    with pytest.raises(ValidationError) as exc:
        parse_scenario("ttl = -5\n")
    assert exc.value.key == "ttl"


def test_unknown_key_is_rejected():
    with pytest.raises(ValidationError) as exc:
        parse_scenario("warp_factor = 9\n")
    assert exc.value.key == "warp_factor"


def test_unknown_group_setting_is_rejected():
    with pytest.raises(ValidationError) as exc:
        parse_scenario("group1.colour = red\n")
    assert exc.value.key == "group1.colour"


def test_unknown_router_is_rejected():
    with pytest.raises(ValidationError) as exc:
        parse_scenario("router = flooding\n")
    assert exc.value.key == "router"


def test_buffer_smaller_than_largest_message_is_rejected():
    with pytest.raises(ValidationError) as exc:
        validate(replace(default_scenario(), groups=(GroupConfig(buffer=500_000),)))
    assert exc.value.key == "group1.buffer"


def test_bad_graph_spec_is_rejected():
    with pytest.raises(ValidationError) as exc:
        parse_scenario("group1.mobility = graph\ngroup1.graph = ring:5\n")
    assert exc.value.key == "group1.graph"


@pytest.mark.parametrize("text,value", [("250k", 250_000), ("5MB", 5_000_000), ("1.5M", 1_500_000),
                                        ("42", 42), ("2g", 2_000_000_000)])
def test_parse_size(text, value):
    assert parse_size(text) == value


def test_parse_size_rejects_garbage():
    with pytest.raises(ValueError):
        parse_size("five megabytes")


def test_comments_and_blank_lines_are_ignored():
    s = parse_scenario("\n# header\nseed = 7   # inline\n\n")
    assert s.seed == 7


def test_empty_document_gives_defaults():
    assert parse_scenario("") == Scenario()


# ---- round trip -----------------------------------------------------------------------------

pos = st.floats(0.5, 1e5, allow_nan=False, allow_infinity=False)


@st.composite
def lo_hi(draw, lo=0.1, hi=100.0):
    a = draw(st.floats(lo, hi))
    b = draw(st.floats(a, hi))
    return (a, b)


@st.composite
def groups(draw):
    mobility = draw(st.sampled_from(["rwp", "rwk", "graph", "static"]))
    return GroupConfig(
        count=draw(st.integers(1, 20)), kind=draw(st.sampled_from(GROUP_KINDS)),
        mobility=mobility, speed=draw(lo_hi()), pause=draw(lo_hi(0.0, 300.0)),
        leg=draw(lo_hi(1.0, 500.0)), graph=f"grid:{draw(st.integers(2, 6))}x{draw(st.integers(2, 6))}",
        buffer=draw(st.integers(1_000_000, 100_000_000)), energy=draw(pos),
        range=draw(st.floats(1.0, 200.0)), bandwidth=draw(st.integers(1_000, 10_000_000)))


@st.composite
def scenarios(draw):
    gs = tuple(draw(st.lists(groups(), min_size=1, max_size=4)))
    if sum(g.count for g in gs) < 2:
        gs = gs + (GroupConfig(count=2),)
    return replace(
        default_scenario(), name=draw(st.text("abcxyz_-0123456789", min_size=1, max_size=10)),
        duration=draw(pos), seed=draw(st.integers(0, 2**63)), router=draw(st.sampled_from(ROUTERS)),
        world=(draw(pos), draw(pos)), groups=gs, report_interval=draw(pos),
        ttl_sweep_interval=draw(pos),
        workload=Workload(interval=draw(lo_hi()), size=(draw(st.integers(1, 1000)),
                                                         draw(st.integers(1000, 1_000_000))),
                          ttl=draw(pos)))


@given(s=scenarios())
def test_render_then_parse_is_identity(s):
    validate(s)
    assert parse_scenario(render_scenario(s)) == s
