import io
import itertools

import pytest
from hypothesis import given, settings, strategies as st

from src.core_model import ContactEvent, InterestProfile
from src.errors import TraceFormatError
from src.trace_io import (
    aggregate,
    aggregate_contacts,
    build_trace,
    network_density,
    parse_contact_trace,
    read_sidecar,
    trace_stats,
    write_contact_trace,
    write_sidecar,
)


def parse(text, **kwargs):
    return parse_contact_trace(io.StringIO(text), **kwargs)


def complete_trace(n):
    events = [ContactEvent(a, b, 10 * i, 10 * i + 5) for i, (a, b) in enumerate(itertools.combinations(range(n), 2))]
    return build_trace(events, node_count=n)


def test_parse_single_record():
    trace = parse("0,600,1,2\n")
    assert len(trace.events) == 1
    assert trace.events[0].pair == (1, 2)
    assert trace.events[0].duration >= 600


def test_parse_rejects_end_before_start_with_line_number():
    with pytest.raises(TraceFormatError) as excinfo:
        parse("start_seconds,end_seconds,node_a,node_b\n0,10,0,1\n100,50,1,2\n")
    assert excinfo.value.line_number == 3
    assert "line 3" in str(excinfo.value)


def test_parse_rejects_garbage():
    with pytest.raises(TraceFormatError):
        parse("0,abc,1,2\n")
    with pytest.raises(TraceFormatError):
        parse("0,10,1\n")
    with pytest.raises(TraceFormatError):
        parse("0,10,3,3\n")


def test_overlapping_contacts_are_merged():
    trace = parse("0,100,0,1\n50,200,1,0\n300,400,0,1\n")
    assert [(e.start, e.end) for e in trace.events] == [(0, 200), (300, 400)]


def test_touching_contacts_join_into_one():
    trace = parse("0,10,0,1\n10,20,1,0\n30,40,0,1\n")
    assert [(e.start, e.end) for e in trace.events] == [(0, 20), (30, 40)]
    assert trace_stats(trace).max_inter_contact_gap == 10


def test_crawdad_format_renumbers_densely():
    trace = parse("12 40 0 100 1 0\n40 7 50 80 2 0\n", format="crawdad")
    assert trace.node_count == 3
    assert {e.pair for e in trace.events} == {(1, 2), (0, 2)}


def test_node_count_range_check():
    with pytest.raises(TraceFormatError):
        parse("# nodes: 2\n0,10,0,5\n")


def test_write_then_parse_keeps_directives():
    trace = build_trace([ContactEvent(0, 1, 0, 10.5), ContactEvent(1, 2, 20, 30)], node_count=5, duration=100)
    buffer = io.StringIO()
    write_contact_trace(trace, buffer)
    again = parse(buffer.getvalue())
    assert again == trace


contacts = st.lists(
    st.tuples(
        st.integers(0, 5), st.integers(0, 5), st.integers(0, 1000), st.integers(1, 300)
    ).filter(lambda t: t[0] != t[1]),
    max_size=20,
)


@settings(max_examples=50)
@given(contacts)
def test_write_parse_round_trip(raw):
    trace = build_trace([ContactEvent(a, b, s, s + d) for a, b, s, d in raw], node_count=6, duration=1300)
    buffer = io.StringIO()
    write_contact_trace(trace, buffer)
    assert parse(buffer.getvalue()) == trace


def test_aggregate_examples():
    assert aggregate_contacts([], 5).edges == set()

    graph = aggregate(build_trace([ContactEvent(0, 1, 0, 10), ContactEvent(1, 2, 20, 30)]))
    assert len(graph.edges) == 2
    assert graph.degree(1) == 2

    graph = aggregate(build_trace([ContactEvent(0, 1, 0, 600), ContactEvent(0, 1, 1000, 1400)]))
    assert graph.weight(1, 0) == 1000


@settings(max_examples=50)
@given(contacts, st.randoms(use_true_random=False))
def test_aggregate_ignores_event_order(raw, random):
    events = [ContactEvent(a, b, s, s + d) for a, b, s, d in raw]
    shuffled = list(events)
    random.shuffle(shuffled)
    assert aggregate_contacts(shuffled, 6) == aggregate_contacts(events, 6)
    assert aggregate(build_trace(shuffled, node_count=6)) == aggregate(build_trace(events, node_count=6))


@pytest.mark.parametrize("n", [3, 4, 5, 10])
def test_density_of_complete_graph(n):
    assert network_density(aggregate(complete_trace(n))) == n - 1


def test_density_of_star():
    trace = build_trace([ContactEvent(0, i, i, i + 1) for i in range(1, 5)], node_count=5)
    assert network_density(aggregate(trace)) == pytest.approx(1.6)


def test_trace_stats_gaps():
    stats = trace_stats(build_trace([ContactEvent(0, 1, 0, 100), ContactEvent(0, 1, 500, 600)]))
    assert stats.pair(0, 1)["mean_gap"] == 400
    assert stats.mean_inter_contact_gap == 400

    single = trace_stats(build_trace([ContactEvent(0, 1, 0, 100)]))
    assert single.pair(0, 1)["mean_gap"] is None
    assert single.mean_inter_contact_gap is None


def test_trace_stats_active_days():
    events = [ContactEvent(0, 1, day * 86400 + 3600, day * 86400 + 7200) for day in range(12)]
    assert trace_stats(build_trace(events)).active_days == 12


def test_empty_trace_stats():
    stats = trace_stats(parse("# nodes: 4\n# duration: 100\n"))
    assert stats.density == 0
    assert stats.contacts == 0
    assert stats.to_dict()["pairs"] == 0


def test_sidecar_round_trip(tmp_path):
    path = tmp_path / "trace.groups.json"
    profiles = [InterestProfile(0, frozenset({"reading"})), InterestProfile(1, frozenset({"games", "reading"}))]
    write_sidecar(path, {"A": [0], "B": [1]}, profiles, {"sources": [0]})
    groups, loaded, payload = read_sidecar(path)
    assert groups == {"A": [0], "B": [1]}
    assert loaded == profiles
    assert payload["sources"] == [0]
