import math

import numpy as np
import pytest

from src.core_model import ContactEvent, InterestProfile, Message, ScenarioConfig, Typed, Unicast
from src.metrics import delivery_probability
from src.oracle import earliest_arrivals, oracle_deliveries
from src.protocols import ProtocolParams
from src.sim_engine import run
from src.trace_io import build_trace
from src.workload import Workload

DURATION = 1200.0
MICRO_SEEDS = range(50)


def micro_trace(rng):
    nodes = int(rng.integers(2, 9))
    events = []
    for _ in range(int(rng.integers(1, 21))):
        a, b = rng.choice(nodes, size=2, replace=False)
        start = float(rng.integers(0, 1000))
        events.append(ContactEvent(int(a), int(b), start, start + float(rng.integers(1, 200))))
    return build_trace(events, node_count=nodes, duration=DURATION)


def micro_unicast(rng, nodes):
    messages = []
    for i in range(3):
        src, dest = rng.choice(nodes, size=2, replace=False)
        messages.append(Message(i, int(src), Unicast(int(dest)), 1024, float(rng.integers(0, 800))))
    return Workload("unicast", tuple(messages))


def micro_typed(rng, nodes):
    contents = ("x", "y")
    profiles = {
        n: InterestProfile(n, frozenset(c for c in contents if rng.random() < 0.5)) for n in range(nodes)
    }
    messages = tuple(
        Message(i, int(rng.integers(nodes)), Typed(contents[i % 2]), 1024, float(rng.integers(0, 800)))
        for i in range(2)
    )
    return Workload("typed", messages, profiles)


def ideal_config(nodes):
    return ScenarioConfig(
        nodes=nodes,
        duration=DURATION,
        unrestricted_buffer_nodes=frozenset(range(nodes)),
        link_rate_bps=math.inf,
    )


def delivery_times(result, workload):
    created = {m.id: m.created for m in workload.messages}
    return {key: created[key[0]] + latency for key, latency in result.latencies.items()}


def test_earliest_arrivals_respects_time_order():
    contacts = [ContactEvent(1, 2, 0, 10), ContactEvent(0, 1, 20, 30)]
    arrival = earliest_arrivals(contacts, source=0, created=0, nodes=3)
    assert arrival == [0, 20, math.inf]


def test_earliest_arrivals_chains_within_a_contact():
    contacts = [ContactEvent(0, 1, 0, 50), ContactEvent(1, 2, 40, 45)]
    assert earliest_arrivals(contacts, source=0, created=10, nodes=3) == [10, 10, 40]


@pytest.mark.parametrize("seed", MICRO_SEEDS)
def test_epidemic_matches_oracle(seed):
    rng = np.random.default_rng(seed)
    trace = micro_trace(rng)
    for workload in (micro_unicast(rng, trace.node_count), micro_typed(rng, trace.node_count)):
        result = run(trace, ideal_config(trace.node_count), "epidemic", workload)
        oracle = oracle_deliveries(trace, workload)
        observed = delivery_times(result, workload)
        assert set(observed) == set(oracle)
        for key, when in oracle.items():
            assert observed[key] == pytest.approx(when)


@pytest.mark.parametrize("seed", MICRO_SEEDS)
def test_other_protocols_are_dominated(seed):
    rng = np.random.default_rng(seed)
    trace = micro_trace(rng)
    unicast, typed = micro_unicast(rng, trace.node_count), micro_typed(rng, trace.node_count)
    cfg = ideal_config(trace.node_count)

    for protocol, workload in (("bubblerap", unicast), ("dlife", unicast), ("scorp", typed)):
        flooding = run(trace, cfg, "epidemic", workload)
        result = run(trace, cfg, ProtocolParams(protocol, window_length=300), workload)
        oracle = oracle_deliveries(trace, workload)
        observed = delivery_times(result, workload)
        assert set(observed) <= set(oracle)
        for key, when in observed.items():
            assert when >= oracle[key] - 1e-9
        if workload.messages and flooding.expected:
            assert delivery_probability(result) <= delivery_probability(flooding)
