"""Contact trace parsing, writing and characterisation."""
import json
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, Optional, Tuple

import networkx as nx
import numpy as np
import pandas as pd

from .core_model import ContactEvent, InterestProfile, canonical_pair, split_duration_by_slot
from .errors import TraceFormatError

logger = logging.getLogger(__name__)

CANONICAL_HEADER = "start_seconds,end_seconds,node_a,node_b"


class TraceFormat(str, Enum):
    CANONICAL = "canonical"  # start,end,a,b
    CRAWDAD = "crawdad"      # a b start end [extra columns ignored]


@dataclass(frozen=True)
class ContactTrace:
    events: Tuple[ContactEvent, ...]
    node_count: int
    duration: float

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))
        previous = None
        for event in self.events:
            if previous is not None and event.start < previous.start:
                raise ValueError("trace events must be sorted by start time")
            if event.b >= self.node_count:
                raise ValueError(f"node {event.b} outside node_count {self.node_count}")
            if event.end > self.duration:
                raise ValueError(f"contact {event.pair} ends after trace duration {self.duration}")
            previous = event

    def __len__(self):
        return len(self.events)


def merge_contacts(events):
    """Union overlapping (or touching) intervals per pair, then sort by start"""
    by_pair = defaultdict(list)
    for event in events:
        by_pair[event.pair].append(event)

    merged = []
    for (a, b), pair_events in by_pair.items():
        pair_events.sort(key=lambda e: (e.start, e.end))
        start, end = pair_events[0].start, pair_events[0].end
        for event in pair_events[1:]:
            if event.start <= end:
                end = max(end, event.end)
            else:
                merged.append(ContactEvent(a, b, start, end))
                start, end = event.start, event.end
        merged.append(ContactEvent(a, b, start, end))

    merged.sort(key=lambda e: (e.start, e.a, e.b, e.end))
    return merged


def build_trace(events, node_count=None, duration=None):
    """Merge, sort and wrap raw contacts into a validated trace"""
    merged = merge_contacts(events)
    highest = max((e.b for e in merged), default=-1)
    if node_count is None:
        node_count = highest + 1
    last_end = max((e.end for e in merged), default=0.0)
    if duration is None:
        duration = last_end
    return ContactTrace(events=tuple(merged), node_count=node_count, duration=duration)


def _parse_time(token, line_number):
    try:
        value = float(token)
    except ValueError:
        raise TraceFormatError(f"bad time value {token!r}", line_number) from None
    if not math.isfinite(value):
        raise TraceFormatError(f"non-finite time {token!r}", line_number)
    return value


def _parse_node(token, line_number):
    try:
        value = int(token)
    except ValueError:
        raise TraceFormatError(f"bad node id {token!r}", line_number) from None
    if value < 0:
        raise TraceFormatError(f"negative node id {value}", line_number)
    return value


def _read_directive(text, directives, line_number):
    # "# nodes: 36" / "# duration: 1036800"
    body = text.lstrip("#").strip()
    if ":" not in body:
        return
    key, _, value = body.partition(":")
    key = key.strip().lower()
    if key in ("nodes", "duration"):
        try:
            directives[key] = float(value)
        except ValueError:
            raise TraceFormatError(f"bad {key} directive {value.strip()!r}", line_number) from None


def parse_contact_trace(stream, format=TraceFormat.CANONICAL, node_count=None) -> ContactTrace:
    """Parse a contact trace from an iterable of lines"""
    format = TraceFormat(format)
    directives = {}
    raw = []  # (line_number, a, b, start, end)
    seen_data = False

    for line_number, line in enumerate(stream, start=1):
        text = line.strip()
        if not text:
            continue
        if text.startswith("#"):
            _read_directive(text, directives, line_number)
            continue

        if format is TraceFormat.CANONICAL:
            fields = [f.strip() for f in text.split(",")]
            if not seen_data and fields and fields[0].lower().startswith("start"):
                continue  # optional header
            if len(fields) != 4:
                raise TraceFormatError(f"expected 4 comma-separated fields, got {len(fields)}", line_number)
            start_tok, end_tok, a_tok, b_tok = fields
        else:
            fields = text.split()
            if len(fields) < 4:
                raise TraceFormatError(f"expected at least 4 whitespace-separated fields, got {len(fields)}", line_number)
            a_tok, b_tok, start_tok, end_tok = fields[:4]

        seen_data = True
        start = _parse_time(start_tok, line_number)
        end = _parse_time(end_tok, line_number)
        a = _parse_node(a_tok, line_number)
        b = _parse_node(b_tok, line_number)
        if a == b:
            raise TraceFormatError(f"self-contact on node {a}", line_number)
        if end <= start:
            raise TraceFormatError(f"end {end} <= start {start}", line_number)
        if start < 0:
            raise TraceFormatError(f"negative start time {start}", line_number)
        raw.append((line_number, a, b, start, end))

    if format is TraceFormat.CRAWDAD:
        # Densely renumber whatever identifiers the dataset uses
        ids = sorted({a for _, a, _, _, _ in raw} | {b for _, _, b, _, _ in raw})
        mapping = {old: new for new, old in enumerate(ids)}
        raw = [(ln, mapping[a], mapping[b], s, e) for ln, a, b, s, e in raw]

    if node_count is None and "nodes" in directives:
        node_count = int(directives["nodes"])
    if node_count is not None:
        for line_number, a, b, _, _ in raw:
            if max(a, b) >= node_count:
                raise TraceFormatError(f"node id {max(a, b)} out of range for {node_count} nodes", line_number)

    events = [ContactEvent(a, b, s, e) for _, a, b, s, e in raw]
    duration = directives.get("duration")
    if duration is not None:
        last_end = max((e.end for e in events), default=0.0)
        if last_end > duration:
            raise TraceFormatError(f"contacts run until {last_end}, past declared duration {duration}")

    trace = build_trace(events, node_count=node_count, duration=duration)
    logger.debug("Parsed %d contacts (%d after merging) over %d nodes",
                 len(events), len(trace.events), trace.node_count)
    return trace


def read_contact_trace(path, format=TraceFormat.CANONICAL, node_count=None):
    """Load a trace file from disk"""
    with open(path, "r", encoding="utf-8") as f:
        trace = parse_contact_trace(f, format=format, node_count=node_count)
    logger.info("Loaded %s: %d nodes, %d contacts", path, trace.node_count, len(trace.events))
    return trace


def _fmt(value):
    if float(value).is_integer():
        return str(int(value))
    return repr(float(value))


def write_contact_trace(trace, stream):
    """Write a trace as canonical CSV, keeping node count and duration as directives"""
    stream.write(f"# nodes: {trace.node_count}\n")
    stream.write(f"# duration: {_fmt(trace.duration)}\n")
    stream.write(CANONICAL_HEADER + "\n")
    for event in trace.events:
        stream.write(f"{_fmt(event.start)},{_fmt(event.end)},{event.a},{event.b}\n")


def save_contact_trace(trace, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        write_contact_trace(trace, f)
    return path


@dataclass
class AggregatedGraph:
    """Unweighted contact graph plus total contact seconds per pair"""
    nodes: int
    edge_weight: Dict[Tuple[int, int], float] = field(default_factory=dict)

    @property
    def edges(self):
        return set(self.edge_weight)

    def degree(self, node):
        return sum(1 for a, b in self.edge_weight if node in (a, b))

    def weight(self, a, b):
        return self.edge_weight.get(canonical_pair(a, b), 0.0)

    def to_networkx(self, threshold=0.0):
        """Binary graph over all nodes keeping edges whose weight reaches the threshold"""
        graph = nx.Graph()
        graph.add_nodes_from(range(self.nodes))
        graph.add_edges_from(pair for pair, w in self.edge_weight.items() if w >= threshold)
        return graph


def aggregate_contacts(events, nodes):
    weights = defaultdict(float)
    for event in events:
        weights[event.pair] += event.duration
    # Sorted keys keep the mapping independent of event order
    return AggregatedGraph(nodes=nodes, edge_weight={pair: weights[pair] for pair in sorted(weights)})


def aggregate(trace) -> AggregatedGraph:
    """Collapse a trace into its social graph"""
    return aggregate_contacts(trace.events, trace.node_count)


def network_density(graph) -> float:
    """Average node degree of the aggregated contact graph"""
    if graph.nodes < 1:
        raise ValueError("density needs at least one node")
    return 2 * len(graph.edge_weight) / graph.nodes


@dataclass
class TraceStats:
    nodes: int
    contacts: int
    duration: float
    density: float
    active_days: int
    total_contact_seconds: float
    mean_contact_seconds: Optional[float]
    mean_inter_contact_gap: Optional[float]
    max_inter_contact_gap: Optional[float]
    pair_table: pd.DataFrame

    def pair(self, a, b):
        """Row of the pair table for one node pair"""
        a, b = canonical_pair(a, b)
        rows = self.pair_table[(self.pair_table["a"] == a) & (self.pair_table["b"] == b)]
        if rows.empty:
            return None
        return _clean_record(rows.iloc[0].to_dict())

    def to_dict(self, include_pairs=False):
        summary = {
            "nodes": self.nodes,
            "contacts": self.contacts,
            "pairs": int(len(self.pair_table)),
            "duration": self.duration,
            "density": self.density,
            "active_days": self.active_days,
            "total_contact_seconds": self.total_contact_seconds,
            "mean_contact_seconds": self.mean_contact_seconds,
            "mean_inter_contact_gap": self.mean_inter_contact_gap,
            "max_inter_contact_gap": self.max_inter_contact_gap,
        }
        if include_pairs:
            summary["pair_stats"] = [_clean_record(r) for r in self.pair_table.to_dict("records")]
        return summary


def _none_if_nan(value):
    if value is None:
        return None
    value = float(value)
    return None if math.isnan(value) else value


def _clean_record(record):
    cleaned = {}
    for key, value in record.items():
        if key in ("a", "b", "contacts"):
            cleaned[key] = int(value)
        else:
            cleaned[key] = _none_if_nan(value)
    return cleaned


def trace_stats(trace) -> TraceStats:
    """Per-pair contact counts, inter-contact gaps and overall activity"""
    frame = pd.DataFrame(
        [(e.a, e.b, e.start, e.end) for e in trace.events],
        columns=["a", "b", "start", "end"],
    )
    frame["duration"] = frame["end"] - frame["start"]
    frame = frame.sort_values(["a", "b", "start"], kind="mergesort")
    # Gap between a contact's start and the previous contact's end for the same pair
    frame["gap"] = frame["start"] - frame.groupby(["a", "b"])["end"].shift(1)

    pair_table = (
        frame.groupby(["a", "b"], sort=True)
        .agg(
            contacts=("start", "size"),
            total_seconds=("duration", "sum"),
            mean_gap=("gap", "mean"),
            max_gap=("gap", "max"),
        )
        .reset_index()
    )

    days = set()
    for event in trace.events:
        days.update(fragment.day for fragment in split_duration_by_slot(event))

    gaps = frame["gap"].dropna()
    density = network_density(aggregate(trace)) if trace.node_count else 0.0
    total = float(frame["duration"].sum()) if len(frame) else 0.0
    return TraceStats(
        nodes=trace.node_count,
        contacts=len(trace.events),
        duration=float(trace.duration),
        density=density,
        active_days=len(days),
        total_contact_seconds=total,
        mean_contact_seconds=_none_if_nan(frame["duration"].mean()) if len(frame) else None,
        mean_inter_contact_gap=float(np.mean(gaps)) if len(gaps) else None,
        max_inter_contact_gap=float(np.max(gaps)) if len(gaps) else None,
        pair_table=pair_table,
    )


def write_sidecar(path, groups, profiles, extra=None):
    """Store group membership and interest profiles next to a generated trace"""
    payload = {
        "groups": {name: sorted(members) for name, members in groups.items()},
        "interests": {str(p.node): sorted(p.interests) for p in profiles},
    }
    if extra:
        payload.update(extra)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
    return path


def read_sidecar(path):
    with open(path, "r", encoding="utf-8") as f:
        payload = json.load(f)
    groups = {name: list(members) for name, members in payload.get("groups", {}).items()}
    profiles = [
        InterestProfile(int(node), frozenset(interests))
        for node, interests in payload.get("interests", {}).items()
    ]
    profiles.sort(key=lambda p: p.node)
    return groups, profiles, payload
