"""Message workloads: creation schedules, sizes and receiver interests."""
import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

from .core_model import (
    MAX_MESSAGE_BYTES,
    MIN_MESSAGE_BYTES,
    SECONDS_PER_DAY,
    InterestProfile,
    Message,
    Typed,
    Unicast,
)
from .errors import ScenarioValidationError
from .mobility import GAMES, READING
from .protocols import TYPED, UNICAST
from .rng import make_rng
from .social import DEFAULT_WINDOW_LENGTH

logger = logging.getLogger(__name__)

# msg/int load -> messages per day at the source
RATE_BY_LOAD = {1: 35.0, 5: 35.0, 10: 35.0, 20: 70.0, 35: 140.0}
SYNTHETIC_RATE_PER_DAY = 50.0  # 25 messages every 12 hours
SYNTHETIC_CREATION_PARTS = 6  # creation fills one sixth of the run


@dataclass(frozen=True)
class UnicastFlow:
    source: int
    destinations: Tuple[int, ...]


@dataclass(frozen=True)
class TypedFlow:
    source: int
    content_types: Tuple[str, ...]


@dataclass(frozen=True)
class WorkloadSpec:
    kind: str
    flows: Tuple[object, ...]
    msgs_per_destination: int = 1
    rate_per_day: float = 35.0
    interest_cardinality: Optional[int] = None
    content_types: Tuple[str, ...] = ()
    receivers: Optional[Tuple[int, ...]] = None
    size_range: Tuple[int, int] = (MIN_MESSAGE_BYTES, MAX_MESSAGE_BYTES)
    ttl: Optional[float] = None
    start: float = 0.0

    def validate(self, node_count=None):
        if self.kind not in (UNICAST, TYPED):
            raise ScenarioValidationError(f"workload kind must be unicast or typed, got {self.kind!r}")
        if not self.flows:
            raise ScenarioValidationError("workload needs at least one flow")
        if self.start < 0:
            raise ScenarioValidationError(f"workload start must be >= 0, got {self.start}")
        if not self.rate_per_day > 0:
            raise ScenarioValidationError("rate_per_day must be positive")
        lo, hi = self.size_range
        if not (MIN_MESSAGE_BYTES <= lo <= hi <= MAX_MESSAGE_BYTES):
            raise ScenarioValidationError(
                f"size_range {self.size_range} must lie within [{MIN_MESSAGE_BYTES}, {MAX_MESSAGE_BYTES}]"
            )
        for flow in self.flows:
            expected_type = UnicastFlow if self.kind == UNICAST else TypedFlow
            if not isinstance(flow, expected_type):
                raise ScenarioValidationError(f"{self.kind} workload cannot carry {type(flow).__name__}")
            nodes = [flow.source] + list(getattr(flow, "destinations", ()))
            if node_count is not None and any(n < 0 or n >= node_count for n in nodes):
                raise ScenarioValidationError(f"flow from {flow.source} names a node outside 0..{node_count - 1}")
            if self.kind == UNICAST and flow.source in flow.destinations:
                raise ScenarioValidationError(f"source {flow.source} lists itself as a destination")
        if self.kind == UNICAST and self.msgs_per_destination < 1:
            raise ScenarioValidationError("msgs_per_destination must be >= 1")
        if self.interest_cardinality is not None:
            if self.kind != TYPED:
                raise ScenarioValidationError("interest_cardinality only applies to typed workloads")
            if self.interest_cardinality > len(self.content_types):
                raise ScenarioValidationError(
                    f"interest cardinality {self.interest_cardinality} exceeds "
                    f"{len(self.content_types)} content types"
                )
        return self


@dataclass
class Workload:
    kind: str
    messages: Tuple[Message, ...]
    profiles: Dict[int, InterestProfile] = field(default_factory=dict)

    def interests_of(self, node):
        profile = self.profiles.get(node)
        return profile.interests if profile else frozenset()

    @property
    def mean_size(self):
        if not self.messages:
            return 0.0
        return sum(m.size for m in self.messages) / len(self.messages)

    def check_within(self, duration):
        late = [m.id for m in self.messages if m.created > duration]
        if late:
            raise ScenarioValidationError(
                f"{len(late)} messages are created after the scenario ends at {duration} s"
            )


def _assign_interests(spec, node_count, seed):
    rng = make_rng(seed, "interests")
    universe = sorted(spec.content_types)
    sources = {flow.source for flow in spec.flows}
    receivers = spec.receivers
    if receivers is None:
        receivers = tuple(n for n in range(node_count) if n not in sources)
    profiles = {}
    for node in receivers:
        picks = rng.choice(len(universe), size=spec.interest_cardinality, replace=False)
        profiles[node] = InterestProfile(node, frozenset(universe[i] for i in sorted(picks)))
    return profiles


def make_workload(spec, node_count, seed, profiles=None) -> Workload:
    """Expand a workload spec into concrete messages and interest profiles"""
    spec.validate(node_count)
    rng = make_rng(seed, "workload")
    spacing = SECONDS_PER_DAY / spec.rate_per_day
    lo, hi = spec.size_range

    pending = []
    for flow_index, flow in enumerate(spec.flows):
        if isinstance(flow, UnicastFlow):
            # Round-robin over destinations, k rounds
            kinds = [Unicast(dest) for _ in range(spec.msgs_per_destination) for dest in flow.destinations]
        else:
            kinds = [Typed(content) for content in flow.content_types]
        for i, kind in enumerate(kinds):
            pending.append((spec.start + i * spacing, flow_index, i, flow.source, kind))
    pending.sort(key=lambda item: item[:3])

    messages = []
    for msg_id, (created, _, _, source, kind) in enumerate(pending):
        size = int(rng.integers(lo, hi + 1))
        messages.append(Message(id=msg_id, src=source, kind=kind, size=size, created=created, ttl=spec.ttl))

    if spec.kind == TYPED and spec.interest_cardinality is not None:
        assigned = _assign_interests(spec, node_count, seed)
    else:
        assigned = {p.node: p for p in (profiles or [])}
    if spec.kind == TYPED and not assigned:
        raise ScenarioValidationError("typed workload needs interest profiles or an interest_cardinality")

    logger.debug("Workload: %d %s messages", len(messages), spec.kind)
    return Workload(kind=spec.kind, messages=tuple(messages), profiles=assigned)


def destinations_of(msg, workload):
    """Nodes that count as final recipients of a message"""
    if msg.is_unicast:
        return [msg.kind.dest]
    return sorted(
        node for node, profile in workload.profiles.items()
        if node != msg.src and msg.kind.content in profile.interests
    )


def expected_deliveries(workload, profiles=None) -> int:
    """Number of (message, recipient) pairs a perfect protocol would deliver"""
    if profiles is not None:
        workload = Workload(workload.kind, workload.messages, {p.node: p for p in profiles})
    total = 0
    for msg in workload.messages:
        recipients = destinations_of(msg, workload)
        if msg.is_typed and not recipients:
            logger.warning("Nobody is interested in %r (message %d)", msg.kind.content, msg.id)
        total += len(recipients)
    return total


def load_rate(msg_int):
    return RATE_BY_LOAD.get(msg_int, 35.0)


def cambridge_unicast_spec(msgs_per_destination, nodes=36, source=0):
    """Source sends k messages to each of the other nodes"""
    destinations = tuple(n for n in range(nodes) if n != source)
    return WorkloadSpec(
        kind=UNICAST,
        flows=(UnicastFlow(source, destinations),),
        msgs_per_destination=msgs_per_destination,
        rate_per_day=load_rate(msgs_per_destination),
    )


def cambridge_typed_spec(interest_cardinality, nodes=36, source=0, content_count=35):
    """Source creates one message per unique content type; receivers get random interests"""
    contents = tuple(f"c{i:02d}" for i in range(content_count))
    return WorkloadSpec(
        kind=TYPED,
        flows=(TypedFlow(source, contents),),
        rate_per_day=load_rate(interest_cardinality),
        interest_cardinality=interest_cardinality,
        content_types=contents,
        receivers=tuple(n for n in range(nodes) if n != source),
    )


def synthetic_schedule(per_source, duration=None):
    """(start, rate_per_day) for the three-group workloads

    Creation waits for the first community window, then one source's messages
    fill the same share of the run they fill at full scale (100 messages at 25
    every 12 hours over 12 days).
    """
    if duration is None:
        return DEFAULT_WINDOW_LENGTH, SYNTHETIC_RATE_PER_DAY
    span = duration / SYNTHETIC_CREATION_PARTS
    start = min(DEFAULT_WINDOW_LENGTH, span)
    return start, per_source * SECONDS_PER_DAY / span


def synthetic_unicast_spec(groups, sources, duration=None):
    """Node of A sends to every node of B and M, node of B to every node of A and M"""
    a_source, b_source = sources
    to_b_m = tuple(sorted(groups["B"] + groups["M"]))
    to_a_m = tuple(sorted(groups["A"] + groups["M"]))
    start, rate = synthetic_schedule(max(len(to_b_m), len(to_a_m)), duration)
    return WorkloadSpec(
        kind=UNICAST,
        flows=(UnicastFlow(a_source, to_b_m), UnicastFlow(b_source, to_a_m)),
        rate_per_day=rate,
        start=start,
    )


def synthetic_typed_spec(sources, duration=None):
    """Each source publishes the content its own group does not want"""
    a_source, b_source = sources
    start, rate = synthetic_schedule(1, duration)
    return WorkloadSpec(
        kind=TYPED,
        flows=(TypedFlow(a_source, (GAMES,)), TypedFlow(b_source, (READING,))),
        rate_per_day=rate,
        start=start,
    )
