"""Shared vocabulary: time slots, contacts, messages, interests and run config."""
import math
from dataclasses import dataclass, field
from typing import FrozenSet, List, Optional, Union

from .errors import ScenarioValidationError

NodeId = int
ContentType = str

SECONDS_PER_DAY = 86400
DEFAULT_SLOT_COUNT = 24
DEFAULT_BUFFER_BYTES = 2_097_152
DEFAULT_LINK_RATE_BPS = 250_000
MIN_MESSAGE_BYTES = 1024
MAX_MESSAGE_BYTES = 102400
INSTANTANEOUS = math.inf


def slot_length(slot_count=DEFAULT_SLOT_COUNT):
    return SECONDS_PER_DAY / slot_count


def slot_of(t, slot_count=DEFAULT_SLOT_COUNT):
    """Daily time slot of an instant; boundary instants belong to the later slot"""
    if t < 0:
        raise ValueError(f"negative time {t}")
    return int((t % SECONDS_PER_DAY) // slot_length(slot_count))


def day_of(t):
    return int(t // SECONDS_PER_DAY)


@dataclass(frozen=True)
class ContactEvent:
    """One encounter between two nodes, always stored with a < b"""
    a: NodeId
    b: NodeId
    start: float
    end: float

    def __post_init__(self):
        if self.a == self.b:
            raise ValueError(f"self-contact on node {self.a}")
        if self.a < 0 or self.b < 0:
            raise ValueError("node ids must be non-negative")
        if not self.end > self.start:
            raise ValueError(f"contact end {self.end} <= start {self.start}")
        if self.start < 0:
            raise ValueError(f"contact starts before time zero ({self.start})")
        if self.a > self.b:
            a, b = self.b, self.a
            object.__setattr__(self, "a", a)
            object.__setattr__(self, "b", b)

    @property
    def pair(self):
        return (self.a, self.b)

    @property
    def duration(self):
        return self.end - self.start

    def other(self, node):
        return self.b if node == self.a else self.a


def canonical_pair(a, b):
    return (a, b) if a < b else (b, a)


@dataclass(frozen=True)
class SlotFragment:
    slot: int
    day: int
    seconds: float


def split_duration_by_slot(contact, slot_count=DEFAULT_SLOT_COUNT) -> List[SlotFragment]:
    """Cut a contact into pieces that each sit inside one slot of one day"""
    length = slot_length(slot_count)
    fragments = []
    cursor = contact.start
    while cursor < contact.end:
        # Index of the absolute slot the cursor sits in
        absolute = math.floor(cursor / length)
        boundary = (absolute + 1) * length
        piece_end = min(boundary, contact.end)
        fragments.append(SlotFragment(
            slot=absolute % slot_count,
            day=int(absolute // slot_count),
            seconds=piece_end - cursor,
        ))
        cursor = piece_end
    return fragments


@dataclass(frozen=True)
class Unicast:
    dest: NodeId


@dataclass(frozen=True)
class Typed:
    content: ContentType

    def __post_init__(self):
        if not self.content:
            raise ValueError("content type must be a non-empty tag")


MessageKind = Union[Unicast, Typed]


@dataclass(frozen=True)
class Message:
    id: int
    src: NodeId
    kind: MessageKind
    size: int
    created: float
    ttl: Optional[float] = None  # None means unlimited

    def __post_init__(self):
        if isinstance(self.kind, Unicast) and self.kind.dest == self.src:
            raise ValueError(f"message {self.id} is addressed to its own source")
        if self.size <= 0:
            raise ValueError(f"message {self.id} has non-positive size")

    @property
    def is_unicast(self):
        return isinstance(self.kind, Unicast)

    @property
    def is_typed(self):
        return isinstance(self.kind, Typed)

    @property
    def sort_key(self):
        return (self.created, self.id)

    def expired(self, now):
        return self.ttl is not None and now > self.created + self.ttl

    def is_destination(self, node, interests=frozenset()):
        """True when the node is a final recipient of this message"""
        if isinstance(self.kind, Unicast):
            return node == self.kind.dest
        return node != self.src and self.kind.content in interests


@dataclass(frozen=True)
class InterestProfile:
    node: NodeId
    interests: FrozenSet[ContentType] = frozenset()

    def wants(self, content):
        return content in self.interests


@dataclass(frozen=True)
class ScenarioConfig:
    """Run-level settings shared by the engine and the protocols"""
    nodes: int
    duration: float
    buffer_bytes: int = DEFAULT_BUFFER_BYTES
    unrestricted_buffer_nodes: FrozenSet[NodeId] = frozenset()
    link_rate_bps: float = DEFAULT_LINK_RATE_BPS
    slot_count: int = DEFAULT_SLOT_COUNT
    max_message_bytes: int = MAX_MESSAGE_BYTES
    ttl: Optional[float] = None
    seed: int = 0
    workload: object = field(default=None, compare=False)

    def validate(self):
        if self.nodes < 1:
            raise ScenarioValidationError("scenario needs at least one node")
        if not self.duration > 0:
            raise ScenarioValidationError(f"duration must be positive, got {self.duration}")
        if not self.link_rate_bps > 0:
            raise ScenarioValidationError("link_rate_bps must be positive")
        if self.slot_count < 1 or SECONDS_PER_DAY % self.slot_count:
            raise ScenarioValidationError(f"slot_count {self.slot_count} must divide a day")
        restricted = set(range(self.nodes)) - set(self.unrestricted_buffer_nodes)
        if restricted and self.buffer_bytes <= self.max_message_bytes:
            raise ScenarioValidationError(
                f"buffer_bytes {self.buffer_bytes} cannot hold a {self.max_message_bytes}-byte message"
            )
        if self.ttl is not None and not self.ttl > 0:
            raise ScenarioValidationError("ttl must be positive or unlimited")
        return self

    def capacity_of(self, node):
        """Buffer capacity in bytes, or None when the node is unrestricted"""
        if node in self.unrestricted_buffer_nodes:
            return None
        return self.buffer_bytes

    def transfer_seconds(self, size):
        if math.isinf(self.link_rate_bps):
            return 0.0
        return size * 8 / self.link_rate_bps
