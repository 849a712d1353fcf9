"""Forwarding decisions: Epidemic, Bubble Rap, dLife and SCORP."""
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, FrozenSet, List

from .core_model import DEFAULT_SLOT_COUNT, slot_of
from .errors import ProtocolMismatchError, ScenarioValidationError
from .social import (
    DEFAULT_ALPHA,
    DEFAULT_DURATION_THRESHOLD,
    DEFAULT_K,
    DEFAULT_WINDOW_LENGTH,
)

UNICAST = "unicast"
TYPED = "typed"


class Action(str, Enum):
    DELIVER = "deliver"
    REPLICATE = "replicate"
    SKIP = "skip"


@dataclass(frozen=True)
class ForwardingDecision:
    message_id: int
    action: Action

    @property
    def transfers(self):
        return self.action is not Action.SKIP


@dataclass(frozen=True)
class ProtocolParams:
    name: str = "epidemic"
    k: int = DEFAULT_K
    duration_threshold: float = DEFAULT_DURATION_THRESHOLD
    window_length: float = DEFAULT_WINDOW_LENGTH
    alpha: float = DEFAULT_ALPHA
    utility: str = "max"

    def validate(self):
        if self.name not in PROTOCOLS:
            raise ScenarioValidationError(
                f"unknown protocol {self.name!r}; choose from {', '.join(sorted(PROTOCOLS))}"
            )
        if self.k < 3:
            raise ScenarioValidationError("bubblerap k must be >= 3")
        if not self.window_length > 0:
            raise ScenarioValidationError("window_length must be positive")
        if not 0 < self.alpha <= 1:
            raise ScenarioValidationError("alpha must lie in (0, 1]")
        if self.utility not in ("max", "sum"):
            raise ScenarioValidationError("utility must be 'max' or 'sum'")
        return self


@dataclass
class ProtocolContext:
    """Read-only view of social state for one decision round"""
    now: float
    weights: object = None
    importance: object = None
    communities: object = None
    centrality: object = None
    known_interests: Dict[int, Dict[int, FrozenSet[str]]] = field(default_factory=dict)
    slot_count: int = DEFAULT_SLOT_COUNT
    utility: str = "max"

    @property
    def slot(self):
        return slot_of(self.now, self.slot_count)

    @classmethod
    def from_state(cls, social, now, utility="max"):
        return cls(
            now=now,
            weights=social.weights,
            importance=social.importance,
            communities=social.communities,
            centrality=social.centrality,
            known_interests=social.known_interests,
            slot_count=social.slot_count,
            utility=utility,
        )


def _ordered(msgs):
    # (creation time, id) order fixes link contention
    return sorted(msgs, key=lambda m: m.sort_key)


def _require(msg, kind, protocol):
    actual = UNICAST if msg.is_unicast else TYPED
    if actual != kind:
        raise ProtocolMismatchError(f"{protocol} cannot forward {actual} message {msg.id}")


def epidemic_decide(ctx, carrier, peer, msgs) -> List[ForwardingDecision]:
    """Copy everything the peer lacks"""
    decisions = []
    for msg in _ordered(msgs):
        if peer.has_copy(msg.id):
            action = Action.SKIP
        elif msg.is_destination(peer.node, peer.interests):
            action = Action.DELIVER
        else:
            action = Action.REPLICATE
        decisions.append(ForwardingDecision(msg.id, action))
    return decisions


def _bubble_action(ctx, carrier, peer, dest):
    communities, centrality = ctx.communities, ctx.centrality
    peer_shared = communities.shared(peer, dest)
    carrier_shared = communities.shared(carrier, dest)
    if peer_shared:
        if not carrier_shared:
            return Action.REPLICATE
        peer_local = max(centrality.local_of(peer, c) for c in peer_shared)
        carrier_local = max(centrality.local_of(carrier, c) for c in carrier_shared)
        return Action.REPLICATE if peer_local > carrier_local else Action.SKIP
    if not carrier_shared:
        # Neither side is in the destination's community yet: bubble up globally
        if centrality.global_of(peer) > centrality.global_of(carrier):
            return Action.REPLICATE
    return Action.SKIP


def bubblerap_decide(ctx, carrier, peer, msgs) -> List[ForwardingDecision]:
    """Global centrality until the destination community, local centrality inside it"""
    decisions = []
    for msg in _ordered(msgs):
        _require(msg, UNICAST, "bubblerap")
        dest = msg.kind.dest
        if peer.has_copy(msg.id):
            action = Action.SKIP
        elif peer.node == dest:
            action = Action.DELIVER
        else:
            action = _bubble_action(ctx, carrier.node, peer.node, dest)
        decisions.append(ForwardingDecision(msg.id, action))
    return decisions


def dlife_decide(ctx, carrier, peer, msgs) -> List[ForwardingDecision]:
    """Social weight towards the destination in the current slot, importance as fallback"""
    slot = ctx.slot
    decisions = []
    for msg in _ordered(msgs):
        _require(msg, UNICAST, "dlife")
        dest = msg.kind.dest
        if peer.has_copy(msg.id):
            action = Action.SKIP
        elif peer.node == dest:
            action = Action.DELIVER
        else:
            w_peer = ctx.weights.weight(peer.node, dest, slot)
            w_carrier = ctx.weights.weight(carrier.node, dest, slot)
            if w_peer == 0 and w_carrier == 0:
                better = ctx.importance.get(peer.node, slot) > ctx.importance.get(carrier.node, slot)
            else:
                better = w_peer > w_carrier
            action = Action.REPLICATE if better else Action.SKIP
        decisions.append(ForwardingDecision(msg.id, action))
    return decisions


def content_utility(ctx, node, content):
    """Strongest (or summed) weight from node to peers it knows want the content"""
    slot = ctx.slot
    weights = [
        ctx.weights.weight(node, other, slot)
        for other, interests in sorted(ctx.known_interests.get(node, {}).items())
        if other != node and content in interests
    ]
    if not weights:
        return 0.0
    return sum(weights) if ctx.utility == "sum" else max(weights)


def scorp_decide(ctx, carrier, peer, msgs) -> List[ForwardingDecision]:
    """Deliver to interested peers, otherwise follow social weight towards interested nodes"""
    decisions = []
    for msg in _ordered(msgs):
        _require(msg, TYPED, "scorp")
        content = msg.kind.content
        if peer.has_copy(msg.id):
            action = Action.SKIP
        elif msg.is_destination(peer.node, peer.interests):
            action = Action.DELIVER
        elif content_utility(ctx, peer.node, content) > content_utility(ctx, carrier.node, content):
            action = Action.REPLICATE
        else:
            action = Action.SKIP
        decisions.append(ForwardingDecision(msg.id, action))
    return decisions


def interests_exchange(known_interests, carrier, peer):
    """Both sides learn the other's own interests; nothing second-hand is relayed"""
    known_interests.setdefault(carrier.node, {})[peer.node] = frozenset(peer.interests)
    known_interests.setdefault(peer.node, {})[carrier.node] = frozenset(carrier.interests)
    return known_interests


@dataclass(frozen=True)
class ProtocolSpec:
    name: str
    decide: Callable
    kinds: FrozenSet[str]
    uses_communities: bool = False


PROTOCOLS: Dict[str, ProtocolSpec] = {
    "epidemic": ProtocolSpec("epidemic", epidemic_decide, frozenset({UNICAST, TYPED})),
    "bubblerap": ProtocolSpec("bubblerap", bubblerap_decide, frozenset({UNICAST}), uses_communities=True),
    "dlife": ProtocolSpec("dlife", dlife_decide, frozenset({UNICAST})),
    "scorp": ProtocolSpec("scorp", scorp_decide, frozenset({TYPED})),
}


def get_protocol(name):
    try:
        return PROTOCOLS[name]
    except KeyError:
        raise ScenarioValidationError(
            f"unknown protocol {name!r}; choose from {', '.join(sorted(PROTOCOLS))}"
        ) from None


def check_compatibility(protocol_name, workload_kind):
    spec = get_protocol(protocol_name)
    if workload_kind not in spec.kinds:
        raise ProtocolMismatchError(
            f"protocol/workload mismatch: {protocol_name} cannot run a {workload_kind} workload"
        )
    return spec
