"""Discrete-event replay of a contact trace under a forwarding protocol.

Events are processed in (time, priority, sequence) order. At equal times a
finishing transfer goes first, then message creations, contact starts, window
boundaries and finally contact ends, so a transfer that finishes exactly when
its contact closes still completes.
"""
import heapq
import itertools
import json
import logging
from collections import OrderedDict, defaultdict
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

from .core_model import ContactEvent
from .errors import ScenarioValidationError
from .protocols import ProtocolContext, ProtocolParams, check_compatibility, interests_exchange
from .social import SocialState, centrality_hubs
from .workload import expected_deliveries

logger = logging.getLogger(__name__)

PRI_COMPLETE = 0
PRI_CREATE = 1
PRI_CONTACT_START = 2
PRI_WINDOW = 3
PRI_DUMP = 3
PRI_CONTACT_END = 4


class Outcome(str, Enum):
    COMPLETED = "completed"
    ABORTED = "aborted_by_contact_end"


@dataclass
class BufferedCopy:
    message: object
    received: float


class NodeRuntime:
    """One node's buffer, interests and delivery record"""

    def __init__(self, node, capacity=None, interests=frozenset()):
        self.node = node
        self.capacity = capacity  # None: unrestricted
        self.interests = frozenset(interests)
        self.buffer: "OrderedDict[int, BufferedCopy]" = OrderedDict()
        self.used = 0
        self.peak = 0
        self.delivered = set()

    def holds(self, message_id):
        return message_id in self.buffer

    def has_copy(self, message_id):
        """Summary-vector check: a held copy or an earlier delivery"""
        return message_id in self.buffer or message_id in self.delivered

    def messages(self):
        return [copy.message for copy in self.buffer.values()]

    def store(self, message, now):
        self.buffer[message.id] = BufferedCopy(message, now)
        self.used += message.size
        self.peak = max(self.peak, self.used)

    def remove(self, message_id):
        copy = self.buffer.pop(message_id)
        self.used -= copy.message.size
        return copy


@dataclass
class AdmitResult:
    admitted: bool
    dropped: List[int] = field(default_factory=list)


def buffer_admit(node, message, now) -> AdmitResult:
    """Store a copy, evicting the oldest-received copies until it fits"""
    if node.holds(message.id):
        return AdmitResult(admitted=False)
    if node.capacity is None:
        node.store(message, now)
        return AdmitResult(admitted=True)
    if message.size > node.capacity:
        return AdmitResult(admitted=False)

    dropped = []
    while node.used + message.size > node.capacity:
        oldest = next(iter(node.buffer))
        node.remove(oldest)
        dropped.append(oldest)
    node.store(message, now)
    return AdmitResult(admitted=True, dropped=dropped)


@dataclass
class Transfer:
    message_id: int
    sender: int
    receiver: int
    start: float
    finish: float
    outcome: Outcome = Outcome.COMPLETED


@dataclass(frozen=True)
class PlannedForward:
    sender: int
    receiver: int
    message: object


def schedule_transfers(contact, decisions, link_rate_bps, start=None) -> List[Transfer]:
    """Serialise planned forwards per direction at the link rate

    `decisions` is a list of PlannedForward. Each direction has its own link;
    anything that cannot finish before the contact ends is aborted.
    """
    start = contact.start if start is None else start
    by_direction = defaultdict(list)
    for planned in decisions:
        by_direction[(planned.sender, planned.receiver)].append(planned)

    transfers = []
    for (sender, receiver) in sorted(by_direction):
        cursor = start
        for planned in sorted(by_direction[(sender, receiver)], key=lambda p: p.message.sort_key):
            finish = cursor + _transfer_seconds(planned.message.size, link_rate_bps)
            outcome = Outcome.COMPLETED if finish <= contact.end else Outcome.ABORTED
            transfers.append(Transfer(planned.message.id, sender, receiver, cursor, finish, outcome))
            if outcome is Outcome.ABORTED:
                break
            cursor = finish
    return transfers


def _transfer_seconds(size, link_rate_bps):
    if link_rate_bps == float("inf"):
        return 0.0
    return size * 8 / link_rate_bps


@dataclass
class RunResult:
    protocol: str
    seed: int
    expected: int
    delivered: int = 0
    transmissions: int = 0
    direct_deliveries: int = 0
    latencies: Dict[Tuple[int, int], float] = field(default_factory=dict)
    peak_buffer: Dict[int, int] = field(default_factory=dict)
    peak_buffer_restricted: int = 0
    drops: int = 0
    evictions: int = 0
    aborted: int = 0
    messages_created: int = 0
    mean_message_size: float = 0.0
    duration: float = 0.0
    relay_nodes: int = 0
    hubs: List[int] = field(default_factory=list)
    events: List[dict] = field(default_factory=list)

    @property
    def replicas(self):
        return self.transmissions - self.delivered

    def write_event_log(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            for record in self.events:
                f.write(json.dumps(record, sort_keys=True) + "\n")
        return path


@dataclass
class _Link:
    queue: list = field(default_factory=list)  # heap of (created, id)
    queued: set = field(default_factory=set)
    in_flight: Optional[Transfer] = None


@dataclass
class _ActiveContact:
    contact: ContactEvent
    links: Dict[Tuple[int, int], _Link] = field(default_factory=dict)


class Simulation:
    """One run: a trace, a protocol, a workload and a seed"""

    def __init__(self, trace, config, protocol, workload, seed=0, log_events=True, dump_social_every=None):
        self.config = config.validate()
        self.params = protocol if isinstance(protocol, ProtocolParams) else ProtocolParams(name=protocol)
        self.params.validate()
        self.spec = check_compatibility(self.params.name, workload.kind)
        if trace.node_count > config.nodes:
            raise ScenarioValidationError(
                f"trace has {trace.node_count} nodes but the scenario declares {config.nodes}"
            )
        workload.check_within(config.duration)
        for msg in workload.messages:
            if msg.src >= config.nodes or (msg.is_unicast and msg.kind.dest >= config.nodes):
                raise ScenarioValidationError(f"message {msg.id} names a node outside the scenario")

        self.trace = trace
        self.workload = workload
        self.seed = seed
        self.log_events = log_events
        self.dump_social_every = dump_social_every
        self.now = 0.0

        self.nodes = [
            NodeRuntime(n, config.capacity_of(n), workload.interests_of(n))
            for n in range(config.nodes)
        ]
        self.social = SocialState(
            config.nodes,
            slot_count=config.slot_count,
            alpha=self.params.alpha,
            k=self.params.k,
            duration_threshold=self.params.duration_threshold,
            window_length=self.params.window_length,
        )
        self.messages = {m.id: m for m in workload.messages}
        self.active: Dict[Tuple[int, int], _ActiveContact] = {}
        self.node_contacts = defaultdict(set)
        self.snapshots = []
        self._heap = []
        self._seq = itertools.count()

        self.result = RunResult(
            protocol=self.params.name,
            seed=seed,
            expected=expected_deliveries(workload),
            messages_created=len(workload.messages),
            mean_message_size=workload.mean_size,
            duration=config.duration,
            relay_nodes=max(config.nodes - len({m.src for m in workload.messages}), 1),
        )

    # -- event plumbing -------------------------------------------------

    def _push(self, time, priority, kind, payload):
        heapq.heappush(self._heap, (time, priority, next(self._seq), kind, payload))

    def _log(self, kind, msg, sender=None, receiver=None, **extra):
        if not self.log_events:
            return
        record = {"time": self.now, "kind": kind, "msg": msg, "from": sender, "to": receiver}
        record.update(extra)
        self.result.events.append(record)

    def _seed_events(self):
        duration = self.config.duration
        for msg in self.workload.messages:
            self._push(msg.created, PRI_CREATE, "create", msg)
        for contact in self.trace.events:
            if contact.start >= duration:
                continue
            if contact.end > duration:
                contact = ContactEvent(contact.a, contact.b, contact.start, duration)
            self._push(contact.start, PRI_CONTACT_START, "start", contact)
            self._push(contact.end, PRI_CONTACT_END, "end", contact)
        if self.spec.uses_communities:
            window = self.params.window_length
            boundary = window
            while boundary <= duration:
                self._push(boundary, PRI_WINDOW, "window", None)
                boundary += window
        if self.dump_social_every:
            tick = self.dump_social_every
            while tick <= duration:
                self._push(tick, PRI_DUMP, "dump", None)
                tick += self.dump_social_every

    def run(self) -> RunResult:
        self._seed_events()
        handlers = {
            "complete": self._on_complete,
            "create": self._on_create,
            "start": self._on_contact_start,
            "window": self._on_window,
            "dump": self._on_dump,
            "end": self._on_contact_end,
        }
        while self._heap:
            time, _, _, kind, payload = heapq.heappop(self._heap)
            self.now = time
            handlers[kind](payload)

        result = self.result
        result.peak_buffer = {n.node: n.peak for n in self.nodes}
        result.peak_buffer_restricted = max((n.peak for n in self.nodes if n.capacity is not None), default=0)
        result.hubs = centrality_hubs(self.social.centrality)
        logger.info("%s seed %s: delivered %d/%d with %d transmissions",
                    self.params.name, self.seed, result.delivered, result.expected, result.transmissions)
        return result

    # -- handlers -------------------------------------------------------

    def _on_create(self, msg):
        node = self.nodes[msg.src]
        self._log("create", msg.id, msg.src, None, size=msg.size)
        if self._admit(node, msg, sender=msg.src):
            self._offer(node, [msg])
        else:
            logger.warning("Message %d dropped at creation on node %d", msg.id, msg.src)

    def _on_contact_start(self, contact):
        active = _ActiveContact(contact)
        self.active[contact.pair] = active
        self.node_contacts[contact.a].add(contact.pair)
        self.node_contacts[contact.b].add(contact.pair)
        a, b = self.nodes[contact.a], self.nodes[contact.b]
        interests_exchange(self.social.known_interests, a, b)
        self._evaluate(a, b, a.messages())
        self._evaluate(b, a, b.messages())

    def _on_contact_end(self, contact):
        active = self.active.pop(contact.pair, None)
        if active is None:
            return
        self.node_contacts[contact.a].discard(contact.pair)
        self.node_contacts[contact.b].discard(contact.pair)
        for link in active.links.values():
            if link.in_flight is not None:
                transfer = link.in_flight
                transfer.outcome = Outcome.ABORTED
                self.result.aborted += 1
                self._log("abort", transfer.message_id, transfer.sender, transfer.receiver)
                logger.debug("Transfer of %d aborted at %.1f", transfer.message_id, self.now)
        self.social.record_contact(contact)

    def _on_window(self, _):
        ongoing = [a.contact for a in self.active.values()]
        self.social.refresh_structure(self.now, ongoing)

    def _on_dump(self, _):
        self.snapshots.append(self.social.snapshot(self.now))

    def _on_complete(self, transfer):
        active = self.active.get(_pair(transfer.sender, transfer.receiver))
        if active is None:
            return
        link = active.links[(transfer.sender, transfer.receiver)]
        link.in_flight = None
        sender, receiver = self.nodes[transfer.sender], self.nodes[transfer.receiver]
        msg = self.messages[transfer.message_id]

        if not sender.holds(msg.id):
            # Evicted while on the air
            transfer.outcome = Outcome.ABORTED
            self.result.aborted += 1
            self._log("abort", msg.id, sender.node, receiver.node)
        else:
            self._deliver_or_store(sender, receiver, msg)
        self._serve(active, link, transfer.sender, transfer.receiver)

    def _deliver_or_store(self, sender, receiver, msg):
        result = self.result
        result.transmissions += 1
        self._log("transfer", msg.id, sender.node, receiver.node, size=msg.size)
        if receiver.has_copy(msg.id):
            return

        if msg.is_destination(receiver.node, receiver.interests):
            receiver.delivered.add(msg.id)
            result.delivered += 1
            result.latencies[(msg.id, receiver.node)] = self.now - msg.created
            if sender.node == msg.src:
                result.direct_deliveries += 1
            self._log("deliver", msg.id, sender.node, receiver.node)
            if msg.is_unicast:
                # Final hop reached: the carrier lets its copy go
                sender.remove(msg.id)
                self._log("remove", msg.id, None, sender.node, size=msg.size)
                return
        if self._admit(receiver, msg, sender=sender.node):
            self._offer(receiver, [msg])

    def _admit(self, node, msg, sender):
        outcome = buffer_admit(node, msg, self.now)
        for dropped_id in outcome.dropped:
            self.result.drops += 1
            self.result.evictions += 1
            self._log("drop", dropped_id, None, node.node,
                      size=self.messages[dropped_id].size, reason="evict")
            logger.debug("Node %d evicted %d to fit %d", node.node, dropped_id, msg.id)
        if outcome.admitted:
            self._log("store", msg.id, sender, node.node, size=msg.size)
        elif not node.holds(msg.id):
            self.result.drops += 1
            self._log("drop", msg.id, None, node.node, size=msg.size, reason="reject")
        return outcome.admitted

    # -- forwarding -----------------------------------------------------

    def _offer(self, node, msgs):
        """A node gained copies: consider them on every contact in progress"""
        for pair in sorted(self.node_contacts[node.node]):
            peer = self.nodes[pair[0] if pair[1] == node.node else pair[1]]
            self._evaluate(node, peer, msgs)

    def _purge_expired(self, node):
        for msg in node.messages():
            if msg.expired(self.now):
                node.remove(msg.id)
                self._log("expire", msg.id, None, node.node, size=msg.size)

    def _evaluate(self, carrier, peer, msgs):
        self._purge_expired(carrier)
        msgs = [m for m in msgs if carrier.holds(m.id)]
        if not msgs:
            return
        active = self.active[_pair(carrier.node, peer.node)]
        ctx = ProtocolContext.from_state(self.social, self.now, self.params.utility)
        decisions = self.spec.decide(ctx, carrier, peer, msgs)
        link = active.links.setdefault((carrier.node, peer.node), _Link())
        for decision in decisions:
            if not decision.transfers or decision.message_id in link.queued:
                continue
            msg = self.messages[decision.message_id]
            heapq.heappush(link.queue, msg.sort_key)
            link.queued.add(msg.id)
        self._serve(active, link, carrier.node, peer.node)

    def _serve(self, active, link, sender_id, receiver_id):
        """Start the next queued transfer if the link is idle"""
        if link.in_flight is not None:
            return
        sender, receiver = self.nodes[sender_id], self.nodes[receiver_id]
        while link.queue:
            _, msg_id = heapq.heappop(link.queue)
            link.queued.discard(msg_id)
            msg = self.messages[msg_id]
            if not sender.holds(msg_id) or receiver.has_copy(msg_id) or msg.expired(self.now):
                continue
            planned = schedule_transfers(
                active.contact, [PlannedForward(sender_id, receiver_id, msg)],
                self.config.link_rate_bps, start=self.now,
            )[0]
            link.in_flight = planned
            if planned.outcome is Outcome.COMPLETED:
                self._push(planned.finish, PRI_COMPLETE, "complete", planned)
            # An aborted transfer holds the link until the contact ends
            return


def _pair(a, b):
    return (a, b) if a < b else (b, a)


def run(trace, config, protocol, workload, seed=0, log_events=True, dump_social_every=None):
    """Replay a trace and return the run's counters and event log"""
    simulation = Simulation(trace, config, protocol, workload, seed, log_events, dump_social_every)
    return simulation.run()


def run_with_snapshots(trace, config, protocol, workload, seed=0, log_events=True, dump_social_every=None):
    simulation = Simulation(trace, config, protocol, workload, seed, log_events, dump_social_every)
    result = simulation.run()
    return result, simulation.snapshots


def audit_event_log(events, capacities):
    """Replay store/drop/remove records; return a list of violations

    Checks that no buffer ever exceeds its capacity, that every eviction
    removes the oldest copy held, and that every relayed copy came from a
    node that held it.
    """
    buffers = defaultdict(OrderedDict)
    used = defaultdict(int)
    violations = []

    for record in events:
        kind, msg, node = record["kind"], record["msg"], record["to"]
        if kind == "store":
            sender = record["from"]
            if sender != node and msg not in buffers[sender]:
                violations.append(f"t={record['time']}: node {node} stored {msg} from {sender} which did not hold it")
            buffers[node][msg] = record["size"]
            used[node] += record["size"]
            capacity = capacities.get(node)
            if capacity is not None and used[node] > capacity:
                violations.append(f"t={record['time']}: node {node} holds {used[node]} > {capacity} bytes")
        elif kind == "drop" and record.get("reason") == "evict":
            held = buffers[node]
            if not held or next(iter(held)) != msg:
                violations.append(f"t={record['time']}: node {node} evicted {msg} which was not its oldest copy")
            if msg in held:
                used[node] -= held.pop(msg)
        elif kind in ("remove", "expire"):
            held = buffers[node]
            if msg in held:
                used[node] -= held.pop(msg)
    return violations
