"""Dynamic social state: slot weights, node importance, communities, centralities."""
import json
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, FrozenSet, List, Set, Tuple

from networkx.algorithms.community import k_clique_communities

from .core_model import DEFAULT_SLOT_COUNT, canonical_pair, split_duration_by_slot
from .errors import ScenarioValidationError
from .trace_io import AggregatedGraph

logger = logging.getLogger(__name__)

DEFAULT_ALPHA = 0.5
DEFAULT_K = 3
DEFAULT_DURATION_THRESHOLD = 3600.0
DEFAULT_WINDOW_LENGTH = 21600.0


@dataclass
class _SlotEntry:
    weight: float = 0.0
    base: float = 0.0        # weight before the current day was folded in
    day: int = -1
    accumulated: float = 0.0  # contact seconds seen so far on `day`


class SlotWeightTable:
    """Per (pair, daily slot) social weight, a daily EWMA of contact seconds"""

    def __init__(self, alpha=DEFAULT_ALPHA):
        if not 0 < alpha <= 1:
            raise ScenarioValidationError(f"alpha must lie in (0, 1], got {alpha}")
        self.alpha = alpha
        self._entries: Dict[Tuple[Tuple[int, int], int], _SlotEntry] = {}
        self._peers: Dict[Tuple[int, int], Set[int]] = defaultdict(set)

    def update(self, a, b, slot, day, seconds):
        """Fold one contact fragment in; returns the change in weight"""
        pair = canonical_pair(a, b)
        entry = self._entries.get((pair, slot))
        if entry is None:
            entry = _SlotEntry()
            self._entries[(pair, slot)] = entry
            self._peers[(a, slot)].add(b)
            self._peers[(b, slot)].add(a)

        before = entry.weight
        if entry.day < 0:
            entry.base = 0.0
            entry.day = day
            entry.accumulated = 0.0
        elif day > entry.day:
            # Each silent day in between counts as one zero observation
            gap = day - entry.day
            entry.base = entry.weight * (1 - self.alpha) ** (gap - 1)
            entry.day = day
            entry.accumulated = 0.0
        entry.accumulated += seconds
        entry.weight = (1 - self.alpha) * entry.base + self.alpha * entry.accumulated
        return entry.weight - before

    def weight(self, a, b, slot):
        entry = self._entries.get((canonical_pair(a, b), slot))
        return entry.weight if entry else 0.0

    def peers(self, node, slot):
        return self._peers.get((node, slot), set())

    def items(self):
        for (pair, slot), entry in sorted(self._entries.items()):
            yield pair, slot, entry.weight


def update_social_weights(table, pair, fragment):
    """Apply one slot fragment of a contact to the weight table"""
    a, b = pair
    table.update(a, b, fragment.slot, fragment.day, fragment.seconds)
    return table


def social_weight(table, a, b, slot):
    return table.weight(a, b, slot)


class ImportanceTable:
    """Slot-wise weighted degree, kept in step with the weight table"""

    def __init__(self):
        self.imp: Dict[Tuple[int, int], float] = defaultdict(float)

    def apply(self, a, b, slot, delta):
        if delta:
            self.imp[(a, slot)] += delta
            self.imp[(b, slot)] += delta

    def get(self, node, slot):
        return self.imp.get((node, slot), 0.0)


def node_importance(table, a, slot):
    """Sum of a node's social weights to every peer in the slot"""
    return math.fsum(table.weight(a, b, slot) for b in sorted(table.peers(a, slot)))


def recompute_importance(table):
    """Full recomputation, used to check the incremental table"""
    totals = defaultdict(float)
    for (a, b), slot, weight in table.items():
        totals[(a, slot)] += weight
        totals[(b, slot)] += weight
    return dict(totals)


@dataclass
class CommunitySet:
    communities: List[FrozenSet[int]]
    membership: Dict[int, Set[int]] = field(default_factory=dict)

    @classmethod
    def from_communities(cls, communities, nodes):
        # Canonical order keeps community indices independent of node labels
        ordered = sorted((frozenset(c) for c in communities), key=lambda c: (min(c), sorted(c)))
        covered = set().union(*ordered) if ordered else set()
        ordered += [frozenset({n}) for n in range(nodes) if n not in covered]
        membership = defaultdict(set)
        for index, community in enumerate(ordered):
            for node in community:
                membership[node].add(index)
        return cls(communities=ordered, membership=dict(membership))

    @classmethod
    def singletons(cls, nodes):
        return cls.from_communities([], nodes)

    def of(self, node):
        return self.membership.get(node, set())

    def shared(self, a, b):
        return self.of(a) & self.of(b)

    def share_any(self, a, b):
        return bool(self.shared(a, b))

    def non_trivial(self):
        return [c for c in self.communities if len(c) > 1]


def kclique_communities(graph, k=DEFAULT_K, duration_threshold_seconds=DEFAULT_DURATION_THRESHOLD) -> CommunitySet:
    """k-clique percolation over pairs whose total contact time reaches the threshold"""
    if k < 3:
        raise ScenarioValidationError(f"k-clique percolation needs k >= 3, got {k}")
    binary = graph.to_networkx(threshold=duration_threshold_seconds)
    found = [frozenset(c) for c in k_clique_communities(binary, k)]
    return CommunitySet.from_communities(found, graph.nodes)


@dataclass
class CentralityTable:
    """Cumulative-window degree centralities"""
    window_length: float = DEFAULT_WINDOW_LENGTH
    completed_windows: int = 0
    global_: Dict[int, float] = field(default_factory=dict)
    local: Dict[Tuple[int, int], float] = field(default_factory=dict)
    # peers met by each node in each completed window
    window_peers: List[Dict[int, Set[int]]] = field(default_factory=list)

    def global_of(self, node):
        return self.global_.get(node, 0.0)

    def local_of(self, node, community):
        return self.local.get((node, community), 0.0)


def _window_peers(contacts, start, end):
    peers = defaultdict(set)
    for contact in contacts:
        if contact.start < end and contact.end > start:
            peers[contact.a].add(contact.b)
            peers[contact.b].add(contact.a)
    return dict(peers)


def update_centrality(table, contacts, now, communities=None) -> CentralityTable:
    """Close every window that ended by `now` and refresh the averages

    A node's window degree is the number of distinct peers it was in contact
    with during the window. Global centrality averages it over all completed
    windows; local centrality counts only peers inside the given community.
    """
    if not table.window_length > 0:
        raise ScenarioValidationError("window_length must be positive")
    target = int(now // table.window_length)
    contacts = list(contacts)
    while table.completed_windows < target:
        start = table.completed_windows * table.window_length
        table.window_peers.append(_window_peers(contacts, start, start + table.window_length))
        table.completed_windows += 1
    recompute_centralities(table, communities)
    return table


def recompute_centralities(table, communities=None):
    windows = table.window_peers
    count = len(windows)
    table.global_ = {}
    table.local = {}
    if count == 0:
        return table

    totals = defaultdict(int)
    for peers in windows:
        for node, met in peers.items():
            totals[node] += len(met)
    table.global_ = {node: total / count for node, total in sorted(totals.items())}

    if communities is not None:
        local_totals = defaultdict(int)
        for peers in windows:
            for node, met in peers.items():
                for index in communities.of(node):
                    members = communities.communities[index]
                    local_totals[(node, index)] += len(met & members)
        table.local = {key: total / count for key, total in sorted(local_totals.items())}
    return table


def centrality_hubs(table):
    """Nodes whose global centrality is above the population mean"""
    if not table.global_:
        return []
    mean = sum(table.global_.values()) / len(table.global_)
    return sorted(node for node, value in table.global_.items() if value > mean)


class SocialState:
    """Everything the protocols consult, owned and mutated by the engine"""

    def __init__(self, nodes, slot_count=DEFAULT_SLOT_COUNT, alpha=DEFAULT_ALPHA,
                 k=DEFAULT_K, duration_threshold=DEFAULT_DURATION_THRESHOLD,
                 window_length=DEFAULT_WINDOW_LENGTH):
        self.nodes = nodes
        self.slot_count = slot_count
        self.k = k
        self.duration_threshold = duration_threshold
        self.weights = SlotWeightTable(alpha)
        self.importance = ImportanceTable()
        self.communities = CommunitySet.singletons(nodes)
        self.centrality = CentralityTable(window_length=window_length)
        self.known_interests: Dict[int, Dict[int, FrozenSet[str]]] = defaultdict(dict)
        self.contacts_seen = []
        self._pair_seconds = defaultdict(float)

    def record_contact(self, contact):
        """Fold a finished contact into weights and importance"""
        self.contacts_seen.append(contact)
        self._pair_seconds[contact.pair] += contact.duration
        for fragment in split_duration_by_slot(contact, self.slot_count):
            delta = self.weights.update(contact.a, contact.b, fragment.slot, fragment.day, fragment.seconds)
            self.importance.apply(contact.a, contact.b, fragment.slot, delta)

    def refresh_structure(self, now, ongoing=()):
        """Window boundary: rebuild communities and centralities from contacts so far"""
        seen = list(self.contacts_seen)
        pair_seconds = dict(self._pair_seconds)
        # Ongoing contacts count up to now
        for contact in ongoing:
            if now > contact.start:
                pair_seconds[contact.pair] = pair_seconds.get(contact.pair, 0.0) + now - contact.start
        graph = AggregatedGraph(nodes=self.nodes, edge_weight=dict(sorted(pair_seconds.items())))
        self.communities = kclique_communities(graph, self.k, self.duration_threshold)
        update_centrality(self.centrality, seen + list(ongoing), now, self.communities)
        logger.debug("t=%.0f: %d communities, %d windows", now,
                     len(self.communities.non_trivial()), self.centrality.completed_windows)

    def importance_consistent(self, tolerance=1e-6):
        expected = recompute_importance(self.weights)
        keys = set(expected) | {k for k, v in self.importance.imp.items() if v}
        return all(abs(expected.get(k, 0.0) - self.importance.get(*k)) <= tolerance for k in keys)

    def snapshot(self, now):
        return {
            "time": now,
            "weights": [
                {"a": a, "b": b, "slot": slot, "weight": weight}
                for (a, b), slot, weight in self.weights.items()
            ],
            "communities": [sorted(c) for c in self.communities.non_trivial()],
            "global_centrality": {str(n): v for n, v in self.centrality.global_.items()},
            "completed_windows": self.centrality.completed_windows,
            "hubs": centrality_hubs(self.centrality),
        }


def save_social_dump(snapshots, file_path):
    """Write collected snapshots as one JSON document"""
    file_path = Path(file_path)
    file_path.parent.mkdir(parents=True, exist_ok=True)
    with open(file_path, "w", encoding="utf-8") as f:
        json.dump(snapshots, f, indent=2)
    return file_path
