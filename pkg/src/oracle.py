"""Brute-force earliest delivery over time-respecting paths.

Transfers are instantaneous and buffers unlimited, so a message reaches a
node at the earliest time any chain of contacts with non-decreasing times
can carry it there.
"""
import math

from .workload import destinations_of


def earliest_arrivals(contacts, source, created, nodes):
    """Earliest time each node can hold a copy created at `source`"""
    arrival = [math.inf] * nodes
    arrival[source] = created
    changed = True
    while changed:
        changed = False
        for contact in contacts:
            for u, v in ((contact.a, contact.b), (contact.b, contact.a)):
                if arrival[u] <= contact.end:
                    reach = max(arrival[u], contact.start)
                    if reach < arrival[v]:
                        arrival[v] = reach
                        changed = True
    return arrival


def oracle_deliveries(trace, workload, duration=None):
    """Map (message id, recipient) to the earliest feasible delivery time"""
    nodes = max(trace.node_count, 1 + max((m.src for m in workload.messages), default=0))
    contacts = [c for c in trace.events if duration is None or c.start < duration]
    best = {}
    for msg in workload.messages:
        if duration is not None and msg.created > duration:
            continue
        arrival = earliest_arrivals(contacts, msg.src, msg.created, nodes)
        for dest in destinations_of(msg, workload):
            if dest < nodes and math.isfinite(arrival[dest]):
                best[(msg.id, dest)] = arrival[dest]
    return best
