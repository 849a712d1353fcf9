"""Shortest-path map-based movement and contact extraction."""
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, List, Optional, Tuple

import networkx as nx
import numpy as np

from .core_model import SECONDS_PER_DAY, ContactEvent, InterestProfile
from .errors import MapError, ScenarioValidationError
from .rng import make_rng
from .trace_io import build_trace

logger = logging.getLogger(__name__)

MAX_WALKING_SPEED = 1.4
FULL_GROUP_SIZE = 50
READING = "reading"
GAMES = "games"

# Positions are interpolated in blocks, contacts tested in smaller sub-blocks
_BLOCK_SAMPLES = 1024
_SUB_SAMPLES = 32


@dataclass
class MapGraph:
    """Walkable graph; vertex i sits at positions[i] (metres)"""
    graph: nx.Graph
    positions: np.ndarray

    def __post_init__(self):
        self._paths = lru_cache(maxsize=None)(self._compute_path)

    @property
    def vertex_count(self):
        return self.graph.number_of_nodes()

    @property
    def edge_count(self):
        return self.graph.number_of_edges()

    def edge_length(self, u, v):
        return self.graph.edges[u, v]["length"]

    def _compute_path(self, source, target):
        return tuple(nx.shortest_path(self.graph, source, target, weight="length"))

    def shortest_path(self, source, target):
        return self._paths(source, target)


def generate_map(kind="grid", rows=10, cols=10, spacing=50.0) -> MapGraph:
    """Build the street map nodes walk on; only square grids are supported"""
    if kind != "grid":
        raise MapError(f"unknown map kind {kind!r}")
    if rows < 2 or cols < 2:
        raise MapError(f"grid needs rows >= 2 and cols >= 2, got {rows}x{cols}")
    if not spacing > 0:
        raise MapError(f"grid spacing must be positive, got {spacing}")

    lattice = nx.grid_2d_graph(rows, cols)
    index = {rc: i for i, rc in enumerate(sorted(lattice.nodes))}
    positions = np.zeros((len(index), 2))
    for (r, c), i in index.items():
        positions[i] = (c * spacing, r * spacing)

    graph = nx.Graph()
    graph.add_nodes_from(range(len(index)))
    for u, v in lattice.edges:
        iu, iv = index[u], index[v]
        length = float(np.hypot(*(positions[iu] - positions[iv])))
        graph.add_edge(iu, iv, length=length)
    return MapGraph(graph=graph, positions=positions)


@dataclass(frozen=True)
class GroupSpec:
    name: str
    size: int
    interests: frozenset = frozenset()
    home_vertices: Optional[Tuple[int, ...]] = None  # None: whole map


@dataclass(frozen=True)
class MovementParams:
    duration: float
    groups: Tuple[GroupSpec, ...]
    speed_range: Tuple[float, float] = (0.5, MAX_WALKING_SPEED)
    pause_range: Tuple[float, float] = (100.0, 100.0)
    radio_range: float = 10.0
    sample_interval: float = 1.0
    initial_vertices: Optional[Tuple[int, ...]] = None

    @property
    def node_count(self):
        return sum(g.size for g in self.groups)

    def validate(self, map_graph=None):
        lo, hi = self.speed_range
        if not (0 < lo <= hi):
            raise ScenarioValidationError(f"bad speed_range {self.speed_range}")
        if hi > MAX_WALKING_SPEED:
            raise ScenarioValidationError(f"walking speed capped at {MAX_WALKING_SPEED} m/s")
        lo, hi = self.pause_range
        if not (0 < lo <= hi):
            raise ScenarioValidationError(f"bad pause_range {self.pause_range}")
        if not self.radio_range > 0:
            raise ScenarioValidationError("radio_range must be positive")
        if not self.duration > 0:
            raise ScenarioValidationError("duration must be positive")
        if not self.sample_interval > 0:
            raise ScenarioValidationError("sample_interval must be positive")
        if not self.groups or any(g.size < 1 for g in self.groups):
            raise ScenarioValidationError("every group needs at least one node")
        if self.initial_vertices is not None and len(self.initial_vertices) != self.node_count:
            raise ScenarioValidationError("initial_vertices must list one vertex per node")
        if map_graph is not None:
            vertices = set(map_graph.graph.nodes)
            for group in self.groups:
                if group.home_vertices is not None and not set(group.home_vertices) <= vertices:
                    raise ScenarioValidationError(f"group {group.name} has home vertices off the map")
            if self.initial_vertices is not None and not set(self.initial_vertices) <= vertices:
                raise ScenarioValidationError("initial vertex off the map")
        return self

    def group_assignment(self):
        """Map group name to the contiguous node ids it owns"""
        assignment = {}
        next_id = 0
        for group in self.groups:
            assignment[group.name] = list(range(next_id, next_id + group.size))
            next_id += group.size
        return assignment

    def profiles(self):
        profiles = []
        for group in self.groups:
            for node in self.group_assignment()[group.name]:
                profiles.append(InterestProfile(node, frozenset(group.interests)))
        return profiles


@dataclass
class Trajectory:
    """Piecewise-linear path: position is interpolated between waypoints"""
    times: np.ndarray
    xs: np.ndarray
    ys: np.ndarray
    movements: int = 0


def plan_trajectory(map_graph, params, rng, start_vertex, area) -> Trajectory:
    """Pause, pick a destination, walk the shortest path, repeat until duration"""
    times, xs, ys = [0.0], [], []
    x, y = map_graph.positions[start_vertex]
    xs.append(x)
    ys.append(y)
    here = start_vertex
    t = 0.0
    movements = 0

    while True:
        pause = rng.uniform(*params.pause_range)
        t += pause
        times.append(t)
        xs.append(xs[-1])
        ys.append(ys[-1])
        if t >= params.duration:
            break

        candidates = [v for v in area if v != here] or list(area)
        destination = int(candidates[rng.integers(len(candidates))])
        speed = rng.uniform(*params.speed_range)
        path = map_graph.shortest_path(here, destination)
        movements += 1
        for u, v in zip(path, path[1:]):
            t += map_graph.edge_length(u, v) / speed
            px, py = map_graph.positions[v]
            times.append(t)
            xs.append(px)
            ys.append(py)
        here = destination
        if t >= params.duration:
            break

    return Trajectory(np.asarray(times), np.asarray(xs), np.asarray(ys), movements)


def plan_trajectories(map_graph, params, seed) -> List[Trajectory]:
    rng = make_rng(seed, "mobility")
    all_vertices = tuple(sorted(map_graph.graph.nodes))
    trajectories = []
    node = 0
    for group in params.groups:
        area = tuple(group.home_vertices) if group.home_vertices is not None else all_vertices
        for _ in range(group.size):
            if params.initial_vertices is not None:
                start = params.initial_vertices[node]
            else:
                start = int(area[rng.integers(len(area))])
            trajectories.append(plan_trajectory(map_graph, params, rng, start, area))
            node += 1
    return trajectories


def positions_at(trajectories, times):
    """Positions of every node at the given times, shape (len(times), nodes, 2)"""
    times = np.asarray(times, dtype=float)
    out = np.empty((len(times), len(trajectories), 2))
    for i, trajectory in enumerate(trajectories):
        out[:, i, 0] = np.interp(times, trajectory.times, trajectory.xs)
        out[:, i, 1] = np.interp(times, trajectory.times, trajectory.ys)
    return out


def detect_contacts(trajectories, params) -> List[ContactEvent]:
    """Open a contact when two sampled positions come within radio range, close it when they leave"""
    n = len(trajectories)
    if n < 2:
        return []
    dt = params.sample_interval
    steps = int(math.floor(params.duration / dt + 1e-9))
    iu, ju = np.triu_indices(n, 1)
    radius2 = params.radio_range ** 2
    # Pairs farther apart than this at a sub-block start cannot meet inside it
    reach = params.radio_range + 2 * params.speed_range[1] * _SUB_SAMPLES * dt + 1e-6
    reach2 = reach ** 2

    is_open = np.zeros(len(iu), dtype=bool)
    open_since = np.zeros(len(iu))
    events = []

    for block_start in range(0, steps + 1, _BLOCK_SAMPLES):
        sample_idx = np.arange(block_start, min(block_start + _BLOCK_SAMPLES, steps + 1))
        times = sample_idx * dt
        block = positions_at(trajectories, times)
        xs, ys = block[:, :, 0], block[:, :, 1]

        for sub in range(0, len(times), _SUB_SAMPLES):
            sx, sy = xs[sub:sub + _SUB_SAMPLES], ys[sub:sub + _SUB_SAMPLES]
            dx0 = sx[0, iu] - sx[0, ju]
            dy0 = sy[0, iu] - sy[0, ju]
            candidates = np.flatnonzero((dx0 * dx0 + dy0 * dy0 <= reach2) | is_open)
            if candidates.size == 0:
                continue
            ci, cj = iu[candidates], ju[candidates]
            dx = sx[:, ci] - sx[:, cj]
            dy = sy[:, ci] - sy[:, cj]
            in_range = dx * dx + dy * dy <= radius2

            stacked = np.vstack([is_open[candidates][None, :], in_range])
            rows, cols = np.nonzero(stacked[1:] != stacked[:-1])
            for row, col in zip(rows, cols):
                pair = candidates[col]
                t = float(times[sub + row])
                if in_range[row, col]:
                    is_open[pair] = True
                    open_since[pair] = t
                else:
                    events.append(ContactEvent(int(iu[pair]), int(ju[pair]), float(open_since[pair]), t))
                    is_open[pair] = False

    for pair in np.flatnonzero(is_open):
        if params.duration > open_since[pair]:
            events.append(ContactEvent(int(iu[pair]), int(ju[pair]), float(open_since[pair]), float(params.duration)))
    return events


def generate_synthetic_trace(map_graph, params, seed):
    """Contact trace produced by walking every node over the map"""
    trace, _ = simulate_movement(map_graph, params, seed)
    return trace


def simulate_movement(map_graph, params, seed):
    params.validate(map_graph)
    trajectories = plan_trajectories(map_graph, params, seed)
    events = detect_contacts(trajectories, params)
    trace = build_trace(events, node_count=params.node_count, duration=float(params.duration))
    logger.info("Generated %d contacts for %d nodes over %.0f s (seed %s)",
                len(trace.events), params.node_count, params.duration, seed)
    return trace, trajectories


@dataclass
class SyntheticScenario:
    trace: object
    groups: Dict[str, List[int]]
    profiles: List[InterestProfile]
    sources: Tuple[int, int]
    movements: List[int] = field(default_factory=list)

    @property
    def mean_movements(self):
        return float(np.mean(self.movements)) if self.movements else 0.0


def three_group_params(nodes_per_group, pause_seconds, duration, radio_range=10.0):
    """Groups A (reading), M (reading and games), B (games), ids assigned in that order"""
    groups = (
        GroupSpec("A", nodes_per_group, frozenset({READING})),
        GroupSpec("M", nodes_per_group, frozenset({READING, GAMES})),
        GroupSpec("B", nodes_per_group, frozenset({GAMES})),
    )
    return MovementParams(
        duration=duration,
        groups=groups,
        pause_range=(float(pause_seconds), float(pause_seconds)),
        radio_range=radio_range,
    )


def scaled_synthetic_scenario(nodes_per_group, days, pause_seconds, seed,
                              rows=4, cols=4, spacing=30.0, radio_range=10.0) -> SyntheticScenario:
    """Three-group scenario at any size; sources are the first node of A and of B"""
    if not pause_seconds > 0:
        raise ScenarioValidationError("pause time must be positive")
    map_graph = generate_map("grid", rows, cols, spacing)
    params = three_group_params(nodes_per_group, pause_seconds, days * SECONDS_PER_DAY, radio_range)
    trace, trajectories = simulate_movement(map_graph, params, seed)
    return SyntheticScenario(
        trace=trace,
        groups=params.group_assignment(),
        profiles=params.profiles(),
        sources=(0, 2 * nodes_per_group),
        movements=[t.movements for t in trajectories],
    )


def full_synthetic_scenario(pause_seconds, seed, days=12) -> SyntheticScenario:
    """150 walkers in groups of 50 on the default 10x10 grid (50 m blocks)"""
    return scaled_synthetic_scenario(FULL_GROUP_SIZE, days, pause_seconds, seed,
                                     rows=10, cols=10, spacing=50.0)
