"""Scenario and sweep files: parsing, validation and run jobs."""
import copy
import json
import logging
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from pathlib import Path
from typing import Dict, Optional, Tuple

from .core_model import DEFAULT_BUFFER_BYTES, DEFAULT_LINK_RATE_BPS, DEFAULT_SLOT_COUNT, SECONDS_PER_DAY, ScenarioConfig
from .errors import ProtocolMismatchError, ScenarioValidationError
from .metrics import RunRecord
from .mobility import (
    GroupSpec,
    MovementParams,
    SyntheticScenario,
    full_synthetic_scenario,
    generate_map,
    scaled_synthetic_scenario,
    simulate_movement,
)
from .protocols import PROTOCOLS, TYPED, UNICAST, ProtocolParams, check_compatibility
from .trace_io import aggregate, network_density, read_contact_trace, read_sidecar
from .workload import (
    TypedFlow,
    UnicastFlow,
    WorkloadSpec,
    cambridge_typed_spec,
    cambridge_unicast_spec,
    load_rate,
    make_workload,
    synthetic_typed_spec,
    synthetic_unicast_spec,
)

logger = logging.getLogger(__name__)

BASE_DIR = Path(__file__).resolve().parent.parent
DATA_DIR = BASE_DIR / "data"

MSG_INT_VALUES = (1, 5, 10, 20, 35)
PAUSE_VALUES = (100, 1000, 10000, 100000)
AXES = ("msg_int", "pause", "density")


def _require(mapping, key, where):
    if key not in mapping:
        raise ScenarioValidationError(f"{where}: missing required key {key!r}")
    return mapping[key]


def _number(value, key, positive=True):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioValidationError(f"{key} must be a number, got {value!r}")
    if positive and not value > 0:
        raise ScenarioValidationError(f"{key} must be positive, got {value}")
    return value


def _integer(value, key, minimum=1):
    if isinstance(value, float) and value.is_integer():
        value = int(value)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioValidationError(f"{key} must be an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ScenarioValidationError(f"{key} must be >= {minimum}, got {value}")
    return value


def _node_list(value, key):
    if not isinstance(value, (list, tuple)):
        raise ScenarioValidationError(f"{key} must be a list of node ids, got {value!r}")
    return tuple(_integer(v, key, minimum=0) for v in value)


def _mapping(value, key):
    if not isinstance(value, dict):
        raise ScenarioValidationError(f"{key} must be an object, got {value!r}")
    return value


def parse_protocol(entry):
    """Accept "dlife" or {"name": "dlife", "alpha": 0.5, ...}"""
    if isinstance(entry, str):
        entry = {"name": entry}
    if not isinstance(entry, dict) or "name" not in entry:
        raise ScenarioValidationError(f"protocol entry needs a name: {entry!r}")
    known = {"name", "k", "duration_threshold", "window_length", "alpha", "utility"}
    unknown = set(entry) - known
    if unknown:
        raise ScenarioValidationError(f"unknown protocol parameters {sorted(unknown)}")
    return ProtocolParams(**entry).validate()


@dataclass(frozen=True)
class SyntheticSpec:
    preset: str = "scaled"
    pause: float = 100.0
    nodes_per_group: int = 5
    days: float = 2.0
    rows: int = 4
    cols: int = 4
    spacing: float = 30.0
    radio_range: float = 10.0
    movement: Optional[dict] = None  # explicit map/movement block for preset "custom"

    @classmethod
    def from_dict(cls, raw):
        raw = dict(_mapping(raw, "synthetic"))
        grid = _mapping(raw.pop("grid", {}), "synthetic.grid")
        known = {"preset", "pause", "nodes_per_group", "days", "radio_range", "movement"}
        unknown = set(raw) - known
        if unknown:
            raise ScenarioValidationError(f"unknown synthetic keys {sorted(unknown)}")
        spec = cls(
            preset=raw.get("preset", "scaled"),
            pause=_number(raw.get("pause", 100.0), "synthetic.pause"),
            nodes_per_group=_integer(raw.get("nodes_per_group", 5), "synthetic.nodes_per_group"),
            days=_number(raw.get("days", 2.0), "synthetic.days"),
            rows=_integer(grid.get("rows", 4), "synthetic.grid.rows"),
            cols=_integer(grid.get("cols", 4), "synthetic.grid.cols"),
            spacing=_number(grid.get("spacing", 30.0), "synthetic.grid.spacing"),
            radio_range=_number(raw.get("radio_range", 10.0), "synthetic.radio_range"),
            movement=raw.get("movement"),
        )
        if spec.preset not in ("full", "scaled", "custom"):
            raise ScenarioValidationError(f"unknown synthetic preset {spec.preset!r}")
        if spec.preset == "custom" and not spec.movement:
            raise ScenarioValidationError("custom synthetic scenarios need a movement block")
        if spec.movement is not None:
            movement = _mapping(spec.movement, "synthetic.movement")
            _number(_require(movement, "duration", "movement"), "movement.duration")
        return spec

    @property
    def duration(self):
        if self.preset == "custom":
            return float(self.movement["duration"])
        return (12 if self.preset == "full" else self.days) * SECONDS_PER_DAY


def movement_from_dict(raw):
    """Explicit groups/ranges block -> (map kwargs, MovementParams)"""
    grid = _mapping(raw.get("map", {}), "movement.map")
    groups = tuple(
        GroupSpec(
            name=g.get("name", f"G{i}"),
            size=_integer(_require(g, "size", "movement.groups"), "movement.groups.size"),
            interests=frozenset(g.get("interests", ())),
            home_vertices=tuple(g["home_vertices"]) if g.get("home_vertices") is not None else None,
        )
        for i, g in enumerate(_require(raw, "groups", "movement"))
    )
    params = MovementParams(
        duration=float(_number(_require(raw, "duration", "movement"), "movement.duration")),
        groups=groups,
        speed_range=tuple(raw.get("speed_range", (0.5, 1.4))),
        pause_range=tuple(raw.get("pause_range", (100.0, 100.0))),
        radio_range=float(_number(raw.get("radio_range", 10.0), "movement.radio_range")),
        sample_interval=float(_number(raw.get("sample_interval", 1.0), "movement.sample_interval")),
        initial_vertices=tuple(raw["initial_vertices"]) if raw.get("initial_vertices") else None,
    )
    map_kwargs = {
        "rows": _integer(grid.get("rows", 10), "movement.map.rows"),
        "cols": _integer(grid.get("cols", 10), "movement.map.cols"),
        "spacing": _number(grid.get("spacing", 50.0), "movement.map.spacing"),
    }
    return map_kwargs, params


@dataclass(frozen=True)
class ScenarioFile:
    name: str
    source_dir: Path
    protocols: Tuple[ProtocolParams, ...]
    workloads: Dict[str, dict]
    seeds: Tuple[int, ...] = (1,)
    trace_path: Optional[Path] = None
    trace_format: str = "canonical"
    interests_path: Optional[Path] = None
    synthetic: Optional[SyntheticSpec] = None
    nodes: Optional[int] = None
    buffer_bytes: int = DEFAULT_BUFFER_BYTES
    unrestricted_nodes: Tuple[int, ...] = ()
    link_rate_bps: float = DEFAULT_LINK_RATE_BPS
    slot_count: int = DEFAULT_SLOT_COUNT
    duration: Optional[float] = None
    ttl: Optional[float] = None
    param_name: Optional[str] = None
    param_value: object = None

    def workload_for(self, protocol):
        """Raw workload block a protocol runs, by the message kind it accepts"""
        kinds = PROTOCOLS[protocol.name].kinds
        for kind in (UNICAST, TYPED):
            if kind in kinds and kind in self.workloads:
                return kind, self.workloads[kind]
        available = ", ".join(sorted(self.workloads)) or "none"
        raise ProtocolMismatchError(
            f"protocol/workload mismatch: {protocol.name} needs a "
            f"{' or '.join(sorted(kinds))} workload, scenario has {available}"
        )

    def describe_param(self):
        if self.param_name is not None:
            return self.param_name, self.param_value
        if self.synthetic is not None and self.synthetic.preset != "custom":
            return "pause", self.synthetic.pause
        for block in self.workloads.values():
            if "msg_int" in block:
                return "msg_int", block["msg_int"]
        return "run", 0


def _workload_kind(block):
    preset = block.get("preset")
    if preset in ("synthetic_unicast", "cambridge_unicast"):
        return UNICAST
    if preset in ("synthetic_typed", "cambridge_typed"):
        return TYPED
    kind = block.get("kind")
    if kind not in (UNICAST, TYPED):
        raise ScenarioValidationError(f"workload needs a preset or a kind of unicast/typed: {block!r}")
    return kind


def parse_scenario(raw, source_dir=Path(".")) -> ScenarioFile:
    """Validate a scenario mapping and freeze it"""
    if not isinstance(raw, dict):
        raise ScenarioValidationError("scenario must be a JSON object")
    source_dir = Path(source_dir)
    name = raw.get("name", "scenario")

    trace_path = trace_format = synthetic = None
    if "trace" in raw and "synthetic" in raw:
        raise ScenarioValidationError("scenario takes either a trace or a synthetic section, not both")
    if "trace" in raw:
        trace = raw["trace"]
        if isinstance(trace, str):
            trace = {"path": trace}
        trace_path = source_dir / _require(trace, "path", "trace")
        trace_format = trace.get("format", "canonical")
        if trace_format not in ("canonical", "crawdad"):
            raise ScenarioValidationError(f"unknown trace format {trace_format!r}")
    elif "synthetic" in raw:
        synthetic = SyntheticSpec.from_dict(raw["synthetic"])
    else:
        raise ScenarioValidationError("scenario needs a trace or a synthetic section")

    protocol_entries = raw.get("protocols", raw.get("protocol"))
    if protocol_entries is None:
        raise ScenarioValidationError("scenario: missing required key 'protocols'")
    if not isinstance(protocol_entries, list):
        protocol_entries = [protocol_entries]
    if not protocol_entries:
        raise ScenarioValidationError("scenario lists no protocols")
    protocols = tuple(parse_protocol(p) for p in protocol_entries)

    workloads = {}
    if "workloads" in raw:
        blocks = list(raw["workloads"].values()) if isinstance(raw["workloads"], dict) else list(raw["workloads"])
    else:
        blocks = [_require(raw, "workload", "scenario")]
    for block in blocks:
        workloads[_workload_kind(block)] = dict(block)

    buffers = _mapping(raw.get("buffers", {}), "buffers")
    buffer_bytes = _integer(buffers.get("bytes", DEFAULT_BUFFER_BYTES), "buffers.bytes")
    unrestricted = _node_list(buffers.get("unrestricted_nodes", ()), "buffers.unrestricted_nodes")
    nodes = raw.get("nodes")
    if nodes is not None:
        nodes = _integer(nodes, "nodes")
    slot_count = _integer(raw.get("slot_count", DEFAULT_SLOT_COUNT), "slot_count")
    link_rate = raw.get("link_rate_bps", DEFAULT_LINK_RATE_BPS)
    if link_rate == "instantaneous":
        link_rate = math.inf
    else:
        _number(link_rate, "link_rate_bps")

    seeds = raw.get("seeds", [1])
    if not seeds or not all(isinstance(s, int) and not isinstance(s, bool) for s in seeds):
        raise ScenarioValidationError("seeds must be a non-empty list of integers")

    duration = raw.get("duration")
    if duration is not None:
        _number(duration, "duration")
    ttl = raw.get("ttl")
    if ttl is not None:
        _number(ttl, "ttl")

    scenario = ScenarioFile(
        name=name,
        source_dir=source_dir,
        protocols=protocols,
        workloads=workloads,
        seeds=tuple(seeds),
        trace_path=trace_path,
        trace_format=trace_format or "canonical",
        interests_path=source_dir / raw["interests"] if raw.get("interests") else None,
        synthetic=synthetic,
        nodes=nodes,
        buffer_bytes=buffer_bytes,
        unrestricted_nodes=unrestricted,
        link_rate_bps=float(link_rate),
        slot_count=slot_count,
        duration=duration,
        ttl=ttl,
        param_name=raw.get("param_name"),
        param_value=raw.get("param_value"),
    )
    for protocol in protocols:
        kind, _ = scenario.workload_for(protocol)
        check_compatibility(protocol.name, kind)
    return scenario


def load_scenario(path) -> ScenarioFile:
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
    except json.JSONDecodeError as e:
        raise ScenarioValidationError(f"{path}: invalid JSON ({e})") from None
    return parse_scenario(raw, path.parent)


@dataclass
class MaterializedScenario:
    """A scenario's trace and population for one seed"""
    trace: object
    profiles: list = field(default_factory=list)
    groups: Dict[str, list] = field(default_factory=dict)
    sources: Tuple[int, ...] = ()
    density: float = 0.0
    mean_movements: Optional[float] = None


@lru_cache(maxsize=8)
def _cached_trace(path, trace_format):
    return read_contact_trace(path, format=trace_format)


def build_synthetic(spec, seed):
    if spec.preset == "full":
        return full_synthetic_scenario(spec.pause, seed)
    if spec.preset == "scaled":
        return scaled_synthetic_scenario(spec.nodes_per_group, spec.days, spec.pause, seed,
                                         rows=spec.rows, cols=spec.cols, spacing=spec.spacing,
                                         radio_range=spec.radio_range)
    grid, params = movement_from_dict(spec.movement)
    map_graph = generate_map("grid", **grid)
    trace, trajectories = simulate_movement(map_graph, params, seed)
    groups = params.group_assignment()
    members = list(groups.values())
    return SyntheticScenario(
        trace=trace,
        groups=groups,
        profiles=params.profiles(),
        sources=(members[0][0], members[-1][0]),
        movements=[t.movements for t in trajectories],
    )


def materialize(scenario, seed) -> MaterializedScenario:
    if scenario.synthetic is not None:
        built = build_synthetic(scenario.synthetic, seed)
        return MaterializedScenario(
            trace=built.trace,
            profiles=list(built.profiles),
            groups=dict(built.groups),
            sources=tuple(built.sources),
            density=network_density(aggregate(built.trace)),
            mean_movements=built.mean_movements,
        )

    if not scenario.trace_path.exists():
        raise ScenarioValidationError(f"trace file not found: {scenario.trace_path}")
    trace = _cached_trace(scenario.trace_path, scenario.trace_format)
    profiles = []
    groups = {}
    sources = ()
    if scenario.interests_path is not None:
        groups, profiles, payload = read_sidecar(scenario.interests_path)
        sources = tuple(payload.get("sources", ()))
    return MaterializedScenario(trace=trace, profiles=profiles, groups=groups, sources=sources,
                                density=network_density(aggregate(trace)) if trace.node_count else 0.0)


def _flows(block, kind):
    flows = []
    for entry in _require(block, "flows", "workload"):
        source = _integer(_require(entry, "source", "workload.flows"), "workload.flows.source", minimum=0)
        if kind == UNICAST:
            flows.append(UnicastFlow(source, tuple(_require(entry, "destinations", "workload.flows"))))
        else:
            flows.append(TypedFlow(source, tuple(_require(entry, "content_types", "workload.flows"))))
    return tuple(flows)


def workload_spec(block, kind, materialized, node_count, ttl=None) -> WorkloadSpec:
    """Resolve a raw workload block, presets included, into a WorkloadSpec"""
    preset = block.get("preset")
    msg_int = block.get("msg_int", 1)
    if preset == "synthetic_unicast":
        spec = synthetic_unicast_spec(materialized.groups, materialized.sources, materialized.trace.duration)
    elif preset == "synthetic_typed":
        spec = synthetic_typed_spec(materialized.sources, materialized.trace.duration)
    elif preset == "cambridge_unicast":
        spec = cambridge_unicast_spec(msg_int, nodes=node_count, source=block.get("source", 0))
    elif preset == "cambridge_typed":
        spec = cambridge_typed_spec(msg_int, nodes=node_count, source=block.get("source", 0),
                                    content_count=block.get("content_count", 35))
    elif preset is None:
        spec = WorkloadSpec(
            kind=kind,
            flows=_flows(block, kind),
            msgs_per_destination=_integer(block.get("msgs_per_destination", 1), "workload.msgs_per_destination"),
            rate_per_day=float(_number(block.get("rate_per_day", load_rate(msg_int)), "workload.rate_per_day")),
            interest_cardinality=block.get("interest_cardinality"),
            content_types=tuple(block.get("content_types", ())),
            receivers=tuple(block["receivers"]) if block.get("receivers") is not None else None,
            size_range=tuple(block.get("size_range", (1024, 102400))),
        )
    else:
        raise ScenarioValidationError(f"unknown workload preset {preset!r}")
    if "rate_per_day" in block and preset is not None:
        spec = replace(spec, rate_per_day=float(_number(block["rate_per_day"], "workload.rate_per_day")))
    if ttl is not None:
        spec = replace(spec, ttl=float(ttl))
    return spec.validate(node_count)


def scenario_config(scenario, materialized) -> ScenarioConfig:
    trace = materialized.trace
    nodes = scenario.nodes or trace.node_count
    duration = scenario.duration or trace.duration
    if scenario.synthetic is not None:
        duration = scenario.duration or scenario.synthetic.duration
    return ScenarioConfig(
        nodes=nodes,
        duration=float(duration),
        buffer_bytes=scenario.buffer_bytes,
        unrestricted_buffer_nodes=frozenset(scenario.unrestricted_nodes),
        link_rate_bps=scenario.link_rate_bps,
        slot_count=scenario.slot_count,
        ttl=scenario.ttl,
    ).validate()


@dataclass(frozen=True)
class RunJob:
    scenario: ScenarioFile
    protocol: ProtocolParams
    seed: int
    param_name: str
    param_value: object
    log_path: Optional[Path] = None
    dump_path: Optional[Path] = None
    dump_every: Optional[float] = None

    @property
    def key(self):
        return (self.scenario.name, self.protocol.name, self.param_name, str(self.param_value), self.seed)


def execute_job(job) -> RunRecord:
    """Run one (scenario, protocol, seed) end to end; safe to call in a worker process"""
    from .sim_engine import run_with_snapshots
    from .social import save_social_dump

    scenario = job.scenario
    materialized = materialize(scenario, job.seed)
    config = scenario_config(scenario, materialized)
    kind, block = scenario.workload_for(job.protocol)
    spec = workload_spec(block, kind, materialized, config.nodes, scenario.ttl)
    workload = make_workload(spec, config.nodes, job.seed, profiles=materialized.profiles)

    result, snapshots = run_with_snapshots(
        materialized.trace, config, job.protocol, workload, seed=job.seed,
        log_events=job.log_path is not None, dump_social_every=job.dump_every if job.dump_path else None,
    )
    if job.log_path is not None:
        job.log_path.parent.mkdir(parents=True, exist_ok=True)
        result.write_event_log(job.log_path)
    if job.dump_path is not None:
        save_social_dump(snapshots, job.dump_path)
    result.events = []

    return RunRecord(
        scenario=scenario.name,
        protocol=job.protocol.name,
        param_name=job.param_name,
        param_value=job.param_value,
        seed=job.seed,
        result=result,
        density=materialized.density,
    )


@dataclass(frozen=True)
class SweepSpec:
    base: ScenarioFile
    axis: str
    values: Tuple[object, ...]
    protocols: Tuple[ProtocolParams, ...]
    seeds: Tuple[int, ...]
    rate_by_load: bool = True


def apply_axis(base, axis, value, source_dir=Path(".")):
    """Scenario variant for one axis value"""
    if axis == "pause":
        if base.synthetic is None:
            raise ScenarioValidationError("pause sweeps need a synthetic base scenario")
        return replace(base, synthetic=replace(base.synthetic, pause=float(value)),
                       param_name="pause", param_value=value)
    if axis == "msg_int":
        workloads = copy.deepcopy(dict(base.workloads))
        for kind, block in workloads.items():
            block["msg_int"] = value
            if block.get("preset") is None:
                if kind == UNICAST:
                    block["msgs_per_destination"] = value
                else:
                    block["interest_cardinality"] = value
                block["rate_per_day"] = load_rate(value)
        return replace(base, workloads=workloads, param_name="msg_int", param_value=value)
    if axis == "density":
        variant = load_scenario(Path(source_dir) / value)
        return replace(variant, protocols=base.protocols, seeds=base.seeds,
                       param_name="density", param_value=value)
    raise ScenarioValidationError(f"unknown sweep axis {axis!r}; choose from {', '.join(AXES)}")


def parse_sweep(raw, source_dir=Path(".")) -> SweepSpec:
    source_dir = Path(source_dir)
    base_entry = _require(raw, "base", "sweep")
    if isinstance(base_entry, str):
        base = load_scenario(source_dir / base_entry)
    else:
        base = parse_scenario(base_entry, source_dir)

    axis_block = _require(raw, "axis", "sweep")
    axis = _require(axis_block, "name", "sweep.axis")
    if axis not in AXES:
        raise ScenarioValidationError(f"unknown sweep axis {axis!r}; choose from {', '.join(AXES)}")
    values = tuple(axis_block.get("values", MSG_INT_VALUES if axis == "msg_int" else
                                  PAUSE_VALUES if axis == "pause" else ()))
    if not values:
        raise ScenarioValidationError("sweep axis has no values")

    protocols = tuple(parse_protocol(p) for p in raw.get("protocols", [])) or base.protocols
    seeds = tuple(raw.get("seeds", base.seeds))
    if not seeds:
        raise ScenarioValidationError("sweep needs at least one seed")
    base = replace(base, protocols=protocols, seeds=seeds)
    for protocol in protocols:
        kind, _ = base.workload_for(protocol)
        check_compatibility(protocol.name, kind)
    return SweepSpec(base=base, axis=axis, values=values, protocols=protocols, seeds=seeds)


def load_sweep(path):
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
    except json.JSONDecodeError as e:
        raise ScenarioValidationError(f"{path}: invalid JSON ({e})") from None
    return parse_sweep(raw, path.parent), path.parent


def plan_jobs(scenario, log_dir=None, dump_dir=None, dump_every=None):
    """Every (protocol, seed) job of a scenario, in deterministic order"""
    param_name, param_value = scenario.describe_param()
    jobs = []
    for protocol in scenario.protocols:
        for seed in scenario.seeds:
            tag = f"{protocol.name}_{param_name}-{param_value}_{seed}"
            jobs.append(RunJob(
                scenario=scenario,
                protocol=protocol,
                seed=seed,
                param_name=param_name,
                param_value=param_value,
                log_path=Path(log_dir) / f"events_{tag}.jsonl" if log_dir else None,
                dump_path=Path(dump_dir) / f"social_{tag}.json" if dump_dir else None,
                dump_every=dump_every,
            ))
    return jobs


def label_by_density(records):
    """Replace each density-axis value with the mean density measured over its seeds"""
    measured = {}
    for record in records:
        if record.param_name == "density":
            measured.setdefault(record.scenario, []).append(record.density)
    means = {name: sum(values) / len(values) for name, values in measured.items()}
    for record in records:
        if record.param_name == "density":
            record.param_value = means[record.scenario]
    return records
