import numpy as np
import pytest

from src.core_model import ContactEvent
from src.errors import MapError, ScenarioValidationError
from src.mobility import (
    GAMES,
    READING,
    GroupSpec,
    MovementParams,
    full_synthetic_scenario,
    generate_map,
    generate_synthetic_trace,
    plan_trajectories,
    positions_at,
    scaled_synthetic_scenario,
    simulate_movement,
    three_group_params,
)
from src.trace_io import aggregate, network_density


def pinned_params(vertices, duration=1000.0):
    return MovementParams(
        duration=duration,
        groups=(GroupSpec("G", len(vertices)),),
        pause_range=(duration, duration),
        initial_vertices=tuple(vertices),
    )


def test_small_grid():
    grid = generate_map("grid", 2, 2, 100)
    assert grid.vertex_count == 4
    assert grid.edge_count == 4
    assert all(grid.edge_length(u, v) == 100 for u, v in grid.graph.edges)


def test_full_grid_size():
    grid = generate_map("grid", 10, 10, 50)
    assert grid.vertex_count == 100
    assert grid.edge_count == 180


@pytest.mark.parametrize("rows,cols,spacing", [(1, 5, 50), (5, 1, 50), (3, 3, 0)])
def test_degenerate_grid(rows, cols, spacing):
    with pytest.raises(MapError):
        generate_map("grid", rows, cols, spacing)


def test_shortest_path_follows_grid():
    grid = generate_map("grid", 3, 3, 10)
    path = grid.shortest_path(0, 8)
    assert path[0] == 0 and path[-1] == 8
    assert len(path) == 5


def test_pinned_together_gives_one_long_contact():
    trace = generate_synthetic_trace(generate_map("grid", 2, 2, 100), pinned_params([0, 0]), seed=1)
    assert trace.events == (ContactEvent(0, 1, 0.0, 1000.0),)


def test_pinned_apart_gives_empty_trace():
    trace = generate_synthetic_trace(generate_map("grid", 2, 2, 100), pinned_params([0, 3]), seed=1)
    assert trace.events == ()
    assert trace.node_count == 2


def test_nodes_pause_before_moving():
    grid = generate_map("grid", 4, 4, 30)
    params = three_group_params(2, pause_seconds=500, duration=5000)
    for trajectory in plan_trajectories(grid, params, seed=3):
        assert trajectory.times[1] == pytest.approx(500)
        assert trajectory.xs[1] == trajectory.xs[0]
        assert trajectory.ys[1] == trajectory.ys[0]
        assert np.all(np.diff(trajectory.times) >= 0)


def test_generation_is_deterministic():
    first = scaled_synthetic_scenario(3, 0.25, 100, seed=11)
    second = scaled_synthetic_scenario(3, 0.25, 100, seed=11)
    assert first.trace == second.trace
    assert first.movements == second.movements


def test_low_pause_yields_more_contacts_than_high_pause():
    busy = scaled_synthetic_scenario(5, 1, 100, seed=2)
    still = scaled_synthetic_scenario(5, 1, 100000, seed=2)
    assert len(busy.trace.events) > len(still.trace.events)
    assert busy.mean_movements > still.mean_movements
    assert still.mean_movements == 0


def test_contacts_fall_as_pause_grows_over_seeds():
    means = []
    for pause in (100, 1000, 10000):
        runs = [scaled_synthetic_scenario(5, 0.5, pause, seed=seed) for seed in range(1, 6)]
        means.append((np.mean([len(r.trace.events) for r in runs]), np.mean([r.mean_movements for r in runs])))
    contacts, movements = zip(*means)
    assert contacts[0] > contacts[1] > contacts[2]
    assert movements[0] > movements[1] > movements[2]


def test_positions_move_no_faster_than_walking_speed():
    grid = generate_map("grid", 4, 4, 30)
    params = three_group_params(3, pause_seconds=100, duration=3600)
    trajectories = plan_trajectories(grid, params, seed=4)
    samples = positions_at(trajectories, np.arange(0, 3601, 1.0))
    step = np.hypot(*np.moveaxis(np.diff(samples, axis=0), -1, 0))
    assert step.max() <= params.speed_range[1] + 1e-9
    assert step.max() > 0


def test_contacts_stay_within_radio_range():
    grid = generate_map("grid", 4, 4, 30)
    params = three_group_params(3, pause_seconds=100, duration=3600)
    trace, trajectories = simulate_movement(grid, params, seed=5)
    for event in trace.events[:20]:
        t = (event.start + event.end) / 2
        a, b = trajectories[event.a], trajectories[event.b]
        ax, ay = np.interp(t, a.times, a.xs), np.interp(t, a.times, a.ys)
        bx, by = np.interp(t, b.times, b.xs), np.interp(t, b.times, b.ys)
        # Midpoints between samples may drift slightly past the radius
        assert np.hypot(ax - bx, ay - by) <= params.radio_range + 2 * 1.4


def test_group_roles_and_sources():
    scenario = scaled_synthetic_scenario(5, 0.1, 100, seed=1)
    assert scenario.groups == {"A": [0, 1, 2, 3, 4], "M": [5, 6, 7, 8, 9], "B": [10, 11, 12, 13, 14]}
    assert scenario.sources == (0, 10)
    interests = {p.node: p.interests for p in scenario.profiles}
    assert interests[0] == frozenset({READING})
    assert interests[7] == frozenset({READING, GAMES})
    assert interests[10] == frozenset({GAMES})


def test_full_population_layout():
    params = three_group_params(50, pause_seconds=100, duration=86400)
    groups = params.group_assignment()
    profiles = {p.node: p.interests for p in params.profiles()}
    assert 0 in groups["A"] and profiles[0] == frozenset({READING})
    assert 100 in groups["B"] and profiles[100] == frozenset({GAMES})
    assert params.node_count == 150


def test_movement_validation():
    grid = generate_map("grid", 2, 2, 100)
    with pytest.raises(ScenarioValidationError):
        MovementParams(duration=10, groups=(GroupSpec("G", 2),), speed_range=(0.5, 3.0)).validate(grid)
    with pytest.raises(ScenarioValidationError):
        MovementParams(duration=10, groups=(GroupSpec("G", 2, home_vertices=(0, 9)),)).validate(grid)
    with pytest.raises(ScenarioValidationError):
        MovementParams(duration=10, groups=(GroupSpec("G", 2),), initial_vertices=(0,)).validate(grid)


@pytest.mark.slow
def test_full_synthetic_density():
    scenario = full_synthetic_scenario(100, seed=7)
    assert scenario.trace.node_count == 150
    assert network_density(aggregate(scenario.trace)) >= 140
