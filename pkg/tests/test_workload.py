import logging

import pytest

from src.core_model import InterestProfile, Typed
from src.errors import ScenarioValidationError
from src.mobility import three_group_params
from src.social import DEFAULT_WINDOW_LENGTH
from src.workload import (
    TypedFlow,
    UnicastFlow,
    WorkloadSpec,
    cambridge_typed_spec,
    cambridge_unicast_spec,
    expected_deliveries,
    load_rate,
    make_workload,
    synthetic_typed_spec,
    synthetic_unicast_spec,
)


@pytest.fixture
def population():
    params = three_group_params(50, pause_seconds=100, duration=86400)
    return params.group_assignment(), params.profiles()


def test_cambridge_unicast_first_day():
    workload = make_workload(cambridge_unicast_spec(1), 36, seed=1)
    assert len(workload.messages) == 35
    assert expected_deliveries(workload) == 35
    assert all(m.created < 86400 for m in workload.messages)
    assert sorted(m.kind.dest for m in workload.messages) == list(range(1, 36))
    assert [m.id for m in workload.messages] == list(range(35))


@pytest.mark.parametrize("k,expected", [(1, 35), (5, 175), (10, 350), (20, 700), (35, 1225)])
def test_cambridge_unicast_totals(k, expected):
    assert expected_deliveries(make_workload(cambridge_unicast_spec(k), 36, seed=1)) == expected


def test_round_robin_over_destinations():
    spec = WorkloadSpec("unicast", (UnicastFlow(0, (1, 2, 3)),), msgs_per_destination=2, rate_per_day=86400 / 10)
    workload = make_workload(spec, 4, seed=1)
    assert [m.kind.dest for m in workload.messages] == [1, 2, 3, 1, 2, 3]
    assert [m.created for m in workload.messages] == [0, 10, 20, 30, 40, 50]


@pytest.mark.parametrize("cardinality,expected", [(1, 35), (5, 175), (10, 350)])
def test_cambridge_typed_totals(cardinality, expected):
    workload = make_workload(cambridge_typed_spec(cardinality), 36, seed=4)
    assert len(workload.messages) == 35
    assert all(len(workload.interests_of(n)) == cardinality for n in range(1, 36))
    assert workload.interests_of(0) == frozenset()
    assert expected_deliveries(workload) == expected


def test_synthetic_typed_expects_200(population):
    groups, profiles = population
    workload = make_workload(synthetic_typed_spec((0, 100)), 150, seed=1, profiles=profiles)
    assert [m.kind for m in workload.messages] == [Typed("games"), Typed("reading")]
    assert [m.src for m in workload.messages] == [0, 100]
    assert expected_deliveries(workload) == 200


def test_synthetic_unicast_expects_200(population):
    groups, _ = population
    workload = make_workload(synthetic_unicast_spec(groups, (0, 100)), 150, seed=1)
    assert expected_deliveries(workload) == 200
    from_a = [m for m in workload.messages if m.src == 0]
    assert {m.kind.dest for m in from_a} == set(range(50, 150))


def test_full_scale_synthetic_rate_is_25_per_12_hours(population):
    groups, _ = population
    spec = synthetic_unicast_spec(groups, (0, 100), duration=12 * 86400)
    assert spec.rate_per_day == pytest.approx(50.0)
    assert spec.start == DEFAULT_WINDOW_LENGTH


def test_scaled_synthetic_messages_follow_first_window():
    params = three_group_params(5, pause_seconds=100, duration=2 * 86400)
    spec = synthetic_unicast_spec(params.group_assignment(), (0, 10), duration=2 * 86400)
    created = [m.created for m in make_workload(spec, 15, seed=1).messages]
    assert len(created) == 20
    assert min(created) == DEFAULT_WINDOW_LENGTH
    # one source's ten messages fill a sixth of the run
    assert max(created) == pytest.approx(DEFAULT_WINDOW_LENGTH + 9 * 2880)


def test_short_runs_start_inside_the_run():
    spec = synthetic_typed_spec((0, 4), duration=4320)
    assert spec.start == 720
    spec = synthetic_unicast_spec({"A": [0, 1], "M": [2, 3], "B": [4, 5]}, (0, 4), duration=4320)
    created = [m.created for m in make_workload(spec, 6, seed=1).messages]
    assert min(created) == 720
    assert max(created) < 4320


def test_negative_start_rejected():
    with pytest.raises(ScenarioValidationError):
        WorkloadSpec("unicast", (UnicastFlow(0, (1,)),), start=-1).validate()


def test_nobody_interested_counts_zero(caplog):
    spec = WorkloadSpec("typed", (TypedFlow(0, ("chess",)),))
    workload = make_workload(spec, 3, seed=1, profiles=[InterestProfile(1, frozenset({"games"}))])
    with caplog.at_level(logging.WARNING):
        assert expected_deliveries(workload) == 0
    assert "chess" in caplog.text


def test_sizes_are_seeded_and_in_range():
    first = make_workload(cambridge_unicast_spec(5), 36, seed=9)
    again = make_workload(cambridge_unicast_spec(5), 36, seed=9)
    other = make_workload(cambridge_unicast_spec(5), 36, seed=10)
    sizes = [m.size for m in first.messages]
    assert sizes == [m.size for m in again.messages]
    assert sizes != [m.size for m in other.messages]
    assert all(1024 <= s <= 102400 for s in sizes)


def test_load_rates():
    assert load_rate(1) == 35
    assert load_rate(20) == 70
    assert load_rate(35) == 140


def test_spec_validation():
    with pytest.raises(ScenarioValidationError):
        WorkloadSpec("unicast", (UnicastFlow(0, (0, 1)),)).validate(2)
    with pytest.raises(ScenarioValidationError):
        WorkloadSpec("unicast", (UnicastFlow(0, (5,)),)).validate(3)
    with pytest.raises(ScenarioValidationError):
        WorkloadSpec("typed", (TypedFlow(0, ("a",)),), interest_cardinality=2, content_types=("a",)).validate()
    with pytest.raises(ScenarioValidationError):
        WorkloadSpec("typed", (UnicastFlow(0, (1,)),)).validate()
    with pytest.raises(ScenarioValidationError):
        WorkloadSpec("unicast", (UnicastFlow(0, (1,)),), size_range=(10, 20)).validate()


def test_typed_workload_needs_profiles():
    with pytest.raises(ScenarioValidationError):
        make_workload(WorkloadSpec("typed", (TypedFlow(0, ("a",)),)), 3, seed=1)


def test_check_within_duration():
    workload = make_workload(cambridge_unicast_spec(35), 36, seed=1)
    with pytest.raises(ScenarioValidationError):
        workload.check_within(86400)
    workload.check_within(10 * 86400)
