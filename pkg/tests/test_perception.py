from __future__ import annotations

import copy

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tidyplan.gridworld import GridMap, ScenarioConfig, WorldState, generate_scenario
from tidyplan.perception import (
    NotAdjacentError,
    NotOpenableError,
    init_knowledge,
    open_receptacle,
    sense,
    update_knowledge,
)

from .conftest import tiny_scenario


def seen(obs):
    return {d.object_id for d in obs.detections}


def test_object_in_same_room_is_observed():
    s = tiny_scenario([("a", "apple", (6, 2), (6, 2), None)])
    assert seen(sense(WorldState.from_scenario(s))) == {"a"}


def test_object_in_closed_container_is_not_observed():
    s = tiny_scenario([("a", "apple", (3, 4), (6, 2), "rec01")], agent=(3, 3))
    assert seen(sense(WorldState.from_scenario(s))) == set()


def test_object_behind_a_wall_is_not_observed():
    s = generate_scenario(ScenarioConfig(n_objects=8, n_partially_occluded=3), 5)
    state = WorldState.from_scenario(s)
    po = {o.id for o in s.objects if o.case == "po"}
    assert not (seen(sense(state)) & po)


def test_radius_limits_sensing():
    s = tiny_scenario([("a", "apple", (7, 2), (7, 2), None)], radius=2.0)
    assert seen(sense(WorldState.from_scenario(s))) == set()


def test_sense_is_deterministic():
    s = generate_scenario(ScenarioConfig(n_objects=8, n_partially_occluded=3), 1)
    state = WorldState.from_scenario(s)
    a, b = sense(state), sense(state)
    assert a.detections == b.detections and np.array_equal(a.sensed, b.sensed)


def test_open_container_reveals_contents():
    s = tiny_scenario([("a", "apple", (3, 4), (6, 2), "rec01")], agent=(3, 3))
    state = WorldState.from_scenario(s)
    k = init_knowledge(s, state)
    assert open_receptacle(state, "rec01") == ["a"]
    update_knowledge(k, sense(state))
    assert "a" in k.visible and "a" not in k.unseen


def test_open_empty_container_marks_it_inspected():
    s = tiny_scenario([("a", "apple", (6, 2), (5, 2), None)], agent=(3, 3))
    state = WorldState.from_scenario(s)
    k = init_knowledge(s, state)
    assert open_receptacle(state, "rec01") == []
    update_knowledge(k, sense(state))
    assert "rec01" in k.inspected


def test_open_errors():
    s = tiny_scenario([], agent=(8, 5))
    state = WorldState.from_scenario(s)
    with pytest.raises(NotOpenableError):
        open_receptacle(state, "rec00")
    with pytest.raises(NotAdjacentError):
        open_receptacle(state, "rec01")


def test_en_route_observation_clears_prediction():
    s = generate_scenario(ScenarioConfig(n_objects=6, n_partially_occluded=2), 2)
    state = WorldState.from_scenario(s)
    k = init_knowledge(s, state)
    oid = sorted(k.unseen)[0]
    k.predicted[oid] = (k.receptacles[0].id, k.receptacles[0].centroid)
    free = [(int(x), int(y)) for y, x in zip(*np.nonzero(s.grid.free))]
    state.agent = next(c for c in free if oid in seen(sense(state, c)))
    update_knowledge(k, sense(state))
    assert oid in k.visible and oid not in k.unseen and oid not in k.predicted


def test_inspected_surface_pruned_from_every_list():
    s = tiny_scenario([("a", "apple", (3, 4), (6, 2), "rec01"), ("b", "bowl", (6, 2), (6, 2), None)], agent=(1, 1), radius=1.0)
    state = WorldState.from_scenario(s)
    k = init_knowledge(s, state)
    assert "rec00" in k.candidate_receptacles["a"]
    state.agent = (4, 1)
    k.sensed[2, 2:8] = True  # as if the agent walked along the whole table
    update_knowledge(k, sense(state, radius=1.0))
    assert "rec00" in k.inspected
    assert "rec00" not in k.candidate_receptacles["a"]


def test_update_is_idempotent():
    s = generate_scenario(ScenarioConfig(n_objects=8, n_partially_occluded=3), 4)
    state = WorldState.from_scenario(s)
    k = init_knowledge(s, state)
    before = copy.deepcopy(k)
    update_knowledge(k, sense(state))
    assert k.visible == before.visible and k.unseen == before.unseen
    assert k.candidate_receptacles == before.candidate_receptacles
    assert np.array_equal(k.free_map, before.free_map)


def test_full_label_noise_hides_everything():
    s = tiny_scenario([("a", "apple", (6, 2), (6, 2), None), ("b", "bowl", (5, 2), (5, 2), None)])
    state = WorldState.from_scenario(s)
    k = init_knowledge(s, state, label_noise=1.0)
    assert not k.visible and k.unseen == {"a", "b"}


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000))
def test_belief_never_leaks_unseen_positions(seed):
    s = generate_scenario(ScenarioConfig(n_objects=8, n_partially_occluded=3, n_fully_occluded=1), seed)
    state = WorldState.from_scenario(s)
    k = init_knowledge(s, state)
    rng = np.random.default_rng(seed)
    free = [(int(x), int(y)) for y, x in zip(*np.nonzero(s.grid.free))]
    n_unseen = len(k.unseen)
    for _ in range(8):
        state.agent = free[int(rng.integers(len(free)))]
        update_knowledge(k, sense(state))
        assert len(k.unseen) <= n_unseen
        n_unseen = len(k.unseen)
        assert not (set(k.visible) & k.unseen)
        assert set(k.visible) | k.unseen == {o.id for o in s.objects}
        assert set(k.predicted) <= k.unseen
        for oid in k.unseen:
            assert k.position(oid) is None
            assert not k.footprint(oid)
