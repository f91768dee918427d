"""Episode dynamics: rewards, clock accounting, and feature encoding."""

from __future__ import annotations

import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from multideep.environment import (
    Action,
    ActionKind,
    Completion,
    ContractViolation,
    IllegalActionError,
    ON_TIME_BONUS,
    Phase,
    RetrievalEnv,
    SimState,
    encode_state,
)
from multideep.warehouse import (
    DueDateConfig,
    Instance,
    LayoutParams,
    build_layout,
    generate_instance,
)


def make_env(dims=(2, 1, 6), tightness=0.125, spread=0.75, seed=7):
    graph = build_layout(LayoutParams(*dims))
    instance = generate_instance(graph, DueDateConfig(tightness, spread), seed)
    return RetrievalEnv(graph, instance)


def run_random_episode(env, reset_seed, action_rng):
    """Roll an episode with uniformly random actions; return the trace."""
    state = env.reset(reset_seed)
    rewards, deltas, decisions = [], [], 0
    while state.phase is not Phase.DONE:
        legal = env.legal_actions(state)
        assert legal, "legal action list must never be empty"
        action = legal[int(action_rng.integers(len(legal)))]
        state, outcome = env.step(state, action)
        rewards.append(outcome.reward)
        deltas.append(outcome.info.clock_delta)
        decisions += 1
    return state, rewards, deltas, decisions


class TestReset:
    def test_initial_state(self):
        env = make_env()
        state = env.reset(0)
        assert state.occupancy == frozenset(env.graph.storage_nodes)
        assert state.clock == 0.0
        assert state.phase is Phase.SELECT_ITEM
        assert state.carried is None
        assert state.completions == ()
        assert state.shuttle_node in env.graph.io_nodes

    def test_same_seed_same_start(self):
        env = make_env()
        assert env.reset(123) == env.reset(123)

    def test_start_io_is_uniformly_drawn(self):
        env = make_env()
        seen = {env.reset(seed).shuttle_node for seed in range(1000)}
        assert seen == set(env.graph.io_nodes)


class TestLegalActions:
    def test_fresh_small_layout_offers_every_lane_front(self):
        env = make_env((2, 1, 6))
        state = env.reset(1)
        legal = env.legal_actions(state)
        assert len(legal) == 6
        assert all(a.kind is ActionKind.SELECT_ITEM for a in legal)
        targets = [a.target for a in legal]
        assert targets == sorted(targets)

    def test_any_delivery_phase_offers_all_four_io_points(self):
        env = make_env((3, 2, 10))
        state = env.reset(2)
        first = env.legal_actions(state)[0]
        state, _ = env.step(state, first)
        assert state.phase is Phase.SELECT_IO
        legal = env.legal_actions(state)
        assert [a.target for a in legal] == list(env.graph.io_nodes)
        assert len(legal) == 4

    def test_single_remaining_item(self):
        env = make_env((2, 1, 6))
        state = env.reset(1)
        last = max(env.graph.storage_nodes)
        state = dataclasses.replace(state, occupancy=frozenset({last}))
        legal = env.legal_actions(state)
        assert [a.target for a in legal] == [last]

    def test_done_phase_is_a_contract_violation(self):
        env = make_env((1, 1, 2))
        state = env.reset(0)
        state = dataclasses.replace(state, phase=Phase.DONE)
        with pytest.raises(ContractViolation):
            env.legal_actions(state)


class TestStepRewards:
    def test_hand_traced_tardiness_delta(self):
        # Two items with due dates 5 and 100; a pickup that spans clock
        # 4 -> 8 lets only the tight item accrue lateness: reward -3.
        graph = build_layout(LayoutParams(2, 1, 2))
        due = {5: 5.0, 6: 50.0, 8: 60.0, 9: 100.0}
        instance = Instance(
            layout=graph.params, mp=100.0, config=DueDateConfig(0.125, 0.75),
            seed=0, due_dates=due,
        )
        env = RetrievalEnv(graph, instance)
        state = SimState(
            occupancy=frozenset({5, 9}),
            shuttle_node=2,  # connector node straight above the aisle
            carried=None,
            clock=4.0,
            phase=Phase.SELECT_ITEM,
            completions=(),
            frozen_tardiness=0.0,
            last_tt=0.0,
        )
        new_state, outcome = env.step(state, Action(ActionKind.SELECT_ITEM, 5))
        assert new_state.clock == 8.0
        assert outcome.info.travel_distance == 3
        assert outcome.reward == -3.0

    def test_rewards_telescope_to_total_tardiness(self):
        rng = np.random.default_rng(99)
        for dims in [(1, 1, 2), (2, 1, 6), (3, 2, 6)]:
            env = make_env(dims, seed=int(rng.integers(1 << 30)))
            for _ in range(5):
                state, rewards, _, _ = run_random_episode(
                    env, int(rng.integers(1 << 30)), rng
                )
                total = env.total_tardiness(state)
                bonus = ON_TIME_BONUS if total == 0.0 else 0.0
                assert abs(sum(rewards) - bonus + total) <= 1e-9

    def test_loose_due_dates_give_zero_rewards_plus_bonus(self):
        graph = build_layout(LayoutParams(1, 1, 2))
        due = {node: 1e6 for node in graph.storage_nodes}
        instance = Instance(
            layout=graph.params, mp=16.0, config=DueDateConfig(0.125, 0.75),
            seed=0, due_dates=due,
        )
        env = RetrievalEnv(graph, instance)
        state, rewards, _, _ = run_random_episode(env, 3, np.random.default_rng(3))
        assert env.total_tardiness(state) == 0.0
        assert rewards[-1] == ON_TIME_BONUS
        assert all(r == 0.0 for r in rewards[:-1])

    def test_episode_length_and_clock_additivity(self):
        env = make_env((2, 1, 6))
        state, _, deltas, decisions = run_random_episode(
            env, 11, np.random.default_rng(11)
        )
        assert decisions == 2 * len(env.graph.storage_nodes)
        assert state.clock == sum(deltas)
        assert len(state.completions) == len(env.graph.storage_nodes)
        completed_at = [c.completed_at for c in state.completions]
        assert completed_at == sorted(completed_at)
        assert all(b > a for a, b in zip(completed_at, completed_at[1:]))

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_telescoping_property(self, seed):
        env = make_env((1, 1, 4), tightness=0.25, spread=1.0, seed=5)
        state, rewards, _, _ = run_random_episode(
            env, seed, np.random.default_rng(seed)
        )
        total = env.total_tardiness(state)
        bonus = ON_TIME_BONUS if total == 0.0 else 0.0
        assert abs(sum(rewards) - bonus + total) <= 1e-9


class TestStepValidation:
    def test_wrong_kind_and_bad_targets_are_rejected(self):
        env = make_env((2, 1, 6))
        state = env.reset(0)
        deep_cell = env.graph.lanes[0].cells[-1]
        before = state
        with pytest.raises(IllegalActionError):
            env.step(state, Action(ActionKind.SELECT_IO, env.graph.io_nodes[0]))
        with pytest.raises(IllegalActionError):
            env.step(state, Action(ActionKind.SELECT_ITEM, deep_cell))
        assert state == before  # rejected steps leave the state alone

        state, _ = env.step(state, env.legal_actions(state)[0])
        with pytest.raises(IllegalActionError):
            env.step(state, Action(ActionKind.SELECT_ITEM, deep_cell))
        with pytest.raises(IllegalActionError):
            env.step(state, Action(ActionKind.SELECT_IO, deep_cell))

    def test_step_after_done_is_a_contract_violation(self):
        env = make_env((1, 1, 2))
        state, *_ = run_random_episode(env, 1, np.random.default_rng(1))
        with pytest.raises(ContractViolation):
            env.step(state, Action(ActionKind.SELECT_ITEM, env.graph.storage_nodes[0]))

    def test_total_tardiness_requires_done(self):
        env = make_env((1, 1, 2))
        with pytest.raises(ContractViolation):
            env.total_tardiness(env.reset(0))

    def test_transitions_are_reproducible(self):
        env = make_env((2, 1, 6))
        a = env.reset(5)
        b = env.reset(5)
        for _ in range(6):
            action = env.legal_actions(a)[0]
            a, out_a = env.step(a, action)
            b, out_b = env.step(b, action)
            assert a == b
            assert out_a == out_b


class TestTotalTardiness:
    def test_two_completion_example(self):
        env = make_env((1, 1, 2))
        completions = (Completion(5, 10.0, 12.0), Completion(7, 15.0, 9.0))
        state = SimState(
            occupancy=frozenset(),
            shuttle_node=env.graph.io_nodes[0],
            carried=None,
            clock=15.0,
            phase=Phase.DONE,
            completions=completions,
            frozen_tardiness=sum(max(0.0, c.completed_at - c.due) for c in completions),
            last_tt=6.0,
        )
        assert env.total_tardiness(state) == 6.0


class TestEncoding:
    def make_training_scale_state(self):
        graph = build_layout(LayoutParams(3, 2, 10))
        due = {node: 200.0 for node in graph.storage_nodes}
        w = graph.width
        carried_home = w + 4  # storage cell at (1, 4)
        due[carried_home] = 500.0
        instance = Instance(
            layout=graph.params, mp=957.0, config=DueDateConfig(0.125, 0.75),
            seed=0, due_dates=due,
        )
        empty_cell = w + 2  # storage cell at (1, 2)
        state = SimState(
            occupancy=frozenset(graph.storage_nodes) - {empty_cell, carried_home},
            shuttle_node=carried_home,
            carried=carried_home,
            clock=18.0,
            phase=Phase.SELECT_IO,
            completions=(),
            frozen_tardiness=0.0,
            last_tt=0.0,
        )
        return graph, instance, state, empty_cell, carried_home

    def test_feature_rows_match_hand_written_vectors(self):
        graph, instance, state, empty_cell, carried_home = self.make_training_scale_state()
        feats = encode_state(graph, state, instance)
        assert feats.shape == (len(graph.nodes), 8)
        # Corner I/O point at (0, 0).
        assert feats[0].tolist() == [0, 0, 1, 0, 0, 0, 0, 18]
        # Empty storage cell at (1, 2).
        assert feats[empty_cell].tolist() == [1, 0, 0, 1, 2, 0, 0, 18]
        # Loaded shuttle parked on the cell it just cleared at (1, 4).
        assert feats[carried_home].tolist() == [1, 0, 0, 1, 4, 500, 1, 18]

    def test_encoding_invariants(self):
        graph, instance, state, _, _ = self.make_training_scale_state()
        feats = encode_state(graph, state, instance)
        assert np.array_equal(feats[:, :3].sum(axis=1), np.ones(len(graph.nodes)))
        assert np.count_nonzero(feats[:, 6]) == 1
        assert np.all(feats[:, 7] == 18.0)
        # Due dates only appear on storage rows.
        assert np.all(feats[feats[:, 0] == 0.0, 5] == 0.0)

    def test_empty_shuttle_marker(self):
        env = make_env((2, 1, 6))
        state = env.reset(4)
        feats = env.encode(state)
        assert feats[state.shuttle_node, 6] == -1.0
        occupied = sorted(state.occupancy)
        assert all(feats[n, 5] == env.instance.due_dates[n] for n in occupied)
