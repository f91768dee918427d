"""Baseline policies: hand-traced decisions plus brute-force cross-checks."""

from __future__ import annotations

import numpy as np
import pytest

from multideep import routing
from multideep.environment import ActionKind, Phase, RetrievalEnv, SimState
from multideep.heuristics import (
    HEURISTICS,
    EarliestDueDate,
    LeastSlackTime,
    RandomChoice,
    ShortestTravelTime,
    make_heuristic,
    slack_time,
)
from multideep.warehouse import (
    DueDateConfig,
    Instance,
    LayoutParams,
    build_layout,
    generate_instance,
)


def make_instance(graph, due):
    return Instance(
        layout=graph.params, mp=50.0, config=DueDateConfig(0.125, 0.75),
        seed=0, due_dates=due,
    )


def pickup_state(graph, occupancy, shuttle, clock=0.0):
    return SimState(
        occupancy=frozenset(occupancy), shuttle_node=shuttle, carried=None,
        clock=clock, phase=Phase.SELECT_ITEM, completions=(),
        frozen_tardiness=0.0, last_tt=0.0,
    )


class TestSlackTime:
    def test_examples(self):
        assert slack_time(100.0, 20.0, 30.0, 1.0) == 50.0
        assert slack_time(100.0, 20.0, 30.0, 2.0) == 65.0
        assert slack_time(10.0, 8.0, 6.0, 1.0) == -4.0


class TestPickupChoices:
    # Two-lane row, one aisle: left lane holds a front item (6) and a
    # buried item (5), the right lane only its deepest cell (9). From the
    # top-left corner the front item is 4 hops away, the deep one 5.
    def setup_scenario(self, due):
        graph = build_layout(LayoutParams(2, 1, 2))
        env = RetrievalEnv(graph, make_instance(graph, due))
        state = pickup_state(graph, {5, 6, 9}, shuttle=0)
        legal = env.legal_actions(state)
        assert [a.target for a in legal] == [6, 9]
        return graph, env, state, legal

    def test_shortest_travel_time_ignores_urgency(self):
        due = {5: 1.0, 6: 200.0, 8: 1.0, 9: 50.0}
        graph, env, state, legal = self.setup_scenario(due)
        choice = ShortestTravelTime(graph, env.instance).decide(state, legal)
        assert choice.target == 6

    def test_earliest_due_date_ignores_distance(self):
        due = {5: 1.0, 6: 200.0, 8: 1.0, 9: 50.0}
        graph, env, state, legal = self.setup_scenario(due)
        choice = EarliestDueDate(graph, env.instance).decide(state, legal)
        assert choice.target == 9

    def test_least_slack_weighs_remaining_haul(self):
        # Hauls to the closest delivery point: 4 for item 6, 5 for item 9.
        # Slacks 93.5 vs 93, so the farther item is the tighter one.
        due = {5: 1.0, 6: 97.5, 8: 1.0, 9: 98.0}
        graph, env, state, legal = self.setup_scenario(due)
        assert LeastSlackTime(graph, env.instance).decide(state, legal).target == 9
        assert EarliestDueDate(graph, env.instance).decide(state, legal).target == 6
        assert ShortestTravelTime(graph, env.instance).decide(state, legal).target == 6

    def test_ties_break_toward_lowest_id(self):
        due = {5: 1.0, 6: 50.0, 8: 1.0, 9: 50.0}
        graph, env, state, legal = self.setup_scenario(due)
        assert EarliestDueDate(graph, env.instance).decide(state, legal).target == 6

    def test_shortest_travel_matches_brute_force(self):
        rng = np.random.default_rng(17)
        for dims in [(2, 1, 6), (3, 2, 6)]:
            graph = build_layout(LayoutParams(*dims))
            instance = generate_instance(graph, DueDateConfig(0.125, 0.75), 3)
            env = RetrievalEnv(graph, instance)
            policy = ShortestTravelTime(graph, instance)
            for _ in range(25):
                keep = rng.random(len(graph.storage_nodes)) < 0.6
                occupancy = {n for n, k in zip(graph.storage_nodes, keep) if k}
                if not occupancy:
                    continue
                shuttle = int(rng.choice(graph.io_nodes))
                state = pickup_state(graph, occupancy, shuttle)
                legal = env.legal_actions(state)
                choice = policy.decide(state, legal)
                best = min(
                    legal,
                    key=lambda a: (
                        routing.shortest_path(
                            graph, state.occupancy, shuttle, a.target, exempt=a.target
                        ).distance,
                        a.target,
                    ),
                )
                assert choice == best


class TestDeliveryChoices:
    def test_nearest_io_prefers_adjacent_connector_row(self):
        # Carried item sits in the second lane row, one step from the
        # bottom connector: both bottom corners are 4 hops, both top
        # corners 5, and the id tie-break picks the bottom-left.
        graph = build_layout(LayoutParams(2, 1, 4))
        due = {n: 100.0 for n in graph.storage_nodes}
        instance = make_instance(graph, due)
        env = RetrievalEnv(graph, instance)
        state = SimState(
            occupancy=frozenset({5}), shuttle_node=13, carried=13,
            clock=0.0, phase=Phase.SELECT_IO, completions=(),
            frozen_tardiness=0.0, last_tt=0.0,
        )
        legal = env.legal_actions(state)
        for cls in (ShortestTravelTime, EarliestDueDate, LeastSlackTime):
            choice = cls(graph, instance).decide(state, legal)
            assert choice.kind is ActionKind.SELECT_IO
            assert choice.target == 15

    def test_top_corner_tie_breaks_to_lowest_id(self):
        graph = build_layout(LayoutParams(2, 1, 4))
        instance = make_instance(graph, {n: 100.0 for n in graph.storage_nodes})
        env = RetrievalEnv(graph, instance)
        state = SimState(
            occupancy=frozenset({13}), shuttle_node=6, carried=6,
            clock=0.0, phase=Phase.SELECT_IO, completions=(),
            frozen_tardiness=0.0, last_tt=0.0,
        )
        legal = env.legal_actions(state)
        choice = ShortestTravelTime(graph, instance).decide(state, legal)
        assert choice.target == 0


class TestRandomChoice:
    def test_requires_generator(self):
        graph = build_layout(LayoutParams(1, 1, 2))
        instance = generate_instance(graph, DueDateConfig(0.125, 0.75), 0)
        env = RetrievalEnv(graph, instance)
        state = env.reset(0)
        with pytest.raises(ValueError):
            RandomChoice(graph, instance).decide(state, env.legal_actions(state))

    def test_seeded_draws_are_reproducible_and_cover_all_options(self):
        graph = build_layout(LayoutParams(2, 1, 6))
        instance = generate_instance(graph, DueDateConfig(0.125, 0.75), 0)
        env = RetrievalEnv(graph, instance)
        state = env.reset(0)
        legal = env.legal_actions(state)
        policy = RandomChoice(graph, instance)
        first = [policy.decide(state, legal, np.random.default_rng(4)) for _ in range(8)]
        again = [policy.decide(state, legal, np.random.default_rng(4)) for _ in range(8)]
        assert first == again
        rng = np.random.default_rng(4)
        seen = {policy.decide(state, legal, rng).target for _ in range(200)}
        assert seen == {a.target for a in legal}


class TestEpisodes:
    def run_episode(self, env, policy, seed):
        state = env.reset(seed)
        rng = np.random.default_rng(seed)
        while state.phase is not Phase.DONE:
            action = policy.decide(state, env.legal_actions(state), rng)
            state, _ = env.step(state, action)
        return env.total_tardiness(state)

    def test_every_policy_completes_episodes_deterministically(self):
        graph = build_layout(LayoutParams(2, 1, 6))
        instance = generate_instance(graph, DueDateConfig(0.125, 0.75), 21)
        env = RetrievalEnv(graph, instance)
        for name in HEURISTICS:
            policy = make_heuristic(name, graph, instance)
            assert self.run_episode(env, policy, 5) == self.run_episode(env, policy, 5)

    def test_unknown_name_rejected(self):
        graph = build_layout(LayoutParams(1, 1, 2))
        instance = generate_instance(graph, DueDateConfig(0.125, 0.75), 0)
        with pytest.raises(ValueError):
            make_heuristic("fifo", graph, instance)
