"""Rule-based retrieval baselines.

Each policy is bound to a fixed graph and instance and exposes
``decide(state, legal, rng)``. Deterministic rules ignore the rng and
break ties toward the lowest node id, matching the sorted order of the
legal action list.
"""

from __future__ import annotations

import numpy as np

from . import routing
from .environment import Action, Phase, SimState
from .warehouse import Instance, WarehouseGraph


def slack_time(due: float, now: float, distance: float, speed: float) -> float:
    """Time to spare before an item turns tardy, given remaining travel."""
    return due - (now + distance / speed)


class HeuristicPolicy:
    name = "base"

    def __init__(self, graph: WarehouseGraph, instance: Instance):
        self.graph = graph
        self.instance = instance

    def decide(self, state: SimState, legal: list[Action], rng=None) -> Action:
        raise NotImplementedError

    def _pickup_map(self, state: SimState) -> dict[int, float]:
        dist = routing.single_source_distances(
            self.graph, state.occupancy, state.shuttle_node
        )
        return routing.pickup_distances(self.graph, state.occupancy, dist)

    def _nearest_io(self, state: SimState, legal: list[Action]) -> Action:
        dist = routing.single_source_distances(
            self.graph, state.occupancy, state.shuttle_node
        )
        return min(legal, key=lambda a: (dist[a.target], a.target))


class ShortestTravelTime(HeuristicPolicy):
    """Always move to the closest legal target."""

    name = "stt"

    def decide(self, state, legal, rng=None):
        if state.phase is Phase.SELECT_IO:
            return self._nearest_io(state, legal)
        pick = self._pickup_map(state)
        return min(legal, key=lambda a: (pick[a.target], a.target))


class EarliestDueDate(HeuristicPolicy):
    """Fetch the most urgent item, then deliver to the closest point."""

    name = "edd"

    def decide(self, state, legal, rng=None):
        if state.phase is Phase.SELECT_IO:
            return self._nearest_io(state, legal)
        due = self.instance.due_dates
        return min(legal, key=lambda a: (due[a.target], a.target))


class LeastSlackTime(HeuristicPolicy):
    """Fetch the item with the least time to spare.

    Remaining work for an item is estimated as the haul from its cell to
    the closest delivery point, with the item itself treated as carried.
    """

    name = "lst"

    def decide(self, state, legal, rng=None):
        if state.phase is Phase.SELECT_IO:
            return self._nearest_io(state, legal)
        haul: dict[int, float] = {}
        for io in self.graph.io_nodes:
            dist = routing.single_source_distances(self.graph, state.occupancy, io)
            pick = routing.pickup_distances(self.graph, state.occupancy, dist)
            for node, d in pick.items():
                haul[node] = min(haul.get(node, np.inf), d)
        due = self.instance.due_dates
        speed = self.graph.params.shuttle_speed

        def key(a: Action):
            return (
                slack_time(due[a.target], state.clock, haul[a.target], speed),
                a.target,
            )

        return min(legal, key=key)


class RandomChoice(HeuristicPolicy):
    name = "random"

    def decide(self, state, legal, rng=None):
        if rng is None:
            raise ValueError("random policy needs a generator")
        return legal[int(rng.integers(len(legal)))]


HEURISTICS: dict[str, type[HeuristicPolicy]] = {
    cls.name: cls
    for cls in (ShortestTravelTime, EarliestDueDate, LeastSlackTime, RandomChoice)
}


def make_heuristic(name: str, graph: WarehouseGraph, instance: Instance) -> HeuristicPolicy:
    try:
        cls = HEURISTICS[name]
    except KeyError:
        raise ValueError(f"unknown heuristic {name!r}") from None
    return cls(graph, instance)
