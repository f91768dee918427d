"""Retrieval episode dynamics and the graph feature encoding.

An episode clears every item out of a fully occupied warehouse.  The
agent is asked for a decision at exactly two points per item: which
accessible item the empty shuttle fetches next, and which I/O point the
loaded shuttle delivers to.  Travel, loading, and unloading advance a
global clock; the reward of a step is the negated increase in total
tardiness over that step, so rewards over an episode telescope to the
negated final total tardiness (plus a bonus when nothing was late).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from . import routing
from .warehouse import Instance, NodeKind, WarehouseGraph

__all__ = [
    "ContractViolation",
    "IllegalActionError",
    "Phase",
    "ActionKind",
    "Action",
    "Completion",
    "SimState",
    "StepInfo",
    "StepOutcome",
    "RetrievalEnv",
    "encode_state",
    "FEATURE_DIM",
    "ON_TIME_BONUS",
]

# Feature columns: indicator storage / aisle / io, y, x, due date (0 when
# no item sits on the node), shuttle marker (+1 loaded, -1 empty, 0
# absent), current clock.
FEATURE_DIM = 8

# Terminal bonus when the episode finishes with zero total tardiness.
ON_TIME_BONUS = 100.0


class ContractViolation(RuntimeError):
    """An operation was called in a phase it is not defined for."""


class IllegalActionError(ValueError):
    """The chosen action is not legal in the given state."""


class Phase(Enum):
    SELECT_ITEM = "select_item"
    SELECT_IO = "select_io"
    DONE = "done"


class ActionKind(Enum):
    SELECT_ITEM = "select_item"
    SELECT_IO = "select_io"


@dataclass(frozen=True)
class Action:
    kind: ActionKind
    target: int


@dataclass(frozen=True)
class Completion:
    item: int
    completed_at: float
    due: float


@dataclass(frozen=True)
class SimState:
    occupancy: frozenset[int]
    shuttle_node: int
    carried: int | None
    clock: float
    phase: Phase
    completions: tuple[Completion, ...]
    frozen_tardiness: float
    last_tt: float


@dataclass(frozen=True)
class StepInfo:
    clock_delta: float
    travel_distance: int


@dataclass(frozen=True)
class StepOutcome:
    reward: float
    done: bool
    info: StepInfo


class RetrievalEnv:
    """Binds a warehouse graph and an instance; states stay immutable."""

    def __init__(self, graph: WarehouseGraph, instance: Instance):
        if graph.params != instance.layout:
            raise ValueError(
                f"graph layout {graph.params} does not match instance layout "
                f"{instance.layout}"
            )
        self.graph = graph
        self.instance = instance

    def reset(self, seed: int) -> SimState:
        """Fresh fully-occupied state; the start I/O point is seed-drawn."""
        rng = np.random.default_rng(seed)
        start = self.graph.io_nodes[int(rng.integers(len(self.graph.io_nodes)))]
        return SimState(
            occupancy=frozenset(self.graph.storage_nodes),
            shuttle_node=start,
            carried=None,
            clock=0.0,
            phase=Phase.SELECT_ITEM,
            completions=(),
            frozen_tardiness=0.0,
            last_tt=0.0,
        )

    def legal_actions(self, state: SimState) -> list[Action]:
        if state.phase is Phase.SELECT_ITEM:
            items = routing.accessible_items(self.graph, state.occupancy)
            return [Action(ActionKind.SELECT_ITEM, n) for n in sorted(items)]
        if state.phase is Phase.SELECT_IO:
            return [Action(ActionKind.SELECT_IO, n) for n in self.graph.io_nodes]
        raise ContractViolation("legal_actions is undefined once the episode is done")

    def tardiness_now(self, state: SimState, clock: float | None = None) -> float:
        """Frozen tardiness of completed items plus accrual of open ones.

        Open items are those still stored, plus the one on the shuttle:
        it keeps accruing until it is actually delivered.
        """
        t = state.clock if clock is None else clock
        due = self.instance.due_dates
        total = state.frozen_tardiness
        for node in state.occupancy:
            total += max(0.0, t - due[node])
        if state.carried is not None:
            total += max(0.0, t - due[state.carried])
        return total

    def step(self, state: SimState, action: Action) -> tuple[SimState, StepOutcome]:
        if state.phase is Phase.DONE:
            raise ContractViolation("step called on a finished episode")
        if not isinstance(action, Action):
            raise IllegalActionError(f"not an action: {action!r}")

        speed = self.graph.params.shuttle_speed
        if state.phase is Phase.SELECT_ITEM:
            if action.kind is not ActionKind.SELECT_ITEM:
                raise IllegalActionError(f"expected an item selection, got {action}")
            if action.target not in routing.accessible_items(self.graph, state.occupancy):
                raise IllegalActionError(f"item at node {action.target} is not accessible")
            route = routing.shortest_path(
                self.graph, state.occupancy, state.shuttle_node, action.target,
                exempt=action.target,
            )
            if route is None:
                raise IllegalActionError(
                    f"no open route from node {state.shuttle_node} to node {action.target}"
                )
            delta = route.distance / speed + 1.0  # travel plus one load
            new_state = replace(
                state,
                occupancy=state.occupancy - {action.target},
                shuttle_node=action.target,
                carried=action.target,
                clock=state.clock + delta,
                phase=Phase.SELECT_IO,
            )
        else:
            if action.kind is not ActionKind.SELECT_IO:
                raise IllegalActionError(f"expected an I/O selection, got {action}")
            if action.target not in self.graph.io_nodes:
                raise IllegalActionError(f"node {action.target} is not an I/O point")
            route = routing.shortest_path(
                self.graph, state.occupancy, state.shuttle_node, action.target
            )
            if route is None:
                raise IllegalActionError(
                    f"no open route from node {state.shuttle_node} to node {action.target}"
                )
            delta = route.distance / speed + 1.0  # travel plus one unload
            clock = state.clock + delta
            item = state.carried
            due = self.instance.due_dates[item]
            new_state = replace(
                state,
                shuttle_node=action.target,
                carried=None,
                clock=clock,
                phase=Phase.DONE if not state.occupancy else Phase.SELECT_ITEM,
                completions=state.completions + (Completion(item, clock, due),),
                frozen_tardiness=state.frozen_tardiness + max(0.0, clock - due),
            )

        tt_now = self.tardiness_now(new_state)
        reward = -(tt_now - state.last_tt)
        done = new_state.phase is Phase.DONE
        if done and tt_now == 0.0:
            reward += ON_TIME_BONUS
        new_state = replace(new_state, last_tt=tt_now)
        return new_state, StepOutcome(
            reward=reward,
            done=done,
            info=StepInfo(clock_delta=delta, travel_distance=route.distance),
        )

    def total_tardiness(self, state: SimState) -> float:
        if state.phase is not Phase.DONE:
            raise ContractViolation("total tardiness is defined on finished episodes")
        return state.frozen_tardiness

    def encode(self, state: SimState) -> np.ndarray:
        return encode_state(self.graph, state, self.instance)


def encode_state(graph: WarehouseGraph, state: SimState, instance: Instance) -> np.ndarray:
    """Per-node feature rows; see FEATURE_DIM for the column layout."""
    out = np.zeros((len(graph.nodes), FEATURE_DIM), dtype=np.float64)
    for node in graph.nodes:
        row = out[node.id]
        if node.kind is NodeKind.STORAGE:
            row[0] = 1.0
        elif node.kind is NodeKind.AISLE:
            row[1] = 1.0
        else:
            row[2] = 1.0
        row[3] = node.y
        row[4] = node.x
    for item in state.occupancy:
        out[item, 5] = instance.due_dates[item]
    if state.carried is not None:
        # The carried item rides on the shuttle; show its due date there.
        out[state.shuttle_node, 5] = instance.due_dates[state.carried]
    out[state.shuttle_node, 6] = 1.0 if state.carried is not None else -1.0
    out[:, 7] = state.clock
    return out
