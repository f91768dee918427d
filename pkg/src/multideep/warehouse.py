"""Multi-deep warehouse layouts and retrieval instances.

Top view of the storage grid (lanes run horizontally, cross-aisles
vertically, ``lane_depth=2``, ``num_aisles=2``, ``lanes_per_aisle=6``)::

    I - - A - - - - A - I     <- top connector row, I/O at the corners
    S S | A S S S S A | S S   <- lane row 1
    S S | A S S S S A | S S   <- lane row 2
    S S | A S S S S A | S S   <- lane row 3
    I - - A - - - - A - I     <- bottom connector row

Each lane row holds, left to right: a dead-end lane of ``lane_depth``
cells, then one open lane of ``2 * lane_depth`` cells between every pair
of adjacent aisles, then a mirrored dead-end lane.  Aisle columns run
vertically between the two connector rows; the connector rows span the
full width and carry the four I/O points at the warehouse corners.
Every edge has unit length and the shuttle covers one edge per time
unit, so travel time equals hop count.

Node ids are assigned row-major over the grid, which makes the graph a
pure function of the layout parameters.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

__all__ = [
    "LayoutError",
    "InstanceFormatError",
    "NodeKind",
    "LayoutParams",
    "Node",
    "Lane",
    "WarehouseGraph",
    "DueDateConfig",
    "Instance",
    "build_layout",
    "compute_mp",
    "due_date_bounds",
    "sample_due_dates",
    "generate_instance",
    "save_instance",
    "load_instance",
]


class LayoutError(ValueError):
    """Raised for layout parameters that cannot form a warehouse."""


class InstanceFormatError(ValueError):
    """Raised for instance files that fail parsing or validation."""


class NodeKind(Enum):
    STORAGE = "storage"
    AISLE = "aisle"
    IO = "io"


@dataclass(frozen=True)
class LayoutParams:
    """Warehouse shape: lane depth, aisle count, lanes per aisle.

    ``lanes_per_aisle`` counts lanes on both sides of a cross-aisle, so
    it must be even: a layout has ``lanes_per_aisle / 2`` lane rows.
    """

    lane_depth: int
    num_aisles: int
    lanes_per_aisle: int
    shuttle_speed: float = 1.0

    def __post_init__(self) -> None:
        if self.lane_depth < 1:
            raise LayoutError(f"lane_depth must be >= 1, got {self.lane_depth}")
        if self.num_aisles < 1:
            raise LayoutError(f"num_aisles must be >= 1, got {self.num_aisles}")
        if self.lanes_per_aisle < 2 or self.lanes_per_aisle % 2 != 0:
            raise LayoutError(
                "lanes_per_aisle must be an even integer >= 2, got "
                f"{self.lanes_per_aisle}"
            )
        if not (self.shuttle_speed > 0):
            raise LayoutError(f"shuttle_speed must be > 0, got {self.shuttle_speed}")

    @property
    def item_count(self) -> int:
        return self.lane_depth * self.num_aisles * self.lanes_per_aisle


@dataclass(frozen=True)
class Node:
    id: int
    kind: NodeKind
    y: int
    x: int
    lane_id: int | None = None


@dataclass(frozen=True)
class Lane:
    """A storage lane: ``cells`` are Storage node ids.

    Dead-end lanes list cells entrance-first; open lanes list them from
    the left entrance to the right entrance.
    """

    id: int
    cells: tuple[int, ...]
    entrances: tuple[int, ...]
    open_both_ends: bool


@dataclass(frozen=True)
class WarehouseGraph:
    params: LayoutParams
    nodes: tuple[Node, ...]
    lanes: tuple[Lane, ...]
    edges: frozenset[tuple[int, int]]
    adjacency: tuple[tuple[int, ...], ...]
    io_nodes: tuple[int, ...]
    storage_nodes: tuple[int, ...]
    height: int
    width: int

    def node_count(self) -> int:
        return len(self.nodes)


def _aisle_x(params: LayoutParams, aisle: int) -> int:
    return params.lane_depth + aisle * (2 * params.lane_depth + 1)


def build_layout(params: LayoutParams) -> WarehouseGraph:
    """Construct the warehouse graph for the given parameters."""
    depth = params.lane_depth
    rows = params.lanes_per_aisle // 2
    aisle_xs = [_aisle_x(params, a) for a in range(params.num_aisles)]
    width = aisle_xs[-1] + depth + 1
    height = rows + 2

    # Grid scan, row-major: rows 0 and height-1 are full connector rows
    # with I/O nodes at their corner cells.
    nodes: list[Node] = []
    pos_to_id: dict[tuple[int, int], int] = {}
    aisle_set = set(aisle_xs)
    for y in range(height):
        for x in range(width):
            if y == 0 or y == height - 1:
                kind = NodeKind.IO if x in (0, width - 1) else NodeKind.AISLE
            elif x in aisle_set:
                kind = NodeKind.AISLE
            else:
                kind = NodeKind.STORAGE
            node_id = len(nodes)
            nodes.append(Node(node_id, kind, y, x))
            pos_to_id[(y, x)] = node_id

    # Lanes, ordered per row left to right, rows top to bottom.
    lanes: list[Lane] = []
    lane_of: dict[int, int] = {}

    def add_lane(cell_ids: list[int], entrances: list[int], open_ends: bool) -> None:
        lane = Lane(len(lanes), tuple(cell_ids), tuple(entrances), open_ends)
        lanes.append(lane)
        for c in cell_ids:
            lane_of[c] = lane.id

    for r in range(1, rows + 1):
        left_entrance_aisle = pos_to_id[(r, aisle_xs[0])]
        add_lane(
            [pos_to_id[(r, x)] for x in range(depth - 1, -1, -1)],
            [left_entrance_aisle],
            False,
        )
        for a in range(params.num_aisles - 1):
            ax, bx = aisle_xs[a], aisle_xs[a + 1]
            add_lane(
                [pos_to_id[(r, x)] for x in range(ax + 1, bx)],
                [pos_to_id[(r, ax)], pos_to_id[(r, bx)]],
                True,
            )
        last_x = aisle_xs[-1]
        add_lane(
            [pos_to_id[(r, x)] for x in range(last_x + 1, width)],
            [pos_to_id[(r, last_x)]],
            False,
        )

    nodes = [
        Node(n.id, n.kind, n.y, n.x, lane_of.get(n.id)) if n.kind is NodeKind.STORAGE else n
        for n in nodes
    ]

    # Unit edges: horizontal neighbours inside lane and connector rows,
    # vertical neighbours along aisle columns.  Storage columns have no
    # vertical edges; lanes are entered from their aisle only.
    edges: set[tuple[int, int]] = set()
    for y in range(height):
        for x in range(width - 1):
            edges.add((pos_to_id[(y, x)], pos_to_id[(y, x + 1)]))
    for ax in aisle_xs:
        for y in range(height - 1):
            a, b = pos_to_id[(y, ax)], pos_to_id[(y + 1, ax)]
            edges.add((min(a, b), max(a, b)))

    neighbors: list[list[int]] = [[] for _ in nodes]
    for a, b in edges:
        neighbors[a].append(b)
        neighbors[b].append(a)
    adjacency = tuple(tuple(sorted(ns)) for ns in neighbors)

    io_nodes = tuple(n.id for n in nodes if n.kind is NodeKind.IO)
    storage_nodes = tuple(n.id for n in nodes if n.kind is NodeKind.STORAGE)
    if len(storage_nodes) != params.item_count:
        raise LayoutError(
            f"constructed {len(storage_nodes)} storage cells, "
            f"expected {params.item_count}"
        )

    return WarehouseGraph(
        params=params,
        nodes=tuple(nodes),
        lanes=tuple(lanes),
        edges=frozenset(edges),
        adjacency=adjacency,
        io_nodes=io_nodes,
        storage_nodes=storage_nodes,
        height=height,
        width=width,
    )


_MP_CACHE: dict[LayoutParams, float] = {}


def compute_mp(graph: WarehouseGraph) -> float:
    """Makespan of a full clear-out under the shortest-travel-time rule.

    Starting from the first I/O node with every storage cell occupied,
    repeatedly fetch the reachable accessible item with the smallest
    travel time and drop it at the nearest I/O point (ties on travel
    time go to the lowest node id).  The final clock value scales the
    due-date window for instance generation.
    """
    cached = _MP_CACHE.get(graph.params)
    if cached is not None:
        return cached

    from . import routing  # deferred: routing imports this module's types

    speed = graph.params.shuttle_speed
    occupancy = set(graph.storage_nodes)
    position = graph.io_nodes[0]
    clock = 0.0
    while occupancy:
        dist = routing.single_source_distances(graph, occupancy, position)
        pickup = routing.pickup_distances(graph, occupancy, dist)
        target = None
        best = math.inf
        for item in sorted(pickup):
            if pickup[item] < best:
                best, target = pickup[item], item
        if target is None:
            raise LayoutError("no reachable item during makespan rollout")
        clock += best / speed + 1.0
        occupancy.discard(target)
        position = target

        dist = routing.single_source_distances(graph, occupancy, position)
        io_target, best = None, math.inf
        for io in graph.io_nodes:
            if dist[io] < best:
                best, io_target = dist[io], io
        clock += best / speed + 1.0
        position = io_target

    _MP_CACHE[graph.params] = clock
    return clock


@dataclass(frozen=True)
class DueDateConfig:
    """Due-date window: ``tightness`` centers it, ``spread`` widens it.

    Dates are drawn uniformly from
    ``[MP * (1 - tightness - spread / 2), MP * (1 - tightness + spread / 2)]``
    and clamped at zero from below.  ``spread == 0`` degenerates to a
    single deterministic date.
    """

    tightness: float
    spread: float

    def __post_init__(self) -> None:
        if not (0.0 < self.tightness < 1.0):
            raise ValueError(f"tightness must lie in (0, 1), got {self.tightness}")
        if not (0.0 <= self.spread < 2.0):
            raise ValueError(f"spread must lie in [0, 2), got {self.spread}")


def due_date_bounds(mp: float, config: DueDateConfig) -> tuple[float, float]:
    """Due-date window for a given makespan, lower bound clamped at 0."""
    lo = mp * (1.0 - config.tightness - config.spread / 2.0)
    hi = mp * (1.0 - config.tightness + config.spread / 2.0)
    return max(0.0, lo), hi


def sample_due_dates(mp: float, config: DueDateConfig, rng: np.random.Generator, n: int) -> np.ndarray:
    lo = mp * (1.0 - config.tightness - config.spread / 2.0)
    hi = mp * (1.0 - config.tightness + config.spread / 2.0)
    return np.maximum(0.0, rng.uniform(lo, hi, size=n))


@dataclass(frozen=True, eq=True)
class Instance:
    """A retrieval problem: a layout plus one due date per storage cell."""

    layout: LayoutParams
    mp: float
    config: DueDateConfig
    seed: int
    due_dates: dict[int, float]

    @property
    def item_count(self) -> int:
        return len(self.due_dates)


def generate_instance(graph: WarehouseGraph, config: DueDateConfig, seed: int) -> Instance:
    """Draw due dates for every storage cell; pure in (layout, config, seed)."""
    mp = compute_mp(graph)
    rng = np.random.default_rng(seed)
    dates = sample_due_dates(mp, config, rng, len(graph.storage_nodes))
    due = {node: float(d) for node, d in zip(graph.storage_nodes, dates)}
    return Instance(layout=graph.params, mp=mp, config=config, seed=seed, due_dates=due)


def save_instance(instance: Instance, path: str | Path) -> None:
    doc = {
        "layout": {
            "dl": instance.layout.lane_depth,
            "na": instance.layout.num_aisles,
            "nl": instance.layout.lanes_per_aisle,
        },
        "mp": instance.mp,
        "config": {"r": instance.config.tightness, "rr": instance.config.spread},
        "seed": instance.seed,
        "due_dates": [[node, due] for node, due in sorted(instance.due_dates.items())],
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def load_instance(path: str | Path) -> Instance:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InstanceFormatError(
            f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc

    try:
        layout = LayoutParams(
            lane_depth=int(doc["layout"]["dl"]),
            num_aisles=int(doc["layout"]["na"]),
            lanes_per_aisle=int(doc["layout"]["nl"]),
        )
        mp = float(doc["mp"])
        config = DueDateConfig(
            tightness=float(doc["config"]["r"]), spread=float(doc["config"]["rr"])
        )
        seed = int(doc["seed"])
        pairs = [(int(node), float(due)) for node, due in doc["due_dates"]]
    except (KeyError, TypeError, IndexError) as exc:
        raise InstanceFormatError(f"{path}: missing or malformed field: {exc!r}") from exc

    graph = build_layout(layout)
    storage = set(graph.storage_nodes)
    due_dates: dict[int, float] = {}
    for node, due in pairs:
        if node not in storage:
            raise InstanceFormatError(
                f"{path}: due date assigned to node {node}, which is not a storage cell"
            )
        if node in due_dates:
            raise InstanceFormatError(f"{path}: duplicate due date for node {node}")
        if due < 0:
            raise InstanceFormatError(f"{path}: negative due date {due} on node {node}")
        due_dates[node] = due
    if len(due_dates) != len(storage):
        raise InstanceFormatError(
            f"{path}: expected {len(storage)} due dates, found {len(due_dates)}"
        )
    return Instance(layout=layout, mp=mp, config=config, seed=seed, due_dates=due_dates)
