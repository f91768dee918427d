"""Shortest paths and item accessibility on the warehouse graph.

Traversability: aisle and I/O nodes can always be crossed; a storage
cell can be crossed only while unoccupied, except that the pickup
target itself may be entered (``exempt``).  All edges have unit weight;
Dijkstra is kept in its priority-queue form with ties broken toward the
lowest node id so routes are reproducible.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from collections.abc import Collection

from .warehouse import NodeKind, WarehouseGraph

__all__ = [
    "PathResult",
    "traversable",
    "shortest_path",
    "single_source_distances",
    "pickup_distances",
    "accessible_items",
]


@dataclass(frozen=True)
class PathResult:
    distance: int
    path: tuple[int, ...]


def _check_node(graph: WarehouseGraph, node: int, role: str) -> None:
    if not isinstance(node, int) or not (0 <= node < len(graph.nodes)):
        raise ValueError(f"unknown {role} node id {node!r}")


def traversable(
    graph: WarehouseGraph,
    occupancy: Collection[int],
    node: int,
    exempt: int | None = None,
) -> bool:
    if graph.nodes[node].kind is not NodeKind.STORAGE:
        return True
    return node == exempt or node not in occupancy


def shortest_path(
    graph: WarehouseGraph,
    occupancy: Collection[int],
    source: int,
    target: int,
    exempt: int | None = None,
) -> PathResult | None:
    """Shortest route from ``source`` to ``target``, or None if blocked.

    The source is where the shuttle already stands and is never tested
    for traversability; every later node on the path is.
    """
    _check_node(graph, source, "source")
    _check_node(graph, target, "target")
    if source == target:
        return PathResult(0, (source,))
    if not traversable(graph, occupancy, target, exempt):
        return None

    occupied = occupancy if isinstance(occupancy, (set, frozenset, dict)) else set(occupancy)
    dist: dict[int, int] = {source: 0}
    parent: dict[int, int] = {}
    heap: list[tuple[int, int]] = [(0, source)]
    done: set[int] = set()
    while heap:
        d, node = heapq.heappop(heap)
        if node in done:
            continue
        done.add(node)
        if node == target:
            path = [node]
            while path[-1] != source:
                path.append(parent[path[-1]])
            return PathResult(d, tuple(reversed(path)))
        for nbr in graph.adjacency[node]:
            if nbr != target and not traversable(graph, occupied, nbr, exempt):
                continue
            nd = d + 1
            if nd < dist.get(nbr, math.inf):
                dist[nbr] = nd
                parent[nbr] = node
                heapq.heappush(heap, (nd, nbr))
    return None


def single_source_distances(
    graph: WarehouseGraph, occupancy: Collection[int], source: int
) -> list[float]:
    """Hop distance from ``source`` to every traversable node.

    Occupied storage cells and unreachable nodes get ``inf``; pair with
    :func:`pickup_distances` for distances onto occupied pickup targets.
    """
    _check_node(graph, source, "source")
    occupied = occupancy if isinstance(occupancy, (set, frozenset, dict)) else set(occupancy)
    dist = [math.inf] * len(graph.nodes)
    dist[source] = 0.0
    heap: list[tuple[float, int]] = [(0.0, source)]
    done: set[int] = set()
    while heap:
        d, node = heapq.heappop(heap)
        if node in done:
            continue
        done.add(node)
        for nbr in graph.adjacency[node]:
            if not traversable(graph, occupied, nbr, None):
                continue
            nd = d + 1.0
            if nd < dist[nbr]:
                dist[nbr] = nd
                heapq.heappush(heap, (nd, nbr))
    return dist


def pickup_distances(
    graph: WarehouseGraph,
    occupancy: Collection[int],
    dist: list[float],
) -> dict[int, float]:
    """Travel distance onto each accessible occupied cell.

    A pickup route may cross the target cell itself but nothing else
    that is occupied, so its length is one hop past the nearest
    traversable neighbour already priced in ``dist``.  Items the shuttle
    cannot currently reach are omitted.
    """
    occupied = occupancy if isinstance(occupancy, (set, frozenset, dict)) else set(occupancy)
    out: dict[int, float] = {}
    for item in accessible_items(graph, occupied):
        best = math.inf
        for nbr in graph.adjacency[item]:
            if traversable(graph, occupied, nbr, None) and dist[nbr] + 1.0 < best:
                best = dist[nbr] + 1.0
        if best < math.inf:
            out[item] = best
    return out


def accessible_items(graph: WarehouseGraph, occupancy: Collection[int]) -> set[int]:
    """Occupied cells whose lane front is clear on at least one side.

    Dead-end lanes expose the occupied cell nearest their entrance;
    open lanes expose the first occupied cell from each end (the same
    cell when only one item remains).
    """
    occupied = occupancy if isinstance(occupancy, (set, frozenset, dict)) else set(occupancy)
    out: set[int] = set()
    for lane in graph.lanes:
        for cell in lane.cells:
            if cell in occupied:
                out.add(cell)
                break
        if lane.open_both_ends:
            for cell in reversed(lane.cells):
                if cell in occupied:
                    out.add(cell)
                    break
    return out
