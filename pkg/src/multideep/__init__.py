"""Retrieval scheduling for multi-deep shuttle warehouses.

Simulator, dispatch rules, and a graph-attention PPO agent that
minimizes total tardiness of storage retrievals.
"""

from .warehouse import (
    DueDateConfig,
    Instance,
    LayoutParams,
    WarehouseGraph,
    build_layout,
    compute_mp,
    generate_instance,
    load_instance,
    save_instance,
)

__all__ = [
    "DueDateConfig",
    "Instance",
    "LayoutParams",
    "WarehouseGraph",
    "build_layout",
    "compute_mp",
    "generate_instance",
    "load_instance",
    "save_instance",
]
