"""Benchmark harness: timed episodes, policy grids, and report files.

Every repetition of a (layout, due-config) cell draws one set of due
dates and one start point, shared by all policies, so rows differ only
in the decisions made. Seeds are derived by hashing the cell key, which
keeps runs byte-reproducible aside from the wall-clock columns.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .environment import Phase, RetrievalEnv
from .heuristics import HEURISTICS, make_heuristic
from .policy_net import AgentPolicy, PolicyNet, load_checkpoint
from .seeding import mix_seed
from .warehouse import (
    DueDateConfig,
    Instance,
    LayoutParams,
    WarehouseGraph,
    build_layout,
    generate_instance,
)

# Layout grid used for generalization runs: every lane depth 2..5 crossed
# with one or two aisles and 6..12 lane rows.
VALIDATION_GRID: tuple[LayoutParams, ...] = tuple(
    LayoutParams(lane_depth=dl, num_aisles=na, lanes_per_aisle=nl)
    for dl in (2, 3, 4, 5)
    for na in (1, 2)
    for nl in (6, 8, 10, 12)
)

RESULT_COLUMNS = (
    "dl", "na", "nl", "r", "rr", "rep", "policy", "seed",
    "total_tardiness", "wall_ms_total", "wall_ms_per_decision",
)
SUMMARY_COLUMNS = (
    "dl", "na", "nl", "r", "rr", "policy", "episodes",
    "mean_total_tardiness", "min_total_tardiness", "mean_wall_ms_per_decision",
)
IMPROVEMENT_COLUMNS = ("dl", "na", "nl", "r", "rr", "policy", "improvement_pct")

TIMING_COLUMNS = ("wall_ms_total", "wall_ms_per_decision")


@dataclass(frozen=True)
class BenchmarkSpec:
    layouts: tuple[LayoutParams, ...]
    due_configs: tuple[DueDateConfig, ...]
    repetitions: int = 10
    policies: tuple[str, ...] = ("stt", "edd", "lst", "random")
    base_seed: int = 0

    def __post_init__(self):
        if self.repetitions < 1:
            raise ValueError("repetitions must be at least 1")
        if not self.layouts or not self.due_configs or not self.policies:
            raise ValueError("layouts, due_configs and policies cannot be empty")


@dataclass(frozen=True)
class ResultRow:
    dl: int
    na: int
    nl: int
    r: float
    rr: float
    rep: int
    policy: str
    seed: int
    total_tardiness: float
    wall_ms_total: float
    wall_ms_per_decision: float


@dataclass(frozen=True)
class SummaryRow:
    dl: int
    na: int
    nl: int
    r: float
    rr: float
    policy: str
    episodes: int
    mean_total_tardiness: float
    min_total_tardiness: float
    mean_wall_ms_per_decision: float


@dataclass(frozen=True)
class EpisodeResult:
    total_tardiness: float
    decisions: int
    wall_ms_total: float
    wall_ms_per_decision: float
    completions: tuple


def run_episode(policy, instance: Instance, seed: int) -> EpisodeResult:
    """Drive one full episode; decisions and their wall time are logged."""
    env = RetrievalEnv(policy.graph, instance)
    rng = np.random.default_rng(seed)
    state = env.reset(seed)
    decisions = 0
    start = time.perf_counter()
    while state.phase is not Phase.DONE:
        action = policy.decide(state, env.legal_actions(state), rng)
        state, _ = env.step(state, action)
        decisions += 1
    wall_ms = (time.perf_counter() - start) * 1000.0
    return EpisodeResult(
        total_tardiness=env.total_tardiness(state),
        decisions=decisions,
        wall_ms_total=wall_ms,
        wall_ms_per_decision=wall_ms / decisions,
        completions=state.completions,
    )


def _load_agents(policies) -> dict[str, PolicyNet]:
    """Resolve checkpoint policies up front so missing files fail early."""
    nets: dict[str, PolicyNet] = {}
    for name in policies:
        if name.startswith("ckpt:"):
            nets[name], _, _ = load_checkpoint(name[len("ckpt:"):])
        elif name not in HEURISTICS:
            raise ValueError(f"unknown policy {name!r}")
    return nets


def _bind(name: str, graph: WarehouseGraph, instance: Instance,
          nets: dict[str, PolicyNet]):
    if name in nets:
        return AgentPolicy(graph, instance, nets[name])
    return make_heuristic(name, graph, instance)


def run_benchmark(spec: BenchmarkSpec,
                  progress=None) -> tuple[list[ResultRow], list[SummaryRow]]:
    nets = _load_agents(spec.policies)
    rows: list[ResultRow] = []
    for layout in spec.layouts:
        graph = build_layout(layout)
        for cfg in spec.due_configs:
            for rep in range(spec.repetitions):
                instance_seed = mix_seed(
                    spec.base_seed, layout.lane_depth, layout.num_aisles,
                    layout.lanes_per_aisle, cfg.tightness, cfg.spread, rep,
                )
                episode_seed = mix_seed(instance_seed, "episode")
                instance = generate_instance(graph, cfg, instance_seed)
                for name in spec.policies:
                    result = run_episode(_bind(name, graph, instance, nets),
                                         instance, episode_seed)
                    rows.append(ResultRow(
                        layout.lane_depth, layout.num_aisles, layout.lanes_per_aisle,
                        cfg.tightness, cfg.spread, rep, name, instance_seed,
                        result.total_tardiness, result.wall_ms_total,
                        result.wall_ms_per_decision,
                    ))
                    if progress is not None:
                        progress(rows[-1])
    return rows, summarize(rows)


def summarize(rows: list[ResultRow]) -> list[SummaryRow]:
    groups: dict[tuple, list[ResultRow]] = {}
    for row in rows:
        groups.setdefault(
            (row.dl, row.na, row.nl, row.r, row.rr, row.policy), []
        ).append(row)
    summary = []
    for key, members in groups.items():
        tts = [m.total_tardiness for m in members]
        per_decision = [m.wall_ms_per_decision for m in members]
        summary.append(SummaryRow(
            *key, len(members), sum(tts) / len(tts), min(tts),
            sum(per_decision) / len(per_decision),
        ))
    return summary


def improvement_ratio(tt_agent: float, tt_edd: float,
                      tt_stt: float) -> float | None:
    """Percent improvement over the better of the two anchor heuristics.

    Undefined (None) when the anchor itself is zero: the heuristic already
    achieved no tardiness, so no ratio can be formed.
    """
    baseline = min(tt_edd, tt_stt)
    if baseline == 0.0:
        return None
    return (baseline - tt_agent) / baseline * 100.0


def improvement_rows(summary: list[SummaryRow]) -> list[tuple]:
    """Eq.-10 style plot data: one row per cell and non-anchor policy."""
    cells: dict[tuple, dict[str, SummaryRow]] = {}
    for row in summary:
        cells.setdefault((row.dl, row.na, row.nl, row.r, row.rr), {})[row.policy] = row
    out = []
    for key in sorted(cells):
        members = cells[key]
        edd, stt = members.get("edd"), members.get("stt")
        for name in sorted(members):
            if name in ("edd", "stt"):
                continue
            ratio = None
            if edd is not None and stt is not None:
                ratio = improvement_ratio(
                    members[name].mean_total_tardiness,
                    edd.mean_total_tardiness, stt.mean_total_tardiness,
                )
            out.append((*key, name, ratio))
    return out


# ------------------------------------------------------------- combinatorics

_LN10 = math.log(10.0)


def multinomial_log10(total: int, group_sizes) -> float:
    """log10 of total! / prod(size_i!) for an ordered interleaving count."""
    sizes = list(group_sizes)
    if sum(sizes) != total:
        raise ValueError("group sizes must partition the total")
    return (math.lgamma(total + 1)
            - sum(math.lgamma(s + 1) for s in sizes)) / _LN10


def sequence_count(layout: LayoutParams) -> tuple[float, float]:
    """log10 of the quoted sequence-count formula and of the lane oracle.

    The quoted figure divides by ((N_A*N_L)!)^D_L; the oracle is the
    plain interleaving count for N_A*N_L depth-D_L dead-end lanes whose
    in-lane retrieval order is forced.
    """
    n = layout.item_count
    lanes = layout.num_aisles * layout.lanes_per_aisle
    quoted = (math.lgamma(n + 1)
              - layout.lane_depth * math.lgamma(lanes + 1)) / _LN10
    oracle = multinomial_log10(n, [layout.lane_depth] * lanes)
    return quoted, oracle


# ------------------------------------------------------------------ reports

def _format(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_format(v) for v in row])


def emit_report(rows: list[ResultRow], out_dir) -> dict[str, Path]:
    """Write results, per-cell summary, and improvement plot data."""
    if not rows:
        raise ValueError("no rows to report")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary = summarize(rows)
    paths = {
        "results": out / "results.csv",
        "summary": out / "summary.csv",
        "improvement": out / "improvement.csv",
    }
    _write_csv(paths["results"], RESULT_COLUMNS,
               [[getattr(r, c) for c in RESULT_COLUMNS] for r in rows])
    _write_csv(paths["summary"], SUMMARY_COLUMNS,
               [[getattr(r, c) for c in SUMMARY_COLUMNS] for r in summary])
    _write_csv(paths["improvement"], IMPROVEMENT_COLUMNS, improvement_rows(summary))
    return paths


def strip_timing_columns(csv_text: str) -> str:
    """Benchmark output minus wall-clock noise, for byte comparisons."""
    lines = csv_text.strip().split("\n")
    header = lines[0].split(",")
    keep = [i for i, name in enumerate(header) if name not in TIMING_COLUMNS]
    kept_lines = []
    for line in lines:
        parts = line.split(",")
        kept_lines.append(",".join(parts[i] for i in keep))
    return "\n".join(kept_lines) + "\n"
