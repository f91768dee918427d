"""Command line front end for instances, episodes, training, and benchmarks."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .bench import BenchmarkSpec, emit_report, run_benchmark, run_episode, sequence_count
from .heuristics import HEURISTICS, make_heuristic
from .policy_net import (
    AgentPolicy,
    NetConfig,
    PolicyNet,
    ValueNet,
    load_checkpoint,
    save_checkpoint,
)
from .ppo import PPOConfig, train_scheduler
from .warehouse import (
    DueDateConfig,
    LayoutParams,
    build_layout,
    compute_mp,
    generate_instance,
    load_instance,
    save_instance,
)

CURVE_HEADER = "episode,total_tardiness,running_avg_20"


def parse_layout(text: str) -> LayoutParams:
    try:
        dl, na, nl = (int(part) for part in text.split(","))
        return LayoutParams(lane_depth=dl, num_aisles=na, lanes_per_aisle=nl)
    except ValueError as err:
        raise argparse.ArgumentTypeError(
            f"layout must be 'depth,aisles,lanes', got {text!r} ({err})")


def parse_due_config(text: str) -> DueDateConfig:
    try:
        r, rr = (float(part) for part in text.split(","))
        return DueDateConfig(tightness=r, spread=rr)
    except ValueError as err:
        raise argparse.ArgumentTypeError(
            f"config must be 'tightness,spread', got {text!r} ({err})")


def _emit(doc: dict) -> None:
    print(json.dumps(doc, sort_keys=True))


def cmd_gen(args) -> int:
    graph = build_layout(args.layout)
    instance = generate_instance(graph, args.config, args.seed)
    save_instance(instance, args.out)
    _emit({"path": str(args.out), "mp": instance.mp,
           "items": instance.item_count})
    return 0


def cmd_mp(args) -> int:
    print(repr(compute_mp(build_layout(args.layout))))
    return 0


def cmd_count(args) -> int:
    quoted, oracle = sequence_count(args.layout)
    _emit({"quoted_log10": quoted, "oracle_log10": oracle})
    return 0


def cmd_solve(args) -> int:
    instance = load_instance(args.instance)
    graph = build_layout(instance.layout)
    if args.policy.startswith("ckpt:"):
        net, _, _ = load_checkpoint(args.policy[len("ckpt:"):])
        policy = AgentPolicy(graph, instance, net)
    elif args.policy in HEURISTICS:
        policy = make_heuristic(args.policy, graph, instance)
    else:
        raise ValueError(f"unknown policy {args.policy!r}")
    result = run_episode(policy, instance, args.seed)
    _emit({
        "policy": args.policy,
        "total_tardiness": result.total_tardiness,
        "decisions": result.decisions,
        "wall_ms_total": result.wall_ms_total,
        "wall_ms_per_decision": result.wall_ms_per_decision,
    })
    return 0


def cmd_train(args) -> int:
    net_config = NetConfig(hidden=args.hidden, gnn_layers=args.gnn_layers,
                           attention_blocks=args.attention_blocks,
                           head_init_scale=args.head_init_scale)
    ppo_config = PPOConfig(
        lr=args.lr, batch_transitions=args.batch,
        epochs_per_batch=args.epochs_per_batch,
        entropy_coef=args.entropy_coef,
        value_target_mode=args.value_target_mode,
    )
    def heartbeat(point):
        if args.log_every and (point.episode + 1) % args.log_every == 0:
            print(f"episode {point.episode + 1}/{args.episodes} "
                  f"running_avg_20 {point.running_avg_20:.3f}", file=sys.stderr)

    result = train_scheduler(
        args.layout, args.config,
        PolicyNet(net_config, seed=args.seed),
        ValueNet(net_config, seed=args.seed + 1),
        episodes=args.episodes, config=ppo_config, seed=args.seed,
        on_episode=heartbeat,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    curve_path = out / "curve.csv"
    with open(curve_path, "w", encoding="utf-8") as fh:
        fh.write(CURVE_HEADER + "\n")
        for point in result.curve:
            fh.write(f"{point.episode},{point.total_tardiness!r},"
                     f"{point.running_avg_20!r}\n")
    ckpt_path = out / "checkpoint.json"
    save_checkpoint(ckpt_path, result.policy, result.value, meta={
        "episodes": args.episodes, "seed": args.seed,
        "layout": [args.layout.lane_depth, args.layout.num_aisles,
                   args.layout.lanes_per_aisle],
        "config": [args.config.tightness, args.config.spread],
    })
    _emit({
        "curve": str(curve_path),
        "checkpoint": str(ckpt_path),
        "episodes": args.episodes,
        "final_running_avg_20": result.curve[-1].running_avg_20,
        "wall_seconds": result.wall_seconds,
    })
    return 0


def _spec_from_json(path: str | Path) -> BenchmarkSpec:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    try:
        return BenchmarkSpec(
            layouts=tuple(LayoutParams(*map(int, row)) for row in doc["layouts"]),
            due_configs=tuple(DueDateConfig(*map(float, row))
                              for row in doc["due_configs"]),
            repetitions=int(doc.get("repetitions", 10)),
            policies=tuple(doc.get("policies", ("stt", "edd", "lst", "random"))),
            base_seed=int(doc.get("base_seed", 0)),
        )
    except (KeyError, TypeError) as err:
        raise ValueError(f"{path}: malformed benchmark spec: {err!r}") from err


def cmd_bench(args) -> int:
    spec = _spec_from_json(args.spec)
    total = (len(spec.layouts) * len(spec.due_configs) * spec.repetitions
             * len(spec.policies))
    done = 0
    def progress(row):
        nonlocal done
        done += 1
        if args.log_every and done % args.log_every == 0:
            print(f"{done}/{total} rows", file=sys.stderr)

    rows, _ = run_benchmark(spec, progress=progress)
    paths = emit_report(rows, args.out)
    _emit({name: str(path) for name, path in paths.items()})
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="multideep",
        description="Multi-deep warehouse retrieval: instances, episodes, "
                    "training, and benchmark reports.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate an instance file")
    gen.add_argument("--layout", type=parse_layout, required=True,
                     metavar="DL,NA,NL")
    gen.add_argument("--config", type=parse_due_config, required=True,
                     metavar="R,RR")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True)
    gen.set_defaults(fn=cmd_gen)

    mp = sub.add_parser("mp", help="print the makespan reference for a layout")
    mp.add_argument("--layout", type=parse_layout, required=True,
                    metavar="DL,NA,NL")
    mp.set_defaults(fn=cmd_mp)

    count = sub.add_parser("count", help="log10 retrieval-sequence counts")
    count.add_argument("--layout", type=parse_layout, required=True,
                       metavar="DL,NA,NL")
    count.set_defaults(fn=cmd_count)

    solve = sub.add_parser("solve", help="run one episode on a saved instance")
    solve.add_argument("--policy", required=True,
                       help="stt|edd|lst|random|ckpt:<path>")
    solve.add_argument("--instance", required=True)
    solve.add_argument("--seed", type=int, required=True)
    solve.set_defaults(fn=cmd_solve)

    train = sub.add_parser("train", help="train the scheduler and save a "
                                         "checkpoint plus learning curve")
    train.add_argument("--layout", type=parse_layout, required=True,
                       metavar="DL,NA,NL")
    train.add_argument("--config", type=parse_due_config, required=True,
                       metavar="R,RR")
    train.add_argument("--episodes", type=int, required=True)
    train.add_argument("--out", required=True)
    train.add_argument("--seed", type=int, default=0)
    train.add_argument("--hidden", type=int, default=NetConfig.hidden)
    train.add_argument("--gnn-layers", type=int, default=NetConfig.gnn_layers)
    train.add_argument("--attention-blocks", type=int,
                       default=NetConfig.attention_blocks)
    train.add_argument("--head-init-scale", type=float,
                       default=NetConfig.head_init_scale)
    train.add_argument("--lr", type=float, default=PPOConfig.lr)
    train.add_argument("--batch", type=int, default=PPOConfig.batch_transitions)
    train.add_argument("--epochs-per-batch", type=int,
                       default=PPOConfig.epochs_per_batch)
    train.add_argument("--entropy-coef", type=float,
                       default=PPOConfig.entropy_coef)
    train.add_argument("--value-target-mode", default=PPOConfig.value_target_mode,
                       choices=("frozen", "lagged"))
    train.add_argument("--log-every", type=int, default=0,
                       help="progress line to stderr every N episodes")
    train.set_defaults(fn=cmd_train)

    bench = sub.add_parser("bench", help="run a benchmark spec and emit reports")
    bench.add_argument("--spec", required=True, help="JSON benchmark spec")
    bench.add_argument("--out", required=True)
    bench.add_argument("--log-every", type=int, default=0,
                       help="progress line to stderr every N rows")
    bench.set_defaults(fn=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (OSError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
