"""Train the scheduler on a small layout and compare it against baselines.

Runs PPO on the given layout, writes the training curve and checkpoint,
then scores the greedy policy and each dispatch heuristic on a shared set
of held-out episodes.
"""
import argparse
import csv
from pathlib import Path

import numpy as np

from multideep.bench import run_episode
from multideep.heuristics import HEURISTICS, make_heuristic
from multideep.policy_net import AgentPolicy, NetConfig, PolicyNet, ValueNet, save_checkpoint
from multideep.ppo import PPOConfig, train_scheduler
from multideep.warehouse import DueDateConfig, LayoutParams, build_layout, generate_instance


def heldout_scores(graph, due, bind, episodes: int) -> list[float]:
    scores = []
    for i in range(episodes):
        instance = generate_instance(graph, due, 10000 + i)
        policy = bind(instance)
        scores.append(run_episode(policy, instance, seed=20000 + i).total_tardiness)
    return scores


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--layout", type=int, nargs=3, default=(2, 1, 6),
                    metavar=("DEPTH", "AISLES", "LANES"))
    ap.add_argument("--tightness", type=float, default=0.125)
    ap.add_argument("--range", dest="due_range", type=float, default=0.75)
    ap.add_argument("--episodes", type=int, default=3000)
    ap.add_argument("--hidden", type=int, default=NetConfig.hidden)
    ap.add_argument("--head-init-scale", type=float,
                    default=NetConfig.head_init_scale)
    ap.add_argument("--epochs-per-batch", type=int, default=8)
    ap.add_argument("--entropy-coef", type=float, default=0.0)
    ap.add_argument("--value-targets", default="lagged",
                    choices=("frozen", "lagged"))
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--heldout-episodes", type=int, default=20)
    ap.add_argument("--out", type=Path, default=Path("runs/desk"))
    args = ap.parse_args()

    layout = LayoutParams(*args.layout)
    due = DueDateConfig(args.tightness, args.due_range)
    graph = build_layout(layout)
    net_cfg = NetConfig(hidden=args.hidden,
                        head_init_scale=args.head_init_scale)
    policy = PolicyNet(net_cfg, seed=args.seed)
    value = ValueNet(net_cfg, seed=args.seed + 1)
    ppo_cfg = PPOConfig(epochs_per_batch=args.epochs_per_batch,
                        entropy_coef=args.entropy_coef,
                        value_target_mode=args.value_targets)

    def heartbeat(point):
        if (point.episode + 1) % 100 == 0:
            print(f"episode {point.episode + 1:5d}  tt={point.total_tardiness:8.2f} "
                  f"avg20={point.running_avg_20:8.2f}", flush=True)

    result = train_scheduler(layout, due, policy, value, args.episodes,
                             ppo_cfg, seed=args.seed, on_episode=heartbeat)

    args.out.mkdir(parents=True, exist_ok=True)
    curve_path = args.out / "curve.csv"
    with open(curve_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["episode", "total_tardiness", "running_avg_20"])
        for point in result.curve:
            writer.writerow([point.episode, repr(point.total_tardiness),
                             repr(point.running_avg_20)])
    ckpt_path = args.out / "checkpoint.json"
    save_checkpoint(ckpt_path, policy, value,
                    {"episodes": args.episodes, "seed": args.seed})

    final_avg = result.curve[-1].running_avg_20
    print(f"\ntrained {args.episodes} episodes in {result.wall_seconds / 60:.1f} min; "
          f"final 20-episode average {final_avg:.2f}")
    print(f"curve -> {curve_path}\ncheckpoint -> {ckpt_path}\n")

    rows = [("agent (greedy)", heldout_scores(
        graph, due, lambda inst: AgentPolicy(graph, inst, policy),
        args.heldout_episodes))]
    for name in HEURISTICS:
        rows.append((name, heldout_scores(
            graph, due, lambda inst: make_heuristic(name, graph, inst),
            args.heldout_episodes)))
    print(f"held-out comparison ({args.heldout_episodes} shared episodes):")
    for name, scores in rows:
        print(f"  {name:15s} mean={np.mean(scores):8.2f}  min={min(scores):8.2f}  "
              f"max={max(scores):8.2f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
