"""Run the dispatch-policy benchmark over the full validation grid.

Evaluates the requested policies on every grid layout under each due-date
setting, with repeated episodes per cell, and writes results/summary/
improvement CSVs. A trained agent joins the comparison via ckpt:<path>.
"""
import argparse
import time
from pathlib import Path

from multideep.bench import VALIDATION_GRID, BenchmarkSpec, emit_report, run_benchmark
from multideep.warehouse import DueDateConfig


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--tightness", type=float, nargs="+", default=[0.125, 0.25])
    ap.add_argument("--range", dest="due_range", type=float, nargs="+",
                    default=[0.75, 1.0])
    ap.add_argument("--repetitions", type=int, default=10)
    ap.add_argument("--policies", nargs="+",
                    default=["stt", "edd", "lst", "random"],
                    help="heuristic names and/or ckpt:<path> entries")
    ap.add_argument("--max-items", type=int, default=None,
                    help="skip layouts with more items than this")
    ap.add_argument("--base-seed", type=int, default=0)
    ap.add_argument("--out", type=Path, default=Path("runs/benchmark"))
    args = ap.parse_args()

    layouts = tuple(
        layout for layout in VALIDATION_GRID
        if args.max_items is None or layout.item_count <= args.max_items
    )
    spec = BenchmarkSpec(
        layouts=layouts,
        due_configs=tuple(DueDateConfig(r, rr)
                          for r in args.tightness for rr in args.due_range),
        repetitions=args.repetitions,
        policies=tuple(args.policies),
        base_seed=args.base_seed,
    )
    cells = len(spec.layouts) * len(spec.due_configs)
    print(f"{len(spec.layouts)} layouts x {len(spec.due_configs)} due settings "
          f"x {spec.repetitions} repetitions x {len(spec.policies)} policies")

    start = time.perf_counter()
    done = [0]

    def progress(row):
        done[0] += 1
        if done[0] % 200 == 0:
            print(f"  {done[0]} episodes, {time.perf_counter() - start:.0f}s",
                  flush=True)

    rows, _ = run_benchmark(spec, progress=progress)
    paths = emit_report(rows, args.out)
    print(f"finished {len(rows)} episodes over {cells} cells "
          f"in {(time.perf_counter() - start) / 60:.1f} min")
    for kind, path in paths.items():
        print(f"{kind} -> {path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
