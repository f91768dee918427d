"""Tabulate the number of feasible retrieval sequences per grid layout.

Counts grow state-space style with depth and lane count, which is the
reason exact search is hopeless beyond toy layouts and a learned or
rule-based policy is needed at all.
"""
import argparse

from multideep.bench import VALIDATION_GRID, sequence_count


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sort", action="store_true",
                    help="order rows by count instead of grid order")
    args = ap.parse_args()

    rows = []
    for layout in VALIDATION_GRID:
        quoted, oracle = sequence_count(layout)
        rows.append((layout, quoted, oracle))
    if args.sort:
        rows.sort(key=lambda r: r[1])

    print(f"{'depth':>5} {'aisles':>6} {'lanes':>5} {'items':>5} "
          f"{'log10(count)':>12} {'log10(oracle)':>13}")
    for layout, quoted, oracle in rows:
        print(f"{layout.lane_depth:5d} {layout.num_aisles:6d} "
              f"{layout.lanes_per_aisle:5d} {layout.item_count:5d} "
              f"{quoted:12.2f} {oracle:13.2f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
