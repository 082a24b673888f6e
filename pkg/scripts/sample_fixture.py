"""Sample the interval functional of an ALWAYS run and compare cylinder frequencies with P.

    python3 scripts/sample_fixture.py [--depth 12] [--count 100000] [--seed 12]
"""
import argparse

from semiflow.bridge import allocate_intervals, cylinder_counts, sample_many
from semiflow.engine import RunConfig, run
from semiflow.strings import from_index


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--depth", type=int, default=12)
    ap.add_argument("--count", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=12)
    ap.add_argument("--show", type=int, default=4, help="deepest cylinder listed")
    args = ap.parse_args()

    table = run(RunConfig(mode="always", depth=args.depth)).table
    samples = sample_many(allocate_intervals(table), args.seed, args.count, 64)
    counts = cylinder_counts((out for _, out, _ in samples), args.show)
    print(f"{'sigma':<8} {'P':>9} {'freq':>9} {'z':>6}")
    for n in range(args.show + 1):
        for i in range(1 << n):
            sigma = from_index(n, i)
            p = float(table.P[n][i])
            freq = counts.get(sigma, 0) / args.count
            se = (p * (1 - p) / args.count) ** 0.5
            z = (freq - p) / se if se else 0.0
            print(f"{sigma or 'e':<8} {p:>9.5f} {freq:>9.5f} {z:>6.2f}")
    exhausted = sum(st != "complete-at-depth" for _, _, st in samples)
    print(f"budget-exhausted samples: {exhausted}")


if __name__ == "__main__":
    main()
