"""Tabulate lambda_Phi for each catalog entry and the finite universal mixture.

    python3 scripts/lambda_tables.py [--steps 16] [--depth 3]
"""
import argparse

from semiflow.bridge import lambda_table, mixture_lambda
from semiflow.requirements import DEFAULT_FUNCTIONALS, build_catalog
from semiflow.strings import from_index


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--steps", type=int, default=16)
    ap.add_argument("--depth", type=int, default=3)
    args = ap.parse_args()
    catalog = build_catalog(DEFAULT_FUNCTIONALS)
    nodes = [from_index(n, i) for n in range(args.depth + 1) for i in range(1 << n)]
    tables = [lambda_table(catalog, j, args.steps, args.depth) for j in range(len(catalog))]
    print("sigma    " + " ".join(f"{name[:12]:>13}" for name in catalog.names) + "       mixture")
    for sigma in nodes:
        row = [t[len(sigma)][int(sigma, 2) if sigma else 0] for t in tables]
        mix = mixture_lambda(catalog, sigma, args.steps, entries=range(len(catalog) - 1))
        print(f"{sigma or 'e':<8} " + " ".join(f"{float(v):>13.6f}" for v in row) + f" {float(mix):>13.6f}")


if __name__ == "__main__":
    main()
