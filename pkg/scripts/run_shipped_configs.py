"""Build and verify every config in configs/, printing one summary row per run.

    python3 scripts/run_shipped_configs.py [--out out]
"""
import argparse
import json
import time
from pathlib import Path

from semiflow import harness, io
from semiflow.bridge import pbar_estimate, retained_lower_bound
from semiflow.engine import RunConfig, run

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="out")
    args = ap.parse_args()
    print(f"{'config':<20} {'edges':>6} {'S_N':>9} {'Pbar(e)<=':>10} {'secs':>6}  verdict")
    for path in sorted(CONFIGS.glob("*.json")):
        config = RunConfig.from_dict(json.loads(path.read_text()))
        t0 = time.perf_counter()
        result = run(config)
        seconds = time.perf_counter() - t0
        ok, reports = harness.verify(result.state, config, result.table)
        report = dict(result.report, checks={r.name: r.verdict for r in reports})
        report["retained_lower_bound"] = str(retained_lower_bound(result.table))
        io.write_build(Path(args.out) / path.stem, result.state, config, result.table, report)
        upper, _ = pbar_estimate(result.table, "")
        failed = [r.name for r in reports if not r.ok]
        print(f"{path.stem:<20} {len(result.state.edges):>6} {float(result.table.S[-1]):>9.5f} "
              f"{float(upper):>10.5f} {seconds:>6.2f}  {'pass' if ok else 'FAIL ' + ','.join(failed)}")


if __name__ == "__main__":
    main()
