"""Cold/warm dictionary-cache runtime study.

    python3 scripts/bench_runtime.py [config] [--dense]
"""

import argparse
import dataclasses

from otfs_cs.bench import run_bench
from otfs_cs.config import load_scenario


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("config", nargs="?", default="configs/bench.json")
    ap.add_argument("--dense", action="store_true", help="materialise every atom matrix")
    args = ap.parse_args()
    cfg = load_scenario(args.config)
    if args.dense:
        cfg = dataclasses.replace(cfg, bank_method="dense")
    rep = run_bench(cfg)
    print(f"{'method':>10} {'iters':>6} {'cold ms/it':>11} {'warm ms/it':>11} {'bank ms':>9} "
          f"{'cold ops/it':>12} {'warm ops/it':>12}")
    for m in rep["methods"]:
        print(f"{m['method']:>10} {m['mean_iterations']:6.1f} {m['cold_iter_ns'] / 1e6:11.3f} "
              f"{m['warm_iter_ns'] / 1e6:11.3f} {m['bank_build_ns'] / 1e6:9.2f} "
              f"{m['cold_iter_ops']:12.3e} {m['warm_iter_ops']:12.3e}")
    for k, v in rep["ratios"].items():
        print(f"{k:>34}: {v:8.3f}")


if __name__ == "__main__":
    main()
