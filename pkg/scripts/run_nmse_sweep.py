"""NMSE and path-count sweep over the reference scenario, printed as a table.

    python3 scripts/run_nmse_sweep.py [config] [--trials N] [--workers W] [--csv out.csv]
"""

import argparse
import dataclasses
import math
import time

from otfs_cs.config import load_scenario
from otfs_cs.harness import aggregate, run_sweep


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("config", nargs="?", default="configs/reference_scenario.json")
    ap.add_argument("--trials", type=int)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--csv")
    args = ap.parse_args()
    cfg = load_scenario(args.config)
    if args.trials:
        cfg = dataclasses.replace(cfg, trials=args.trials)
    t0 = time.time()
    records = run_sweep(cfg, workers=args.workers)
    rows = aggregate(records, cfg.iteration_cap)
    print(f"{len(records)} trials in {time.time() - t0:.1f} s")
    print(f"{'method':>10} {'snr':>5} {'NMSE dB':>8} {'mean dB':>8} {'|P|':>6} {'at cap':>7} {'ms':>7}")
    for r in rows:
        snr = "inf" if math.isinf(r.snr_db) else f"{r.snr_db:g}"
        print(f"{r.method:>10} {snr:>5} {r.mean_nmse_db:8.2f} {r.mean_of_nmse_db:8.2f} "
              f"{r.mean_paths:6.1f} {r.max_iter_fraction:7.2f} {r.mean_runtime_ns / 1e6:7.1f}")
    if args.csv:
        from otfs_cs.cli import TRIAL_COLUMNS, _write_csv
        _write_csv(args.csv, TRIAL_COLUMNS, [
            (r.method, r.snr_db, r.trial, r.nmse, r.nmse_db, r.paths_estimated,
             r.runtime_ns, r.atom_evals, r.cache_hit, r.trial_seed) for r in records])


if __name__ == "__main__":
    main()
