"""``otfs-cs`` command line: simulate, validate, bench.

Exit codes: 0 success, 1 tolerance failure or I/O error, 2 configuration error.
The dictionary cache capacity is read from ``OTFS_CS_CACHE_SIZE``.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import re
import sys
from pathlib import Path as FsPath

import numpy as np

from otfs_cs.bench import run_bench
from otfs_cs.channel import PathSet, build_ezc, build_ezc_integer
from otfs_cs.estimators import CACHE_ENV
from otfs_cs.config import ConfigError, load_scenario
from otfs_cs.grid import GridConfig
from otfs_cs.harness import aggregate, run_sweep
from otfs_cs.oracle import oracle_ezc
from otfs_cs.rng import complex_normal, derive_seed, stream

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2
SCHEMA = "# schema=1"
TRIAL_COLUMNS = ["method", "snr_db", "trial", "nmse", "nmse_db", "n_paths",
                 "runtime_ns", "atom_evals", "cache_hit", "seed"]
AGG_COLUMNS = ["method", "snr_db", "mean_nmse", "mean_nmse_db", "mean_paths",
               "mean_runtime_ns", "trials", "mean_of_nmse_db", "max_iter_fraction"]
MAX_VALIDATE_L = 4096


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)  # shortest round-trip repr, '.' separator
    return str(v)


def _write_csv(path, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(SCHEMA + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def aggregate_path(out_path) -> FsPath:
    p = FsPath(out_path)
    return p.with_name(p.stem + "_aggregate" + (p.suffix or ".csv"))


def cmd_simulate(config_path, out_path, workers: int = 1, aggregate_flag: bool = False) -> int:
    try:
        cfg = load_scenario(config_path)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    records = run_sweep(cfg, workers=max(1, workers))
    rows = [(r.method, r.snr_db, r.trial, r.nmse, r.nmse_db, r.paths_estimated,
             r.runtime_ns, r.atom_evals, r.cache_hit, r.trial_seed) for r in records]
    try:
        _write_csv(out_path, TRIAL_COLUMNS, rows)
        if aggregate_flag:
            agg = aggregate(records, cfg.iteration_cap)
            _write_csv(aggregate_path(out_path), AGG_COLUMNS, [
                (a.method, a.snr_db, a.mean_nmse, a.mean_nmse_db, a.mean_paths,
                 a.mean_runtime_ns, a.trials, a.mean_of_nmse_db, a.max_iter_fraction)
                for a in agg])
    except OSError as exc:
        print(f"cannot write output: {exc}", file=sys.stderr)
        return EXIT_FAIL
    print(f"wrote {len(rows)} records to {out_path}")
    return EXIT_OK


def validation_pathset(grid: GridConfig, P: int, rng, integer: bool = False) -> PathSet:
    """Random unit-energy paths; fractional positions unless ``integer``."""
    if P == 0:
        return PathSet(grid)
    gains = complex_normal(rng, P, 1.0 / P)
    if integer:
        tb = rng.integers(0, grid.D, P).astype(float)
        nb = rng.integers(0, grid.V, P).astype(float)
    else:
        tb = rng.uniform(0.0, grid.D, P)
        nb = rng.uniform(0.0, grid.V, P)
    return PathSet.from_normalized(grid, gains, tb, nb)


def _rel(A, B) -> float:
    nb = np.linalg.norm(B)
    if nb == 0:
        return float(np.linalg.norm(A))
    return float(np.linalg.norm(A - B) / nb)


def cmd_validate(D: int, V: int, P: int, trials: int, seed: int, tolerance: float,
                 integer: bool = False) -> int:
    if D < 1 or V < 1 or D * V > MAX_VALIDATE_L or P < 0 or trials < 1:
        print(f"config error: need D, V >= 1, D*V <= {MAX_VALIDATE_L}, P >= 0, trials >= 1",
              file=sys.stderr)
        return EXIT_CONFIG
    grid = GridConfig(D, V)
    worst, worst_t, worst_paths = -1.0, None, None
    for t in range(trials):
        rng = stream(derive_seed(seed, "validate", D, V, P, int(integer), t))
        paths = validation_pathset(grid, P, rng, integer)
        H = build_ezc(paths)
        H_ref = oracle_ezc(paths, grid)
        err = _rel(H, H_ref)
        if integer:
            H_int = build_ezc_integer(paths)
            err = max(err, _rel(H_int, H), _rel(H_int, H_ref))
        if err > worst:
            worst, worst_t, worst_paths = err, t, paths
    print(f"validate D={D} V={V} P={P} trials={trials}: max relative error {worst:.3e}")
    if worst <= tolerance:
        return EXIT_OK
    print(f"tolerance {tolerance:g} exceeded in trial {worst_t}; paths (gain, delay/Ts, doppler/df):")
    for a, tb, nb in zip(worst_paths.gains, worst_paths.delays, worst_paths.dopplers):
        print(f"  {a.real:+.6f}{a.imag:+.6f}j  {tb:.6f}  {nb:.6f}")
    return EXIT_FAIL


def cmd_bench(config_path, out_path) -> int:
    try:
        cfg = load_scenario(config_path)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    report = run_bench(cfg)
    try:
        with open(out_path, "w") as fh:
            json.dump(report, fh, indent=2, allow_nan=True)
            fh.write("\n")
    except OSError as exc:
        print(f"cannot write output: {exc}", file=sys.stderr)
        return EXIT_FAIL
    for m in report["methods"]:
        print(f"{m['method']:>12}: cold {m['cold_iter_ns'] / 1e6:9.3f} ms/iter  "
              f"warm {m['warm_iter_ns'] / 1e6:9.3f} ms/iter  "
              f"bank {m['bank_build_ns'] / 1e6:9.3f} ms")
    for k, v in report["ratios"].items():
        print(f"{k}: {v:.3f}")
    return EXIT_OK


def _dims(text: str):
    m = re.fullmatch(r"\s*(\d+)\s*[xX]\s*(\d+)\s*", text)
    if not m:
        raise argparse.ArgumentTypeError(f"expected DxV, e.g. 16x16, got {text!r}")
    return int(m.group(1)), int(m.group(2))


def _finite(text: str) -> float:
    v = float(text)
    if not math.isfinite(v) or v < 0:
        raise argparse.ArgumentTypeError("tolerance must be a finite non-negative number")
    return v


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="otfs-cs", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    s = sub.add_parser("simulate", help="Monte Carlo SNR sweep to CSV")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--aggregate", action="store_true",
                   help="also write <out>_aggregate.csv with per-(method, snr) means")
    v = sub.add_parser("validate", help="closed-form channel against the oracle")
    v.add_argument("--dims", type=_dims, required=True, metavar="DxV")
    v.add_argument("--paths", type=int, required=True)
    v.add_argument("--trials", type=int, default=20)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--tol", type=_finite, default=1e-9)
    v.add_argument("--integer", action="store_true",
                   help="integer paths; also check the Dirichlet-probe builder")
    b = sub.add_parser("bench", help="cold/warm runtime study to JSON")
    b.add_argument("--config", required=True)
    b.add_argument("--out", required=True)
    return p


def _check_cache_env() -> str | None:
    raw = os.environ.get(CACHE_ENV)
    if raw is None:
        return None
    try:
        if int(raw) >= 0:
            return None
    except ValueError:
        pass
    return f"{CACHE_ENV} must be a non-negative integer, got {raw!r}"


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    problem = _check_cache_env()
    if problem:
        print(f"config error: {problem}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "simulate":
        return cmd_simulate(args.config, args.out, args.workers, args.aggregate)
    if args.command == "validate":
        D, V = args.dims
        return cmd_validate(D, V, args.paths, args.trials, args.seed, args.tol, args.integer)
    return cmd_bench(args.config, args.out)


if __name__ == "__main__":
    sys.exit(main())
