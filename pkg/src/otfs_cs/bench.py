"""Runtime study: cold versus warm dictionary cache, per-iteration costs."""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from otfs_cs.estimators import AtomCache
from otfs_cs.harness import MethodSpec, ScenarioConfig, draw_channel, run_trial


@dataclass
class MethodBench:
    method: str
    algorithm: str
    K_tau: int
    K_nu: int
    N_ref: int
    runs: int
    mean_iterations: float
    cold_iter_ns: float  # mean of (bank build + estimator) / iterations, empty cache
    warm_iter_ns: float  # same with the bank served from cache
    bank_build_ns: float
    cache_hit_rate: float
    bank_macs: int  # per run, dense cost model
    corr_macs_per_iter: float
    refine_atom_evals_per_iter: float
    cold_iter_ops: float  # dense-model products per iteration
    warm_iter_ops: float


def _per_iter(total, iters):
    return total / max(iters, 1)


def bench_method(cfg: ScenarioConfig, method: MethodSpec) -> MethodBench:
    L = cfg.grid.L
    cold_ns, warm_ns, build_ns, iters = [], [], [], []
    cold_ops, warm_ops, corr, refine = [], [], [], []
    hits = runs = 0
    bank_macs = 0
    for trial in range(cfg.trials):
        channel = draw_channel(cfg, trial)
        for snr in cfg.snr_db_list:
            cache = AtomCache(2)
            cold = run_trial(cfg, method, snr, trial, cache, channel)
            warm = run_trial(cfg, method, snr, trial, cache, channel)
            hits += int(cold.cache_hit) + int(warm.cache_hit)
            runs += 2
            n = cold.paths_estimated
            iters.append(n)
            cold_ns.append(_per_iter(cold.runtime_ns, n))
            warm_ns.append(_per_iter(warm.runtime_ns, n))
            build_ns.append(cold.bank_build_ns)
            bank_macs = cold.bank_macs
            atoms_ops = (cold.atom_evals - cold.bank_macs // L**2) * L**2
            step_ops = cold.corr_macs + atoms_ops
            cold_ops.append(_per_iter(cold.bank_macs + step_ops, n))
            warm_ops.append(_per_iter(step_ops, n))
            corr.append(_per_iter(cold.corr_macs, n))
            refine.append(_per_iter(cold.refine_atom_evals, n))
    return MethodBench(
        method=method.name, algorithm=method.algorithm, K_tau=method.K_tau,
        K_nu=method.K_nu, N_ref=method.N_ref, runs=runs,
        mean_iterations=float(np.mean(iters)),
        cold_iter_ns=float(np.mean(cold_ns)), warm_iter_ns=float(np.mean(warm_ns)),
        bank_build_ns=float(np.mean(build_ns)), cache_hit_rate=hits / runs,
        bank_macs=int(bank_macs), corr_macs_per_iter=float(np.mean(corr)),
        refine_atom_evals_per_iter=float(np.mean(refine)),
        cold_iter_ops=float(np.mean(cold_ops)), warm_iter_ops=float(np.mean(warm_ops)),
    )


def _find(results, D, V, algorithm, kappa=None, n_ref=None):
    for r in results:
        if r.algorithm != algorithm:
            continue
        if kappa is not None and (r.K_tau, r.K_nu) != (kappa * D, kappa * V):
            continue
        if n_ref is not None and r.N_ref != n_ref:
            continue
        return r
    return None


def cost_ratios(cfg: ScenarioConfig, results) -> dict:
    """Ratios behind the runtime comparison, for whichever methods are present."""
    D, V = cfg.D, cfg.V
    out = {}
    k1, k4 = _find(results, D, V, "omp", 1), _find(results, D, V, "omp", 4)
    if k1 and k4:
        out["phi_build_wall_k4_over_k1"] = k4.bank_build_ns / k1.bank_build_ns
        out["phi_build_ops_k4_over_k1"] = k4.bank_macs / k1.bank_macs
    n2 = _find(results, D, V, "ompbr", 1, 2)
    n10 = _find(results, D, V, "ompbr", 1, 10)
    if n2 and n10:
        out["ompbr_iter_wall_n10_over_n2"] = n10.cold_iter_ns / n2.cold_iter_ns
        out["ompbr_iter_ops_n10_over_n2"] = n10.cold_iter_ops / n2.cold_iter_ops
    if k1:
        out["omp_k1_warm_speedup_wall"] = k1.cold_iter_ns / k1.warm_iter_ns
        out["omp_k1_warm_speedup_ops"] = k1.cold_iter_ops / k1.warm_iter_ops
    if k4:
        out["omp_k4_warm_speedup_wall"] = k4.cold_iter_ns / k4.warm_iter_ns
        out["omp_k4_warm_speedup_ops"] = k4.cold_iter_ops / k4.warm_iter_ops
    if k4 and n10:
        out["omp_k4_over_ompbr_n10_iter_wall"] = k4.cold_iter_ns / n10.cold_iter_ns
    return out


def run_bench(cfg: ScenarioConfig) -> dict:
    results = [bench_method(cfg, m) for m in cfg.methods]
    return {
        "grid": {"D": cfg.D, "V": cfg.V},
        "snr_db": list(cfg.snr_db_list),
        "trials": cfg.trials,
        "bank_method": cfg.bank_method,
        "methods": [asdict(r) for r in results],
        "ratios": cost_ratios(cfg, results),
    }
