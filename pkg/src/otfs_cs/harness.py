"""Monte Carlo NMSE / path-count / runtime experiments."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict

import numpy as np

from otfs_cs.channel import (
    NoiseSpec, apply_channel, atom_matrices, build_ezc, random_pathset, random_pilot,
)
from otfs_cs.estimators import (
    AtomCache, DictionaryConfig, SparseEstimate, StoppingRule, build_atom_bank, omp, ompbr,
)
from otfs_cs.grid import GridConfig
from otfs_cs.rng import derive_seed, stream

NOISELESS_FLOOR = 1e-12
ALGORITHMS = ("omp", "ompbr")


@dataclass(frozen=True)
class MethodSpec:
    name: str
    algorithm: str
    K_tau: int
    K_nu: int
    N_ref: int = 0

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if self.algorithm == "omp" and self.N_ref:
            raise ValueError("omp takes no refinement; use algorithm 'ompbr'")
        if self.N_ref < 0:
            raise ValueError(f"N_ref must be >= 0, got {self.N_ref}")
        DictionaryConfig(self.K_tau, self.K_nu)

    @property
    def dictionary(self) -> DictionaryConfig:
        return DictionaryConfig(self.K_tau, self.K_nu)


@dataclass(frozen=True)
class ScenarioConfig:
    D: int = 16
    V: int = 16
    P: int = 3
    snr_db_list: tuple = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0)
    trials: int = 100
    methods: tuple = ()
    master_seed: int = 0
    max_iter: int | None = None  # defaults to L // 4
    Ts: float = 1.0
    bank_method: str = "fft"

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        object.__setattr__(self, "snr_db_list", tuple(float(s) for s in self.snr_db_list))
        object.__setattr__(self, "methods", tuple(self.methods))
        GridConfig(self.D, self.V, self.Ts)

    @property
    def grid(self) -> GridConfig:
        return GridConfig(self.D, self.V, self.Ts)

    @property
    def iteration_cap(self) -> int:
        return self.max_iter if self.max_iter is not None else max(1, self.grid.L // 4)

    def method(self, name: str) -> MethodSpec:
        for m in self.methods:
            if m.name == name:
                return m
        raise KeyError(name)


@dataclass
class TrialRecord:
    method: str
    snr_db: float
    trial: int
    nmse: float
    paths_estimated: int
    runtime_ns: int
    atom_evals: int
    cache_hit: bool
    trial_seed: int
    bank_build_ns: int = 0
    bank_macs: int = 0
    corr_macs: int = 0
    refine_atom_evals: int = 0
    degenerate: bool = False

    @property
    def nmse_db(self) -> float:
        return 10 * math.log10(self.nmse) if self.nmse > 0 else -math.inf

    def numeric_key(self):
        """Fields that must not depend on scheduling, cache state or the clock."""
        return (self.method, self.snr_db, self.trial, self.nmse, self.paths_estimated,
                self.trial_seed, self.corr_macs, self.refine_atom_evals, self.degenerate)


def nmse(H_true, estimate: SparseEstimate, grid: GridConfig, chunk: int = 16) -> float:
    """``||H - sum_j a_j U(tau_j, nu_j)||^2 / ||H||^2`` with the estimate materialised."""
    H_true = np.asarray(H_true)
    ref = float(np.linalg.norm(H_true) ** 2)
    if ref == 0:
        raise ValueError("NMSE undefined for a zero channel")
    gains, tbs, nbs = estimate.as_arrays(grid)
    H_hat = np.zeros_like(H_true, dtype=complex)
    for s in range(0, len(gains), chunk):
        sl = slice(s, s + chunk)
        H_hat += np.tensordot(gains[sl], atom_matrices(tbs[sl], nbs[sl], grid), axes=1)
    return float(np.linalg.norm(H_true - H_hat) ** 2 / ref)


def channel_seed(cfg: ScenarioConfig, trial_index: int) -> int:
    return derive_seed(cfg.master_seed, "channel", trial_index)


def trial_seed(cfg: ScenarioConfig, method: MethodSpec, snr_db: float, trial_index: int) -> int:
    return derive_seed(cfg.master_seed, method.name, float(snr_db), trial_index)


def draw_channel(cfg: ScenarioConfig, trial_index: int):
    """Path set and pilot of a trial; shared by every method and SNR."""
    rng = stream(channel_seed(cfg, trial_index))
    paths = random_pathset(cfg.P, cfg.grid, rng)
    pilot = random_pilot(cfg.grid, rng)
    return paths, pilot


def run_estimator(method: MethodSpec, y, pilot, grid: GridConfig, stop: StoppingRule,
                  cache: AtomCache | None, bank_method: str = "fft") -> SparseEstimate:
    if method.algorithm == "omp":
        bank, build = build_atom_bank(pilot, method.dictionary, grid, cache, method=bank_method)
        return omp(y, bank, stop, build)
    return ompbr(y, pilot, grid, method.dictionary, method.N_ref, stop, cache, bank_method)


def run_trial(cfg: ScenarioConfig, method: MethodSpec, snr_db: float, trial_index: int,
              cache: AtomCache | None = None, channel=None) -> TrialRecord:
    """One channel draw, one noise draw, one estimate.

    Noise variance is set from the realised received energy,
    ``sigma2 = ||Hx||^2 / (L * 10^(snr/10))``, and the estimator stops at
    ``xi = L*sigma2``.  ``snr_db = inf`` is noiseless and stops at
    ``1e-12 * ||y||^2`` instead.
    """
    grid = cfg.grid
    paths, pilot = channel if channel is not None else draw_channel(cfg, trial_index)
    H = build_ezc(paths)
    clean = H @ pilot
    seed = trial_seed(cfg, method, snr_db, trial_index)
    if math.isinf(snr_db) and snr_db > 0:
        sigma2 = 0.0
        y = clean
        stop = StoppingRule(NOISELESS_FLOOR * float(np.vdot(y, y).real), cfg.iteration_cap)
    else:
        sigma2 = float(np.vdot(clean, clean).real) / (grid.L * 10 ** (snr_db / 10))
        y = apply_channel(H, pilot, NoiseSpec(sigma2), stream(seed))
        stop = StoppingRule.from_noise(sigma2, grid.L, cfg.iteration_cap)
    est = run_estimator(method, y, pilot, grid, stop, cache, cfg.bank_method)
    c = est.counters
    return TrialRecord(
        method=method.name, snr_db=float(snr_db), trial=trial_index,
        nmse=nmse(H, est, grid), paths_estimated=est.iterations,
        runtime_ns=est.runtime_ns, atom_evals=c.atom_evals, cache_hit=c.cache_hit,
        trial_seed=seed, bank_build_ns=c.bank_build_ns, bank_macs=c.bank_macs,
        corr_macs=c.corr_macs, refine_atom_evals=c.refine_atom_evals,
        degenerate=est.degenerate,
    )


def _run_trial_group(args) -> list[TrialRecord]:
    cfg, trial_index = args
    # one fresh cache per trial keeps cache_hit independent of the schedule;
    # capacity comes from the environment
    cache = AtomCache()
    channel = draw_channel(cfg, trial_index)
    return [
        run_trial(cfg, m, snr, trial_index, cache, channel)
        for m in cfg.methods
        for snr in cfg.snr_db_list
    ]


def sort_records(cfg: ScenarioConfig, records):
    m_order = {m.name: i for i, m in enumerate(cfg.methods)}
    s_order = {s: i for i, s in enumerate(cfg.snr_db_list)}
    return sorted(records, key=lambda r: (m_order[r.method], s_order[r.snr_db], r.trial))


def run_sweep(cfg: ScenarioConfig, workers: int = 1, progress=None) -> list[TrialRecord]:
    """All ``methods x snr_db_list x trials`` records, sorted by (method, snr, trial)."""
    tasks = [(cfg, t) for t in range(cfg.trials)]
    records: list[TrialRecord] = []
    if workers <= 1:
        for task in tasks:
            records.extend(_run_trial_group(task))
            if progress:
                progress(task[1])
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for group in pool.map(_run_trial_group, tasks):
                records.extend(group)
                if progress:
                    progress(group[0].trial if group else None)
    return sort_records(cfg, records)


@dataclass
class AggregateRow:
    method: str
    snr_db: float
    mean_nmse: float
    mean_nmse_db: float
    mean_of_nmse_db: float
    mean_paths: float
    mean_runtime_ns: float
    trials: int
    max_iter_fraction: float = 0.0


def aggregate(records, max_iter: int | None = None) -> list[AggregateRow]:
    """Per (method, snr) means; ``mean_nmse_db`` is the dB of the linear mean."""
    groups: dict = {}
    for r in records:
        groups.setdefault((r.method, r.snr_db), []).append(r)
    rows = []
    for (name, snr), rs in groups.items():
        lin = np.array([r.nmse for r in rs])
        db = 10 * np.log10(np.maximum(lin, 1e-300))
        paths = np.array([r.paths_estimated for r in rs])
        rows.append(AggregateRow(
            method=name, snr_db=snr, mean_nmse=float(lin.mean()),
            mean_nmse_db=float(10 * np.log10(max(lin.mean(), 1e-300))),
            mean_of_nmse_db=float(db.mean()), mean_paths=float(paths.mean()),
            mean_runtime_ns=float(np.mean([r.runtime_ns for r in rs])), trials=len(rs),
            max_iter_fraction=float(np.mean(paths >= max_iter)) if max_iter else 0.0,
        ))
    return rows


def reference_methods(D: int = 16, V: int = 16) -> tuple[MethodSpec, ...]:
    """The estimator line-up of the NMSE / path-count / runtime comparison."""
    return (
        MethodSpec("omp-k1", "omp", D, V),
        MethodSpec("omp-k2", "omp", 2 * D, 2 * V),
        MethodSpec("omp-k4", "omp", 4 * D, 4 * V),
        MethodSpec("ompbr-n2", "ompbr", D, V, 2),
        MethodSpec("ompbr-n10", "ompbr", D, V, 10),
    )
