"""Greedy sparse recovery of delay-Doppler paths: OMP and OMP with
binary-division refinement (OMPBR).

Operation counters follow the dense cost model: building one dictionary atom
``U(tau, nu) @ x`` costs ``L^2`` products and correlating the residual with a
dictionary of ``K`` atoms costs ``K * L`` products.
"""

from __future__ import annotations

import hashlib
import os
import threading
import time
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from otfs_cs.channel import atom_matrices, atom_vectors
from otfs_cs.grid import GridConfig

CACHE_ENV = "OTFS_CS_CACHE_SIZE"
DEFAULT_CACHE_SIZE = 8
COND_LIMIT = 1e10


@dataclass(frozen=True)
class DictionaryConfig:
    """Evenly spaced ``K_tau x K_nu`` grid over ``[0, D*Ts) x [0, V*df)``."""

    K_tau: int
    K_nu: int

    def __post_init__(self):
        for name in ("K_tau", "K_nu"):
            val = getattr(self, name)
            if int(val) != val or val < 1:
                raise ValueError(f"{name} must be a positive integer, got {val!r}")

    @property
    def size(self) -> int:
        return self.K_tau * self.K_nu

    def delay_step(self, grid: GridConfig) -> float:
        """Grid spacing in samples."""
        return grid.D / self.K_tau

    def doppler_step(self, grid: GridConfig) -> float:
        """Grid spacing in Doppler bins."""
        return grid.V / self.K_nu

    def points(self, grid: GridConfig) -> tuple[np.ndarray, np.ndarray]:
        """Delay (samples) and Doppler (bins) of every column, index ``k_tau*K_nu + k_nu``."""
        kt, kn = np.divmod(np.arange(self.size), self.K_nu)
        return kt * self.delay_step(grid), kn * self.doppler_step(grid)

    def closing_points(self, grid: GridConfig) -> tuple[np.ndarray, np.ndarray]:
        """Points on the far edges ``tau = D*Ts`` and ``nu = V*df`` of the grid.

        The exact channel is only quasi-periodic across these edges, so the
        grid points at 0 do not stand in for them.
        """
        kt = np.concatenate([np.full(self.K_nu + 1, self.K_tau), np.arange(self.K_tau)])
        kn = np.concatenate([np.arange(self.K_nu + 1), np.full(self.K_tau, self.K_nu)])
        return kt * self.delay_step(grid), kn * self.doppler_step(grid)

    def superresolution(self, grid: GridConfig, n_ref: int = 0) -> tuple[float, float]:
        return 2**n_ref * self.K_tau / grid.D, 2**n_ref * self.K_nu / grid.V


@dataclass(frozen=True)
class StoppingRule:
    xi: float
    max_iter: int = 64

    def __post_init__(self):
        if not self.xi >= 0:
            raise ValueError(f"xi must be >= 0, got {self.xi!r}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter!r}")

    @classmethod
    def from_noise(cls, sigma2: float, L: int, max_iter: int = 64) -> "StoppingRule":
        return cls(L * sigma2, max_iter)


@dataclass
class AtomBank:
    columns: np.ndarray  # (L, K)
    delays: np.ndarray  # samples, per column
    dopplers: np.ndarray  # bins, per column
    config: DictionaryConfig
    grid: GridConfig
    key: str


@dataclass(frozen=True)
class BuildInfo:
    cache_hit: bool
    atom_evals: int
    macs: int
    elapsed_ns: int


def bank_key(pilot, config: DictionaryConfig, grid: GridConfig, closed: bool = False) -> str:
    h = hashlib.blake2b(digest_size=16)
    h.update(np.ascontiguousarray(pilot, dtype=complex).tobytes())
    h.update(repr((config, grid, closed)).encode())
    return h.hexdigest()


class AtomCache:
    """Thread-safe LRU store of atom banks keyed on pilot and dictionary geometry."""

    def __init__(self, capacity: int | None = None):
        if capacity is None:
            capacity = int(os.environ.get(CACHE_ENV, DEFAULT_CACHE_SIZE))
        self.capacity = max(0, int(capacity))
        self._store: OrderedDict[str, AtomBank] = OrderedDict()
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def get(self, key: str) -> AtomBank | None:
        with self._lock:
            bank = self._store.get(key)
            if bank is None:
                self.misses += 1
                return None
            self._store.move_to_end(key)
            self.hits += 1
            return bank

    def put(self, bank: AtomBank) -> None:
        if self.capacity == 0:
            return
        with self._lock:
            self._store[bank.key] = bank
            self._store.move_to_end(bank.key)
            while len(self._store) > self.capacity:
                self._store.popitem(last=False)

    def clear(self) -> None:
        with self._lock:
            self._store.clear()

    def __len__(self):
        return len(self._store)


def _dense_columns(pilot, tbs, nbs, grid: GridConfig, chunk: int = 16) -> np.ndarray:
    cols = np.empty((grid.L, len(tbs)), dtype=complex)
    for start in range(0, len(tbs), chunk):
        sl = slice(start, start + chunk)
        cols[:, sl] = (atom_matrices(tbs[sl], nbs[sl], grid) @ pilot).T
    return cols


def build_atom_bank(pilot, config: DictionaryConfig, grid: GridConfig,
                    cache: AtomCache | None = None, method: str = "fft",
                    closed: bool = False):
    """Dictionary matrix of atom responses to ``pilot``.

    ``method="dense"`` materialises each ``U(tau, nu)`` and multiplies it by the
    pilot (``L^2`` products per atom); ``"fft"`` uses the time-domain path of
    :func:`otfs_cs.channel.atom_vectors`, equal to round-off.  With
    ``closed=True`` the :meth:`DictionaryConfig.closing_points` columns are
    appended after the regular ``K_tau*K_nu`` ones.  Returns ``(bank, BuildInfo)``.
    """
    pilot = np.asarray(pilot, dtype=complex)
    if pilot.shape != (grid.L,):
        raise ValueError(f"pilot must have length L={grid.L}")
    key = bank_key(pilot, config, grid, closed)
    if cache is not None:
        bank = cache.get(key)
        if bank is not None:
            return bank, BuildInfo(True, 0, 0, 0)
    t0 = time.perf_counter_ns()
    tbs, nbs = config.points(grid)
    if closed:
        et, en = config.closing_points(grid)
        tbs, nbs = np.concatenate([tbs, et]), np.concatenate([nbs, en])
    if method == "dense":
        cols = _dense_columns(pilot, tbs, nbs, grid)
    elif method == "fft":
        cols = np.ascontiguousarray(atom_vectors(tbs, nbs, pilot, grid).T)
    else:
        raise ValueError(f"unknown bank method {method!r}")
    bank = AtomBank(cols, tbs, nbs, config, grid, key)
    elapsed = time.perf_counter_ns() - t0
    if cache is not None:
        cache.put(bank)
    n = len(tbs)
    return bank, BuildInfo(False, n, n * grid.L**2, elapsed)


@dataclass
class OpCounters:
    bank_atom_evals: int = 0
    bank_macs: int = 0
    corr_macs: int = 0
    refine_atom_evals: int = 0
    refit_atom_evals: int = 0
    cache_hit: bool = False
    bank_build_ns: int = 0

    @property
    def atom_evals(self) -> int:
        return self.bank_atom_evals + self.refine_atom_evals + self.refit_atom_evals


@dataclass
class SparseEstimate:
    """Recovered paths as ``(tau_hat [s], nu_hat [Hz], a_hat)`` triples."""

    entries: list = field(default_factory=list)
    residual_history: list = field(default_factory=list)
    degenerate: bool = False
    exhausted: bool = False
    counters: OpCounters = field(default_factory=OpCounters)
    runtime_ns: int = 0

    @property
    def iterations(self) -> int:
        return len(self.entries)

    @property
    def residual_norm2(self) -> float:
        return self.residual_history[-1] if self.residual_history else 0.0

    def as_arrays(self, grid: GridConfig):
        """Gains, delays in samples and Dopplers in bins."""
        if not self.entries:
            return np.zeros(0, complex), np.zeros(0), np.zeros(0)
        t, n, a = zip(*self.entries)
        return np.array(a, complex), np.array(t) / grid.Ts, np.array(n) / grid.df


def ls_refit(y, atoms):
    """Least-squares gains of ``y`` on the columns of ``atoms``.

    Returns ``(gains, residual, degenerate)``.  If the columns are numerically
    dependent (condition number above 1e10) the newest column is dropped,
    the fit is redone on the rest and ``degenerate`` is True; the returned
    gains then have one entry fewer than ``atoms`` has columns.
    """
    y = np.asarray(y, dtype=complex)
    A = np.asarray(atoms, dtype=complex)
    if A.ndim == 1:
        A = A[:, None]
    A = np.asfortranarray(A)  # same BLAS path whatever the caller's layout
    if A.shape[1] == 0:
        return np.zeros(0, complex), y.copy(), False
    gains, _, rank, sv = np.linalg.lstsq(A, y, rcond=None)
    degenerate = rank < A.shape[1] or sv[0] > COND_LIMIT * sv[-1]
    if degenerate:
        gains, residual, _ = ls_refit(y, A[:, :-1])
        return gains, residual, True
    return gains, y - A @ gains, False


_CORNERS = ((1, 1), (-1, 1), (1, -1), (-1, -1))  # up-up, down-up, up-down, down-down


def br_refine(f, x0: float, y0: float, n_ref: int):
    """Binary-division search of a local maximum of ``f`` in ``[x0 +- 1/2] x [y0 +- 1/2]``.

    Each of the ``n_ref`` rounds evaluates the four corners of the current box,
    keeps the quadrant of the best corner and returns the last box centre.
    ``f`` is called once per round with arrays of the four corner coordinates
    (in up-up, down-up, up-down, down-down order; ties go to the earliest).

    Returns ``(x, y, n_evals)``.
    """
    if n_ref < 0:
        raise ValueError(f"n_ref must be >= 0, got {n_ref}")
    x_up, x_dn, y_up, y_dn = x0 + 0.5, x0 - 0.5, y0 + 0.5, y0 - 0.5
    x_mid, y_mid = float(x0), float(y0)
    for _ in range(n_ref):
        x_mid, y_mid = (x_up + x_dn) / 2, (y_up + y_dn) / 2
        xs = np.array([x_up if sx > 0 else x_dn for sx, _ in _CORNERS])
        ys = np.array([y_up if sy > 0 else y_dn for _, sy in _CORNERS])
        vals = np.asarray(f(xs, ys), dtype=float)
        sx, sy = _CORNERS[int(np.argmax(vals))]
        if sx > 0:
            x_dn = x_mid
        else:
            x_up = x_mid
        if sy > 0:
            y_dn = y_mid
        else:
            y_up = y_mid
    return x_mid, y_mid, 4 * n_ref


def _start(y, stop: StoppingRule):
    y = np.asarray(y, dtype=complex)
    est = SparseEstimate()
    est.residual_history.append(float(np.vdot(y, y).real))
    return y, est


def omp(y, bank: AtomBank, stop: StoppingRule, build: BuildInfo | None = None) -> SparseEstimate:
    """Orthogonal matching pursuit over the columns of ``bank``.

    Stops when ``||r||^2 <= xi`` or after ``max_iter`` atoms.  ``build`` (from
    :func:`build_atom_bank`) is folded into the counters and runtime.
    """
    t0 = time.perf_counter_ns()
    y, est = _start(y, stop)
    grid = bank.grid
    phi = bank.columns
    K = phi.shape[1]
    support: list[int] = []
    r = y
    gains = np.zeros(0, complex)
    while est.residual_history[-1] > stop.xi and len(support) < stop.max_iter:
        mag = np.abs(r.conj() @ phi)
        est.counters.corr_macs += K * grid.L
        if support:
            mag[support] = -np.inf
        j = int(np.argmax(mag))
        if not np.isfinite(mag[j]):
            est.exhausted = True
            break
        support.append(j)
        gains, r, degenerate = ls_refit(y, phi[:, support])
        if degenerate:
            support.pop()
            est.degenerate = True
            break
        est.residual_history.append(float(np.vdot(r, r).real))
    est.entries = [
        (bank.delays[j] * grid.Ts, bank.dopplers[j] * grid.df, complex(a))
        for j, a in zip(support, gains)
    ]
    _finish(est, build, t0)
    return est


def _finish(est: SparseEstimate, build: BuildInfo | None, t0: int) -> None:
    est.runtime_ns = time.perf_counter_ns() - t0
    if build is not None:
        est.counters.cache_hit = build.cache_hit
        est.counters.bank_atom_evals = build.atom_evals
        est.counters.bank_macs = build.macs
        est.counters.bank_build_ns = build.elapsed_ns
        est.runtime_ns += build.elapsed_ns


def ompbr(y, pilot, grid: GridConfig, config: DictionaryConfig, n_ref: int,
          stop: StoppingRule, cache: AtomCache | None = None,
          bank_method: str = "fft") -> SparseEstimate:
    """OMP with binary-division refinement of every selected grid point.

    Line search on the auxiliary dictionary ``config`` picks a grid point; BR
    then refines it within half a grid step on each axis by maximising
    ``|phi(tau, nu)^H r|`` with freshly computed atoms.  Refined columns enter
    the least-squares refit.  A refinement that does not beat the grid
    point's correlation is discarded in favour of the grid point.

    For ``n_ref > 0`` the line search also covers the closing edges of the
    grid, so that the refinement boxes tile all of ``[0, D*Ts) x [0, V*df)``.
    With ``n_ref = 0`` the result equals :func:`omp` on the same dictionary.
    """
    bank, build = build_atom_bank(pilot, config, grid, cache, method=bank_method,
                                  closed=n_ref > 0)
    t_loop = time.perf_counter_ns()
    y, est = _start(y, stop)
    pilot = np.asarray(pilot, dtype=complex)
    phi = bank.columns
    K = phi.shape[1]
    st, sn = config.delay_step(grid), config.doppler_step(grid)
    cols: list[np.ndarray] = []
    points: list[tuple[float, float]] = []
    on_grid: list[int] = []
    r = y
    gains = np.zeros(0, complex)
    while est.residual_history[-1] > stop.xi and len(cols) < stop.max_iter:
        corr = r.conj() @ phi
        est.counters.corr_macs += K * grid.L
        mag = np.abs(corr)
        if on_grid:
            mag[on_grid] = -np.inf
        j = int(np.argmax(mag))
        if not np.isfinite(mag[j]):
            est.exhausted = True
            break
        kt, kn = float(np.rint(bank.delays[j] / st)), float(np.rint(bank.dopplers[j] / sn))
        col, point, grid_j = phi[:, j], (bank.delays[j], bank.dopplers[j]), j
        if n_ref > 0:
            def f(xs, ys, r=r):
                atoms = atom_vectors(xs * st, ys * sn, pilot, grid)
                return np.abs(atoms.conj() @ r)

            xr, yr, n_evals = br_refine(f, kt, kn, n_ref)
            est.counters.refine_atom_evals += n_evals
            est.counters.corr_macs += n_evals * grid.L
            cand = atom_vectors([xr * st], [yr * sn], pilot, grid)[0]
            est.counters.refit_atom_evals += 1
            if abs(np.vdot(cand, r)) >= mag[j]:
                col, point, grid_j = cand, (xr * st, yr * sn), None
        cols.append(col)
        points.append(point)
        if grid_j is not None:
            on_grid.append(grid_j)
        gains, r, degenerate = ls_refit(y, np.column_stack(cols))
        if degenerate:
            cols.pop()
            points.pop()
            if grid_j is not None:
                on_grid.pop()
            est.degenerate = True
            break
        est.residual_history.append(float(np.vdot(r, r).real))
    est.entries = [
        (tb * grid.Ts, nb * grid.df, complex(a)) for (tb, nb), a in zip(points, gains)
    ]
    _finish(est, build, t_loop)
    return est
