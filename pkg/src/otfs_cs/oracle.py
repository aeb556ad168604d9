"""Reference simulation of the cyclic continuous-time channel.

Everything here is evaluated by direct sums straight from the definitions;
nothing is shared with the closed-form builder in :mod:`otfs_cs.channel`
except :class:`~otfs_cs.grid.GridConfig` and the sinc band limits.  It is slow
on purpose (O(L^2) per received frame) and meant as a test fixture.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from otfs_cs.channel import PathSet
from otfs_cs.grid import GridConfig


def zak_direct(x, grid: GridConfig) -> np.ndarray:
    D, V = grid.D, grid.V
    x = np.asarray(x, dtype=complex)
    z = np.zeros(grid.L, dtype=complex)
    for d in range(D):
        for v in range(V):
            z[d + v * D] = sum(x[d + u * D] * np.exp(-2j * np.pi * u * v / V) for u in range(V))
    return z


def izak_direct(z, grid: GridConfig) -> np.ndarray:
    D, V = grid.D, grid.V
    z = np.asarray(z, dtype=complex)
    x = np.zeros(grid.L, dtype=complex)
    for n in range(grid.L):
        x[n] = sum(z[n % D + v * D] * np.exp(2j * np.pi * (n // D) * v / V) for v in range(V)) / V
    return x


@dataclass(frozen=True)
class PeriodicBandlimitedSignal:
    """Finite Fourier series of the periodic sinc interpolation of L samples.

    ``coeffs[i]`` is the DFT of the samples at bin ``bins[i]``, with
    ``bins = -floor(L/2) .. ceil(L/2)-1``.  For even L the bin ``-L/2`` is used
    at both ``+-L/2`` with half weight, i.e. as ``cos(pi t/Ts)``.
    """

    coeffs: np.ndarray
    Ts: float

    @property
    def L(self) -> int:
        return len(self.coeffs)

    @property
    def bins(self) -> np.ndarray:
        L = self.L
        return np.arange(-(L // 2), L - L // 2)

    @property
    def period(self) -> float:
        return self.L * self.Ts

    @classmethod
    def from_samples(cls, x, Ts: float) -> "PeriodicBandlimitedSignal":
        x = np.asarray(x, dtype=complex)
        L = len(x)
        k = np.arange(-(L // 2), L - L // 2)
        n = np.arange(L)
        coeffs = np.exp(-2j * np.pi * np.outer(k, n) / L) @ x
        return cls(coeffs, Ts)


def eval_xp(sig: PeriodicBandlimitedSignal, t) -> np.ndarray:
    """Evaluate the band-limited periodic signal at times ``t`` (seconds)."""
    L = sig.L
    k = sig.bins
    tt = np.asarray(t, dtype=float) / sig.Ts
    terms = np.exp(2j * np.pi * np.multiply.outer(tt, k) / L) * sig.coeffs
    if L % 2 == 0:
        # bin -L/2 stands for the pair +-L/2 at half weight each
        terms[..., 0] = sig.coeffs[0] * np.cos(np.pi * tt)
    return terms.sum(axis=-1) / L


def oracle_receive(pilot, paths: PathSet) -> np.ndarray:
    """Noiseless received delay-Doppler frame for a transmitted DD pilot."""
    grid = paths.grid
    x = izak_direct(pilot, grid)
    sig = PeriodicBandlimitedSignal.from_samples(x, grid.Ts)
    t = np.arange(grid.L) * grid.Ts
    y = np.zeros(grid.L, dtype=complex)
    for p in paths:
        y += p.gain * np.exp(-2j * np.pi * p.doppler * t) * eval_xp(sig, t - p.delay)
    return zak_direct(y, grid)


def oracle_ezc(paths: PathSet, grid: GridConfig | None = None) -> np.ndarray:
    """Materialise the channel operator column by column from :func:`oracle_receive`."""
    grid = grid or paths.grid
    if grid != paths.grid:
        raise ValueError("grid does not match the PathSet grid")
    H = np.zeros((grid.L, grid.L), dtype=complex)
    e = np.zeros(grid.L, dtype=complex)
    for col in range(grid.L):
        e[:] = 0
        e[col] = 1
        H[:, col] = oracle_receive(e, paths)
    return H
