"""Delay-Doppler grid geometry, the discrete Zak transform pair and the
periodic sinc kernel.

Signals are plain 1-D complex arrays of length ``L = D*V``.  A delay-Doppler
vector stores ``Z[d, v]`` at index ``d + v*D``, so reshaping to ``(V, D)``
gives rows indexed by Doppler and columns by delay.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class GridConfig:
    """Grid of ``D`` delay bins by ``V`` Doppler bins with sample period ``Ts``."""

    D: int
    V: int
    Ts: float = 1.0

    def __post_init__(self):
        if int(self.D) != self.D or self.D < 1:
            raise ValueError(f"D must be a positive integer, got {self.D!r}")
        if int(self.V) != self.V or self.V < 1:
            raise ValueError(f"V must be a positive integer, got {self.V!r}")
        if not self.Ts > 0:
            raise ValueError(f"Ts must be positive, got {self.Ts!r}")

    @property
    def L(self) -> int:
        return self.D * self.V

    @property
    def df(self) -> float:
        """Doppler resolution 1/(L*Ts) in hertz."""
        return 1.0 / (self.L * self.Ts)

    def dd_index(self, d: int, v: int) -> int:
        return (d % self.D) + (v % self.V) * self.D

    def dd_coords(self, ell):
        """Inverse of :meth:`dd_index`: returns ``(ell mod D, ell // D)``."""
        ell = np.asarray(ell)
        return ell % self.D, ell // self.D


def _check_length(x: np.ndarray, grid: GridConfig, what: str) -> np.ndarray:
    x = np.asarray(x)
    if x.ndim < 1 or x.shape[-1] != grid.L:
        raise ValueError(f"{what} must have length L={grid.L}, got shape {x.shape}")
    return x


def dzt(x, grid: GridConfig) -> np.ndarray:
    """Discrete Zak transform ``Z[d, v] = sum_u x[d + uD] exp(-2j*pi*u*v/V)``.

    No normalisation is applied, so ``||Z||^2 = V ||x||^2``.  Leading axes are
    treated as a batch.
    """
    x = _check_length(x, grid, "time signal")
    batch = x.shape[:-1]
    z = np.fft.fft(x.reshape(*batch, grid.V, grid.D), axis=-2)
    return z.reshape(*batch, grid.L)


def idzt(z, grid: GridConfig) -> np.ndarray:
    """Inverse of :func:`dzt` on ``n = 0..L-1`` (carries the 1/V factor)."""
    z = _check_length(z, grid, "delay-Doppler signal")
    batch = z.shape[:-1]
    x = np.fft.ifft(z.reshape(*batch, grid.V, grid.D), axis=-2)
    return x.reshape(*batch, grid.L)


def centered_bins(M: int) -> tuple[np.ndarray, np.ndarray]:
    """Frequency bins and weights of the sinc low-pass spectrum sampled at k/M.

    Odd ``M``: ``k = -(M-1)/2 .. (M-1)/2`` with unit weight.  Even ``M``:
    ``k = -M/2 .. M/2`` where the two band-edge bins carry weight 1/2.
    """
    if M < 1:
        raise ValueError(f"M must be >= 1, got {M}")
    half = M // 2
    if M % 2:
        k = np.arange(-half, half + 1)
        w = np.ones(M)
    else:
        k = np.arange(-half, half + 1)
        w = np.ones(M + 1)
        w[0] = w[-1] = 0.5
    return k, w


def periodic_sinc(M: int, u):
    """M-periodic summation of the unit sinc, ``sum_m sinc(u - m*M)``.

    Evaluated as ``(1/M) sum_k w_k exp(2j*pi*k*u/M)`` over :func:`centered_bins`,
    which is real because the bins are symmetric.
    """
    if int(M) != M or M < 1:
        raise ValueError(f"M must be a positive integer, got {M!r}")
    M = int(M)
    u = np.asarray(u, dtype=float)
    k, w = centered_bins(M)
    # pair +k/-k into cosines
    pos = k >= 0
    kk, ww = k[pos], w[pos] * np.where(k[pos] == 0, 1.0, 2.0)
    out = np.tensordot(np.cos(2 * np.pi * np.multiply.outer(u, kk) / M), ww, axes=([-1], [0]))
    return out / M
