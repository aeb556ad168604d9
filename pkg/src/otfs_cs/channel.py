"""Sparse multipath channels in the delay-Doppler domain.

The time-domain model is
``y[n] = sum_i a_i exp(-2j*pi*nu_i*n*Ts) x_p(n*Ts - tau_i)`` where ``x_p`` is the
band-limited periodic interpolation of the transmitted samples.  Seen through
the Zak transform pair this is an ``L x L`` operator ``H = sum_i a_i U(tau_i, nu_i)``.

Entries of the single-path operator, with ``tb = tau/Ts`` and ``nb = nu/df``::

    U[d + vD, d' + v'D] = exp(-2j*pi*nb*d/L) * A_v'(d - d' - tb) * B(v - v' + nb)

    A_v'(s) = (1/D) sum_{k in K_L, k = v' mod V} w_k exp(2j*pi*k*s/L)
    B(s)    = (1/V) sum_{u=0}^{V-1} exp(-2j*pi*u*s/V)

``K_L, w_k`` are the centred sinc bins of :func:`otfs_cs.grid.centered_bins`.
The Doppler kernel ``B`` is the one-sided Dirichlet pulse
``exp(-1j*pi*(V-1)*s/V) sin(pi*s) / (V sin(pi*s/V))``; the delay kernel is a
D-term Dirichlet pulse whose phase depends on the Doppler class ``v'``, and
the class split of the even-L band edge is what produces the quasi-periodic
boundary phase when ``d - d' < 0``.  The row phase is the per-sample Doppler
rotation ``exp(-2j*pi*nu*d*Ts)``.  All of this is checked against the direct
simulation in :mod:`otfs_cs.oracle`.

For even ``L`` a fractional delay attenuates the band-edge tone by
``cos(pi*tb)``, so ``U`` is unitary only for odd ``L`` or integer delay; in
general ``U^H U = I - sin(pi*tb)^2 * Pn`` with ``Pn`` the projector on the
Nyquist tone.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from otfs_cs.grid import GridConfig, centered_bins, dzt, idzt, periodic_sinc
from otfs_cs.rng import complex_normal


@dataclass(frozen=True)
class Path:
    gain: complex
    delay: float  # seconds
    doppler: float  # hertz


@dataclass(frozen=True)
class PathSet:
    """Paths of one channel realisation.

    Dopplers are stored modulo ``V*df``, so ``[V*df/2, V*df)`` stands for the
    negative range; a path given with ``-0.25*df`` is kept as ``(V-0.25)*df``.
    """

    grid: GridConfig
    paths: tuple = ()
    normalized: bool = False

    def __post_init__(self):
        g = self.grid
        span = g.V * g.df
        fixed = []
        for p in self.paths:
            if not (0.0 <= p.delay < g.D * g.Ts):
                raise ValueError(f"delay {p.delay!r} outside [0, D*Ts)")
            if not (-span / 2 <= p.doppler < span):
                raise ValueError(f"doppler {p.doppler!r} outside [-V*df/2, V*df)")
            nu = p.doppler % span
            if nu >= span:
                nu = 0.0
            fixed.append(Path(complex(p.gain), float(p.delay), float(nu)))
        object.__setattr__(self, "paths", tuple(fixed))
        if self.normalized and self.paths:
            energy = float(np.sum(np.abs(self.gains) ** 2))
            if abs(energy - 1.0) > 1e-12:
                raise ValueError(f"normalized PathSet has gain energy {energy}")

    @classmethod
    def from_normalized(cls, grid, gains, delays, dopplers, normalized=False):
        """Build from delays in samples and Dopplers in bins."""
        paths = tuple(
            Path(complex(a), float(t) * grid.Ts, float(n) * grid.df)
            for a, t, n in zip(gains, delays, dopplers)
        )
        return cls(grid, paths, normalized)

    def __len__(self):
        return len(self.paths)

    def __iter__(self):
        return iter(self.paths)

    def union(self, other: "PathSet") -> "PathSet":
        return PathSet(self.grid, self.paths + other.paths)

    @property
    def gains(self) -> np.ndarray:
        return np.array([p.gain for p in self.paths], dtype=complex)

    @property
    def delays(self) -> np.ndarray:
        """Delays in samples."""
        return np.array([p.delay for p in self.paths], dtype=float) / self.grid.Ts

    @property
    def dopplers(self) -> np.ndarray:
        """Dopplers in bins, in ``[0, V)``."""
        return np.array([p.doppler for p in self.paths], dtype=float) / self.grid.df

    def is_integer(self, atol: float = 1e-9) -> bool:
        t, n = self.delays, self.dopplers
        return bool(np.all(np.abs(t - np.round(t)) <= atol) and np.all(np.abs(n - np.round(n)) <= atol))


@dataclass(frozen=True)
class NoiseSpec:
    """Per-entry variance of the complex noise in the delay-Doppler observation."""

    sigma2: float = 0.0

    def __post_init__(self):
        if not self.sigma2 >= 0:
            raise ValueError(f"sigma2 must be >= 0, got {self.sigma2!r}")


# ---------------------------------------------------------------------------
# closed-form kernels


def _delay_kernel(tb, grid: GridConfig) -> np.ndarray:
    """``A[..., d, v', d'] = A_v'(d - d' - tb)`` for a batch of delays in samples."""
    D, V, L = grid.D, grid.V, grid.L
    tb = np.asarray(tb, dtype=float)
    k, w = centered_bins(L)
    cls = np.zeros((k.size, V))
    cls[np.arange(k.size), k % V] = w
    s = np.arange(-(D - 1), D)[None, :] - tb.reshape(-1, 1)  # (nt, 2D-1)
    e = np.exp(2j * np.pi * s[..., None] * k / L)  # (nt, 2D-1, nk)
    a = (e @ cls) / D  # (nt, 2D-1, V')
    dd = np.arange(D)[:, None] - np.arange(D)[None, :] + (D - 1)
    out = np.swapaxes(a[:, dd, :], -1, -2)  # (nt, D, V', D')
    return np.ascontiguousarray(out).reshape(tb.shape + (D, V, D))


def _doppler_kernel(nb, grid: GridConfig) -> tuple[np.ndarray, np.ndarray]:
    """``B[..., v, v'] = B(v - v' + nb)`` and the row phase ``ph[..., d]``."""
    D, V, L = grid.D, grid.V, grid.L
    nb = np.asarray(nb, dtype=float)
    s = np.arange(-(V - 1), V)[None, :] + nb.reshape(-1, 1)  # (nn, 2V-1)
    b = np.exp(-2j * np.pi * s[..., None] * np.arange(V) / V).mean(axis=-1)
    vv = np.arange(V)[:, None] - np.arange(V)[None, :] + (V - 1)
    ph = np.exp(-2j * np.pi * np.outer(nb.ravel(), np.arange(D)) / L)
    return b[:, vv].reshape(nb.shape + (V, V)), ph.reshape(nb.shape + (D,))


def _check_delay(tb, grid: GridConfig):
    tb = np.asarray(tb, dtype=float)
    if np.any(~np.isfinite(tb)) or np.any(tb <= -grid.D) or np.any(tb >= 2 * grid.D):
        raise ValueError(f"delay (in samples) {tb!r} outside (-D, 2D) with D={grid.D}")


def _check_doppler(nb):
    if np.any(~np.isfinite(np.asarray(nb, dtype=float))):
        raise ValueError("doppler must be finite")


def atom_matrices(tbs, nbs, grid: GridConfig) -> np.ndarray:
    """Stack of closed-form operators for paired delays (samples) and Dopplers (bins)."""
    tbs = np.atleast_1d(np.asarray(tbs, dtype=float))
    nbs = np.atleast_1d(np.asarray(nbs, dtype=float))
    _check_delay(tbs, grid)
    _check_doppler(nbs)
    if tbs.shape != nbs.shape:
        raise ValueError("delays and Dopplers must pair up")
    a = _delay_kernel(tbs, grid)  # (n, D, V', D')
    b, ph = _doppler_kernel(nbs, grid)  # (n, V, V'), (n, D)
    out = _assemble(a, b, ph, grid)
    out[(tbs == 0) & (nbs == 0)] = np.eye(grid.L)  # exact, not round-off close
    return out


def _assemble(a, b, ph, grid: GridConfig) -> np.ndarray:
    # U[n, v, d, v', d'] = ph[n, d] * b[n, v, v'] * a[n, d, v', d']
    pb = ph[:, None, :, None] * b[:, :, None, :]  # (n, V, D, V')
    u = pb[..., None] * a[:, None]
    return u.reshape(len(pb), grid.L, grid.L)


def atom_matrices_grid(tb: float, nbs, grid: GridConfig) -> np.ndarray:
    """Operators for one delay (samples) and several Dopplers (bins)."""
    nbs = np.atleast_1d(np.asarray(nbs, dtype=float))
    _check_delay(tb, grid)
    _check_doppler(nbs)
    a = _delay_kernel([tb], grid)
    b, ph = _doppler_kernel(nbs, grid)
    return _assemble(np.broadcast_to(a, (len(nbs),) + a.shape[1:]), b, ph, grid)


def atom_matrix(tau: float, nu: float, grid: GridConfig) -> np.ndarray:
    """Single-path delay-Doppler operator for delay ``tau`` (s) and Doppler ``nu`` (Hz).

    Delays in ``(-D*Ts, 2*D*Ts)`` are accepted: local refinement boxes step
    past either end of ``[0, D*Ts)``.  The Doppler is used as given, not
    wrapped, because the exact operator is not periodic in it.
    """
    return atom_matrices([tau / grid.Ts], [nu / grid.df], grid)[0]


# ---------------------------------------------------------------------------
# fast atoms through the time domain


def _delay_response(tbs, grid: GridConfig) -> np.ndarray:
    """FFT-bin multipliers of the periodic-sinc fractional delay, shape (n, L)."""
    L = grid.L
    k = np.fft.fftfreq(L, d=1.0 / L)
    tbs = np.atleast_1d(np.asarray(tbs, dtype=float))
    resp = np.exp(-2j * np.pi * np.outer(tbs, k) / L)
    if L % 2 == 0:
        resp[:, L // 2] = np.cos(np.pi * tbs)
    return resp


def atom_vectors(tbs, nbs, pilot, grid: GridConfig) -> np.ndarray:
    """``U(tb_j, nb_j) @ pilot`` for paired delays (samples) and Dopplers (bins).

    Computed as ``dzt(ramp * delay(idzt(pilot)))`` with the delay applied in
    the FFT domain, O(L log L) per atom.  Returns shape ``(n, L)``.
    """
    tbs = np.atleast_1d(np.asarray(tbs, dtype=float))
    nbs = np.atleast_1d(np.asarray(nbs, dtype=float))
    _check_delay(tbs, grid)
    _check_doppler(nbs)
    pilot = np.asarray(pilot, dtype=complex)
    if pilot.shape != (grid.L,):
        raise ValueError(f"pilot must have length L={grid.L}")
    X = np.fft.fft(idzt(pilot, grid))
    delayed = np.fft.ifft(X * _delay_response(tbs, grid), axis=-1)
    n = np.arange(grid.L)
    ramp = np.exp(-2j * np.pi * np.outer(nbs, n) / grid.L)
    out = dzt(ramp * delayed, grid)
    out[(tbs == 0) & (nbs == 0)] = pilot
    return out


def atom_vector(tau: float, nu: float, pilot, grid: GridConfig) -> np.ndarray:
    """Response ``U(tau, nu) @ pilot`` of one unit-gain path to the pilot."""
    return atom_vectors([tau / grid.Ts], [nu / grid.df], pilot, grid)[0]


# ---------------------------------------------------------------------------
# channel operators


def build_ezc(paths: PathSet) -> np.ndarray:
    """Channel operator ``H = sum_i a_i U(tau_i, nu_i)`` from the closed form."""
    grid = paths.grid
    if len(paths) == 0:
        return np.zeros((grid.L, grid.L), dtype=complex)
    u = atom_matrices(paths.delays, paths.dopplers, grid)
    return np.tensordot(paths.gains, u, axes=1)


def _twisted_structure(grid: GridConfig) -> tuple[np.ndarray, np.ndarray]:
    """Class index and unit phase for the integer-grid structure.

    On integer paths ``H[d+vD, d'+v'D] = G[(d-d') mod D, (v-v') mod V] * phase``
    where ``phase = exp(2j*pi*v*floor((d-d')/D)/V) * exp(-2j*pi*((v'-v) mod V)*d'/L)``.
    """
    D, V, L = grid.D, grid.V, grid.L
    ell = np.arange(L)
    d, v = ell % D, ell // D
    dd = d[:, None] - d[None, :]
    vv = v[:, None] - v[None, :]
    cls = (dd % D) + D * (vv % V)
    phase = np.exp(2j * np.pi * v[:, None] * np.floor_divide(dd, D) / V)
    phase = phase * np.exp(-2j * np.pi * ((-vv) % V) * d[None, :] / L)
    return cls, phase


def dirichlet_probe(paths: PathSet) -> np.ndarray:
    """Sampled response of the channel to the Dirichlet pulse train of the DD origin.

    The probe ``sum_u g_L(t/Ts - u*D)`` is the continuous-time waveform of the
    delay-Doppler impulse at ``(0, 0)``; its response is
    ``h[n] = sum_i a_i exp(-2j*pi*nu_i*n*Ts) sum_u g_L(n - u*D - tau_i/Ts)``.
    """
    grid = paths.grid
    n = np.arange(grid.L)
    h = np.zeros(grid.L, dtype=complex)
    for a, tb, nb in zip(paths.gains, paths.delays, paths.dopplers):
        pulse = sum(periodic_sinc(grid.L, n - u * grid.D - tb) for u in range(grid.V))
        h += a * np.exp(-2j * np.pi * nb * n / grid.L) * pulse
    return h


def build_ezc_integer(paths: PathSet) -> np.ndarray:
    """Channel operator for integer delays and Dopplers from a single probe.

    The delay-Doppler response ``G = dzt(h) / V`` of :func:`dirichlet_probe`
    fills every entry through the twisted-convolution structure, O(L^2)
    assembly instead of ``P`` kernel evaluations per entry.
    """
    if not paths.is_integer():
        raise ValueError("build_ezc_integer needs integer delays and Dopplers; use build_ezc")
    grid = paths.grid
    g = dzt(dirichlet_probe(paths), grid) / grid.V
    cls, phase = _twisted_structure(grid)
    return g[cls] * phase


def quasi_circulant_fit(H: np.ndarray, grid: GridConfig) -> tuple[np.ndarray, float]:
    """Least-squares fit of ``H`` by the integer-grid structure.

    Returns the fitted ``G`` (length L, DD order) and the relative Frobenius
    residual ``||H - struct(G)|| / ||H||``.
    """
    cls, phase = _twisted_structure(grid)
    vals = (np.asarray(H) * np.conj(phase)).ravel()
    idx = cls.ravel()
    counts = np.bincount(idx, minlength=grid.L)
    g = (np.bincount(idx, vals.real, grid.L) + 1j * np.bincount(idx, vals.imag, grid.L)) / counts
    fit = g[cls] * phase
    norm = np.linalg.norm(H)
    res = np.linalg.norm(H - fit) / norm if norm > 0 else 0.0
    return g, float(res)


def apply_channel(H, x, noise: NoiseSpec, rng: np.random.Generator) -> np.ndarray:
    """``y = H x + z`` with ``z`` circular complex Gaussian of per-entry variance sigma2."""
    H = np.asarray(H)
    x = np.asarray(x)
    if H.ndim != 2 or H.shape[0] != H.shape[1] or H.shape[1] != x.shape[-1]:
        raise ValueError(f"dimension mismatch: H {H.shape}, x {x.shape}")
    y = H @ x
    if noise.sigma2 > 0:
        y = y + complex_normal(rng, y.shape, noise.sigma2)
    return y


def random_pathset(P: int, grid: GridConfig, rng: np.random.Generator) -> PathSet:
    """Draw ``P`` paths with uniform delay/Doppler and unit total gain energy."""
    if P < 1:
        raise ValueError(f"P must be >= 1, got {P}")
    tb = rng.uniform(0, grid.D, P)
    nb = rng.uniform(0, grid.V, P)
    a = complex_normal(rng, P)
    a = a / np.sqrt(np.sum(np.abs(a) ** 2))
    return PathSet.from_normalized(grid, a, tb, nb, normalized=True)


def random_pilot(grid: GridConfig, rng: np.random.Generator) -> np.ndarray:
    """i.i.d. CN(0, 1) pilot in the delay-Doppler domain."""
    return complex_normal(rng, grid.L)
