import numpy as np
import pytest
from hypothesis import given, strategies as st

from otfs_cs.grid import GridConfig, centered_bins, dzt, idzt, periodic_sinc
from otfs_cs.oracle import izak_direct, zak_direct
from otfs_cs.rng import complex_normal, stream

dims = st.tuples(st.integers(1, 9), st.integers(1, 9))


def test_grid_config():
    g = GridConfig(4, 8, Ts=2e-6)
    assert g.L == 32
    assert g.df == pytest.approx(1 / (32 * 2e-6))
    assert g.dd_index(3, 2) == 3 + 2 * 4
    assert g.dd_coords(11) == (3, 2)
    with pytest.raises(ValueError):
        GridConfig(0, 4)
    with pytest.raises(ValueError):
        GridConfig(4, 4, Ts=0.0)


def test_dzt_of_constant():
    g = GridConfig(4, 4)
    z = dzt(np.ones(16), g).reshape(4, 4)  # rows v, columns d
    assert np.allclose(z[0], 4)
    assert np.allclose(z[1:], 0)


def test_idzt_of_doppler_zero_row():
    g = GridConfig(4, 4)
    z = np.zeros(16, complex)
    z[:4] = 1.0  # Z[d, 0] = 1 for all d
    x = idzt(z, g)
    # with the 1/V normalisation the inverse of the constant-4 result above is 1
    assert np.allclose(x, 1 / 4)
    assert np.allclose(idzt(dzt(np.ones(16), g), g), 1)


def test_length_mismatch():
    g = GridConfig(4, 4)
    with pytest.raises(ValueError):
        dzt(np.ones(15), g)
    with pytest.raises(ValueError):
        idzt(np.ones(17), g)


@given(dims, st.integers(0, 2**32))
def test_round_trip(dv, seed):
    g = GridConfig(*dv)
    x = complex_normal(stream(seed), g.L)
    assert np.linalg.norm(idzt(dzt(x, g), g) - x) <= 1e-12 * np.linalg.norm(x)


@given(dims, st.integers(0, 2**32))
def test_parseval(dv, seed):
    g = GridConfig(*dv)
    x = complex_normal(stream(seed), g.L)
    e = np.linalg.norm(dzt(x, g)) ** 2
    assert abs(e - g.V * np.linalg.norm(x) ** 2) <= 1e-10 * e


@given(st.integers(1, 32), st.integers(0, 2**32))
def test_d1_is_dft(V, seed):
    g = GridConfig(1, V)
    x = complex_normal(stream(seed), V)
    assert np.allclose(dzt(x, g), np.fft.fft(x), atol=1e-10 * np.linalg.norm(x))


@given(dims, st.integers(0, 2**32))
def test_fft_matches_direct_sum(dv, seed):
    g = GridConfig(*dv)
    x = complex_normal(stream(seed), g.L)
    assert np.allclose(dzt(x, g), zak_direct(x, g), atol=1e-10)
    assert np.allclose(idzt(x, g), izak_direct(x, g), atol=1e-10)


@given(dims, st.integers(0, 2**32))
def test_quasi_periodicity(dv, seed):
    # Z[d + D, v] = exp(2j*pi*v/V) Z[d, v]
    D, V = dv
    g = GridConfig(D, V)
    x = complex_normal(stream(seed), g.L)
    z = dzt(x, g).reshape(V, D)
    v = np.arange(V)[:, None]
    # direct evaluation of the shifted sum
    zs = np.array([[sum(x[(dd + D + u * D) % g.L] * np.exp(-2j * np.pi * u * vv / V)
                        for u in range(V)) for dd in range(D)] for vv in range(V)])
    assert np.allclose(zs, np.exp(2j * np.pi * v / V) * z, atol=1e-9)


def test_batched_transforms(rng):
    g = GridConfig(3, 5)
    X = complex_normal(rng, (4, 2, g.L))
    Z = dzt(X, g)
    assert Z.shape == X.shape
    assert np.allclose(Z[2, 1], dzt(X[2, 1], g))
    assert np.allclose(idzt(Z, g), X)


def test_periodic_sinc_values():
    assert periodic_sinc(16, 0.0) == pytest.approx(1.0, abs=1e-12)
    assert abs(periodic_sinc(16, 1.0)) <= 1e-12
    assert abs(periodic_sinc(16, 5.0)) <= 1e-12
    assert periodic_sinc(16, 16.0) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        periodic_sinc(0, 0.5)


@given(st.integers(1, 40), st.floats(-50, 50))
def test_periodic_sinc_props(M, u):
    assert periodic_sinc(M, u) == pytest.approx(periodic_sinc(M, u + M), abs=1e-9)
    assert periodic_sinc(M, u) == pytest.approx(periodic_sinc(M, -u), abs=1e-9)
    assert abs(np.imag(periodic_sinc(M, u))) == 0


@given(st.integers(1, 40))
def test_periodic_sinc_samples_and_energy(M):
    n = np.arange(M)
    s = periodic_sinc(M, n)
    assert np.allclose(s, (n == 0).astype(float), atol=1e-12)
    # shifted samples keep unit energy except for the even-M Nyquist tone,
    # which a shift s scales by cos(pi*s)
    s_ = 0.37
    h = periodic_sinc(M, n + s_)
    expect = 1.0 if M % 2 else (M - 1 + np.cos(np.pi * s_) ** 2) / M
    assert np.sum(h**2) == pytest.approx(expect, rel=1e-9)


def test_periodic_sinc_closed_form_odd():
    M, u = 9, np.linspace(0.05, 8.6, 40)
    ref = np.sin(np.pi * u) / (M * np.sin(np.pi * u / M))
    assert np.allclose(periodic_sinc(M, u), ref, atol=1e-12)


def test_centered_bins():
    k, w = centered_bins(6)
    assert list(k) == [-3, -2, -1, 0, 1, 2, 3]
    assert list(w) == [0.5, 1, 1, 1, 1, 1, 0.5]
    k, w = centered_bins(5)
    assert list(k) == [-2, -1, 0, 1, 2] and np.all(w == 1)
