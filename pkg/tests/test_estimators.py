import numpy as np
import pytest
from hypothesis import given, strategies as st

from otfs_cs.channel import PathSet, atom_vector, build_ezc, random_pathset, random_pilot
from otfs_cs.estimators import (
    CACHE_ENV, AtomCache, DictionaryConfig, StoppingRule, br_refine, build_atom_bank,
    ls_refit, omp, ompbr,
)
from otfs_cs.grid import GridConfig
from otfs_cs.harness import nmse
from otfs_cs.rng import complex_normal, stream

G16 = GridConfig(16, 16)


@pytest.fixture(scope="module")
def pilot16():
    return random_pilot(G16, stream(77))


@pytest.fixture(scope="module")
def bank16(pilot16):
    return build_atom_bank(pilot16, DictionaryConfig(16, 16), G16)[0]


def noiseless(y, max_iter=64):
    return StoppingRule(1e-16 * float(np.vdot(y, y).real), max_iter)


# -- dictionary and bank ------------------------------------------------------

def test_dictionary_points():
    g = GridConfig(4, 2)
    cfg = DictionaryConfig(8, 4)
    tb, nb = cfg.points(g)
    assert cfg.size == 32 and len(tb) == 32
    assert tb[0] == 0 and nb[0] == 0
    assert tb[cfg.K_nu] == 0.5 and nb[1] == 0.5  # index k_tau*K_nu + k_nu
    assert tb.max() == pytest.approx(4 * 7 / 8) and nb.max() == pytest.approx(2 * 3 / 4)
    assert cfg.superresolution(g, 0) == (2.0, 2.0)
    assert DictionaryConfig(4, 2).superresolution(g, 10) == (1024.0, 1024.0)
    with pytest.raises(ValueError):
        DictionaryConfig(0, 4)


def test_stopping_rule():
    s = StoppingRule.from_noise(0.1, 256)
    assert s.xi == pytest.approx(25.6) and s.max_iter == 64
    with pytest.raises(ValueError):
        StoppingRule(-1.0, 3)
    with pytest.raises(ValueError):
        StoppingRule(1.0, 0)


def test_bank_first_column_is_pilot(pilot16, bank16):
    assert np.array_equal(bank16.columns[:, 0], pilot16)


def test_bank_columns_are_atoms(pilot16, bank16):
    for j in (1, 17, 100, 255):
        ref = atom_vector(bank16.delays[j] * G16.Ts, bank16.dopplers[j] * G16.df, pilot16, G16)
        assert np.allclose(bank16.columns[:, j], ref, atol=1e-12)


def test_bank_fft_equals_dense(rng):
    g = GridConfig(4, 4)
    x = random_pilot(g, rng)
    cfg = DictionaryConfig(8, 8)
    fast, _ = build_atom_bank(x, cfg, g, method="fft")
    dense, info = build_atom_bank(x, cfg, g, method="dense")
    assert np.allclose(fast.columns, dense.columns, atol=1e-12)
    assert info.atom_evals == 64 and info.macs == 64 * 16**2
    with pytest.raises(ValueError):
        build_atom_bank(x, cfg, g, method="bogus")


def test_bank_size(pilot16):
    bank, info = build_atom_bank(pilot16, DictionaryConfig(64, 64), G16)
    assert bank.columns.shape == (256, 4096)
    assert info.macs == 4096 * 256**2


def test_bank_cache(pilot16):
    cache = AtomCache(2)
    cfg = DictionaryConfig(16, 16)
    b1, i1 = build_atom_bank(pilot16, cfg, G16, cache)
    b2, i2 = build_atom_bank(pilot16, cfg, G16, cache)
    assert not i1.cache_hit and i1.atom_evals == 256
    assert i2.cache_hit and i2.atom_evals == 0 and i2.macs == 0
    assert b2 is b1 and cache.hits == 1 and cache.misses == 1
    # a different pilot or dictionary is a different key
    other = pilot16.copy()
    other[3] += 1e-3
    assert not build_atom_bank(other, cfg, G16, cache)[1].cache_hit
    assert not build_atom_bank(pilot16, DictionaryConfig(8, 8), G16, cache)[1].cache_hit
    # capacity 2: the first bank was least recently used and is gone
    assert len(cache) == 2
    assert not build_atom_bank(pilot16, cfg, G16, cache)[1].cache_hit


def test_cache_capacity_from_env(monkeypatch):
    monkeypatch.setenv(CACHE_ENV, "3")
    assert AtomCache().capacity == 3
    monkeypatch.setenv(CACHE_ENV, "0")
    c = AtomCache()
    x = random_pilot(GridConfig(2, 2), stream(0))
    build_atom_bank(x, DictionaryConfig(2, 2), GridConfig(2, 2), c)
    assert len(c) == 0


# -- least squares ------------------------------------------------------------

def test_ls_single_atom(rng):
    phi, y = complex_normal(rng, 20), complex_normal(rng, 20)
    a, r, deg = ls_refit(y, phi)
    assert a[0] == pytest.approx(np.vdot(phi, y) / np.vdot(phi, phi), rel=1e-12)
    assert not deg


def test_ls_in_span(rng):
    A = complex_normal(rng, (30, 4))
    y = A @ complex_normal(rng, 4)
    _, r, _ = ls_refit(y, A)
    assert np.linalg.norm(r) <= 1e-10 * np.linalg.norm(y)


@given(st.integers(0, 2**32))
def test_ls_matches_normal_equations(seed):
    r = stream(seed)
    A = complex_normal(r, (40, 5))
    y = complex_normal(r, 40)
    a, res, _ = ls_refit(y, A)
    ref = np.linalg.solve(A.conj().T @ A, A.conj().T @ y)
    assert np.allclose(a, ref, atol=1e-9)
    assert np.all(np.abs(A.conj().T @ res) <= 1e-8 * np.linalg.norm(res) * np.linalg.norm(A, axis=0))


def test_ls_rank_deficient(rng):
    A = complex_normal(rng, (20, 3))
    A = np.column_stack([A, A[:, 0] * (1 + 1e-14)])
    y = complex_normal(rng, 20)
    a, r, deg = ls_refit(y, A)
    assert deg and len(a) == 3
    assert np.allclose(a, ls_refit(y, A[:, :3])[0])


# -- binary-division refinement -----------------------------------------------

def test_br_quadratic_example():
    x, y, n = br_refine(lambda a, b: -(a - 0.3) ** 2 - (b - 0.2) ** 2, 0.0, 0.0, 10)
    assert abs(x - 0.3) <= 2**-10 and abs(y - 0.2) <= 2**-10
    assert n == 40


def test_br_zero_rounds():
    assert br_refine(lambda a, b: a, 1.5, -2.0, 0) == (1.5, -2.0, 0)
    with pytest.raises(ValueError):
        br_refine(lambda a, b: a, 0, 0, -1)


@pytest.mark.parametrize("n_ref", [2, 6, 10])
def test_br_symmetric_peak_at_start(n_ref):
    x, y, _ = br_refine(lambda a, b: -np.abs(a - 4) - np.abs(b - 7), 4.0, 7.0, n_ref)
    assert abs(x - 4) <= 2.0**-n_ref and abs(y - 7) <= 2.0**-n_ref


def test_br_tie_order():
    calls = []

    def f(xs, ys):
        calls.append((xs.copy(), ys.copy()))
        return np.zeros(4)

    x, y, _ = br_refine(f, 0.0, 0.0, 2)
    xs, ys = calls[0]
    assert list(xs) == [0.5, -0.5, 0.5, -0.5] and list(ys) == [0.5, 0.5, -0.5, -0.5]
    # all-equal corners keep the up-up quadrant
    assert (x, y) == (0.25, 0.25)


@given(st.sampled_from([2, 6, 10]), st.floats(-0.5, 0.5), st.floats(-0.5, 0.5),
       st.sampled_from(["quad", "abs", "gauss"]), st.floats(-20, 20), st.floats(-20, 20))
def test_br_guarantee(n_ref, mx, my, kind, x0, y0):
    tx, ty = x0 + mx, y0 + my
    funcs = {
        "quad": lambda a, b: -(a - tx) ** 2 - (b - ty) ** 2,
        "abs": lambda a, b: -np.abs(a - tx) - np.abs(b - ty),
        "gauss": lambda a, b: np.exp(-((a - tx) ** 2 + 3 * (b - ty) ** 2)),
    }
    x, y, _ = br_refine(funcs[kind], x0, y0, n_ref)
    assert abs(x - tx) <= 2.0**-n_ref + 1e-12 and abs(y - ty) <= 2.0**-n_ref + 1e-12
    assert abs(x - x0) <= 0.5 and abs(y - y0) <= 0.5


# -- OMP ----------------------------------------------------------------------

def test_omp_nothing_to_do(bank16):
    y = np.full(256, 1e-3, complex)
    est = omp(y, bank16, StoppingRule(1.0, 64))
    assert est.iterations == 0 and est.entries == []


def test_omp_single_on_grid_path(pilot16, bank16):
    ps = PathSet.from_normalized(G16, [1], [3], [5])
    y = build_ezc(ps) @ pilot16
    est = omp(y, bank16, noiseless(y))
    assert est.iterations == 1
    tau, nu, a = est.entries[0]
    assert tau == pytest.approx(3 * G16.Ts) and nu == pytest.approx(5 * G16.df)
    assert abs(a - 1) <= 1e-8


def test_omp_exact_sparse_recovery(pilot16, bank16):
    ps = PathSet.from_normalized(G16, [0.6, -0.5j, 0.4 + 0.3j], [1, 7, 12], [2, 9, 14])
    H = build_ezc(ps)
    y = H @ pilot16
    est = omp(y, bank16, noiseless(y))
    assert est.iterations == 3
    got = sorted((round(t), round(n)) for t, n in zip(*est.as_arrays(G16)[1:]))
    assert got == [(1, 2), (7, 9), (12, 14)]
    assert est.residual_norm2 <= (1e-8 * np.linalg.norm(y)) ** 2
    assert 10 * np.log10(nmse(H, est, G16)) <= -80


def test_omp_counters(pilot16, bank16, rng):
    ps = random_pathset(3, G16, rng)
    y = build_ezc(ps) @ pilot16 + complex_normal(rng, 256, 1e-3)
    est = omp(y, bank16, StoppingRule(256e-3, 10))
    assert est.counters.corr_macs == est.iterations * 256 * 256


@given(st.integers(0, 2**32), st.sampled_from([1, 2]))
def test_omp_residual_properties(seed, kappa):
    g = GridConfig(4, 4)
    r = stream(seed)
    x = random_pilot(g, r)
    bank, _ = build_atom_bank(x, DictionaryConfig(4 * kappa, 4 * kappa), g)
    y = build_ezc(random_pathset(3, g, r)) @ x + complex_normal(r, g.L, 0.01)
    est = omp(y, bank, StoppingRule(0.0, 8))
    h = est.residual_history
    assert all(b <= a + 1e-12 for a, b in zip(h, h[1:]))
    assert len(est.entries) == est.iterations
    gains, tb, nb = est.as_arrays(g)
    sel = [j for t, n in zip(tb, nb) for j in np.flatnonzero((bank.delays == t) & (bank.dopplers == n))]
    A = bank.columns[:, sel]
    resid = y - A @ gains
    assert np.linalg.norm(resid) ** 2 == pytest.approx(est.residual_norm2, rel=1e-9, abs=1e-20)
    nr = np.linalg.norm(resid)
    assert np.all(np.abs(A.conj().T @ resid) <= 1e-8 * nr * np.linalg.norm(A, axis=0) + 1e-300)


def test_omp_exhausts_small_dictionary(rng):
    g = GridConfig(2, 2)
    x = random_pilot(g, rng)
    bank, _ = build_atom_bank(x, DictionaryConfig(1, 2), g)
    y = complex_normal(rng, 4)
    est = omp(y, bank, StoppingRule(0.0, 10))
    assert est.iterations == 2 and est.exhausted


# -- OMPBR --------------------------------------------------------------------

def test_ompbr_nref0_equals_omp(pilot16, bank16, rng):
    y = build_ezc(random_pathset(3, G16, rng)) @ pilot16 + complex_normal(rng, 256, 1e-3)
    stop = StoppingRule(0.256, 64)
    a = omp(y, bank16, stop)
    b = ompbr(y, pilot16, G16, DictionaryConfig(16, 16), 0, stop)
    assert a.entries == b.entries
    assert a.residual_history == b.residual_history


def test_ompbr_off_grid_single_path(pilot16):
    ps = PathSet.from_normalized(G16, [1], [3.37], [5.21])
    H = build_ezc(ps)
    y = H @ pilot16
    est = ompbr(y, pilot16, G16, DictionaryConfig(16, 16), 10, noiseless(y, max_iter=1))
    _, tb, nb = est.as_arrays(G16)
    assert abs(tb[0] - 3.37) <= 2**-8 and abs(nb[0] - 5.21) <= 2**-8
    assert 10 * np.log10(nmse(H, est, G16)) <= -40


def test_ompbr_matches_fine_grid_reference(rng):
    # reference maximiser: exhaustive correlation scan at 1/64 bin
    g = GridConfig(4, 4)
    x = random_pilot(g, rng)
    ps = PathSet.from_normalized(g, [1], [1.61], [2.29])
    y = build_ezc(ps) @ x
    est = ompbr(y, x, g, DictionaryConfig(4, 4), 10, noiseless(y, max_iter=1))
    _, tb, nb = est.as_arrays(g)
    fine = DictionaryConfig(4 * 64, 4 * 64)
    bank, _ = build_atom_bank(x, fine, g)
    j = int(np.argmax(np.abs(y.conj() @ bank.columns)))
    assert abs(tb[0] - bank.delays[j]) <= 2**-6 and abs(nb[0] - bank.dopplers[j]) <= 2**-6


def test_ompbr_pure_noise(pilot16):
    y = complex_normal(stream(4), 256, 1e-4)
    est = ompbr(y, pilot16, G16, DictionaryConfig(16, 16), 10, StoppingRule(1.0, 64))
    assert est.iterations == 0


def test_ompbr_counters_and_dominance(pilot16, rng):
    ps = random_pathset(3, G16, rng)
    y = build_ezc(ps) @ pilot16 + complex_normal(rng, 256, 1e-3)
    n_ref = 6
    cfg = DictionaryConfig(16, 16)
    est = ompbr(y, pilot16, G16, cfg, n_ref, StoppingRule(0.256, 12))
    k = est.iterations
    assert est.counters.refine_atom_evals == 4 * n_ref * k
    closed = cfg.size + len(cfg.closing_points(G16)[0])
    assert est.counters.corr_macs == k * (closed + 4 * n_ref) * 256
    h = est.residual_history
    assert all(b <= a + 1e-12 for a, b in zip(h, h[1:]))


def test_ompbr_refined_beats_grid(pilot16, rng):
    ps = random_pathset(3, G16, rng)
    y = build_ezc(ps) @ pilot16
    cfg = DictionaryConfig(16, 16)
    bank, _ = build_atom_bank(pilot16, cfg, G16, closed=True)
    est = ompbr(y, pilot16, G16, cfg, 8, noiseless(y, max_iter=1))
    tau, nu, _ = est.entries[0]
    mag = np.abs(y.conj() @ bank.columns).max()
    assert abs(np.vdot(atom_vector(tau, nu, pilot16, G16), y)) >= mag
