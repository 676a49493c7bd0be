import numpy as np
import pytest

from sigmatile.arith import GOLDEN, SQRT2_MINUS_1, frac
from sigmatile.core import Modulator, QuantizerRule
from sigmatile.errors import OrderError, RationalError, UnderSampledError
from sigmatile.simulate import iter_states, run
from sigmatile.spectral import (
    AutocorrEstimate,
    PhaseFunction,
    ZeroMeanFunction,
    ac_part_order2,
    autocorrelation,
    corollary_bound_tv,
    density_estimate,
    lemma_integrals,
    pure_point_part,
    random_smooth_phase,
    sawtooth_autocorr,
    spectral_measure,
    toeplitz_min_eigenvalue,
    total_variation,
    verify_decay_lemma,
)
from sigmatile.tiling import MidpointFunction, build_tile, extract_midpoint


@pytest.fixture(scope="module")
def mid2(ideal2):
    return extract_midpoint(build_tile(iter_states(ideal2, None, 4 * 10**6, burn_in=1000), 128))


@pytest.fixture(scope="module")
def onebit_run(onebit):
    tr = run(onebit, None, 4 * 10**6)
    mid = extract_midpoint(build_tile(tr, 128))
    return tr, mid


def test_constant_sequence():
    N = 10**6
    est = autocorrelation(np.full(N, 0.3), 20)
    # the 1/N normalization shortens lag k by k terms
    assert np.allclose(est.rho, 0.09 * (1 - np.arange(21) / N), rtol=1e-12)
    assert np.allclose(est.rho, 0.09, rtol=1e-4)


def test_ideal_m2_flat(traj2):
    est = autocorrelation(traj2, 50)
    assert est.rho[0] == pytest.approx(1 / 12, abs=1e-3)
    assert np.max(np.abs(est.rho[1:])) < 3e-3
    sym = est.symmetric()
    assert np.array_equal(sym, sym[::-1]) and len(sym) == 101
    assert np.all(np.abs(est.rho) <= est.rho[0])


def test_ideal_m1_matches_sawtooth_autocorr(traj1):
    est = autocorrelation(traj1, 30)
    k = np.arange(31)
    assert np.max(np.abs(est.rho - sawtooth_autocorr(k * SQRT2_MINUS_1))) < 1e-3


def test_autocorrelation_guards(ideal2):
    with pytest.raises(UnderSampledError):
        autocorrelation(run(ideal2, None, 3000), 50)
    with pytest.raises(RationalError):
        autocorrelation(run(Modulator(2, QuantizerRule.ideal(), 0.5), None, 10**4), 5)


def test_sawtooth_closed_form_vs_fourier():
    # the tail after N terms is 1/(2 pi^2 N) at the kink t = 0, so N = 6e4 for 1e-6
    t = np.linspace(0, 1, 401)
    partial = np.zeros_like(t)
    for lo in range(1, 60_001, 10_000):
        n = np.arange(lo, lo + 10_000)
        partial += 2 * (np.cos(2 * np.pi * np.outer(t, n)) @ (1 / (4 * np.pi**2 * n**2)))
    assert np.max(np.abs(partial - sawtooth_autocorr(t))) < 1e-6


def test_ideal_has_no_atoms(mid2):
    pp = pure_point_part(mid2, SQRT2_MINUS_1, 20)
    assert pp.total_mass() < 1e-4
    assert np.max(np.abs(pp.rho_pp)) < 1e-4


def test_m1_sawtooth_masses():
    mod = Modulator(1, QuantizerRule.ideal(), GOLDEN)
    mid = extract_midpoint(build_tile(run(mod, None, 10**6), 4096))
    pp = pure_point_part(mid, GOLDEN, 10)
    by_n = {a.n: a.mass for a in pp.atoms}
    for n in range(1, 9):
        for s in (n, -n):
            assert by_n[s] == pytest.approx(1 / (4 * np.pi**2 * n**2), rel=0.05)
            assert next(a.location for a in pp.atoms if a.n == s) == pytest.approx(frac(s * GOLDEN))


def test_cosine_midpoint_two_atoms():
    G = 256
    v = (np.arange(G) + 0.5) / G
    mid = MidpointFunction.from_samples(np.cos(2 * np.pi * v) / 10)
    pp = pure_point_part(mid, SQRT2_MINUS_1, 40)
    assert sorted(a.n for a in pp.atoms) == [-1, 1]
    assert all(a.mass == pytest.approx(1 / 400, rel=1e-9) for a in pp.atoms)
    # oracle: A_lambda-bar(k x) = cos(2 pi k x) / 200
    k = np.arange(41)
    assert np.allclose(pp.rho_pp, np.cos(2 * np.pi * k * SQRT2_MINUS_1) / 200, atol=1e-12)


def test_ac_part_zero_midpoint():
    mid = MidpointFunction.from_samples(np.zeros(64))
    rho = ac_part_order2(mid, SQRT2_MINUS_1, 30)
    # midpoint-rule error only, O((k/Q)^2)
    assert rho[0] == pytest.approx(1 / 12, abs=1e-8)
    assert np.max(np.abs(rho[1:])) < 1e-8


def test_ac_part_tv_bound(onebit_run):
    _, mid = onebit_run
    K = np.arange(1, 41)
    rho = ac_part_order2(mid, GOLDEN, 40)
    assert np.all(np.abs(rho[1:]) <= corollary_bound_tv(mid, K) + 1e-6)
    # Riemann-Lebesgue at the last lag
    assert abs(rho[40]) <= 3 * corollary_bound_tv(mid, 40)


def test_ac_part_needs_order2(ideal1):
    mid1 = extract_midpoint(build_tile(run(ideal1, None, 10**5), 256))
    with pytest.raises(OrderError):
        ac_part_order2(mid1, SQRT2_MINUS_1, 5)


def test_decomposition_onebit(onebit_run):
    tr, mid = onebit_run
    est = autocorrelation(tr, 40)
    pp = pure_point_part(mid, tr.modulator.x, 40)
    ac = ac_part_order2(mid, tr.modulator.x, 40)
    assert len(pp.atoms) > 0  # a genuinely non-flat example
    resid = np.max(np.abs(est.rho - pp.rho_pp - ac))
    assert resid <= 5 * (est.stat_error() + 1e-6)


def test_decomposition_ideal(traj2, mid2):
    est = autocorrelation(traj2, 40)
    _, parts = spectral_measure(mid2, SQRT2_MINUS_1, 40)
    est.rho_pp, est.rho_ac = parts.rho_pp, parts.rho_ac
    assert est.decomposition_residual() <= 5 * (est.stat_error() + 1e-6)


def test_pp_time_average_cross_check(onebit_run):
    tr, mid = onebit_run
    g = mid.lam_bar_at(frac(tr.coordinate(1)[1000:]))
    direct = autocorrelation(g, 20)
    pp = pure_point_part(mid, tr.modulator.x, 20)
    assert np.max(np.abs(direct.rho - pp.rho_pp)) < 2e-4


def test_flat_density(mid2):
    meas, _ = spectral_measure(mid2, SQRT2_MINUS_1, 64)
    s = meas.density.s
    assert np.all(np.abs(s - 1 / 12) <= 0.05 / 12)
    assert meas.total_mass() == pytest.approx(1 / 12, abs=1e-4)


def test_delta_density():
    d = density_estimate(np.array([0.2, 0, 0, 0, 0]), n_grid=64)
    assert np.allclose(d.s, 0.2) and d.s0_raw == 0.2 and d.s0_windowed == pytest.approx(0.2)
    with pytest.raises(ValueError):
        density_estimate([1.0, 0.0], window="hann")


def test_density_s0_raw_vs_windowed(onebit_run):
    _, mid = onebit_run
    K = 64
    rho = ac_part_order2(mid, GOLDEN, K)
    d = density_estimate(rho)
    # Fejer bias at xi=0 is sum_k (|k|/K) rho[k]
    bias = 2 * np.sum(np.arange(1, K + 1) / K * np.abs(rho[1:]))
    assert abs(d.s0_raw - d.s0_windowed) <= bias + 1e-12
    assert np.min(d.s) > -1e-3


def test_herglotz(traj2, onebit_run):
    assert toeplitz_min_eigenvalue(autocorrelation(traj2, 60).rho) >= -1e-6
    assert toeplitz_min_eigenvalue(autocorrelation(onebit_run[0], 60).rho) >= -1e-6


def test_spectral_measure_export(tmp_path, onebit_run):
    _, mid = onebit_run
    meas, est = spectral_measure(mid, GOLDEN, 16, n_grid=32)
    meas.export_atoms_csv(tmp_path / "a.csv", comment="h")
    meas.export_density_csv(tmp_path / "d.csv")
    a = (tmp_path / "a.csv").read_text().splitlines()
    assert a[:2] == ["# h", "n,location,mass"] and len(a) == 2 + len(meas.atoms)
    d = (tmp_path / "d.csv").read_text().splitlines()
    assert d[0] == "xi,s" and len(d) == 33
    assert isinstance(est, AutocorrEstimate) and est.decomposition_residual() < 1e-15


def test_total_variation():
    v = (np.arange(1000) + 0.5) / 1000
    assert total_variation(np.sin(2 * np.pi * v)) == pytest.approx(4.0, rel=1e-4)
    assert total_variation(np.zeros(5)) == 0.0


def test_decay_lemma_sine_phase():
    rep = verify_decay_lemma(ZeroMeanFunction.sawtooth_autocorrelation(), PhaseFunction.trig([0.0], [0.1]), 100)
    assert rep.holds1 and rep.holds2
    assert rep.bound2 is not None


def test_decay_lemma_constant_phase():
    k, c, _ = lemma_integrals(ZeroMeanFunction.sawtooth_autocorrelation(), PhaseFunction.constant(0.37), 30)
    assert np.max(np.abs(c)) < 1e-8


def test_decay_lemma_cosine_sawtooth_phase():
    f = ZeroMeanFunction.from_fourier({1: 0.5, -1: 0.5}, "cos")
    assert f.a_norm == 1.0 and f.sup_norm == pytest.approx(1.0)
    rep = verify_decay_lemma(f, PhaseFunction.sawtooth(), 20)
    assert rep.holds1 and rep.bound2 is None
    assert np.max(np.abs(rep.c)) < 1e-8


def test_zero_mean_validation():
    with pytest.raises(ValueError):
        ZeroMeanFunction.from_fourier({0: 1.0})
    with pytest.raises(ValueError):
        ZeroMeanFunction.from_fourier({1: 1.0, -1: 0.5})


def test_random_phases_hold(rng):
    f = ZeroMeanFunction.sawtooth_autocorrelation()
    for _ in range(5):
        rep = verify_decay_lemma(f, random_smooth_phase(rng), 60)
        assert rep.holds and rep.worst_ratio() <= 1.0
