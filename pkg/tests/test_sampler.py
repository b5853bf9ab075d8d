import numpy as np
import pytest
from scipy import stats as scistats

from wickflow import (
    ConfigurationError,
    DomainError,
    PolynomialSpec,
    RealField,
    SpectralField,
    TorusGrid,
    counterterm_C,
    sample_stationary,
    substream,
    to_spectral,
    wick_action,
)
from wickflow.sampler import (
    ChainState,
    ChainResult,
    gibbs_samples,
    integrated_autocorrelation,
    observables,
    pcn_step,
    run_chain,
)


def make_chain(grid, P, c, seed):
    rng = substream(seed, 0, 0)
    return ChainState.initial(sample_stationary(grid, rng), P, c, rng)


def test_free_case_always_accepts_and_targets_mu():
    grid = TorusGrid(3)
    c = counterterm_C(grid)
    state = make_chain(grid, None, c, 0)
    n = 4000
    stats = np.empty(n)
    for i in range(n):
        state, acc = pcn_step(state, 0.7, None, c)
        assert acc
        stats[i] = np.sum(np.abs(state.phi.coeffs) ** 2) / (2 * np.pi) ** 2
    # spatial variance statistic has expectation counterterm_C under mu;
    # account for chain autocorrelation in the standard error
    tau = integrated_autocorrelation(stats)
    z = (stats.mean() - c.c) / (stats.std(ddof=1) / np.sqrt(n / tau))
    assert abs(z) < 3.0


def test_quadratic_equilibrium_mode_variance():
    # a2 = 0.5: stationary variance of the zero mode is 1/3
    grid = TorusGrid(2, max_degree=2)
    P = PolynomialSpec.quadratic(0.5)
    c = counterterm_C(grid)
    state = make_chain(grid, P, c, 1)
    n, burn = 40000, 2000
    vals = []
    for i in range(n):
        state, _ = pcn_step(state, 0.6, P, c)
        if i >= burn:
            vals.append(abs(state.phi.get_mode(0, 0)) ** 2)
    vals = np.asarray(vals)
    tau = integrated_autocorrelation(vals)
    z = (vals.mean() - 1.0 / 3.0) / (vals.std(ddof=1) / np.sqrt(len(vals) / tau))
    assert abs(z) < 3.0


def test_detailed_balance_single_mode():
    # K = 0 quartic: empirical transition pair counts are symmetric
    grid = TorusGrid(0, max_degree=4)
    P = PolynomialSpec.quartic(1.0)
    c = counterterm_C(grid)
    state = make_chain(grid, P, c, 2)
    n, burn = 60000, 2000
    xs = np.empty(n)
    for i in range(n):
        state, _ = pcn_step(state, 0.8, P, c)
        xs[i] = state.phi.get_mode(0, 0).real
    xs = xs[burn:]
    edges = np.quantile(xs, np.linspace(0, 1, 6))
    edges[0], edges[-1] = -np.inf, np.inf
    bins = np.digitize(xs, edges) - 1
    counts = np.zeros((5, 5))
    for a, b in zip(bins[:-1], bins[1:]):
        counts[a, b] += 1
    for i in range(5):
        for j in range(i + 1, 5):
            nab, nba = counts[i, j], counts[j, i]
            if nab + nba >= 25:
                z = (nab - nba) / np.sqrt(nab + nba)
                assert abs(z) < 4.0, (i, j, nab, nba)


def test_acceptance_invariant_under_action_offset():
    grid = TorusGrid(2, max_degree=4)
    P = PolynomialSpec.quartic(0.25)
    c = counterterm_C(grid)
    r1 = run_chain(make_chain(grid, P, c, 3), 400, 0, 1, 0.4, P, c)
    r2 = run_chain(make_chain(grid, P, c, 3), 400, 0, 1, 0.4, P, c, action_offset=1e6)
    assert np.array_equal(r1.accept_history, r2.accept_history)


def test_free_case_iat_matches_ar1():
    # pCN on a Gaussian target is exactly AR(1) with coefficient sqrt(1-rho^2)
    grid = TorusGrid(1)
    c = counterterm_C(grid)
    rho = 0.5
    state = make_chain(grid, None, c, 4)
    n = 60000
    series = np.empty(n)
    for i in range(n):
        state, _ = pcn_step(state, rho, None, c)
        series[i] = state.phi.get_mode(0, 0).real
    gamma = np.sqrt(1 - rho**2)
    expected = (1 + gamma) / (1 - gamma)
    est = integrated_autocorrelation(series)
    assert est == pytest.approx(expected, rel=0.25)


def test_run_chain_bookkeeping():
    grid = TorusGrid(1)
    c = counterterm_C(grid)
    res = run_chain(make_chain(grid, None, c, 5), 30, 0, 1, 0.5, None, c)
    assert len(res.samples) == 30
    assert res.acceptance_rate == 1.0
    res2 = run_chain(make_chain(grid, None, c, 5), 100, 40, 20, 0.5, None, c)
    assert len(res2.samples) == 3
    with pytest.raises(ConfigurationError):
        run_chain(make_chain(grid, None, c, 5), 10, 10, 1, 0.5, None, c)
    with pytest.raises(DomainError):
        pcn_step(make_chain(grid, None, c, 5), 1.5, None, c)


def test_low_acceptance_warning():
    grid = TorusGrid(2, max_degree=4)
    P = PolynomialSpec.quartic(200.0)
    c = counterterm_C(grid)
    with pytest.warns(UserWarning, match="acceptance"):
        run_chain(make_chain(grid, P, c, 6), 600, 0, 1, 1.0, P, c)


def test_action_cache_consistency():
    grid = TorusGrid(2, max_degree=4)
    P = PolynomialSpec.quartic(0.25, a2=0.1)
    c = counterterm_C(grid)
    state = make_chain(grid, P, c, 7)
    for _ in range(50):
        state, _ = pcn_step(state, 0.5, P, c)
    assert state.action == pytest.approx(wick_action(state.phi, P, c), abs=1e-10)


def test_observables_reference_values():
    grid = TorusGrid(2, max_degree=4)
    P = PolynomialSpec.quartic(0.25)
    c = counterterm_C(grid)
    phi0 = 0.9
    obs = observables(to_spectral(RealField.constant(grid, phi0)), P, c)
    assert obs["wick2"] == pytest.approx((2 * np.pi) ** 2 * (phi0**2 - c.c), rel=1e-12)
    zero = observables(SpectralField.zero(grid), P, c)
    assert zero["wick4"] == pytest.approx((2 * np.pi) ** 2 * 3 * c.c**2, rel=1e-12)
    assert zero["mode2_0_0"] == 0.0


def test_free_sample_mean_wick2_zero():
    grid = TorusGrid(3)
    c = counterterm_C(grid)
    rng = np.random.default_rng(8)
    n = 2000
    vals = np.empty(n)
    for i in range(n):
        phi = sample_stationary(grid, rng)
        vals[i] = np.sum(np.abs(phi.coeffs) ** 2) - (2 * np.pi) ** 2 * c.c
    z = vals.mean() / (vals.std(ddof=1) / np.sqrt(n))
    assert abs(z) < 3.0


def test_pcn_free_invariance_two_sample_ks():
    # chain marginals versus direct free-field samples, KS at 1%
    grid = TorusGrid(2)
    c = counterterm_C(grid)
    rho = 0.9
    state = make_chain(grid, None, c, 9)
    n, thin = 30000, 10
    chain_obs = {"wick2": [], "m00": [], "m10r": [], "m11i": [], "m20r": []}
    for i in range(n):
        state, _ = pcn_step(state, rho, None, c)
        if i % thin == 0:
            phi = state.phi
            chain_obs["wick2"].append(np.sum(np.abs(phi.coeffs) ** 2))
            chain_obs["m00"].append(phi.get_mode(0, 0).real)
            chain_obs["m10r"].append(phi.get_mode(1, 0).real)
            chain_obs["m11i"].append(phi.get_mode(1, 1).imag)
            chain_obs["m20r"].append(phi.get_mode(2, 0).real)
    rng = np.random.default_rng(10)
    direct = {k: [] for k in chain_obs}
    for _ in range(n // thin):
        phi = sample_stationary(grid, rng)
        direct["wick2"].append(np.sum(np.abs(phi.coeffs) ** 2))
        direct["m00"].append(phi.get_mode(0, 0).real)
        direct["m10r"].append(phi.get_mode(1, 0).real)
        direct["m11i"].append(phi.get_mode(1, 1).imag)
        direct["m20r"].append(phi.get_mode(2, 0).real)
    for name in chain_obs:
        ks = scistats.ks_2samp(np.asarray(chain_obs[name]), np.asarray(direct[name]))
        assert ks.pvalue > 0.01, name


def test_gibbs_samples_helper():
    grid = TorusGrid(2, max_degree=4)
    P = PolynomialSpec.quartic(0.25)
    c = counterterm_C(grid)
    samples, result = gibbs_samples(grid, P, c, 8, 0.4, 200, 25, substream(11, 0, 0))
    assert len(samples) == 8
    assert isinstance(result, ChainResult)
    assert 0.05 < result.acceptance_rate <= 1.0
