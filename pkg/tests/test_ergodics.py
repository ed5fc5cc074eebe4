"""Observables, Birkhoff averages, error bars, and convergence experiments."""

import numpy as np
import pytest

from sdnlw.config import SimConfig
from sdnlw.ergodics import (
    ObservableSeries,
    autocorr_time,
    birkhoff_average,
    get_observable,
    krylov_bogolyubov_diagnostic,
    linear_moment_report,
    mean_with_error,
    observable_registry,
    register_observable,
    sample_trajectory,
    two_start_convergence,
)
from sdnlw.noise import sample_stick_at
from sdnlw.spectral import gaussian_bump_pair, zero_pair

RNG = np.random.default_rng(77)


class TestObservables:
    def test_registry_contents(self):
        reg = observable_registry()
        for name in ("mean_u", "mean_u2", "mean_u4", "clipped_halpha",
                     "dn_to_ref"):
            assert name in reg

    def test_unknown_name(self):
        with pytest.raises(KeyError):
            get_observable("nope")

    def test_constant_field_values(self):
        pair = zero_pair(4)
        pair[0, 4, 4] = 1.5
        ctx = {"alpha": 0.25}
        assert float(get_observable("mean_u")(pair, ctx)) == pytest.approx(1.5)
        assert float(get_observable("mean_u2")(pair, ctx)) == pytest.approx(2.25)
        assert float(get_observable("mean_u4")(pair, ctx)) == pytest.approx(
            1.5**4, rel=1e-12)

    def test_clipped_norm_bounded(self):
        ctx = {"alpha": 0.25}
        for _ in range(10):
            pair = 10.0 * np.random.default_rng(3).standard_normal((2, 9, 9)) \
                * (1.0 + 0j)
            val = get_observable("clipped_halpha")(pair, ctx)
            assert val <= 1.0

    def test_user_extension_point(self):
        register_observable("test_zero_obs", lambda pair, ctx: 0.0)
        assert get_observable("test_zero_obs")(zero_pair(2), {}) == 0.0

    def test_stick_mean_u2_matches_stationary_sum(self):
        # mean of u^2 for a (near-)stationary stick sample vs closed form
        s, N, n, t = 1.0, 8, 1000, 30.0
        vals = sample_stick_at(N, s, t, [900 + i for i in range(n)],
                               batch=(n,))
        m2 = np.sum(np.abs(vals[:, 0]) ** 2, axis=(-2, -1))
        from sdnlw.noise import lattice_covariance
        expect = float(np.sum(lattice_covariance(N, t, s)[..., 0, 0]))
        se = m2.std(ddof=1) / np.sqrt(n)
        assert abs(m2.mean() - expect) <= 5 * se


class TestBirkhoff:
    def test_constant_functional(self):
        t = np.linspace(0.0, 10.0, 101)
        s = ObservableSeries("one", t, np.ones_like(t))
        for T in (2.5, 10.0):
            assert float(birkhoff_average(s, T)) == pytest.approx(1.0, rel=1e-14)

    def test_frozen_state(self):
        t = np.linspace(0.0, 4.0, 41)
        s = ObservableSeries("f", t, np.full_like(t, 3.7))
        assert float(birkhoff_average(s, 4.0)) == pytest.approx(3.7, rel=1e-14)

    def test_linear_in_functional(self):
        t = np.linspace(0.0, 1.0, 11)
        v1, v2 = RNG.standard_normal(11), RNG.standard_normal(11)
        a = birkhoff_average(ObservableSeries("a", t, v1), 1.0)
        b = birkhoff_average(ObservableSeries("b", t, v2), 1.0)
        ab = birkhoff_average(ObservableSeries("ab", t, 2 * v1 - 3 * v2), 1.0)
        assert float(ab) == pytest.approx(2 * a - 3 * b, rel=1e-12)

    def test_running_average_consistent(self):
        t = np.linspace(0.0, 5.0, 51)
        vals = np.sin(t)
        s = ObservableSeries("sin", t, vals)
        run = s.running_average()
        assert float(run[-1]) == pytest.approx(
            float(birkhoff_average(s, 5.0)), rel=1e-12)

    def test_out_of_range(self):
        s = ObservableSeries("x", np.array([0.0, 1.0]), np.array([1.0, 2.0]))
        with pytest.raises(ValueError):
            birkhoff_average(s, 2.0)


class TestErrorBars:
    def test_iid_tau_one(self):
        x = RNG.standard_normal(20_000)
        assert autocorr_time(x) < 1.3

    def test_correlated_tau(self):
        # AR(1) with rho: tau_int = (1+rho)/(1-rho)
        rho, n = 0.9, 200_000
        eps = RNG.standard_normal(n)
        x = np.empty(n)
        x[0] = eps[0]
        for i in range(1, n):
            x[i] = rho * x[i - 1] + eps[i]
        tau = autocorr_time(x)
        expect = (1 + rho) / (1 - rho)
        assert 0.7 * expect < tau < 1.4 * expect

    def test_stderr_uses_effective_size(self):
        x = np.repeat(RNG.standard_normal(500), 40)  # strongly correlated
        _, se_corr, tau = mean_with_error(x)
        se_naive = x.std(ddof=1) / np.sqrt(x.size)
        assert tau > 10.0 and se_corr > 3 * se_naive


class TestEnsembleSummary:
    def test_fields_and_effective_size(self):
        from sdnlw.ergodics import ensemble_summary
        t = np.linspace(0.0, 100.0, 2001)
        rng = np.random.default_rng(4)
        vals = np.repeat(rng.standard_normal((201, 2)), 10, axis=0)[:2001]
        series = {"obs": ObservableSeries("obs", t, vals)}
        summ = ensemble_summary(series, [1, 2], "digest", burn=0.0)
        d = summ.observables["obs"]
        naive = np.sqrt(vals.var(ddof=1) / vals.size)
        assert d["act"] > 3.0          # strong correlation detected
        assert d["stderr"] > naive     # and reflected in the error bar
        assert d["n_eff"] < vals.size
        assert summ.seeds == (1, 2)


class TestExperiments:
    def test_linear_moment_oracle(self):
        rep = linear_moment_report(N=4, s=1.0, T=250.0, dt_sample=0.25,
                                   seed=5, n_paths=4)
        assert rep["max_dev_sigma"] <= 5.0

    def test_two_start_same_data_zero_difference(self):
        cfg = SimConfig(N=4, s=1.0, gamma=0.0, dt=0.05, obs_interval=0.25,
                        observables=("mean_u2",))
        u0 = gaussian_bump_pair(4, 0.5)
        rep = two_start_convergence(cfg, u0, u0, T=2.0, seeds=[3, 4, 5],
                                    dn_every=1.0)
        d = rep["observables"]["mean_u2"]
        assert d["diff"] == 0.0
        assert rep["coupled_dn"]["final"] == 0.0

    def test_two_start_statistics(self):
        cfg = SimConfig(N=4, s=1.0, gamma=0.0, dt=0.05, obs_interval=0.25,
                        observables=("mean_u2", "clipped_halpha"))
        u2 = gaussian_bump_pair(4, 1.0)
        rep = two_start_convergence(cfg, None, u2, T=40.0,
                                    seeds=[100 + i for i in range(6)],
                                    dn_every=5.0)
        for d in rep["observables"].values():
            assert d["within_3se"]
        dn = rep["coupled_dn"]["values"]
        # nonincreasing after the initial transient
        tail = dn[2:]
        assert np.all(np.diff(tail) <= 1e-12)

    def test_krylov_bogolyubov_shape(self):
        cfg = SimConfig(N=8, s=1.0, gamma=0.0, dt=0.05)
        rep = krylov_bogolyubov_diagnostic(cfg, radii=[0.0, 1.0, 2.0, 4.0, 8.0],
                                           n_samples=300, t_sample=5.0, seed=2)
        fr = rep["fractions"]
        assert fr[0] == 1.0
        assert np.all(np.diff(fr) <= 0.0)
        # Chebyshev/Markov shape: fraction(R) * R stays below the mean size
        assert np.all(rep["fraction_times_R"] <= rep["sizes"].mean() + 1e-12)

    def test_birkhoff_two_seeds_agree(self):
        # two seeds, same config: long-run averages agree within 3 combined
        # autocorrelation-aware standard errors
        from sdnlw.ergodics import mean_with_error
        cfg = SimConfig(N=4, s=1.0, gamma=0.0, dt=0.05, obs_interval=0.25,
                        observables=("mean_u2",))
        run = sample_trajectory(cfg, None, seeds=[11, 12], T=60.0)
        vals = run["series"]["mean_u2"].values  # (T, 2)
        burn = vals.shape[0] // 4
        m1, se1, _ = mean_with_error(vals[burn:, 0])
        m2, se2, _ = mean_with_error(vals[burn:, 1])
        assert abs(m1 - m2) <= 3.0 * np.hypot(se1, se2)

    def test_trajectory_sampling_cadence(self):
        cfg = SimConfig(N=2, s=1.0, dt=0.05, obs_interval=0.25, T=1.0,
                        observables=("mean_u2",))
        run = sample_trajectory(cfg, None, seeds=5)
        s = run["series"]["mean_u2"]
        assert s.times[0] == 0.0 and s.times[-1] == pytest.approx(1.0)
        assert len(s.times) == 5
