"""Remainder integration, full-flow assembly, energies, restart identity."""

import dataclasses

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from sdnlw.config import SimConfig
from sdnlw.dynamics import (
    BlowUpError,
    energy,
    flow_init,
    full_flow,
    modified_energy_F,
    nonlinearity,
    nonlinearity_field,
    restart_check,
    run_steps,
    v_step,
)
from sdnlw.noise import NoiseIncrement
from sdnlw.propagator import apply_S, xalpha_norm
from sdnlw.renorm import cubic_coefficients
from sdnlw.spectral import (
    grad2_table,
    hnorm,
    integral,
    omega_table,
    project_leq,
    random_field,
    random_pair,
    zero_field,
    zero_pair,
)
from sdnlw import spectral
from _utils import coarsen, fine_increments, zero_increments

RNG = np.random.default_rng(12)


class TestNonlinearity:
    def test_v_zero_returns_projected_c(self):
        u0 = random_pair(4, RNG)
        psi = random_field(4, RNG)
        coeffs = cubic_coefficients(u0, psi, 0.4, 0.6, 4)
        out = nonlinearity(zero_pair(4), coeffs, 4)
        assert np.max(np.abs(out - spectral.resize(coeffs.c, 4))) < 1e-13

    def test_pure_cube_of_constant(self):
        zero = cubic_coefficients(zero_pair(2), zero_field(2), 0.0, 0.0, 2)
        v = zero_pair(2)
        v[0, 2, 2] = 2.0
        out = nonlinearity(v, zero, 2)
        assert integral(out) == pytest.approx(8.0, abs=1e-13)

    def test_coefficient_form_equals_direct(self):
        u0 = random_pair(4, RNG)
        psi = random_field(4, RNG)
        v = random_pair(4, RNG)
        gamma, t = 0.9, 1.3
        coeffs = cubic_coefficients(u0, psi, t, gamma, 4)
        via_coeffs = nonlinearity(v, coeffs, 4)
        lin = apply_S(u0, t)
        stick = zero_pair(4)
        stick[0] = psi
        direct = nonlinearity_field(lin, stick, v, gamma, 4)
        assert np.max(np.abs(via_coeffs - direct)) < 1e-12


class TestVStep:
    def test_zero_fixed_point(self):
        cfg = SimConfig(N=4, gamma=0.0, dt=0.05).check()
        st = flow_init(cfg)
        st = run_steps(st, 40, incr_table=zero_increments(4, cfg.dt, 40))
        assert np.all(st.v == 0)
        assert np.all(full_flow(st) == 0)

    def test_self_convergence_order_one(self):
        cfg = SimConfig(N=8, s=1.0, gamma=0.5, alpha=0.25)
        u0 = random_pair(8, RNG)
        T, deltas = 1.0, [1e-2, 5e-3, 2.5e-3, 1.25e-3]
        fine = fine_increments(8, min(deltas), round(T / min(deltas)), 42)
        sols = {}
        for d in deltas:
            c = dataclasses.replace(cfg, dt=d)
            st = flow_init(c, u0, seed=42)
            table = coarsen(fine, round(d / min(deltas)), d)
            sols[d] = full_flow(run_steps(st, len(table), incr_table=table))
        errs = [float(hnorm(sols[d] - sols[d / 2])) for d in deltas[:3]]
        ratios = [errs[i] / errs[i + 1] for i in range(2)]
        assert all(1.7 <= r <= 2.3 for r in ratios)

    def test_midpoint_order_two_deterministic(self):
        cfg = SimConfig(N=8, s=1.0, gamma=0.5, alpha=0.25, integrator="midpoint")
        u0 = random_pair(8, RNG)
        T, deltas = 1.0, [1e-2, 5e-3, 2.5e-3, 1.25e-3]
        sols = {}
        for d in deltas:
            c = dataclasses.replace(cfg, dt=d)
            st = flow_init(c, u0, seed=1)
            n = round(T / d)
            sols[d] = full_flow(run_steps(st, n, incr_table=zero_increments(8, d, n)))
        errs = [float(hnorm(sols[d] - sols[d / 2])) for d in deltas[:3]]
        ratios = [errs[i] / errs[i + 1] for i in range(2)]
        assert all(3.4 <= r <= 4.6 for r in ratios)

    def test_against_dense_ode_oracle(self):
        # noise off, N=2: compare with an adaptive ODE solve of the full
        # 2 (2N+1)^2 spectral system (midpoint keeps the gap below 1e-6)
        N, T = 2, 1.0
        cfg = SimConfig(N=N, s=1.0, gamma=0.3, dt=2.5e-4, integrator="midpoint")
        u0 = random_pair(N, RNG, decay=2.0)
        K = 2 * N + 1
        lam = 1.0 + grad2_table(N)

        def rhs(t, y):
            z = y.reshape(2, K, K, 2)
            pair = z[..., 0] + 1j * z[..., 1]
            nl = nonlinearity_field(zero_pair(N), zero_pair(N), pair, cfg.gamma, N)
            # remainder ODE: u' = ut, ut' = -ut - lam u - NL(u)
            du = pair[1]
            dut = -pair[1] - lam * pair[0] - nl
            out = np.stack([du, dut])
            return np.stack([out.real, out.imag], axis=-1).ravel()

        y0 = np.stack([u0.real, u0.imag], axis=-1).ravel()
        sol = solve_ivp(rhs, (0.0, T), y0, rtol=1e-10, atol=1e-12,
                        method="RK45", dense_output=False)
        zT = sol.y[:, -1].reshape(2, K, K, 2)
        oracle = zT[..., 0] + 1j * zT[..., 1]

        # same dynamics through v_step: u0 enters as the v initial value by
        # driving with zero data/noise and nonzero v -- emulate by folding
        # u0 into the flow's initial data, so full_flow solves the same ODE
        st = flow_init(cfg, u0, seed=0)
        n = round(T / cfg.dt)
        st = run_steps(st, n, incr_table=zero_increments(N, cfg.dt, n))
        got = full_flow(st)
        assert float(hnorm(got - oracle)) < 1e-6

    def test_blowup_signal(self):
        cfg = SimConfig(N=2, dt=0.5, blowup_threshold=1e3)
        huge = zero_pair(2)
        huge[0, 2, 2] = 50.0
        st = flow_init(cfg, huge, seed=0)
        with pytest.raises(BlowUpError):
            run_steps(st, 50, incr_table=zero_increments(2, cfg.dt, 50))

    def test_odd_symmetry(self):
        # negating data and noise path negates the solution
        cfg = SimConfig(N=4, s=1.0, gamma=0.7, dt=0.02)
        u0 = random_pair(4, RNG)
        incr = fine_increments(4, cfg.dt, 50, 17)
        plus = flow_init(cfg, u0, seed=17)
        minus = flow_init(cfg, -u0, seed=17)
        plus = run_steps(plus, 50, incr_table=[NoiseIncrement(c, cfg.dt) for c in incr])
        minus = run_steps(minus, 50,
                          incr_table=[NoiseIncrement(-c, cfg.dt) for c in incr])
        assert float(hnorm(full_flow(plus) + full_flow(minus))) < 1e-12

    def test_linearity_with_cubic_disabled(self):
        cfg = SimConfig(N=4, s=1.0, linear_only=True, dt=0.05)
        u0 = random_pair(4, RNG)
        st = flow_init(cfg, u0, seed=9)
        st = run_steps(st, 30)
        from sdnlw.propagator import apply_S
        expect = apply_S(u0, st.t) + st.stick.value
        assert float(hnorm(full_flow(st) - expect)) < 1e-12
        assert np.all(st.v == 0)

    def test_n_convergence_of_remainder(self):
        # sup_t |v_N - v_{2N}|_{H1} decreases monotonically over N = 4, 8, 16
        # for fixed smooth data and one fixed noise realization
        from sdnlw.spectral import embed
        T, dt = 1.0, 5e-3
        fine = fine_increments(16, dt, round(T / dt), 23)
        u0_full = random_pair(16, np.random.default_rng(2), decay=3.0)
        snaps = {}
        for N in (4, 8, 16):
            cfg = SimConfig(N=N, s=1.0, gamma=0.2, dt=dt)
            st = flow_init(cfg, u0_full, seed=23)
            vs = []
            for k, c in enumerate(fine):
                st = v_step(st, incr=NoiseIncrement(spectral.resize(c, N), dt))
                if (k + 1) % 10 == 0:
                    vs.append(embed(st.v, 16))
            snaps[N] = np.stack(vs)
        d48 = float(np.max(hnorm(snaps[4] - snaps[8])))
        d816 = float(np.max(hnorm(snaps[8] - snaps[16])))
        assert d816 < d48


class TestFullFlow:
    def test_t0_returns_initial_data(self):
        cfg = SimConfig(N=4, s=1.0, gamma=0.3)
        u0 = random_pair(4, RNG)
        st = flow_init(cfg, u0, seed=1)
        assert np.array_equal(full_flow(st), u0)


class TestEnergies:
    def test_constant_pair_closed_form(self):
        v = zero_pair(4)
        v[0, 4, 4], v[1, 4, 4] = 1.0, 0.0
        assert float(energy(v, 4)) == pytest.approx(0.875, abs=1e-14)
        v[0, 4, 4], v[1, 4, 4] = 2.0, -1.0
        expect = 0.5 + 2.0 + 0.0 + 4.0 + 0.125
        assert float(energy(v, 4)) == pytest.approx(expect, abs=1e-12)

    def test_zero(self):
        assert float(energy(zero_pair(3), 3)) == 0.0

    def test_coercivity(self):
        for _ in range(100):
            v = random_pair(4, RNG)
            e = float(energy(v, 4))
            w = project_leq(v, 4)
            homog = 0.5 * float(
                np.sum(omega_table(4) ** 2 * np.abs(w[0]) ** 2)
                + np.sum(np.abs(w[1]) ** 2))
            assert e >= homog - 1e-12

    def test_modified_energy_reduces_when_a_zero(self):
        v = random_pair(4, RNG)
        coeffs = cubic_coefficients(zero_pair(4), zero_field(4), 0.0, 0.0, 4)
        f = float(modified_energy_F(v, coeffs, 4))
        e = float(energy(v, 4))
        wt = project_leq(v[1], 4)
        assert f == pytest.approx(e - 0.125 * float(np.sum(np.abs(wt) ** 2)),
                                  rel=1e-12)

    def test_zero_v_gives_zero_F(self):
        coeffs = cubic_coefficients(random_pair(4, RNG), random_field(4, RNG),
                                    0.5, 0.3, 4)
        assert float(modified_energy_F(zero_pair(4), coeffs, 4)) == 0.0

    def test_sandwich_inequalities(self):
        # F <= 5/4 E + C (|u0|_X + |psi|_L6)^6 and E <= 2F + 2C (...)^6;
        # the empirical constant over 100 draws stays finite and moderate
        worst = 0.0
        for k in range(100):
            v = random_pair(4, RNG)
            u0 = random_pair(4, RNG)
            psi = random_field(4, RNG)
            coeffs = cubic_coefficients(u0, psi, 0.1, 0.4, 4)
            e = float(energy(v, 4))
            f = float(modified_energy_F(v, coeffs, 4))
            base = (float(xalpha_norm(project_leq(u0, 4), 0.25))
                    + float(spectral.lp_norm(psi, 6.0))) ** 6
            c1 = max(f - 1.25 * e, 0.0) / base
            c2 = max(e - 2.0 * f, 0.0) / (2.0 * base)
            worst = max(worst, c1, c2)
        assert np.isfinite(worst) and worst < 10.0


class TestRestart:
    def test_linear_restart_exact(self):
        cfg = SimConfig(N=6, s=1.0, dt=0.05, linear_only=True)
        u0 = random_pair(6, RNG)
        assert restart_check(cfg, u0, 1.0, 1.0, seed=4) < 1e-12

    def test_h_zero(self):
        cfg = SimConfig(N=4, s=1.0, gamma=0.2, dt=0.05)
        assert restart_check(cfg, random_pair(4, RNG), 1.0, 0.0, seed=4) == 0.0

    def test_full_dynamics_restart_at_roundoff(self):
        # the exponential integrator satisfies the restart identity exactly;
        # the residual sits at the round-off floor for every step size
        cfg = SimConfig(N=8, s=1.0, gamma=0.4, dt=0.01)
        u0 = random_pair(8, RNG)
        for dt in (1e-2, 5e-3):
            c = dataclasses.replace(cfg, dt=dt)
            assert restart_check(c, u0, 1.0, 1.0, seed=6) < 1e-10

    def test_rejects_nonaligned_times(self):
        cfg = SimConfig(N=4, dt=0.05)
        with pytest.raises(ValueError):
            restart_check(cfg, None, 0.33, 0.5)


class TestEnergyBoundedness:
    def test_no_trend_over_late_window(self):
        cfg = SimConfig(N=8, s=1.0, gamma=0.0, alpha=0.25, dt=0.05)
        st = flow_init(cfg, None, seed=[70 + i for i in range(10)], batch=(10,))
        ts, es = [], []
        for k in range(2000):
            st = v_step(st)
            if (k + 1) % 10 == 0:
                ts.append(st.t)
                es.append(energy(st.v, 8))
        ts, es = np.array(ts), np.array(es)
        assert np.all(np.isfinite(es))
        mask = ts >= 50.0
        slopes = [np.polyfit(ts[mask], es[mask][:, j], 1)[0] for j in range(10)]
        ci = 2.262 * np.std(slopes, ddof=1) / np.sqrt(10)
        assert abs(np.mean(slopes)) <= ci
