"""Self-contained analytic-identity suite behind the ``verify`` CLI command.

Every check pits one implementation route against an independent one
(closed forms, direct convolution, exact linear theory) and reports a
pass/fail line with the measured defect.  No randomness leaves this module:
all draws are from fixed seeds.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import coupling, dynamics, noise, propagator, renorm, spectral
from .config import SimConfig


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    threshold: float

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.name:<44s} {self.value:.3e} (tol {self.threshold:.1e})"


def _leq(name, value, threshold):
    return CheckResult(name, bool(value <= threshold), float(value), float(threshold))


def run_identity_suite(cfg: SimConfig | None = None) -> list[CheckResult]:
    cfg = (cfg or SimConfig()).check()
    rng = np.random.default_rng(2024)
    out = []

    # semigroup law and Wronskian of the propagator
    v = spectral.random_pair(16, rng)
    out.append(_leq("propagator: semigroup law (rel)",
                    propagator.semigroup_defect(v, 1.3, 0.7), 1e-11))
    out.append(_leq("propagator: det = exp(-t)",
                    max(propagator.determinant_defect(16, t) for t in (0.3, 1.7, 6.0)),
                    1e-12))

    # projection: idempotent and self-adjoint
    f = spectral.random_field(8, rng)
    g = spectral.random_field(8, rng)
    p1 = spectral.project_leq(f, 5)
    out.append(_leq("projection: idempotent",
                    float(np.max(np.abs(spectral.project_leq(p1, 5) - p1))), 0.0))
    adj = abs(spectral.l2_inner(p1, g) - spectral.l2_inner(f, spectral.project_leq(g, 5)))
    out.append(_leq("projection: self-adjoint", float(adj), 1e-13))

    # multiplier composition (round-off level)
    comp = spectral.bracket_multiplier(spectral.bracket_multiplier(f, 0.7), -0.7) - f
    out.append(_leq("multiplier: <grad>^s <grad>^-s = id",
                    float(np.max(np.abs(comp))), 1e-13))

    # dealiased product vs direct convolution
    a = spectral.random_field(4, rng)
    b = spectral.random_field(4, rng)
    diff = spectral.dealiased_product(a, b) - spectral.convolution_oracle(a, b)
    out.append(_leq("product: FFT vs direct convolution",
                    float(np.max(np.abs(diff))), 1e-12))

    # Wick / coefficient polynomial identities (exact-degree arithmetic)
    psi = spectral.random_field(4, rng)
    u0 = spectral.random_pair(4, rng)
    gamma = 0.7
    coeffs = renorm.cubic_coefficients(u0, psi, 0.3, gamma, 4)
    vfld = spectral.random_field(4, rng)
    lhs = spectral.dealiased_product(vfld, vfld, vfld)
    lhs = spectral.add_fields(lhs,
                             spectral.dealiased_product(coeffs.a, vfld, vfld),
                             spectral.dealiased_product(coeffs.b, vfld),
                             coeffs.c)
    x = spectral.project_leq(propagator.apply_S(u0, 0.3)[..., 0, :, :], 4) + psi
    tot = spectral.add_fields(spectral.embed(x, 4), spectral.embed(vfld, 4))
    rhs = spectral.dealiased_product(tot, tot, tot) \
        - 3.0 * gamma * spectral.embed(tot, 3 * spectral.truncation_of(tot))
    out.append(_leq("coefficients: cubic expansion identity",
                    float(np.max(np.abs(lhs - rhs))), 1e-11))

    # Q factorization: N_g(u+v) - N_g(u) = Q(u,v) pi1 v
    up = spectral.random_pair(4, rng)
    vp = spectral.random_pair(4, rng)
    q = renorm.quadratic_Q(up, vp, gamma)
    su = up[0] + vp[0]
    cube = lambda z: spectral.dealiased_product(z, z, z) \
        - 3.0 * gamma * spectral.embed(z, 3 * spectral.truncation_of(z))
    lhsq = cube(su) - cube(up[0])
    rhsq = spectral.dealiased_product(q, vp[0])
    out.append(_leq("Q: factorization identity",
                    float(np.max(np.abs(lhsq - rhsq))), 1e-11))

    # mollifier: composition law
    m1 = coupling.mollify(coupling.mollify(f, 0.013), 0.007)
    m2 = coupling.mollify(f, 0.02)
    out.append(_leq("mollifier: heat-kernel composition",
                    float(np.max(np.abs(m1 - m2))), 1e-15))

    # noise covariance: PSD and flow-composition consistency
    cov_t = noise.lattice_covariance(6, 0.7, 1.0)
    cov_h = noise.lattice_covariance(6, 0.4, 1.0)
    cov_th = noise.lattice_covariance(6, 1.1, 1.0)
    eig = np.linalg.eigvalsh(cov_th)
    out.append(_leq("covariance: PSD (min eigenvalue)",
                    float(max(0.0, -eig.min())), 1e-14))
    tab = propagator.propagator_tables(6, 0.4)
    m = np.stack([np.stack([tab.m11, tab.m12], -1),
                  np.stack([tab.m21, tab.m22], -1)], -2)
    comp_cov = m @ cov_t @ np.swapaxes(m, -1, -2) + cov_h
    out.append(_leq("covariance: Sigma(t+h) = M Sigma M' + Sigma(h)",
                    float(np.max(np.abs(comp_cov - cov_th))), 1e-12))
    stat = noise.lattice_covariance(6, np.inf, 1.0)
    w2 = spectral.omega_table(6) ** 2
    pred11 = spectral.omega_table(6) ** (-2.0) / (0.25 + w2)
    out.append(_leq("covariance: stationary closed form",
                    float(np.max(np.abs(stat[..., 0, 0] - pred11))), 1e-13))

    # linear restart identity (exact for the linear flow)
    lin_cfg = replace(cfg, N=4, dt=0.05, linear_only=True, seed=11).check()
    res = dynamics.restart_check(lin_cfg, spectral.random_pair(4, rng), 0.5, 0.5)
    out.append(_leq("restart: linear flow residual", res, 1e-10))

    # zero fixed point of the remainder
    zcfg = replace(cfg, N=4, gamma=0.0, dt=0.05, seed=3).check()
    st = dynamics.flow_init(zcfg)
    zero_incr = noise.NoiseIncrement(spectral.zero_field(4), zcfg.dt)
    for _ in range(20):
        st = dynamics.v_step(st, incr=zero_incr)
    out.append(_leq("dynamics: v = 0 under zero data/noise",
                    float(spectral.hnorm(st.v)), 0.0))

    # energy closed form on a constant pair
    vpair = spectral.zero_pair(4)
    vpair[0, 4, 4] = 1.0
    out.append(_leq("energy: constant-pair closed form",
                    abs(float(dynamics.energy(vpair, 4)) - 0.875), 1e-14))

    # d_n pseudo-metric basics and the TV bound edges
    x = spectral.random_pair(4, rng)
    y = spectral.random_pair(4, rng)
    dxy = coupling.d_n(x, y, 2, cfg.alpha)
    dyx = coupling.d_n(y, x, 2, cfg.alpha)
    out.append(_leq("d_n: symmetry", float(abs(dxy - dyx)), 1e-12))
    out.append(_leq("d_n: bounded by one",
                    float(coupling.d_n(x, 1e9 * y, 2, cfg.alpha) - 1.0), 0.0))
    out.append(_leq("tv_bound: zero-moment edge",
                    abs(coupling.tv_bound(1.0, 0.0, 0.5) - 2.0 * (1 - np.exp(-0.5))),
                    1e-15))

    # Girsanov density of the zero shift
    dens = coupling.girsanov_density(
        [spectral.zero_field(4)] * 5,
        [noise.sample_increment(4, 0.1, 7, k) for k in range(5)], 0.1)
    out.append(_leq("girsanov: E(0) = 1 exactly", abs(float(dens) - 1.0), 0.0))

    return out


def format_table(results: list[CheckResult]) -> str:
    lines = [r.line() for r in results]
    n_pass = sum(r.passed for r in results)
    lines.append(f"{n_pass}/{len(results)} identity checks passed")
    return "\n".join(lines)
