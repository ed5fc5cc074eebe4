"""Lattice representation, transforms, dealiased products, and norms."""

import numpy as np
import pytest

from sdnlw import spectral
from sdnlw.spectral import (
    SpectralGrid,
    ResolutionError,
    bracket_multiplier,
    convolution_oracle,
    dealiased_product,
    hermitian_defect,
    hermitize,
    l2_inner,
    pair_norm,
    project_leq,
    random_field,
    random_pair,
    sobolev_norm,
    to_physical,
    to_spectral,
    zero_field,
)
from _utils import cosine_field, cosine_pair

RNG = np.random.default_rng(101)


class TestProjection:
    def test_mode_outside_square_is_killed(self):
        f = zero_field(4)
        f[4 + 3, 4] = 1.0
        f[4 - 3, 4] = 1.0
        assert np.all(project_leq(f, 2) == 0)

    def test_minus_one_gives_zero_field(self):
        f = random_field(4, RNG)
        assert np.all(project_leq(f, -1) == 0)

    def test_full_cutoff_is_identity(self):
        f = random_field(4, RNG)
        assert np.array_equal(project_leq(f, 4), f)
        assert np.array_equal(project_leq(f, 9), f)

    def test_idempotent_and_self_adjoint(self):
        f = random_field(6, RNG)
        g = random_field(6, RNG)
        p = project_leq(f, 3)
        assert np.array_equal(project_leq(p, 3), p)
        lhs = l2_inner(p, g)
        rhs = l2_inner(f, project_leq(g, 3))
        assert abs(lhs - rhs) < 1e-13


class TestBracketMultiplier:
    def test_zero_mode_sigma_one(self):
        f = spectral.constant_field(4, 1.0)
        g = bracket_multiplier(f, 1.0)
        assert g[4, 4] == pytest.approx(np.sqrt(0.75), abs=1e-15)

    def test_sigma_zero_is_identity(self):
        f = random_field(5, RNG)
        assert np.array_equal(bracket_multiplier(f, 0.0), f)

    def test_mode_10_sigma_minus_two(self):
        f = cosine_field(3, (1, 0))
        g = bracket_multiplier(f, -2.0)
        expect = 0.5 / (0.75 + 4 * np.pi**2)
        assert g[4, 3] == pytest.approx(expect, rel=1e-14)

    def test_multipliers_compose(self):
        f = random_field(6, RNG)
        back = bracket_multiplier(bracket_multiplier(f, 0.85), -0.85)
        assert np.max(np.abs(back - f)) < 1e-13


class TestTransforms:
    def test_constant_field(self):
        f = spectral.constant_field(3, 2.5)
        phys = to_physical(f, 9)
        assert np.allclose(phys, 2.5, atol=1e-14)

    def test_single_mode_evaluation(self):
        M = 12
        phys = to_physical(cosine_field(2, (1, 0)), M)
        j = np.arange(M)
        expect = np.cos(2 * np.pi * j / M)[:, None] * np.ones(M)[None, :]
        assert np.max(np.abs(phys - expect)) < 1e-14

    def test_round_trip_identity(self):
        f = random_field(8, RNG, batch=(3,))
        for M in (17, 26, 32):
            rt = to_spectral(to_physical(f, M), 8)
            assert np.max(np.abs(rt - f)) < 1e-12

    def test_resolution_error(self):
        f = random_field(8, RNG)
        with pytest.raises(ResolutionError):
            to_physical(f, 16)

    def test_hermitian_symmetry_preserved(self):
        f = random_field(6, RNG)
        for g in (project_leq(f, 3), bracket_multiplier(f, 0.4),
                  dealiased_product(f, f), to_spectral(to_physical(f, 20), 6)):
            assert hermitian_defect(g) < 1e-12


class TestDealiasedProduct:
    def test_cosine_cube(self):
        # cos^3 t = (3 cos t + cos 3t)/4
        f = cosine_field(3, (1, 0))
        cube = dealiased_product(f, f, f, out_N=3)
        assert cube[3 + 1, 3] == pytest.approx(3 / 8, abs=1e-15)
        assert cube[3 + 3, 3] == pytest.approx(1 / 8, abs=1e-15)
        assert abs(cube[3, 3]) < 1e-15

    def test_constants_multiply(self):
        f = spectral.constant_field(2, 3.0)
        g = spectral.constant_field(2, -0.5)
        prod = dealiased_product(f, g)
        assert spectral.integral(prod) == pytest.approx(-1.5, abs=1e-14)
        assert np.sum(np.abs(prod)) == pytest.approx(1.5, abs=1e-14)

    def test_against_direct_convolution(self):
        for N in (2, 4, 6):
            f = random_field(N, RNG)
            g = random_field(N, RNG)
            direct = convolution_oracle(f, g)
            fast = dealiased_product(f, g)
            assert np.max(np.abs(fast - direct)) < 1e-12

    def test_truncated_output_matches_oracle(self):
        f = random_field(4, RNG)
        g = random_field(4, RNG)
        h = random_field(4, RNG)
        full = convolution_oracle(convolution_oracle(f, g), h)
        got = dealiased_product(f, g, h, out_N=4)
        sl = slice(12 - 4, 12 + 5)
        assert np.max(np.abs(got - full[sl, sl])) < 1e-12

    def test_mixed_truncations(self):
        f = random_field(2, RNG)
        g = random_field(5, RNG)
        assert np.max(np.abs(dealiased_product(f, g)
                             - convolution_oracle(f, g))) < 1e-12


class TestNorms:
    def test_constant_field_all_alpha_p(self):
        f = spectral.constant_field(4, -1.7)
        for alpha in (-1.0, 0.0, 0.6):
            for p in (2.0, 4.0, 16.0):
                expect = 1.7 * 0.75 ** (alpha / 2.0)
                assert sobolev_norm(f, alpha, p) == pytest.approx(expect, rel=1e-12)

    def test_cosine_l2(self):
        f = cosine_field(4, (1, 0))
        assert sobolev_norm(f, 0.0, 2.0) == pytest.approx(1 / np.sqrt(2), rel=1e-14)

    def test_p2_equals_plancherel(self):
        f = random_field(6, RNG)
        alpha = 0.8
        plancherel = np.sqrt(np.sum(
            spectral.omega_table(6) ** (2 * alpha) * np.abs(f) ** 2))
        assert sobolev_norm(f, alpha, 2.0) == pytest.approx(plancherel, rel=1e-12)

    def test_quadrature_vs_high_resolution_oracle(self):
        # p = 4 at padding 2 resolves |g|^4 exactly, so 8x padding agrees
        f = random_field(4, RNG)
        a = sobolev_norm(f, 1.0, 4.0, pad=2.0)
        b = sobolev_norm(f, 1.0, 4.0, pad=8.0)
        assert a == pytest.approx(b, abs=1e-8 * max(a, 1.0))

    def test_pair_norm_cases(self):
        assert pair_norm(spectral.zero_pair(4), 0.3, 2.0) == 0.0
        c = spectral.zero_pair(4)
        c[0, 4, 4] = 2.0
        assert pair_norm(c, 0.5, 2.0) == pytest.approx(
            2.0 * 0.75**0.25, rel=1e-13)
        v = cosine_pair(4, (1, 0), component=1)
        # alpha = 1: velocity weight <n>^0, Plancherel gives 1/sqrt(2)
        assert pair_norm(v, 1.0, 2.0) == pytest.approx(1 / np.sqrt(2), rel=1e-13)


class TestGridAndHermitize:
    def test_grid_validation(self):
        with pytest.raises(ResolutionError):
            SpectralGrid(4, 8)
        g = SpectralGrid.for_truncation(4)
        assert g.M == 14 and g.K == 9

    def test_hermitize_projects(self):
        z = RNG.standard_normal((9, 9)) + 1j * RNG.standard_normal((9, 9))
        h = hermitize(z)
        assert hermitian_defect(h) < 1e-15
        assert abs(h[4, 4].imag) < 1e-16
        # idempotent
        assert np.max(np.abs(hermitize(h) - h)) < 1e-16

    def test_random_pair_is_hermitian(self):
        p = random_pair(5, RNG, batch=(2,))
        assert hermitian_defect(p[..., 0, :, :]) < 1e-14
        assert hermitian_defect(p[..., 1, :, :]) < 1e-14
