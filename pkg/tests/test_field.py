import math

import numpy as np
import pytest
from scipy import special

from vortexmc.dynamics import VortexConfiguration
from vortexmc.field import (check_char_bound, eval_field, sample_field,
                            verify_gaussian_rep)
from vortexmc.spectral import COSINE, basis_matrix, green, green_diag
from vortexmc.testfn import TestFunction, random_test_function, single_mode


def draw_coefficient_matrix(table, beta, n, rng):
    return rng.standard_normal((n, table.n_modes)) * np.sqrt(beta * table.g)


class TestSampling:
    def test_requires_positive_beta(self, table_m1_eps02, rng):
        with pytest.raises(ValueError, match="positive temperature"):
            sample_field(table_m1_eps02, 0.0, rng)

    def test_identical_seeds_identical_samples(self, table_m1_eps02):
        a = sample_field(table_m1_eps02, 1.0, np.random.default_rng(9))
        b = sample_field(table_m1_eps02, 1.0, np.random.default_rng(9))
        assert np.array_equal(a.coeffs, b.coeffs)

    def test_variance_at_origin(self, table_m1_eps02, rng):
        beta, n = 1.5, 100_000
        coeffs = draw_coefficient_matrix(table_m1_eps02, beta, n, rng)
        b0 = basis_matrix(table_m1_eps02, [0.0, 0.0])[0]
        u0 = coeffs @ b0
        target = beta * green_diag(table_m1_eps02)
        se = target * math.sqrt(2.0 / n)
        assert abs(u0.var() - target) <= 3 * se

    def test_fourth_moment_gaussian(self, table_m1_eps02, rng):
        beta, n = 1.0, 100_000
        coeffs = draw_coefficient_matrix(table_m1_eps02, beta, n, rng)
        x = rng.random(2)
        u = coeffs @ basis_matrix(table_m1_eps02, x)[0]
        sigma_sq = beta * green_diag(table_m1_eps02)
        target = 3.0 * sigma_sq ** 2  # = 3 beta^2 G(0,0)^2
        se = math.sqrt(96.0) * sigma_sq ** 2 / math.sqrt(n)
        assert abs(np.mean(u ** 4) - target) <= 3 * se

    def test_covariance_matches_kernel(self, table_m1_eps02, rng):
        beta, n = 0.8, 100_000
        coeffs = draw_coefficient_matrix(table_m1_eps02, beta, n, rng)
        pts = rng.random((10, 2))
        u = coeffs @ basis_matrix(table_m1_eps02, pts).T
        for _ in range(20):
            i, j = rng.integers(10, size=2)
            empirical = float(np.mean(u[:, i] * u[:, j]))
            target = beta * green(table_m1_eps02, pts[i], pts[j])
            spread = math.sqrt(
                float(np.var(u[:, i] * u[:, j], ddof=1)) / n)
            assert abs(empirical - target) <= 4 * spread


class TestEvalField:
    def test_zero_coefficients(self, table_m1_eps02, rng):
        fs = sample_field(table_m1_eps02, 1.0, rng)
        fs.coeffs = np.zeros_like(fs.coeffs)
        assert eval_field(fs, rng.random(2)) == 0.0

    def test_single_unit_coefficient(self, table_m1_eps02, rng):
        fs = sample_field(table_m1_eps02, 1.0, rng)
        fs.coeffs = np.zeros_like(fs.coeffs)
        idx = next(i for i, md in enumerate(table_m1_eps02.modes)
                   if (md.k1, md.k2, md.parity) == (1, 0, COSINE))
        fs.coeffs[idx] = 1.0
        for x in rng.random((5, 2)):
            assert eval_field(fs, x) == pytest.approx(
                math.sqrt(2) * math.cos(2 * math.pi * x[0]), abs=1e-13)

    def test_zero_spatial_mean(self, table_m1_eps02, rng):
        fs = sample_field(table_m1_eps02, 2.0, rng)
        n = 128
        ticks = np.arange(n) / n
        xx, yy = np.meshgrid(ticks, ticks, indexing="ij")
        pts = np.column_stack([xx.ravel(), yy.ravel()])
        assert abs(np.mean(eval_field(fs, pts))) < 1e-10


class TestGaussianRepresentation:
    def test_insufficient_samples(self, table_m1_eps02, rng):
        cfg = VortexConfiguration([1.0], [[0.2, 0.2]])
        with pytest.raises(ValueError, match="insufficient samples"):
            verify_gaussian_rep(cfg, 1.0, table_m1_eps02, 50, rng)

    def test_coincident_positions_rejected(self, table_m1_eps02, rng):
        cfg = VortexConfiguration([1.0, 1.0], [[0.2, 0.2], [0.2, 0.2]])
        with pytest.raises(ValueError, match="distinct"):
            verify_gaussian_rep(cfg, 1.0, table_m1_eps02, 1000, rng)

    def test_single_vortex_reduces_to_identity(self, table_m1_eps02, rng):
        cfg = VortexConfiguration([1.3], [[0.4, 0.7]])
        rep = verify_gaussian_rep(cfg, 1.0, table_m1_eps02, 200_000, rng)
        assert rep.lhs == 1.0
        assert abs(rep.rhs_mean - 1.0) <= 3 * rep.rhs_stderr

    def test_small_beta_limit(self, table_m1_eps02, rng):
        cfg = VortexConfiguration([1.0, -1.0], [[0.1, 0.1], [0.6, 0.4]])
        rep = verify_gaussian_rep(cfg, 1e-8, table_m1_eps02, 1000, rng)
        assert abs(rep.lhs - 1.0) < 1e-6
        assert abs(rep.rhs_mean - 1.0) < 1e-6

    def test_four_vortex_identity(self, table_m1_eps02, rng):
        cfg = VortexConfiguration([1.0, -1.0, 1.0, -1.0],
                                  [[0.1, 0.2], [0.5, 0.8], [0.3, 0.3], [0.9, 0.6]])
        rep = verify_gaussian_rep(cfg, 1.0, table_m1_eps02, 100_000, rng)
        assert abs(rep.lhs - rep.rhs_mean) <= 3 * rep.rhs_stderr
        assert abs(rep.rhs_imag) <= 5 * rep.rhs_stderr

    def test_random_small_systems(self, table_m1_eps02, rng):
        # identity holds across N <= 6, beta <= 2
        for n, beta in [(2, 2.0), (3, 0.5), (6, 1.5)]:
            cfg = VortexConfiguration(rng.choice([-1.0, 1.0], n), rng.random((n, 2)))
            rep = verify_gaussian_rep(cfg, beta, table_m1_eps02, 200_000, rng)
            assert abs(rep.lhs - rep.rhs_mean) <= 3 * rep.rhs_stderr


class TestCharBound:
    def test_zero_function(self):
        chk = check_char_bound(TestFunction(gamma_part=[0.0]), grid=64)
        assert chk.lhs == 0.0 and chk.rhs == 0.0

    def test_small_cosine_against_bessel_oracle(self):
        # f = c sqrt(2) cos(2 pi x1): int e^{if} reduces to a Bessel average
        c = 0.1
        psi = single_mode(1, 0, "cos", gamma_coeffs=[c])
        chk = check_char_bound(psi, grid=256)
        oracle = abs(special.j0(c * math.sqrt(2)) - math.exp(-0.5 * c * c))
        assert chk.lhs == pytest.approx(oracle, abs=1e-12)
        assert chk.lhs <= chk.rhs
        assert chk.lhs < 10 * c ** 4  # fourth order, well under the cubic bound

    def test_cubic_homogeneity(self):
        base = single_mode(1, 2, "sin", gamma_coeffs=[0.3])
        scaled = single_mode(1, 2, "sin", gamma_coeffs=[0.3 * 1.7])
        a = check_char_bound(base, grid=128)
        b = check_char_bound(scaled, grid=128)
        assert b.rhs == pytest.approx(1.7 ** 3 * a.rhs, rel=1e-12)

    def test_randomized_suite_never_violates(self, rng):
        for _ in range(25):
            psi = random_test_function(rng, spatial_only=True)
            pts = np.arange(128) / 128
            xx, yy = np.meshgrid(pts, pts, indexing="ij")
            grid_pts = np.column_stack([xx.ravel(), yy.ravel()])
            sup = float(np.max(np.abs(psi(np.zeros(len(grid_pts)), grid_pts))))
            scale = 1.0 / sup if sup > 1.0 else 1.0
            scaled = TestFunction(
                gamma_part=[0.0],
                terms=tuple((md, coeffs * scale) for md, coeffs in psi.terms))
            chk = check_char_bound(scaled, grid=128)
            assert chk.lhs <= chk.rhs + 1e-8

    def test_rejects_nonzero_mean(self):
        with pytest.raises(ValueError, match="mean"):
            check_char_bound(TestFunction(gamma_part=[0.5]), grid=32)

    def test_rejects_gamma_dependence(self):
        with pytest.raises(ValueError, match="gamma-independent"):
            check_char_bound(single_mode(1, 0, "cos"), grid=32)
