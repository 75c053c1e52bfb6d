import json
import math

import numpy as np
import pytest

from vortexmc.dynamics import VortexConfiguration
from vortexmc.gibbs import discrete_prior, rademacher_prior, uniform_prior
from vortexmc.spectral import Mode, COSINE
from vortexmc.testfn import (TestFunction, constant, eval_test_function,
                             from_json_dict, load_json, mean_under_product,
                             pair_empirical, pair_fluctuation,
                             pair_pseudo_vorticity, prior_moments,
                             random_test_function, save_json, single_mode,
                             to_json_dict)


def grid_points(n=64):
    ticks = np.arange(n) / n
    xx, yy = np.meshgrid(ticks, ticks, indexing="ij")
    return np.column_stack([xx.ravel(), yy.ravel()])


def loop_pairing(psi, config):
    return sum(eval_test_function(psi, g, x)
               for g, x in zip(config.gammas, config.positions)) / config.n


class TestEvaluation:
    def test_constant(self):
        psi = constant(3.5)
        assert eval_test_function(psi, 2.0, [0.3, 0.9]) == 3.5

    def test_gamma_times_cosine(self):
        psi = single_mode(1, 0, "cos")
        assert eval_test_function(psi, 2.0, [0.0, 0.0]) == pytest.approx(2 * math.sqrt(2))
        assert eval_test_function(psi, 2.0, [0.25, 0.7]) == pytest.approx(0.0, abs=1e-14)

    def test_x_average_recovers_gamma_part(self, rng):
        for _ in range(5):
            psi = random_test_function(rng)
            gamma = float(rng.uniform(-2, 2))
            pts = grid_points()
            avg = float(np.mean(psi(np.full(len(pts), gamma), pts)))
            expected = float(np.polynomial.polynomial.polyval(gamma, psi.gamma_part))
            assert abs(avg - expected) < 1e-10

    def test_fluctuation_part_has_zero_mean(self, rng):
        # psi - gamma_part integrates to zero in x for every gamma
        psi = random_test_function(rng)
        pts = grid_points()
        for gamma in (-1.0, 0.3, 2.0):
            vals = psi(np.full(len(pts), gamma), pts)
            ell = float(np.polynomial.polynomial.polyval(gamma, psi.gamma_part))
            assert abs(np.mean(vals - ell)) < 1e-10

    def test_degree_cap(self):
        with pytest.raises(ValueError, match="degree"):
            TestFunction(gamma_part=np.ones(10))

    def test_duplicate_mode_rejected(self):
        md = Mode(1, 0, COSINE, 4 * math.pi ** 2)
        with pytest.raises(ValueError, match="duplicate"):
            TestFunction(gamma_part=[0.0], terms=((md, [1.0]), (md, [2.0])))


class TestPriorMoments:
    def test_rademacher_square(self, rademacher):
        assert prior_moments(rademacher, [0.0, 0.0, 1.0]) == 1.0

    def test_uniform_square(self, uniform_sym):
        assert prior_moments(uniform_sym, [0.0, 0.0, 1.0]) == pytest.approx(1 / 3)

    def test_discrete_quartic_vs_direct_sum(self):
        prior = discrete_prior([(-2.0, 0.5), (2.0, 0.5)])
        poly = [0.0, 0.0, 0.0, 0.0, 1.0]
        direct = sum(w * np.polynomial.polynomial.polyval(v, poly)
                     for v, w in prior.atoms)
        assert prior_moments(prior, poly) == pytest.approx(direct) == 16.0

    def test_general_polynomial(self, uniform_sym):
        # 2 + 3 gamma - gamma^2 against uniform(-1, 1)
        assert prior_moments(uniform_sym, [2.0, 3.0, -1.0]) == pytest.approx(2 - 1 / 3)


class TestPairings:
    def test_constant_pairing(self, rng):
        cfg = VortexConfiguration(rng.normal(size=6), rng.random((6, 2)))
        assert pair_empirical(constant(2.5), cfg) == pytest.approx(2.5)

    def test_single_vortex(self, rng):
        psi = single_mode(1, 1, "sin")
        cfg = VortexConfiguration([1.3], rng.random((1, 2)))
        assert pair_empirical(psi, cfg) == pytest.approx(
            eval_test_function(psi, 1.3, cfg.positions[0]))

    def test_matches_loop_oracle(self, rng):
        psi = random_test_function(rng)
        cfg = VortexConfiguration(rng.normal(size=8), rng.random((8, 2)))
        assert pair_empirical(psi, cfg) == pytest.approx(loop_pairing(psi, cfg),
                                                         abs=1e-14)

    def test_fluctuation_of_constant_is_zero(self, rademacher, rng):
        cfg = VortexConfiguration(rademacher.sample(rng, 5), rng.random((5, 2)))
        assert pair_fluctuation(constant(4.0), cfg, rademacher) == 0.0

    def test_fluctuation_matches_oracle(self, uniform_sym, rng):
        psi = random_test_function(rng)
        cfg = VortexConfiguration(uniform_sym.sample(rng, 8), rng.random((8, 2)))
        expected = math.sqrt(8) * (loop_pairing(psi, cfg)
                                   - prior_moments(uniform_sym, psi.gamma_part))
        assert pair_fluctuation(psi, cfg, uniform_sym) == pytest.approx(expected,
                                                                        abs=1e-12)

    def test_fluctuation_centered_under_iid(self, rademacher, rng):
        psi = single_mode(1, 0, "cos", gamma_coeffs=[0.0, 1.0])
        n, reps = 64, 400
        vals = np.empty(reps)
        for i in range(reps):
            cfg = VortexConfiguration(rademacher.sample(rng, n), rng.random((n, 2)))
            vals[i] = pair_fluctuation(psi, cfg, rademacher)
        se = vals.std(ddof=1) / math.sqrt(reps)
        assert abs(vals.mean()) <= 3 * se

    def test_pairing_linear_in_psi(self, uniform_sym, rng):
        p1 = random_test_function(rng)
        p2 = random_test_function(rng)
        cfg = VortexConfiguration(uniform_sym.sample(rng, 6), rng.random((6, 2)))
        a, b = 2.0, -0.7
        combined = a * pair_empirical(p1, cfg) + b * pair_empirical(p2, cfg)
        direct = np.mean(a * p1(cfg.gammas, cfg.positions)
                         + b * p2(cfg.gammas, cfg.positions))
        assert combined == pytest.approx(float(direct), abs=1e-13)


class TestPseudoVorticity:
    def test_unit_function_gives_mean_intensity(self, rng):
        cfg = VortexConfiguration(rng.normal(size=6), rng.random((6, 2)))
        assert pair_pseudo_vorticity(constant(1.0), cfg) == pytest.approx(
            float(np.mean(cfg.gammas)))

    def test_zero_intensities(self, rng):
        psi = single_mode(2, 1, "cos", gamma_coeffs=[1.0])
        cfg = VortexConfiguration(np.zeros(5), rng.random((5, 2)))
        assert pair_pseudo_vorticity(psi, cfg) == 0.0

    def test_matches_loop_oracle(self, rng):
        psi = random_test_function(rng, spatial_only=True)
        cfg = VortexConfiguration(rng.normal(size=7), rng.random((7, 2)))
        expected = sum(g * eval_test_function(psi, 0.0, x)
                       for g, x in zip(cfg.gammas, cfg.positions)) / 7
        assert pair_pseudo_vorticity(psi, cfg) == pytest.approx(expected, abs=1e-14)

    def test_rejects_gamma_dependent_input(self, rng):
        psi = single_mode(1, 0, "cos")  # coefficient gamma
        cfg = VortexConfiguration([1.0], [[0.1, 0.1]])
        with pytest.raises(ValueError, match="gamma-independent"):
            pair_pseudo_vorticity(psi, cfg)


class TestJson:
    def test_round_trip_dict(self, rng):
        psi = random_test_function(rng)
        again = from_json_dict(to_json_dict(psi))
        assert np.array_equal(again.gamma_part, psi.gamma_part)
        assert len(again.terms) == len(psi.terms)
        for (ma, ca), (mb, cb) in zip(again.terms, psi.terms):
            assert (ma.k1, ma.k2, ma.parity) == (mb.k1, mb.k2, mb.parity)
            assert np.array_equal(ca, cb)

    def test_file_round_trip(self, tmp_path, rng):
        psi = random_test_function(rng)
        path = tmp_path / "psi.json"
        save_json(psi, path)
        data = json.loads(path.read_text())
        assert set(data) == {"gamma_poly", "terms"}
        assert set(data["terms"][0]) == {"k1", "k2", "parity", "poly"}
        loaded = load_json(path)
        g = 0.37
        x = np.array([0.21, 0.68])
        assert eval_test_function(loaded, g, x) == pytest.approx(
            eval_test_function(psi, g, x), abs=1e-14)

    def test_iid_lln_rate(self, uniform_sym, rng):
        # beta = 0 control: variance of the pairing decays like Var(psi)/N
        psi = single_mode(1, 0, "cos")
        for n in (16, 64):
            vals = np.array([
                pair_empirical(psi, VortexConfiguration(
                    uniform_sym.sample(rng, n), rng.random((n, 2))))
                for _ in range(600)
            ])
            target_var = uniform_sym.gamma_sq / n  # Var(gamma)*||e||^2 / N
            ratio = vals.var(ddof=1) / target_var
            assert 0.7 < ratio < 1.4
