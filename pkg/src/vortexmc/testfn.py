"""Band-limited observables psi(gamma, x) and their empirical pairings.

A test function is a polynomial in the intensity plus finitely many spatial
modes with polynomial-in-gamma coefficients:

    psi(gamma, x) = P(gamma) + sum_t p_t(gamma) e_t(x).

The x-average of psi is exactly P, and the fluctuation part is exactly the
modal sum, so prior moments and all limit-variance sums are finite and exact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as npoly

from .dynamics import VortexConfiguration
from .gibbs import IntensityPrior
from .spectral import COSINE, SINE, SQRT2, TWO_PI, Mode, _PARITY_CODES, _PARITY_NAMES

MAX_DEGREE = 8


def _clean_poly(coeffs):
    c = np.atleast_1d(np.asarray(coeffs, dtype=float))
    if c.ndim != 1:
        raise ValueError("polynomial coefficients must be one-dimensional")
    c = np.trim_zeros(c, "b")
    if len(c) == 0:
        c = np.zeros(1)
    if len(c) - 1 > MAX_DEGREE:
        raise ValueError(f"polynomial degree exceeds {MAX_DEGREE}")
    return c


@dataclass(frozen=True)
class TestFunction:
    """gamma_part holds the x-average; terms map modes to gamma-polynomials."""

    gamma_part: np.ndarray                 # ascending coefficients in gamma
    terms: tuple = ()                      # ((Mode, coeffs), ...)

    def __post_init__(self):
        object.__setattr__(self, "gamma_part", _clean_poly(self.gamma_part))
        cleaned = []
        seen = set()
        for mode, coeffs in self.terms:
            key = (mode.k1, mode.k2, mode.parity)
            if key in seen:
                raise ValueError("duplicate mode in test function")
            seen.add(key)
            cleaned.append((mode, _clean_poly(coeffs)))
        object.__setattr__(self, "terms", tuple(cleaned))

    @property
    def is_spatial(self):
        """True when the function does not depend on gamma."""
        return len(self.gamma_part) == 1 and all(len(c) == 1 for _, c in self.terms)

    def mode_basis(self, points):
        """Basis values of this function's own modes: (n_points, n_terms)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if not self.terms:
            return np.zeros((len(pts), 0))
        k = np.array([[md.k1, md.k2] for md, _ in self.terms], dtype=float)
        is_cos = np.array([md.parity == COSINE for md, _ in self.terms])
        phase = TWO_PI * (pts @ k.T)
        return np.where(is_cos, SQRT2 * np.cos(phase), SQRT2 * np.sin(phase))

    def __call__(self, gammas, points):
        """Vectorized evaluation at paired (gamma_j, x_j)."""
        gam = np.atleast_1d(np.asarray(gammas, dtype=float))
        vals = npoly.polyval(gam, self.gamma_part)
        basis = self.mode_basis(points)
        for t, (_, coeffs) in enumerate(self.terms):
            vals = vals + npoly.polyval(gam, coeffs) * basis[:, t]
        return vals


def constant(c: float) -> TestFunction:
    return TestFunction(gamma_part=np.array([float(c)]))


def single_mode(k1: int, k2: int, parity="cos", gamma_coeffs=(0.0, 1.0)) -> TestFunction:
    """p(gamma) * e_{(k1,k2),parity}(x); default p(gamma) = gamma."""
    lam = 4.0 * np.pi ** 2 * (k1 * k1 + k2 * k2)
    par = _PARITY_CODES[parity] if isinstance(parity, str) else parity
    mode = Mode(k1, k2, par, lam)
    return TestFunction(gamma_part=np.zeros(1), terms=((mode, np.asarray(gamma_coeffs)),))


def eval_test_function(psi: TestFunction, gamma: float, x) -> float:
    point = np.atleast_2d(np.asarray(x, dtype=float))
    return float(psi(np.array([gamma]), point)[0])


def prior_moments(prior: IntensityPrior, poly) -> float:
    """Exact integral of a gamma-polynomial against the prior, one moment per
    monomial."""
    coeffs = np.atleast_1d(np.asarray(poly, dtype=float))
    return float(sum(c * prior.moment(p) for p, c in enumerate(coeffs) if c != 0.0))


def mean_under_product(psi: TestFunction, prior: IntensityPrior) -> float:
    """Mean of psi under prior x uniform; the modal terms integrate to zero."""
    return prior_moments(prior, psi.gamma_part)


def pair_empirical(psi: TestFunction, config: VortexConfiguration) -> float:
    """(1/N) sum_j psi(gamma_j, X_j): pairing with the empirical measure."""
    return float(np.mean(psi(config.gammas, config.positions)))


def pair_fluctuation(psi: TestFunction, config: VortexConfiguration,
                     prior: IntensityPrior) -> float:
    """sqrt(N) (pair_empirical - mean under prior x uniform)."""
    centered = pair_empirical(psi, config) - mean_under_product(psi, prior)
    return float(np.sqrt(config.n) * centered)


def pair_pseudo_vorticity(psi: TestFunction, config: VortexConfiguration) -> float:
    """(1/N) sum_j gamma_j psi(X_j) for a gamma-independent psi."""
    if not psi.is_spatial:
        raise ValueError("pseudo-vorticity pairing requires a gamma-independent psi")
    vals = psi(np.zeros(config.n), config.positions)
    return float(np.mean(config.gammas * vals))


def to_json_dict(psi: TestFunction) -> dict:
    return {
        "gamma_poly": list(psi.gamma_part),
        "terms": [
            {"k1": md.k1, "k2": md.k2, "parity": _PARITY_NAMES[md.parity],
             "poly": list(coeffs)}
            for md, coeffs in psi.terms
        ],
    }


def from_json_dict(data: dict) -> TestFunction:
    terms = []
    for term in data.get("terms", ()):
        k1, k2 = int(term["k1"]), int(term["k2"])
        par = _PARITY_CODES[term["parity"]]
        lam = 4.0 * np.pi ** 2 * (k1 * k1 + k2 * k2)
        terms.append((Mode(k1, k2, par, lam), np.asarray(term["poly"], dtype=float)))
    return TestFunction(gamma_part=np.asarray(data.get("gamma_poly", [0.0]), dtype=float),
                        terms=tuple(terms))


def save_json(psi: TestFunction, path):
    with open(path, "w") as fh:
        json.dump(to_json_dict(psi), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_json(path) -> TestFunction:
    with open(path) as fh:
        return from_json_dict(json.load(fh))


def random_test_function(rng: np.random.Generator, max_wavenumber: int = 3,
                         max_terms: int = 4, max_degree: int = 4,
                         spatial_only: bool = False) -> TestFunction:
    """Random band-limited test function for randomized suites."""
    half = [(k1, k2)
            for k1 in range(0, max_wavenumber + 1)
            for k2 in range(-max_wavenumber, max_wavenumber + 1)
            if (k1 > 0 or k2 > 0) and k1 * k1 + k2 * k2 <= max_wavenumber ** 2]
    n_terms = int(rng.integers(1, max_terms + 1))
    picks = rng.choice(len(half), size=min(n_terms, len(half)), replace=False)

    def rand_poly():
        if spatial_only:
            return np.array([rng.normal()])
        deg = int(rng.integers(0, max_degree + 1))
        return rng.normal(size=deg + 1)

    terms = []
    for idx in picks:
        k1, k2 = half[idx]
        parity = COSINE if rng.random() < 0.5 else SINE
        lam = 4.0 * np.pi ** 2 * (k1 * k1 + k2 * k2)
        terms.append((Mode(k1, k2, parity, lam), rand_poly()))
    return TestFunction(gamma_part=rand_poly(), terms=tuple(terms))
