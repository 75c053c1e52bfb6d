"""Eigenbasis of the zero-mean Laplacian on the unit torus and the
regularized fractional Green function.

Conventions: torus [0,1)^2 with the normalized (= standard) Lebesgue
measure, eigenvalues lambda_k = 4 pi^2 |k|^2 over the half-lattice
{k1 > 0} u {k1 = 0, k2 > 0}, and the real orthonormal basis
sqrt(2) cos(2 pi k.x), sqrt(2) sin(2 pi k.x).  The constant mode is
excluded everywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * math.pi
SQRT2 = math.sqrt(2.0)
LAMBDA_MIN = 4.0 * math.pi ** 2  # smallest eigenvalue, |k| = 1

COSINE = 0
SINE = 1
_PARITY_NAMES = {COSINE: "cos", SINE: "sin"}
_PARITY_CODES = {"cos": COSINE, "sin": SINE}


def wrap(x):
    """Reduce coordinates to [0,1) with periodic wraparound."""
    return np.mod(x, 1.0)


def torus_delta(x, y):
    """Shortest signed separation x - y on the torus, in [-1/2, 1/2)."""
    d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    return d - np.round(d)


def torus_distance(x, y):
    d = torus_delta(x, y)
    return np.sqrt(np.sum(d * d, axis=-1))


@dataclass(frozen=True)
class TorusPoint:
    """A point on [0,1)^2; coordinates are reduced modulo 1."""

    x1: float
    x2: float

    def __post_init__(self):
        object.__setattr__(self, "x1", float(self.x1) % 1.0)
        object.__setattr__(self, "x2", float(self.x2) % 1.0)

    def as_array(self):
        return np.array([self.x1, self.x2])


@dataclass(frozen=True)
class Mode:
    """One real eigenfunction of -Delta: a half-lattice wavevector plus parity."""

    k1: int
    k2: int
    parity: int  # COSINE or SINE
    lam: float   # 4 pi^2 (k1^2 + k2^2)

    @property
    def parity_name(self):
        return _PARITY_NAMES[self.parity]


def _as_points(x):
    """Coerce TorusPoint / array-like into an (n, 2) float array."""
    if isinstance(x, TorusPoint):
        x = x.as_array()
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    if pts.shape[-1] != 2:
        raise ValueError("points must have two coordinates")
    return pts


def enumerate_modes(max_lambda: float):
    """All half-lattice modes with eigenvalue <= max_lambda, both parities,
    sorted by (lambda, k1, k2, parity)."""
    if max_lambda < LAMBDA_MIN:
        raise ValueError("empty basis: max_lambda below the first eigenvalue")
    r2 = max_lambda / (4.0 * math.pi ** 2)
    kmax = int(math.isqrt(int(r2 + 1e-9)))
    modes = []
    for k1 in range(0, kmax + 1):
        rem = r2 - k1 * k1
        if rem < -1e-12:
            break
        k2max = int(math.isqrt(int(rem + 1e-9)))
        k2min = 1 if k1 == 0 else -k2max
        for k2 in range(k2min, k2max + 1):
            if k1 == 0 and k2 <= 0:
                continue
            lam = 4.0 * math.pi ** 2 * (k1 * k1 + k2 * k2)
            if lam > max_lambda * (1 + 1e-12):
                continue
            modes.append(Mode(k1, k2, COSINE, lam))
            modes.append(Mode(k1, k2, SINE, lam))
    modes.sort(key=lambda md: (md.lam, md.k1, md.k2, md.parity))
    if not modes:
        raise ValueError("empty basis: max_lambda below the first eigenvalue")
    return modes


def _integral_tail_bound(m: float, epsilon: float, max_lambda: float) -> float:
    """Upper bound on the eigenvalue sum beyond max_lambda.

    Lattice points k with 4 pi^2 |k|^2 > max_lambda are compared against the
    radial integral of u^{-m/2} e^{-eps u}; each point's unit cell shifts the
    radius by at most sqrt(2)/2, which is absorbed into the lower limit.
    """
    if epsilon <= 0:
        return math.inf
    radius = math.sqrt(max_lambda) / TWO_PI
    if radius < 2.5:
        return math.inf
    u0 = 4.0 * math.pi ** 2 * (radius - math.sqrt(2.0)) ** 2
    return u0 ** (-m / 2.0) * math.exp(-epsilon * u0) / (TWO_PI * epsilon)


@dataclass(frozen=True)
class SpectralTable:
    """Truncated eigen-decomposition of the regularized fractional Laplacian.

    g[k] = lambda_k^{-m/2} exp(-epsilon lambda_k) per mode; the table is
    immutable and safe to share between threads/processes.
    """

    m: float
    epsilon: float
    max_lambda: float
    tail_bound: float
    lam: np.ndarray       # (n_modes,)
    g: np.ndarray         # (n_modes,)
    k: np.ndarray         # (n_modes, 2) float wavevectors
    is_cos: np.ndarray    # (n_modes,) bool
    # half-lattice views (one entry per wavevector) for separation kernels
    k_half: np.ndarray = field(repr=False, default=None)
    g_half: np.ndarray = field(repr=False, default=None)

    @property
    def n_modes(self):
        return len(self.g)

    @property
    def modes(self):
        """Materialize the sorted Mode sequence (small tables only)."""
        par = np.where(self.is_cos, COSINE, SINE)
        return [
            Mode(int(k1), int(k2), int(p), float(l))
            for (k1, k2), p, l in zip(self.k.astype(int), par, self.lam)
        ]

    def green_diag(self):
        return float(np.sum(self.g))


def build_spectral_table(m: float, epsilon: float, tail_tol: float = 1e-10,
                         max_lambda: float | None = None) -> SpectralTable:
    """Build the truncated table, choosing max_lambda from the analytic tail
    bound unless an explicit override is given (required when epsilon = 0)."""
    if not 0.0 < m <= 2.0:
        raise ValueError("fractional order m must lie in (0, 2]")
    if epsilon < 0.0:
        raise ValueError("epsilon must be nonnegative")
    if max_lambda is None:
        if epsilon == 0.0:
            raise ValueError(
                "unregularized diagonal divergence: epsilon = 0 requires an "
                "explicit max_lambda override"
            )
        if tail_tol <= 0.0:
            raise ValueError("tail_tol must be positive")
        max_lambda = 16.0 * math.pi ** 2
        while _integral_tail_bound(m, epsilon, max_lambda) >= tail_tol:
            max_lambda *= 1.3
        tail_bound = _integral_tail_bound(m, epsilon, max_lambda)
    else:
        if max_lambda < LAMBDA_MIN:
            raise ValueError("empty basis: max_lambda below the first eigenvalue")
        tail_bound = _integral_tail_bound(m, epsilon, max_lambda)

    modes = enumerate_modes(max_lambda)
    lam = np.array([md.lam for md in modes])
    kvec = np.array([[md.k1, md.k2] for md in modes], dtype=float)
    is_cos = np.array([md.parity == COSINE for md in modes])
    g = lam ** (-m / 2.0) * np.exp(-epsilon * lam)
    return SpectralTable(
        m=m, epsilon=epsilon, max_lambda=float(max_lambda),
        tail_bound=float(tail_bound), lam=lam, g=g, k=kvec, is_cos=is_cos,
        k_half=kvec[is_cos], g_half=g[is_cos],
    )


def basis_matrix(table: SpectralTable, points) -> np.ndarray:
    """Values of every basis function at each point: shape (n_points, n_modes)."""
    pts = _as_points(points)
    phase = TWO_PI * (pts @ table.k.T)
    return np.where(table.is_cos, SQRT2 * np.cos(phase), SQRT2 * np.sin(phase))


def green_separation(table: SpectralTable, d) -> np.ndarray:
    """G_{m,eps}(d, 0) for separations d of shape (..., 2)."""
    d = np.asarray(d, dtype=float)
    phase = TWO_PI * (d @ table.k_half.T)
    return 2.0 * (np.cos(phase) @ table.g_half)


def green(table: SpectralTable, x, y) -> float:
    """Regularized Green function G_{m,eps}(x, y) = sum_k g_k e_k(x) e_k(y)."""
    if isinstance(x, TorusPoint):
        x = x.as_array()
    if isinstance(y, TorusPoint):
        y = y.as_array()
    val = green_separation(table, np.asarray(x, dtype=float) - np.asarray(y, dtype=float))
    return float(val) if np.ndim(val) == 0 else val


def green_diag(table: SpectralTable) -> float:
    """G_{m,eps}(0, 0) = sum_k g_k; requires epsilon > 0 for convergence."""
    return table.green_diag()


def grad_perp_green(table: SpectralTable, d) -> np.ndarray:
    """Perpendicular gradient (-d2 G, d1 G) of G_{m,eps}(., 0) at separation d,
    by termwise differentiation of the modal sum.  Odd in d."""
    if table.epsilon <= 0.0:
        raise ValueError("gradient requires epsilon > 0 (smooth kernel)")
    d = np.asarray(d, dtype=float)
    phase = TWO_PI * (d @ table.k_half.T)
    s = np.sin(phase)  # (..., n_half)
    coeff = 2.0 * TWO_PI * table.g_half
    d1 = -(s @ (coeff * table.k_half[:, 0]))
    d2 = -(s @ (coeff * table.k_half[:, 1]))
    return np.stack([-d2, d1], axis=-1)
