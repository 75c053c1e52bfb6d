"""Mean-field self-consistency equation, free energy and the negative
temperature threshold of the uniform state.

Densities live on a tensor grid: quadrature atoms in the intensity times an
n x n uniform spatial grid.  Spatial convolutions with the regularized kernel
are evaluated spectrally through the FFT, restricted to the wavevectors the
spectral table retains."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .gibbs import IntensityPrior
from .spectral import LAMBDA_MIN, SpectralTable


@dataclass
class DensityGrid:
    """Density against prior x uniform: values[a, i, j] >= 0 with
    sum_a w_a mean_ij values[a] = 1."""

    gamma_values: np.ndarray   # (A,)
    gamma_weights: np.ndarray  # (A,)
    values: np.ndarray         # (A, n, n)

    def __post_init__(self):
        self.gamma_values = np.asarray(self.gamma_values, dtype=float)
        self.gamma_weights = np.asarray(self.gamma_weights, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 3 or self.values.shape[0] != len(self.gamma_values):
            raise ValueError("values must have shape (n_atoms, n, n)")
        if self.values.shape[1] != self.values.shape[2]:
            raise ValueError("spatial grid must be square")

    @property
    def grid_size(self):
        return self.values.shape[1]

    def total_mass(self) -> float:
        return float(self.gamma_weights @ self.values.mean(axis=(1, 2)))

    def copy(self):
        return DensityGrid(self.gamma_values, self.gamma_weights, self.values.copy())


def uniform_density(prior: IntensityPrior, n: int = 64) -> DensityGrid:
    vals, wts = prior.quad_nodes()
    return DensityGrid(vals, wts, np.ones((len(vals), n, n)))


def grid_points(n: int):
    """Coordinates of the n x n uniform grid as xx, yy arrays."""
    ticks = np.arange(n) / n
    return np.meshgrid(ticks, ticks, indexing="ij")


def _check_normalized(rho: DensityGrid, tol: float = 1e-8):
    mass = rho.total_mass()
    if abs(mass - 1.0) > tol:
        raise ValueError(f"density mass {mass!r} is not 1")


def _multiplier_grid(table: SpectralTable, n: int) -> np.ndarray:
    """g(lambda_k) on the FFT wavevector grid, zero outside the table's band
    and on the constant mode."""
    kmax = int(np.max(np.abs(table.k))) if table.n_modes else 0
    if kmax > n // 2 - 1:
        raise ValueError(
            f"grid {n} too coarse for the spectral table (aliasing): "
            f"needs at least {2 * (kmax + 1)} points per side"
        )
    freq = np.fft.fftfreq(n, d=1.0 / n)
    k1, k2 = np.meshgrid(freq, freq, indexing="ij")
    lam = 4.0 * math.pi ** 2 * (k1 ** 2 + k2 ** 2)
    mult = np.zeros_like(lam)
    inside = (lam > 0) & (lam <= table.max_lambda * (1 + 1e-12))
    mult[inside] = lam[inside] ** (-table.m / 2.0) * np.exp(-table.epsilon * lam[inside])
    return mult


def averaged_scalar(rho: DensityGrid) -> np.ndarray:
    """Intensity-averaged density sum_a gamma_a w_a rho_a on the grid."""
    return np.einsum("a,a,aij->ij", rho.gamma_values, rho.gamma_weights, rho.values)


def averaged_stream(rho: DensityGrid, table: SpectralTable) -> np.ndarray:
    """Stream function of the averaged scalar: kernel smoothing by g(lambda)
    in Fourier space; zero mean by construction."""
    _check_normalized(rho)
    theta = averaged_scalar(rho)
    mult = _multiplier_grid(table, rho.grid_size)
    return np.fft.ifft2(np.fft.fft2(theta) * mult).real


def free_energy(rho: DensityGrid, beta: float, table: SpectralTable,
                prior: IntensityPrior | None = None) -> float:
    """Relative entropy plus half the quadratic interaction of the averaged
    scalar, the latter evaluated spectrally."""
    _check_normalized(rho)
    if np.any(rho.values < 0):
        raise ValueError("density must be nonnegative")
    vals = rho.values
    with np.errstate(divide="ignore", invalid="ignore"):
        plogp = np.where(vals > 0, vals * np.log(np.where(vals > 0, vals, 1.0)), 0.0)
    entropy = float(rho.gamma_weights @ plogp.mean(axis=(1, 2)))

    n = rho.grid_size
    theta_hat = np.fft.fft2(averaged_scalar(rho)) / n ** 2
    mult = _multiplier_grid(table, n)
    interaction = 0.5 * beta * float(np.sum(mult * np.abs(theta_hat) ** 2))
    return entropy + interaction


@dataclass
class MfeResult:
    residual: float
    iterations: int
    converged: bool


def mfe_iterate(beta: float, table: SpectralTable, prior: IntensityPrior,
                rho0: DensityGrid, damping: float = 0.5, tol: float = 1e-10,
                max_iter: int = 500):
    """Damped fixed-point iteration of rho = exp(-beta gamma psi_rho) / Z.

    Stops when the sup-norm residual of the undamped map drops below tol;
    otherwise returns the best iterate seen with converged = False.
    """
    if not 0.0 < damping <= 1.0:
        raise ValueError("damping must lie in (0, 1]")
    _check_normalized(rho0)
    rho = rho0.copy()
    best = rho
    best_res = math.inf
    iterations = 0
    while True:
        psi = averaged_stream(rho, table)
        target = np.exp(-beta * rho.gamma_values[:, None, None] * psi[None, :, :])
        z = float(rho.gamma_weights @ target.mean(axis=(1, 2)))
        target /= z
        residual = float(np.max(np.abs(target - rho.values)))
        if residual < best_res:
            best_res = residual
            best = rho
        if residual < tol:
            return rho, MfeResult(residual=residual, iterations=iterations,
                                  converged=True)
        if iterations >= max_iter:
            return best, MfeResult(residual=best_res, iterations=iterations,
                                   converged=False)
        rho = DensityGrid(rho.gamma_values, rho.gamma_weights,
                          (1.0 - damping) * rho.values + damping * target)
        iterations += 1


def beta_zero(m: float, epsilon: float, prior: IntensityPrior) -> float:
    """Negative-temperature threshold -lambda_1^{m/2} e^{eps lambda_1} / nu(gamma^2)
    below which the uniform state stops minimizing the free energy."""
    gamma_sq = prior.gamma_sq
    if gamma_sq <= 0:
        raise ValueError("prior must have positive second moment")
    return -(LAMBDA_MIN ** (m / 2.0)) * math.exp(epsilon * LAMBDA_MIN) / gamma_sq


def second_variation_coefficient(beta: float, epsilon: float, m: float,
                                 prior: IntensityPrior) -> float:
    """Quadratic coefficient of the free energy along the lowest intensity-
    weighted mode; negative exactly when beta < beta_zero."""
    gamma_sq = prior.gamma_sq
    if gamma_sq <= 0:
        raise ValueError("prior must have positive second moment")
    return 1.0 + beta * LAMBDA_MIN ** (-m / 2.0) * math.exp(-epsilon * LAMBDA_MIN) * gamma_sq
