"""Sampling the Gaussian random field with covariance beta * G_{m,eps}, and
numerical checks of the exponential-moment identity that ties the field to
the canonical vortex weight."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import VortexConfiguration, hamiltonian
from .spectral import SpectralTable, basis_matrix
from .testfn import TestFunction


@dataclass
class FieldSample:
    """One realization: independent modal coefficients with variance beta*g_k."""

    table: SpectralTable
    beta: float
    coeffs: np.ndarray


def sample_field(table: SpectralTable, beta: float, rng: np.random.Generator) -> FieldSample:
    if beta <= 0:
        raise ValueError("representation requires positive temperature")
    if table.epsilon <= 0:
        raise ValueError("field sampling requires epsilon > 0")
    coeffs = rng.standard_normal(table.n_modes) * np.sqrt(beta * table.g)
    return FieldSample(table=table, beta=beta, coeffs=coeffs)


def eval_field(sample: FieldSample, x) -> float:
    vals = basis_matrix(sample.table, x) @ sample.coeffs
    return float(vals[0]) if vals.size == 1 else vals


@dataclass
class GaussianRepCheck:
    lhs: float
    rhs_mean: float
    rhs_stderr: float
    rhs_imag: float  # diagnostic; averages to zero by symmetry


def verify_gaussian_rep(config: VortexConfiguration, beta: float,
                        table: SpectralTable, nsamples: int,
                        rng: np.random.Generator,
                        chunk: int = 200_000) -> GaussianRepCheck:
    """Monte Carlo check that exp(-(beta/N) H) equals the field's complex
    exponential moment times the diagonal self-energy correction.

    The left side is computed deterministically from the Hamiltonian; the
    right side averages cos(S/sqrt(N)) with S = sum_j gamma_j U(x_j) over
    independent field draws.
    """
    if nsamples < 100:
        raise ValueError("insufficient samples")
    if beta <= 0:
        raise ValueError("representation requires positive temperature")
    n = config.n
    pos = config.positions
    if len(np.unique(pos, axis=0)) != n:
        raise ValueError("positions must be distinct")

    lhs = math.exp(-(beta / n) * hamiltonian(config, table))

    # S = sum_j gamma_j U(x_j) collapses to a dot product of the modal
    # coefficients with a fixed weight vector.
    weights = basis_matrix(table, pos).T @ config.gammas
    sigma = np.sqrt(beta * table.g)
    correction = math.exp(beta * table.green_diag() * float(config.gammas @ config.gammas)
                          / (2.0 * n))

    total = 0.0
    total_sq = 0.0
    total_im = 0.0
    done = 0
    while done < nsamples:
        size = min(chunk, nsamples - done)
        z = rng.standard_normal((size, table.n_modes))
        s = (z * sigma) @ weights / math.sqrt(n)
        c = np.cos(s)
        total += float(c.sum())
        total_sq += float((c * c).sum())
        total_im += float(np.sin(s).sum())
        done += size

    mean = total / nsamples
    var = max(total_sq / nsamples - mean * mean, 0.0)
    stderr = math.sqrt(var / nsamples)
    return GaussianRepCheck(
        lhs=lhs,
        rhs_mean=mean * correction,
        rhs_stderr=stderr * correction,
        rhs_imag=(total_im / nsamples) * correction,
    )


@dataclass
class CharBoundCheck:
    lhs: float
    rhs: float


def check_char_bound(f: TestFunction, grid: int = 256) -> CharBoundCheck:
    """Quadrature check of |int e^{if} - e^{-||f||_2^2 / 2}| <= ||f||_3^3 for a
    zero-mean spatial field f, on a grid x grid tensor product rule."""
    if not f.is_spatial:
        raise ValueError("check_char_bound requires a gamma-independent field")
    ticks = np.arange(grid) / grid
    xx, yy = np.meshgrid(ticks, ticks, indexing="ij")
    pts = np.column_stack([xx.ravel(), yy.ravel()])
    vals = f(np.zeros(len(pts)), pts)
    mean = float(np.mean(vals))
    if abs(mean) > 1e-12:
        raise ValueError(f"spatial mean {mean:.3e} exceeds 1e-12")
    l2sq = float(np.mean(vals ** 2))
    lhs = abs(complex(np.mean(np.exp(1j * vals))) - math.exp(-0.5 * l2sq))
    rhs = float(np.mean(np.abs(vals) ** 3))
    return CharBoundCheck(lhs=lhs, rhs=rhs)
