"""Limiting objects of the mean-field analysis: the closed-form variance of
fluctuation pairings (in spectral and operator form), the pseudo-vorticity
variance, and statistical experiments that check the law of large numbers,
the central limit behaviour and decay of pairwise correlations against
sampled ensembles."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy import stats as sstats

from .gibbs import (GibbsParams, IntensityPrior, effective_sample_size,
                    epsilon_schedule, run_chain)
from .spectral import build_spectral_table
from .testfn import (TestFunction, mean_under_product, pair_empirical,
                     pair_fluctuation, prior_moments)

# ---------------------------------------------------------------------------
# closed forms


def _mode_multiplier(lam: float, m: float, epsilon: float) -> float:
    return lam ** (-m / 2.0) * math.exp(-epsilon * lam)


def sigma_infinity_spectral(psi: TestFunction, beta: float, m: float,
                            prior: IntensityPrior, epsilon: float = 0.0) -> float:
    """Limit variance of the fluctuation pairing, as an explicit modal sum.

    Var_prior(x-average) + ||fluctuation||^2 minus the interaction screening
    term beta * sum_k G_k nu(gamma p_k)^2 / (1 + beta Gamma G_k).  The default
    epsilon = 0 evaluates the unregularized limit multipliers.
    """
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    if not 0 < m <= 2:
        raise ValueError("fractional order m must lie in (0, 2]")
    gamma_sq = prior.gamma_sq
    mean_sq = prior_moments(prior, npoly.polymul(psi.gamma_part, psi.gamma_part))
    mean = prior_moments(prior, psi.gamma_part)
    total = mean_sq - mean * mean
    for mode, coeffs in psi.terms:
        total += prior_moments(prior, npoly.polymul(coeffs, coeffs))
        gk = _mode_multiplier(mode.lam, m, epsilon)
        nu_gamma_p = prior_moments(prior, np.concatenate([[0.0], coeffs]))
        total -= beta * gk * nu_gamma_p ** 2 / (1.0 + beta * gamma_sq * gk)
    return float(total)


def sigma_infinity_operator(psi: TestFunction, beta: float, m: float,
                            prior: IntensityPrior, epsilon: float = 0.0) -> float:
    """Same variance through the operator route: the quadratic form of
    I - beta (I + beta Gamma K)^{-1} E on the centered function, evaluated on
    a quadrature grid in gamma and the function's own modes in x."""
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    vals, wts = prior.quad_nodes()
    gamma_sq = float(wts @ vals ** 2)
    n_terms = len(psi.terms)
    # columns: 0 = spatially constant part, 1.. = modal coefficients
    chi = np.zeros((len(vals), n_terms + 1))
    chi[:, 0] = npoly.polyval(vals, psi.gamma_part)
    chi[:, 0] -= float(wts @ chi[:, 0])
    gk = np.empty(n_terms)
    for t, (mode, coeffs) in enumerate(psi.terms):
        chi[:, t + 1] = npoly.polyval(vals, coeffs)
        gk[t] = _mode_multiplier(mode.lam, m, epsilon)

    # E chi = gamma * G_k * nu(gamma' chi_k); the constant column is killed.
    nu_gamma_chi = (wts * vals) @ chi[:, 1:]
    op = np.outer(vals, gk * nu_gamma_chi)
    op /= 1.0 + beta * gamma_sq * gk  # diagonal resolvent on the modes

    def inner(u, v):
        return float(np.sum(wts[:, None] * u * v))

    return inner(chi, chi) - beta * (
        float(np.sum(wts[:, None] * op * chi[:, 1:]))
    )


def sigma_tilde(psi: TestFunction, beta: float, m: float,
                prior: IntensityPrior, epsilon: float = 0.0) -> float:
    """Limit variance of the pseudo-vorticity pairing for a spatial psi:
    Gamma * sum_k psi_k^2 / (1 + beta Gamma G_k)."""
    if not psi.is_spatial:
        raise ValueError("pseudo-vorticity variance requires a gamma-independent psi")
    gamma_sq = prior.gamma_sq
    total = 0.0
    for mode, coeffs in psi.terms:
        gk = _mode_multiplier(mode.lam, m, epsilon)
        total += coeffs[0] ** 2 / (1.0 + beta * gamma_sq * gk)
    return float(gamma_sq * total)


# ---------------------------------------------------------------------------
# sampled-ensemble experiments


@dataclass
class ChainConfig:
    """Chain sizing shared by the experiment harnesses."""

    burn_in: int = 300
    thin: int = 6
    n_keep: int = 1500
    n_chains: int = 1
    tail_tol: float = 1e-8
    jobs: int = 1


def resolve_epsilon(epsilon, n_vortices: int, m: float, schedule_c: float,
                    eps_min: float = 1e-6) -> float:
    """Fixed epsilon, or the annealing schedule when epsilon is None/'auto'."""
    if epsilon is None or epsilon == "auto":
        return epsilon_schedule(n_vortices, schedule_c, m, eps_min)
    return float(epsilon)


def _chain_seed(seed: int, leg: int, chain: int) -> np.random.SeedSequence:
    # documented scheme: SeedSequence([master_seed, leg_index, chain_index])
    return np.random.SeedSequence([int(seed), int(leg), int(chain)])


def _run_leg_chain(args):
    (beta, m, eps, n, prior, quenched, burn_in, thin, n_keep,
     tail_tol, seed, leg, chain_idx) = args
    table = build_spectral_table(m, eps, tail_tol)
    params = GibbsParams(beta=beta, epsilon=eps, n_vortices=n, prior=prior,
                         quenched_gammas=quenched)
    return run_chain(params, table, burn_in, thin, n_keep,
                     _chain_seed(seed, leg, chain_idx))


def _run_chains(beta, m, eps, n, prior, cfg: ChainConfig, seed, leg,
                quenched=None):
    tasks = [(beta, m, eps, n, prior, quenched, cfg.burn_in, cfg.thin,
              cfg.n_keep, cfg.tail_tol, seed, leg, c)
             for c in range(cfg.n_chains)]
    if cfg.jobs > 1 and cfg.n_chains > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            return list(pool.map(_run_leg_chain, tasks))
    return [_run_leg_chain(t) for t in tasks]


def _jackknife_se(values: np.ndarray, statistic) -> float:
    n = len(values)
    if n < 2:
        return float("nan")
    reps = np.array([statistic(np.delete(values, i)) for i in range(n)])
    return float(np.sqrt((n - 1) / n * np.sum((reps - reps.mean()) ** 2)))


@dataclass
class LlnRecord:
    n_vortices: int
    epsilon: float
    mean_pairing: float
    target: float
    deviation: float
    stderr: float
    ess: float
    within_3se: bool
    warnings: list = field(default_factory=list)


@dataclass
class LlnReport:
    psi_id: str
    beta: float
    m: float
    schedule_c: float
    records: list


def lln_experiment(prior: IntensityPrior, psi: TestFunction, beta: float,
                   m: float, n_values=(32, 64, 128, 256), epsilon="auto",
                   schedule_c: float = 1.0, chain: ChainConfig | None = None,
                   seed: int = 0, psi_id: str = "psi") -> LlnReport:
    """Empirical-measure pairings across an N ladder, against the product-law
    mean, with effective-sample-size corrected errors."""
    if m >= 2 and (epsilon is None or epsilon == "auto"):
        raise ValueError("the annealing schedule requires m < 2")
    chain = chain or ChainConfig()
    target = mean_under_product(psi, prior)
    records = []
    for leg, n in enumerate(n_values):
        eps = resolve_epsilon(epsilon, n, m, schedule_c)
        results = _run_chains(beta, m, eps, n, prior, chain, seed, leg)
        series = []
        ess_total = 0.0
        warnings = []
        for samples, _, cstats in results:
            vals = np.array([pair_empirical(psi, cf) for cf in samples])
            series.append(vals)
            ess_total += effective_sample_size(vals)
            warnings.extend(cstats.warnings)
        pooled = np.concatenate(series)
        mean = float(pooled.mean())
        sd = float(pooled.std(ddof=1)) if len(pooled) > 1 else 0.0
        stderr = sd / math.sqrt(max(ess_total, 1.0))
        deviation = abs(mean - target)
        records.append(LlnRecord(
            n_vortices=n, epsilon=eps, mean_pairing=mean, target=target,
            deviation=deviation, stderr=stderr, ess=ess_total,
            within_3se=deviation <= 3.0 * stderr, warnings=warnings,
        ))
    return LlnReport(psi_id=psi_id, beta=beta, m=m, schedule_c=schedule_c,
                     records=records)


@dataclass
class CltReport:
    psi_id: str
    n_vortices: int
    n_samples: int
    sample_mean: float
    sample_variance: float
    sigma_inf_sq: float
    variance_ratio: float
    gaussian_ks_pvalue: float
    epsilon: float = float("nan")
    sigma_eps_sq: float = float("nan")   # same closed form at the sampling epsilon
    variance_stderr: float = float("nan")
    ess: float = float("nan")
    degenerate: bool = False
    warnings: list = field(default_factory=list)


def clt_experiment(prior: IntensityPrior, psi: TestFunction, beta: float,
                   m: float, n_vortices: int, epsilon="auto",
                   schedule_c: float = 1.0, chain: ChainConfig | None = None,
                   seed: int = 0, psi_id: str = "psi") -> CltReport:
    """Fluctuation pairings over retained samples, thinned to ESS spacing,
    compared against the closed-form limit variance and a Gaussian law."""
    chain = chain or ChainConfig()
    eps = resolve_epsilon(epsilon, n_vortices, m, schedule_c)
    results = _run_chains(beta, m, eps, n_vortices, prior, chain, seed, leg=0)

    thinned = []
    warnings = []
    ess_total = 0.0
    for samples, _, cstats in results:
        vals = np.array([pair_fluctuation(psi, cf, prior) for cf in samples])
        ess = effective_sample_size(vals)
        ess_total += ess
        spacing = max(1, math.ceil(len(vals) / max(ess, 1.0)))
        thinned.append(vals[::spacing])
        warnings.extend(cstats.warnings)
    pooled = np.concatenate(thinned)
    if ess_total < 100:
        raise RuntimeError("insufficient effective samples")

    sigma_inf = sigma_infinity_spectral(psi, beta, m, prior)
    sigma_eps = sigma_infinity_spectral(psi, beta, m, prior, epsilon=eps)
    sample_mean = float(pooled.mean())
    sample_var = float(pooled.var(ddof=1))
    if sigma_inf <= 0.0:
        return CltReport(psi_id=psi_id, n_vortices=n_vortices,
                         n_samples=len(pooled), sample_mean=sample_mean,
                         sample_variance=sample_var, sigma_inf_sq=sigma_inf,
                         variance_ratio=float("nan"),
                         gaussian_ks_pvalue=float("nan"), epsilon=eps,
                         sigma_eps_sq=sigma_eps, ess=ess_total,
                         degenerate=True, warnings=warnings)

    ks = sstats.kstest(pooled, "norm", args=(0.0, math.sqrt(sigma_inf)))
    var_se = _jackknife_se(pooled, lambda x: x.var(ddof=1))
    return CltReport(
        psi_id=psi_id, n_vortices=n_vortices, n_samples=len(pooled),
        sample_mean=sample_mean, sample_variance=sample_var,
        sigma_inf_sq=sigma_inf, variance_ratio=sample_var / sigma_inf,
        gaussian_ks_pvalue=float(ks.pvalue), epsilon=eps,
        sigma_eps_sq=sigma_eps, variance_stderr=var_se, ess=ess_total,
        warnings=warnings,
    )


@dataclass
class ChaosRecord:
    n_vortices: int
    epsilon: float
    covariance: float
    stderr: float
    n_samples: int
    within_3se: bool
    warnings: list = field(default_factory=list)


@dataclass
class ChaosReport:
    beta: float
    m: float
    records: list

    def decayed(self) -> bool:
        first, last = self.records[0], self.records[-1]
        return abs(last.covariance) < abs(first.covariance)


def chaos_experiment(prior: IntensityPrior, f: TestFunction, g: TestFunction,
                     beta: float, m: float, epsilon="auto",
                     schedule_c: float = 1.0, n_values=(32, 256),
                     chains=None, seed: int = 0) -> ChaosReport:
    """Two-point covariance of one-vortex observables, averaged over ordered
    pairs by exchangeability, at each ladder size."""
    if beta <= 0:
        raise ValueError("chaos experiment requires beta > 0")
    if chains is None:
        chains = {n: ChainConfig() for n in n_values}
    records = []
    for leg, n in enumerate(n_values):
        cfg = chains[n]
        eps = resolve_epsilon(epsilon, n, m, schedule_c)
        results = _run_chains(beta, m, eps, n, prior, cfg, seed, leg)
        u_all, a_all, b_all = [], [], []
        warnings = []
        for samples, _, cstats in results:
            fv = np.array([f(cf.gammas, cf.positions) for cf in samples])
            gv = np.array([g(cf.gammas, cf.positions) for cf in samples])
            sf = fv.sum(axis=1)
            sg = gv.sum(axis=1)
            cross = (fv * gv).sum(axis=1)
            u = (sf * sg - cross) / (n * (n - 1))
            ess = effective_sample_size(u)
            spacing = max(1, math.ceil(len(u) / max(ess, 1.0)))
            sel = slice(None, None, spacing)
            u_all.append(u[sel])
            a_all.append((sf / n)[sel])
            b_all.append((sg / n)[sel])
            warnings.extend(cstats.warnings)
        u = np.concatenate(u_all)
        a = np.concatenate(a_all)
        b = np.concatenate(b_all)
        cov = float(u.mean() - a.mean() * b.mean())

        mm = len(u)
        su, sa, sb = u.sum(), a.sum(), b.sum()
        reps = ((su - u) / (mm - 1)
                - (sa - a) * (sb - b) / (mm - 1) ** 2)
        se = float(np.sqrt((mm - 1) / mm * np.sum((reps - reps.mean()) ** 2)))
        records.append(ChaosRecord(
            n_vortices=n, epsilon=eps, covariance=cov, stderr=se,
            n_samples=mm, within_3se=abs(cov) <= 3.0 * se, warnings=warnings,
        ))
    return ChaosReport(beta=beta, m=m, records=records)
