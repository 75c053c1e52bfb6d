"""Markov chain Monte Carlo for the regularized canonical vortex ensemble.

The target density is exp(-(beta/N) H) against the product of the intensity
prior and the uniform measure on the torus.  Sampling is single-site
Metropolis-within-Gibbs: wrapped-Gaussian position proposals plus (in
annealed mode) independence intensity proposals drawn from the prior.  Move
energies are updated incrementally through the modal sums
T = sum_j gamma_j e(X_j), which makes one sweep O(N * n_modes).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import VortexConfiguration, hamiltonian
from .spectral import SpectralTable, TWO_PI, wrap

_GL_POINTS = 32  # Gauss-Legendre rule used to integrate against uniform priors


@dataclass(frozen=True)
class IntensityPrior:
    """Compactly supported prior on vortex intensities with exact moments.

    kind is one of 'rademacher', 'uniform', 'discrete'.  Discrete priors
    (rademacher included) carry explicit atoms; uniform priors carry (a, b).
    """

    kind: str
    atoms: tuple = ()       # ((value, weight), ...) for discrete kinds
    a: float = 0.0
    b: float = 0.0

    def __post_init__(self):
        if self.kind not in ("rademacher", "uniform", "discrete"):
            raise ValueError(f"unknown prior kind {self.kind!r}")
        if self.kind == "uniform":
            if not self.b > self.a:
                raise ValueError("uniform prior needs b > a")
        else:
            if not self.atoms:
                raise ValueError("discrete prior needs at least one atom")
            w = np.array([wt for _, wt in self.atoms], dtype=float)
            if np.any(w <= 0):
                raise ValueError("atom weights must be positive")
            if abs(w.sum() - 1.0) > 1e-12:
                raise ValueError("atom weights must sum to 1")
        if self.moment(2) <= 0.0:
            raise ValueError("intensity prior must have a positive second moment")

    @property
    def support_bound(self):
        if self.kind == "uniform":
            return max(abs(self.a), abs(self.b))
        return max(abs(v) for v, _ in self.atoms)

    def moment(self, power: int) -> float:
        """Exact moment E[gamma^power]."""
        if power == 0:
            return 1.0
        if self.kind == "uniform":
            a, b = self.a, self.b
            return (b ** (power + 1) - a ** (power + 1)) / ((power + 1) * (b - a))
        return float(sum(w * v ** power for v, w in self.atoms))

    @property
    def gamma_mean(self):
        return self.moment(1)

    @property
    def gamma_sq(self):
        """Second moment of the intensity (the limit of (1/N) sum gamma_j^2)."""
        return self.moment(2)

    def sample(self, rng: np.random.Generator, size=None):
        if self.kind == "uniform":
            return rng.uniform(self.a, self.b, size=size)
        values = np.array([v for v, _ in self.atoms])
        weights = np.array([w for _, w in self.atoms])
        idx = rng.choice(len(values), size=size, p=weights)
        return values[idx]

    def quad_nodes(self):
        """(values, weights) integrating polynomials exactly against the prior."""
        if self.kind == "uniform":
            x, w = np.polynomial.legendre.leggauss(_GL_POINTS)
            vals = 0.5 * (self.b - self.a) * x + 0.5 * (self.a + self.b)
            return vals, 0.5 * w
        vals = np.array([v for v, _ in self.atoms])
        wts = np.array([w for _, w in self.atoms])
        return vals, wts

    def contains(self, values) -> bool:
        v = np.atleast_1d(np.asarray(values, dtype=float))
        if self.kind == "uniform":
            return bool(np.all((v >= self.a) & (v <= self.b)))
        atoms = np.array([a for a, _ in self.atoms])
        return bool(np.all(np.isclose(v[:, None], atoms[None, :], atol=1e-12).any(axis=1)))


def rademacher_prior() -> IntensityPrior:
    return IntensityPrior("rademacher", atoms=((-1.0, 0.5), (1.0, 0.5)))


def uniform_prior(a: float, b: float) -> IntensityPrior:
    return IntensityPrior("uniform", a=float(a), b=float(b))


def discrete_prior(atoms) -> IntensityPrior:
    return IntensityPrior("discrete", atoms=tuple((float(v), float(w)) for v, w in atoms))


def parse_prior_spec(spec: str) -> IntensityPrior:
    """Parse 'rademacher', 'uniform:a,b' or 'discrete:v1:w1,v2:w2'."""
    spec = spec.strip()
    if spec == "rademacher":
        return rademacher_prior()
    if spec.startswith("uniform:"):
        try:
            a, b = (float(t) for t in spec[len("uniform:"):].split(","))
        except ValueError as exc:
            raise ValueError(f"unparsable prior spec {spec!r}") from exc
        return uniform_prior(a, b)
    if spec.startswith("discrete:"):
        try:
            atoms = []
            for item in spec[len("discrete:"):].split(","):
                v, w = (float(t) for t in item.split(":"))
                atoms.append((v, w))
        except ValueError as exc:
            raise ValueError(f"unparsable prior spec {spec!r}") from exc
        return discrete_prior(atoms)
    raise ValueError(f"unparsable prior spec {spec!r}")


def prior_to_spec(prior: IntensityPrior) -> str:
    if prior.kind == "rademacher":
        return "rademacher"
    if prior.kind == "uniform":
        return f"uniform:{prior.a!r},{prior.b!r}"
    return "discrete:" + ",".join(f"{v!r}:{w!r}" for v, w in prior.atoms)


@dataclass
class GibbsParams:
    beta: float
    epsilon: float
    n_vortices: int
    prior: IntensityPrior
    proposal_scale: float | None = None  # None -> 0.25 / sqrt(max(beta, 1))
    quenched_gammas: np.ndarray | None = None

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.n_vortices < 1:
            raise ValueError("n_vortices must be at least 1")
        if self.quenched_gammas is not None:
            q = np.asarray(self.quenched_gammas, dtype=float)
            if len(q) != self.n_vortices:
                raise ValueError("quenched_gammas length must equal n_vortices")
            if not self.prior.contains(q):
                raise ValueError("quenched intensities outside the prior's support")
            self.quenched_gammas = q

    @property
    def quenched(self):
        return self.quenched_gammas is not None

    def resolved_scale(self):
        if self.proposal_scale is not None:
            return float(self.proposal_scale)
        return 0.25 / math.sqrt(max(self.beta, 1.0))


@dataclass
class ChainStats:
    position_acceptance: float
    intensity_acceptance: float | None
    ess_energy: float
    proposal_scale_final: float
    warnings: list = field(default_factory=list)


def log_weight(config: VortexConfiguration, params: GibbsParams,
               table: SpectralTable) -> float:
    """Log density -(beta/N) H against the (implicit) prior x uniform base."""
    if abs(table.epsilon - params.epsilon) > 1e-12:
        raise ValueError("spectral table epsilon does not match params")
    return -(params.beta / params.n_vortices) * hamiltonian(config, table)


class _ChainState:
    """Mutable sweep state: positions, intensities, per-vortex basis rows and
    the modal sums used for O(n_modes) incremental move energies."""

    def __init__(self, positions, gammas, table: SpectralTable):
        self.table = table
        self.pos = np.asarray(positions, dtype=float).copy()
        self.gam = np.asarray(gammas, dtype=float).copy()
        self.kh = table.k_half
        self.gh = table.g_half
        self.refresh()

    def refresh(self):
        phase = TWO_PI * (self.pos @ self.kh.T)
        self.ec = np.cos(phase)
        self.es = np.sin(phase)
        self.tc = self.gam @ self.ec
        self.ts = self.gam @ self.es

    def energy(self):
        """H recomputed from the modal sums (O(n_modes))."""
        pair_total = float(self.gh @ (self.tc ** 2 + self.ts ** 2))
        diag = 0.5 * self.table.green_diag() * float(self.gam @ self.gam)
        return pair_total - diag

    def interaction(self, j, cvec, svec):
        """sum_{k != j} gamma_k G(x, X_k) with x given by its basis rows."""
        tc = self.tc - self.gam[j] * self.ec[j]
        ts = self.ts - self.gam[j] * self.es[j]
        return 2.0 * float(self.gh @ (cvec * tc + svec * ts))

    def basis_at(self, x):
        phase = TWO_PI * (self.kh @ x)
        return np.cos(phase), np.sin(phase)

    def move_position(self, j, x_new, cvec, svec, dh):
        self.tc += self.gam[j] * (cvec - self.ec[j])
        self.ts += self.gam[j] * (svec - self.es[j])
        self.ec[j] = cvec
        self.es[j] = svec
        self.pos[j] = x_new

    def move_intensity(self, j, g_new):
        dg = g_new - self.gam[j]
        self.tc += dg * self.ec[j]
        self.ts += dg * self.es[j]
        self.gam[j] = g_new

    def config(self):
        return VortexConfiguration(self.gam, self.pos)


def _sweep(state: _ChainState, params: GibbsParams, scale: float,
           rng_pos: np.random.Generator, rng_gamma: np.random.Generator):
    """One full sweep over all vortices; returns acceptance counts."""
    n = params.n_vortices
    coupling = params.beta / n
    state.refresh()

    if params.beta == 0.0:
        # Constant density: every proposal is accepted.
        steps = rng_pos.normal(0.0, scale, size=(n, 2))
        state.pos = wrap(state.pos + steps)
        acc = {"position_proposed": n, "position_accepted": n,
               "intensity_proposed": 0, "intensity_accepted": 0}
        if not params.quenched:
            state.gam = np.asarray(params.prior.sample(rng_gamma, n), dtype=float)
            acc["intensity_proposed"] = n
            acc["intensity_accepted"] = n
        state.refresh()
        return acc

    steps = rng_pos.normal(0.0, scale, size=(n, 2))
    u_pos = rng_pos.random(n)
    pos_acc = 0
    for j in range(n):
        x_new = wrap(state.pos[j] + steps[j])
        c_new, s_new = state.basis_at(x_new)
        s_old = state.interaction(j, state.ec[j], state.es[j])
        s_prop = state.interaction(j, c_new, s_new)
        dh = state.gam[j] * (s_prop - s_old)
        if -coupling * dh >= 0.0 or u_pos[j] < math.exp(-coupling * dh):
            state.move_position(j, x_new, c_new, s_new, dh)
            pos_acc += 1

    acc = {"position_proposed": n, "position_accepted": pos_acc,
           "intensity_proposed": 0, "intensity_accepted": 0}
    if not params.quenched:
        g_prop = np.asarray(params.prior.sample(rng_gamma, n), dtype=float)
        u_gam = rng_gamma.random(n)
        gam_acc = 0
        for j in range(n):
            s_j = state.interaction(j, state.ec[j], state.es[j])
            dh = (g_prop[j] - state.gam[j]) * s_j
            if -coupling * dh >= 0.0 or u_gam[j] < math.exp(-coupling * dh):
                state.move_intensity(j, g_prop[j])
                gam_acc += 1
        acc["intensity_proposed"] = n
        acc["intensity_accepted"] = gam_acc
    return acc


def mcmc_sweep(state: VortexConfiguration, params: GibbsParams,
               table: SpectralTable, rng, rng_gamma=None):
    """One Metropolis-within-Gibbs sweep; returns (new state, accept counts)."""
    rng = _as_generator(rng)
    rng_gamma = rng if rng_gamma is None else _as_generator(rng_gamma)
    cs = _ChainState(state.positions, state.gammas, table)
    counts = _sweep(cs, params, params.resolved_scale(), rng, rng_gamma)
    return cs.config(), counts


def _as_generator(rng):
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def _chain_streams(rng):
    """Four deterministic substreams: initial positions, initial intensities,
    position moves, intensity moves."""
    if isinstance(rng, np.random.Generator):
        return rng.spawn(4)
    ss = rng if isinstance(rng, np.random.SeedSequence) else np.random.SeedSequence(rng)
    return [np.random.default_rng(child) for child in ss.spawn(4)]


def run_chain(params: GibbsParams, table: SpectralTable, burn_in: int,
              thin: int, n_keep: int, rng, tune: bool = True,
              tune_interval: int = 25):
    """Run one chain started from the exact beta = 0 measure.

    Returns (samples, energies, stats): n_keep retained configurations spaced
    `thin` sweeps apart after `burn_in` sweeps, the interaction energy at each
    retained sample, and chain statistics.  The proposal scale is tuned toward
    0.3 acceptance during burn-in only, then frozen.
    """
    if min(burn_in, thin, n_keep) < 1:
        raise ValueError("burn_in, thin and n_keep must all be at least 1")
    if abs(table.epsilon - params.epsilon) > 1e-12:
        raise ValueError("spectral table epsilon does not match params")
    rng_init_pos, rng_init_gam, rng_pos, rng_gamma = _chain_streams(rng)

    n = params.n_vortices
    pos0 = rng_init_pos.random((n, 2))
    if params.quenched:
        gam0 = params.quenched_gammas
    else:
        gam0 = np.asarray(params.prior.sample(rng_init_gam, n), dtype=float)
    state = _ChainState(pos0, gam0, table)

    scale = params.resolved_scale()
    win = {"position_proposed": 0, "position_accepted": 0}
    for sweep_idx in range(burn_in):
        counts = _sweep(state, params, scale, rng_pos, rng_gamma)
        win["position_proposed"] += counts["position_proposed"]
        win["position_accepted"] += counts["position_accepted"]
        if tune and (sweep_idx + 1) % tune_interval == 0:
            rate = win["position_accepted"] / max(1, win["position_proposed"])
            scale = float(np.clip(scale * math.exp(rate - 0.3), 1e-3, 0.5))
            win = {"position_proposed": 0, "position_accepted": 0}

    totals = {"position_proposed": 0, "position_accepted": 0,
              "intensity_proposed": 0, "intensity_accepted": 0}
    samples = []
    energies = np.empty(n_keep)
    for i in range(n_keep):
        for _ in range(thin):
            counts = _sweep(state, params, scale, rng_pos, rng_gamma)
            for key in totals:
                totals[key] += counts[key]
        samples.append(state.config())
        energies[i] = state.energy()

    pos_rate = totals["position_accepted"] / max(1, totals["position_proposed"])
    if totals["intensity_proposed"]:
        gam_rate = totals["intensity_accepted"] / totals["intensity_proposed"]
    else:
        gam_rate = None
    warnings = []
    if not 0.05 <= pos_rate <= 0.95:
        warnings.append(f"position acceptance {pos_rate:.3f} outside [0.05, 0.95]")
    if gam_rate is not None and not 0.05 <= gam_rate <= 0.95:
        warnings.append(f"intensity acceptance {gam_rate:.3f} outside [0.05, 0.95]")

    stats = ChainStats(position_acceptance=pos_rate, intensity_acceptance=gam_rate,
                       ess_energy=effective_sample_size(energies),
                       proposal_scale_final=scale, warnings=warnings)
    return samples, energies, stats


def effective_sample_size(series) -> float:
    """ESS from the integrated autocorrelation time (initial monotone
    positive-pair-sum estimator)."""
    x = np.asarray(series, dtype=float)
    n = len(x)
    if n < 4:
        return float(n)
    xc = x - x.mean()
    var = float(xc @ xc) / n
    if var == 0.0:
        return float(n)
    nfft = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(xc, nfft)
    acov = np.fft.irfft(f * np.conj(f), nfft)[:n].real / n
    rho = acov / acov[0]
    tau = 0.0
    prev = math.inf
    for i in range(n // 2):
        pair = rho[2 * i] + rho[2 * i + 1]
        if pair <= 0.0:
            break
        pair = min(pair, prev)
        tau += 2.0 * pair
        prev = pair
    tau = max(tau - 1.0, 1.0)
    return float(min(n, n / tau))


def epsilon_schedule(n_vortices: int, c: float, m: float, eps_min: float = 0.0) -> float:
    """Annealed regularization level max(C (ln N)^{-2/(2-m)}, eps_min)."""
    if m >= 2.0:
        raise ValueError("schedule defined only for m < 2")
    if n_vortices < 2:
        raise ValueError("schedule requires at least two vortices")
    if c <= 0.0:
        raise ValueError("schedule constant must be positive")
    return max(c * math.log(n_vortices) ** (-2.0 / (2.0 - m)), eps_min)
