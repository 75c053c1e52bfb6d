"""Batch front end: configuration, deterministic seeding, experiment dispatch
and machine-readable outputs.

Every run writes a manifest.json echoing the full resolved configuration;
re-running `vortexmc --config <manifest.json>` reproduces the output files
byte for byte.  Seeding scheme: chain (leg, index) pairs are seeded with
SeedSequence([seed, leg, chain]); each chain spawns four substreams in order
(initial positions, initial intensities, position moves, intensity moves).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import dynamics, field, gibbs, limits, meanfield, testfn
from .spectral import build_spectral_table, green_separation

SUBCOMMANDS = ("green", "dynamics", "sample", "fieldcheck", "lln", "clt",
               "chaos", "meanfield")
SEED_SCHEME = ("chain seeds: SeedSequence([seed, leg, chain]); per-chain "
               "substreams spawned in order (init positions, init "
               "intensities, position moves, intensity moves)")


class CliError(Exception):
    pass


@dataclass
class RunConfig:
    subcommand: str
    m: float = 1.0
    beta: float = 1.0
    epsilon: str | float = "auto"
    n_vortices: int = 64
    modes_tail_tol: float = 1e-8
    prior_spec: str = "rademacher"
    seed: int = 0
    burn_in: int = 300
    thin: int = 6
    n_keep: int = 1000
    n_chains: int = 1
    psi_file: str | None = None
    psi_file_2: str | None = None
    out_dir: str = "out"
    schedule_c: float = 1.0
    eps_min: float = 1e-6
    jobs: int = 1
    # integrator settings (dynamics subcommand)
    dt: float = 0.01
    steps: int = 1000
    record_every: int = 10
    # field / mean-field settings
    n_samples: int = 100000
    grid: int = 64
    damping: float = 0.5
    mfe_tol: float = 1e-10
    mfe_max_iter: int = 500

    def validate(self):
        if self.subcommand not in SUBCOMMANDS:
            raise CliError(f"unknown subcommand {self.subcommand!r}")
        if isinstance(self.epsilon, str) and self.epsilon != "auto":
            raise CliError(f"epsilon must be a number or 'auto', got {self.epsilon!r}")
        if self.epsilon == "auto" and self.m >= 2:
            raise CliError("epsilon 'auto' requires m < 2 (annealing schedule)")
        try:
            gibbs.parse_prior_spec(self.prior_spec)
        except ValueError as exc:
            raise CliError(str(exc)) from exc
        if self.subcommand in ("lln", "clt", "chaos") and not self.psi_file:
            raise CliError(f"{self.subcommand} requires --psi-file")

    def to_dict(self):
        return dataclasses.asdict(self)


def config_from_dict(data: dict) -> RunConfig:
    fields = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = set(data) - fields
    if unknown:
        raise CliError(f"unknown config keys: {sorted(unknown)}")
    if "subcommand" not in data:
        raise CliError("config missing 'subcommand'")
    return RunConfig(**data)


def _resolve_epsilon(config: RunConfig, n: int) -> float:
    if config.epsilon == "auto":
        return gibbs.epsilon_schedule(n, config.schedule_c, config.m, config.eps_min)
    return float(config.epsilon)


def _fmt(x) -> str:
    return repr(float(x))


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _sanitize(obj):
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def _write_json(path: Path, data):
    with open(path, "w", newline="\n") as fh:
        json.dump(_sanitize(data), fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _write_jsonl(path: Path, records):
    with open(path, "w", newline="\n") as fh:
        for rec in records:
            fh.write(json.dumps(_sanitize(rec), sort_keys=True, default=_json_default))
            fh.write("\n")


def _load_psi(path) -> testfn.TestFunction:
    if not path or not os.path.exists(path):
        raise CliError(f"test function file not found: {path!r}")
    return testfn.load_json(path)


def _chain_config(config: RunConfig) -> limits.ChainConfig:
    return limits.ChainConfig(burn_in=config.burn_in, thin=config.thin,
                              n_keep=config.n_keep, n_chains=config.n_chains,
                              tail_tol=config.modes_tail_tol, jobs=config.jobs)


# ---------------------------------------------------------------------------
# subcommand implementations (each returns a dict merged into the manifest)


def _run_green(config: RunConfig, out: Path):
    eps = _resolve_epsilon(config, config.n_vortices)
    table = build_spectral_table(config.m, eps, config.modes_tail_tol)
    ts = np.arange(128) / 128.0
    ray = np.column_stack([ts, ts])
    vals = green_separation(table, ray)
    with open(out / "green_ray.csv", "w", newline="\n") as fh:
        fh.write("t,d1,d2,green\n")
        for t, (d1, d2), v in zip(ts, ray, vals):
            fh.write(f"{_fmt(t)},{_fmt(d1)},{_fmt(d2)},{_fmt(v)}\n")
    return {
        "epsilon": eps,
        "green_diag": table.green_diag(),
        "n_modes": table.n_modes,
        "max_lambda": table.max_lambda,
        "tail_bound": table.tail_bound,
        "outputs": ["green_ray.csv"],
    }


def _initial_configuration(config: RunConfig, prior):
    ss = np.random.SeedSequence([config.seed, 0, 0])
    streams = [np.random.default_rng(c) for c in ss.spawn(4)]
    pos = streams[0].random((config.n_vortices, 2))
    gam = np.asarray(prior.sample(streams[1], config.n_vortices), dtype=float)
    return dynamics.VortexConfiguration(gam, pos)


def _run_dynamics(config: RunConfig, out: Path):
    eps = _resolve_epsilon(config, config.n_vortices)
    if eps <= 0:
        raise CliError("dynamics requires epsilon > 0")
    table = build_spectral_table(config.m, eps, config.modes_tail_tol)
    prior = gibbs.parse_prior_spec(config.prior_spec)
    state = _initial_configuration(config, prior)

    rows = []

    def record(step, cfg):
        t = step * config.dt
        for j in range(cfg.n):
            rows.append((step, t, j, cfg.gammas[j], cfg.positions[j, 0],
                         cfg.positions[j, 1]))

    record(0, state)
    max_drift = 0.0
    initial_energy = dynamics.hamiltonian(state, table)
    done = 0
    while done < config.steps:
        seg = min(config.record_every, config.steps - done)
        state, diag = dynamics.integrate(state, table, config.dt, seg)
        max_drift = max(max_drift, abs(dynamics.hamiltonian(state, table)
                                       - initial_energy) / max(1.0, abs(initial_energy)))
        done += seg
        record(done, state)

    with open(out / "trajectory.csv", "w", newline="\n") as fh:
        fh.write("step,time,vortex_index,gamma,x1,x2\n")
        for step, t, j, g, x1, x2 in rows:
            fh.write(f"{step},{_fmt(t)},{j},{_fmt(g)},{_fmt(x1)},{_fmt(x2)}\n")
    diag_data = {
        "initial_energy": initial_energy,
        "max_rel_energy_drift": max_drift,
        "steps": config.steps,
        "dt": config.dt,
    }
    _write_json(out / "diagnostics.json", diag_data)
    return {"epsilon": eps, "diagnostics": diag_data,
            "outputs": ["trajectory.csv", "diagnostics.json"]}


def _run_sample(config: RunConfig, out: Path):
    eps = _resolve_epsilon(config, config.n_vortices)
    table = build_spectral_table(config.m, eps, config.modes_tail_tol)
    prior = gibbs.parse_prior_spec(config.prior_spec)
    params = gibbs.GibbsParams(beta=config.beta, epsilon=eps,
                               n_vortices=config.n_vortices, prior=prior)
    chain_stats = []
    sample_rows = []
    idx = 0
    for chain in range(config.n_chains):
        seed = np.random.SeedSequence([config.seed, 0, chain])
        samples, energies, stats = gibbs.run_chain(
            params, table, config.burn_in, config.thin, config.n_keep, seed)
        for cfg in samples:
            for j in range(cfg.n):
                sample_rows.append((idx, j, cfg.gammas[j], cfg.positions[j, 0],
                                    cfg.positions[j, 1]))
            idx += 1
        chain_stats.append({
            "chain": chain,
            "position_acceptance": stats.position_acceptance,
            "intensity_acceptance": stats.intensity_acceptance,
            "ess_energy": stats.ess_energy,
            "proposal_scale_final": stats.proposal_scale_final,
            "warnings": stats.warnings,
        })
    with open(out / "samples.csv", "w", newline="\n") as fh:
        fh.write("sample_index,vortex_index,gamma,x1,x2\n")
        for i, j, g, x1, x2 in sample_rows:
            fh.write(f"{i},{j},{_fmt(g)},{_fmt(x1)},{_fmt(x2)}\n")
    stats_data = {"epsilon": eps, "seed": config.seed, "chains": chain_stats,
                  "seed_scheme": SEED_SCHEME, "params": config.to_dict()}
    _write_json(out / "stats.json", stats_data)
    return {"epsilon": eps, "outputs": ["samples.csv", "stats.json"]}


def _run_fieldcheck(config: RunConfig, out: Path):
    eps = _resolve_epsilon(config, config.n_vortices)
    table = build_spectral_table(config.m, eps, config.modes_tail_tol)
    prior = gibbs.parse_prior_spec(config.prior_spec)
    state = _initial_configuration(config, prior)
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 1, 0]))
    rep = field.verify_gaussian_rep(state, config.beta, table,
                                    config.n_samples, rng)
    report = {
        "gaussian_representation": dataclasses.asdict(rep),
        "epsilon": eps,
        "n_samples": config.n_samples,
        "consistent_3se": abs(rep.lhs - rep.rhs_mean) <= 3 * rep.rhs_stderr,
    }
    if config.psi_file:
        psi = _load_psi(config.psi_file)
        chk = field.check_char_bound(psi, config.grid)
        report["char_bound"] = {"lhs": chk.lhs, "rhs": chk.rhs,
                                "holds": chk.lhs <= chk.rhs + 1e-8}
    _write_json(out / "fieldcheck.json", report)
    return {"epsilon": eps, "outputs": ["fieldcheck.json"]}


def _run_lln(config: RunConfig, out: Path):
    prior = gibbs.parse_prior_spec(config.prior_spec)
    psi = _load_psi(config.psi_file)
    report = limits.lln_experiment(
        prior, psi, config.beta, config.m,
        epsilon=config.epsilon if config.epsilon != "auto" else "auto",
        schedule_c=config.schedule_c, chain=_chain_config(config),
        seed=config.seed, psi_id=Path(config.psi_file).stem)
    records = [dict(dataclasses.asdict(r), experiment="lln", beta=config.beta,
                    m=config.m, seed=config.seed) for r in report.records]
    _write_jsonl(out / "lln.jsonl", records)
    return {"outputs": ["lln.jsonl"],
            "epsilon_by_n": {str(r.n_vortices): r.epsilon for r in report.records}}


def _run_clt(config: RunConfig, out: Path):
    prior = gibbs.parse_prior_spec(config.prior_spec)
    psi = _load_psi(config.psi_file)
    report = limits.clt_experiment(
        prior, psi, config.beta, config.m, config.n_vortices,
        epsilon=config.epsilon if config.epsilon != "auto" else "auto",
        schedule_c=config.schedule_c, chain=_chain_config(config),
        seed=config.seed, psi_id=Path(config.psi_file).stem)
    rec = dict(dataclasses.asdict(report), experiment="clt", beta=config.beta,
               m=config.m, seed=config.seed)
    _write_jsonl(out / "clt.jsonl", [rec])
    return {"outputs": ["clt.jsonl"], "epsilon": report.epsilon}


def _run_chaos(config: RunConfig, out: Path):
    prior = gibbs.parse_prior_spec(config.prior_spec)
    f = _load_psi(config.psi_file)
    g = _load_psi(config.psi_file_2) if config.psi_file_2 else f
    base = _chain_config(config)
    n_values = (32, 256)
    report = limits.chaos_experiment(
        prior, f, g, config.beta, config.m,
        epsilon=config.epsilon if config.epsilon != "auto" else "auto",
        schedule_c=config.schedule_c,
        chains={n: base for n in n_values}, n_values=n_values,
        seed=config.seed)
    records = [dict(dataclasses.asdict(r), experiment="chaos", beta=config.beta,
                    m=config.m, seed=config.seed) for r in report.records]
    _write_jsonl(out / "chaos.jsonl", records)
    return {"outputs": ["chaos.jsonl"], "decayed": report.decayed()}


def _run_meanfield(config: RunConfig, out: Path):
    eps = _resolve_epsilon(config, config.n_vortices)
    table = build_spectral_table(config.m, eps, config.modes_tail_tol)
    prior = gibbs.parse_prior_spec(config.prior_spec)
    rho0 = meanfield.uniform_density(prior, config.grid)
    rho, result = meanfield.mfe_iterate(config.beta, table, prior, rho0,
                                        damping=config.damping,
                                        tol=config.mfe_tol,
                                        max_iter=config.mfe_max_iter)
    fe = meanfield.free_energy(rho, config.beta, table, prior)
    with open(out / "density.csv", "w", newline="\n") as fh:
        fh.write("atom_value,i,j,rho\n")
        for a, gv in enumerate(rho.gamma_values):
            for i in range(rho.grid_size):
                for j in range(rho.grid_size):
                    fh.write(f"{_fmt(gv)},{i},{j},{_fmt(rho.values[a, i, j])}\n")
    meta = {
        "residual": result.residual,
        "iterations": result.iterations,
        "converged": result.converged,
        "free_energy": fe,
        "epsilon": eps,
        "beta_zero": meanfield.beta_zero(config.m, eps, prior),
        "gamma_quadrature": ("atoms" if prior.kind != "uniform"
                             else "gauss-legendre-32"),
        "grid": config.grid,
    }
    _write_json(out / "meanfield.json", meta)
    return {"epsilon": eps, "meanfield": meta,
            "outputs": ["density.csv", "meanfield.json"]}


_RUNNERS = {
    "green": _run_green,
    "dynamics": _run_dynamics,
    "sample": _run_sample,
    "fieldcheck": _run_fieldcheck,
    "lln": _run_lln,
    "clt": _run_clt,
    "chaos": _run_chaos,
    "meanfield": _run_meanfield,
}


def run(config: RunConfig) -> dict:
    """Execute one subcommand; writes outputs plus manifest.json, returns the
    manifest dict."""
    config.validate()
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    resolved = _RUNNERS[config.subcommand](config, out)
    manifest = {
        "config": config.to_dict(),
        "resolved": resolved,
        "seed_scheme": SEED_SCHEME,
    }
    _write_json(out / "manifest.json", manifest)
    return manifest


# ---------------------------------------------------------------------------
# argument parsing


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vortexmc",
        description="Point-vortex ensemble simulation and verification toolkit",
    )
    parser.add_argument("--config", help="run from a manifest/config JSON file")
    sub = parser.add_subparsers(dest="subcommand")
    defaults = RunConfig(subcommand="green")
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--m", type=float, default=defaults.m)
        p.add_argument("--beta", type=float, default=defaults.beta)
        p.add_argument("--epsilon", default=defaults.epsilon,
                       help="regularization level, or 'auto' for the schedule")
        p.add_argument("--n-vortices", type=int, default=defaults.n_vortices)
        p.add_argument("--modes-tail-tol", type=float, default=defaults.modes_tail_tol)
        p.add_argument("--prior", dest="prior_spec", default=defaults.prior_spec)
        p.add_argument("--seed", type=int, default=defaults.seed)
        p.add_argument("--burn-in", type=int, default=defaults.burn_in)
        p.add_argument("--thin", type=int, default=defaults.thin)
        p.add_argument("--n-keep", type=int, default=defaults.n_keep)
        p.add_argument("--n-chains", type=int, default=defaults.n_chains)
        p.add_argument("--psi-file", default=None)
        p.add_argument("--psi-file-2", default=None)
        p.add_argument("--out-dir", default=defaults.out_dir)
        p.add_argument("--schedule-c", type=float, default=defaults.schedule_c)
        p.add_argument("--eps-min", type=float, default=defaults.eps_min)
        p.add_argument("--jobs", type=int, default=None,
                       help="chain-level parallelism (default $VORTEXMC_JOBS or 1)")
        p.add_argument("--dt", type=float, default=defaults.dt)
        p.add_argument("--steps", type=int, default=defaults.steps)
        p.add_argument("--record-every", type=int, default=defaults.record_every)
        p.add_argument("--n-samples", type=int, default=defaults.n_samples)
        p.add_argument("--grid", type=int, default=defaults.grid)
        p.add_argument("--damping", type=float, default=defaults.damping)
        p.add_argument("--mfe-tol", type=float, default=defaults.mfe_tol)
        p.add_argument("--mfe-max-iter", type=int, default=defaults.mfe_max_iter)
    return parser


def _coerce_epsilon(value):
    if isinstance(value, str) and value != "auto":
        try:
            return float(value)
        except ValueError as exc:
            raise CliError(f"epsilon must be a number or 'auto', got {value!r}") from exc
    return value


def config_from_args(args: argparse.Namespace) -> RunConfig:
    jobs = args.jobs
    if jobs is None:
        jobs = int(os.environ.get("VORTEXMC_JOBS", "1"))
    return RunConfig(
        subcommand=args.subcommand,
        m=args.m, beta=args.beta, epsilon=_coerce_epsilon(args.epsilon),
        n_vortices=args.n_vortices, modes_tail_tol=args.modes_tail_tol,
        prior_spec=args.prior_spec, seed=args.seed, burn_in=args.burn_in,
        thin=args.thin, n_keep=args.n_keep, n_chains=args.n_chains,
        psi_file=args.psi_file, psi_file_2=args.psi_file_2,
        out_dir=args.out_dir, schedule_c=args.schedule_c,
        eps_min=args.eps_min, jobs=jobs, dt=args.dt, steps=args.steps,
        record_every=args.record_every, n_samples=args.n_samples,
        grid=args.grid, damping=args.damping, mfe_tol=args.mfe_tol,
        mfe_max_iter=args.mfe_max_iter,
    )


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.config:
            with open(args.config) as fh:
                data = json.load(fh)
            config = config_from_dict(data.get("config", data))
        elif args.subcommand:
            config = config_from_args(args)
        else:
            parser.print_usage(sys.stderr)
            return 2
        run(config)
        return 0
    except CliError as exc:
        print(json.dumps({"error": str(exc), "kind": "config"}), file=sys.stderr)
        return 2
    except (ValueError, RuntimeError, OSError) as exc:
        print(json.dumps({"error": str(exc), "kind": "runtime"}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
