"""Point-vortex ensembles of generalized Euler/SQG dynamics on the 2D torus:
spectral kernels, Hamiltonian dynamics, Gibbs sampling and limit-theorem
verification experiments."""

from .spectral import (Mode, SpectralTable, TorusPoint, basis_matrix,
                       build_spectral_table, enumerate_modes, grad_perp_green,
                       green, green_diag)
from .dynamics import (TrajectoryDiagnostics, VortexConfiguration, hamiltonian,
                       integrate, vortex_rhs)
from .gibbs import (ChainStats, GibbsParams, IntensityPrior, discrete_prior,
                    effective_sample_size, epsilon_schedule, log_weight,
                    mcmc_sweep, parse_prior_spec, rademacher_prior, run_chain,
                    uniform_prior)
from .testfn import (TestFunction, eval_test_function, pair_empirical,
                     pair_fluctuation, pair_pseudo_vorticity, prior_moments,
                     single_mode)
from .field import (FieldSample, check_char_bound, eval_field, sample_field,
                    verify_gaussian_rep)
from .limits import (ChainConfig, CltReport, chaos_experiment, clt_experiment,
                     lln_experiment, sigma_infinity_operator,
                     sigma_infinity_spectral, sigma_tilde)
from .meanfield import (DensityGrid, averaged_stream, beta_zero, free_energy,
                        mfe_iterate, second_variation_coefficient,
                        uniform_density)

__version__ = "0.1.0"
