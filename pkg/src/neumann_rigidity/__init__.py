"""Numerics for rigidity thresholds of semilinear Neumann problems.

The package verifies, at desk scale, the explicit spectral-gap bounds on
the rigidity thresholds of -eps(p) lap u + lam u - u^p = 0 on convex
domains of unit measure, the interpolation constants they bracket, the
entropy/entropy-production structure of the associated diffusion flows,
and the Schrodinger ground-state duality of the quotients.
"""

from .constants import (BoundsReport, ExponentSet, beckner_bound, beta_roots,
                        improvement_phi, make_exponents, p_sharp,
                        r_coefficient, rigidity_bounds, scaling_exponent,
                        theta_star, vartheta)
from .errors import (ConvergenceError, DampingError, NoRealRootsError,
                     PositivityError, RangeError, SingularJacobianError,
                     ToolkitError)
from .grid import (Domain, Field, Grid, build_grid, constant_field,
                   dirichlet_energy, field_to_csv, hessian_frobenius_integral,
                   integrate, lp_norm, neumann_laplacian_apply,
                   smooth_random_field)
from .spectral import (EigenPair, check_lin_interp_inequality,
                       schrodinger_ground_state, spectral_gap)
from .variational import (Mu2Bracket, QuotientSolve, estimate_lambda_star,
                          estimate_mu2, fit_scaling_exponent, j_lambda,
                          lambda_of_mu, minimize_quotient)
from .branch import (BranchPoint, BranchTrace, constant_solution,
                     el_normalization, estimate_mu1, newton_solve,
                     trace_branch)
from .flow import (FlowTrace, ProductionReport,
                   accumulated_dissipation_bound, demange_check,
                   entropy_production_inequality_check, fitted_decay_rate,
                   heat_flow_run, nonlinear_flow_run)
from .klt import (KltResult, holder_pairing_check, klt_duality_check,
                  optimal_potential)
from .rng import SplitMix64

__version__ = "0.1.0"
