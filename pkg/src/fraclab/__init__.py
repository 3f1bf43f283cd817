"""Regional and censored fractional Laplacians in one dimension, with the half-plane extension."""

__version__ = "0.1.0"

from .constants import (ConstantsBundle, FracOrder, a_s, b_s, c_ns, gamma_n_limit, hardy_constant,
                        kappa_bar, mu)
from .mesh import Domain1D, GradedMesh, default_grading, delta, graded_mesh
from .fields import PowerTail, ScalarField, omega_gamma
from .operator1d import QuadSpec, full_flap, full_flap_zero_ext, killing_potential, regional_flap
from .galerkin import (NonlocalSystem, SolveResult, assemble, energy, load, solve_dirichlet,
                       solve_neumann)
from .probes import (RateFit, dirichlet_boundary_ratio, dirichlet_weighted_gradient, fit_boundary_rate,
                     holder_estimate, neumann_normal_derivative, s_to_one_comparison)
from .angular import AngularProblem, EigenPair, assemble_angular, eigenpairs, gap_check, w0_angular_profile
from .extension import HalfPlanePoint, extension_flux, poisson_extend, w_gamma
