"""Plane-integral calculus, corrected radial kernels, and sparse ridge-atom
regression built on them."""

from .operators import (OperatorSpec, AdmissibilityReport, check_admissibility,
                        radial_symbol, sphere_area, backprojection_constant,
                        stiefel_volume, filter_constant, null_space_dim)
from .greens import (GreensProfile, greens_constant, profile, rho, rho_radial,
                     drho_radial, weak_identity_residual, kernel_g,
                     ACTIVATION_ALIASES)
from .polyspace import (PolyCorrector, PolyCoeffs, enumerate_multi_indices,
                        monomial_eval, kappa_hat, build_corrector,
                        project_poly, gram_matrix)
from .kplane import (GridFunction, DirectionDesign, PlaneFunction,
                     kplane_transform, backproject, filter_K,
                     fourier_slice_residual, fbp_identity_residual,
                     project_iso, direction_design, half_circle_design,
                     full_circle_design, signed_permutation_design,
                     fibonacci_sphere_design, save_grid, load_grid,
                     save_plane, load_plane)
from .network import (Atom, Model, Dataset, forward, reg_cost, merge_atoms,
                      dictionary_matrix, serialize, deserialize,
                      save_model, load_model)
from .solver import (FitConfig, Trace, soft_threshold, stiefel_project,
                     lasso, lambda_max, prune_support, train)
from .oracles import (polyharmonic_interpolate, polyharmonic_eval,
                      grid_knot_optimum_1d, sparsity_certificate)

__version__ = "0.1.0"
