"""Schrödinger operators on star graphs: negative spectra and Lieb-Thirring checks."""

__version__ = "0.1.0"

from ._kernels import BACKEND
from .discretize import (DiscreteOperator, assemble_cut_even, assemble_cut_split, assemble_half_line,
                         assemble_line, assemble_star, direct_sum)
from .eigensolve import (EdgeFunction, Spectrum, cluster_basis, eigenvector, inertia,
                         negative_spectrum, riesz_mean)
from .errors import QGLTError, SchemaError
from .functionals import (LTConstants, LTReport, calibrate_half_constant, check_decoupling,
                          check_mono, check_split_bound, check_theorem1, classical_constant,
                          lt_ratio, reference_constant)
from .graph import (DIRICHLET, NEUMANN, EdgePotential, GridSpec, LinePotential, PotentialField,
                    StarGraph, load_field, potential_norm, radial_field, scale_potential,
                    symmetric_extension, transplant)
from .oracle import (delta_line_eigenvalue, half_line_bound_states, line_bound_states,
                     secular_bound_states)
from .search import SearchConfig, SearchResult, maximize_ratio, ratio_gradient
from .symmetry import (decompose_radial, project_sector, translation_sweep,
                       verify_neumann_dirichlet_split, verify_sector_identity)
