"""A 1D numerical laboratory for a compressible two-species flow model.

Two densities share one velocity field and couple through a two-power
pressure law.  The package provides the solver (regularized transport plus
Galerkin momentum, fixed-point coupled), certification of the pressure-law
convexity structure, and executable diagnostics for the energy budget,
relative-energy stability, and coarse-graining defect measures.
"""

from .coupler import PicardInfo, RunConfig, SimState, Trajectory, init_state, picard_step, run
from .diagnostics import (
    DefectProxy,
    EnergyBudget,
    RelEnergyRecord,
    defect_proxy,
    energy_inequality_residual,
    gronwall_check,
    kinetic_envelope,
    relative_energy,
    total_energy,
)
from .discretization import GalerkinBasis, Grid1D, build_basis, project, reconstruct
from .eos import (
    ConvexityReport,
    EosParams,
    StatePoint,
    bregman_h,
    convexity_constants,
    euler_identity_residual,
    helmholtz_closed,
    helmholtz_grad,
    helmholtz_hessian,
    helmholtz_quad,
    pressure,
    pressure_grad,
    sample_cone,
)
from .errors import (
    BifluidError,
    CertificationError,
    ConfigError,
    DomainError,
    InvariantViolation,
    NonConvergenceError,
    SolverError,
)
from .momentum import MomentumState, StressParams, step_momentum
from .reference import ReferenceSpec, fine_reference, restrict, uniform_steady
from .transport import (
    BoundaryData,
    TransportConfig,
    extremum_bounds,
    fluxes,
    m_matrix_report,
    make_boundary_data,
    mass_budget,
    step_transport,
)

__version__ = "0.1.0"
