"""Variational particle-mesh solver for the EPDiff equation.

Particles carry momentum, a periodic grid carries velocity; transfer
between the two goes through a partition-of-unity B-spline basis and a
finite-element mass matrix.  Time stepping is a symplectic Euler-A
variational integrator that preserves the per-particle relabelling
momentum and discrete loop circulation to round-off.
"""

__version__ = "0.1.0"

from .basis import BasisKind, eval_basis, eval_basis_grad, support_nodes
from .diagnostics import (
    LoopDiagnostic,
    ad_particle,
    ad_star_grid,
    circulation,
    continuity_residual,
    ep_residual,
    grid_momentum,
    hamiltonian,
    measure_peakon_speed,
    measure_phase_shift,
    right_momentum_map,
)
from .dynamics import (
    SimState,
    StepParams,
    advect_loop,
    initialize_from_velocity,
    make_state,
    step,
)
from .errors import (
    ConfigError,
    InitializationError,
    MeasurementError,
    SolverError,
    StepError,
)
from .fem import (
    FEBasisKind,
    SymmetricSparseOperator,
    assemble_helmholtz,
    assemble_mass,
    solve_spd,
)
from .grid import GridSpec
from .transfer import (
    GridField,
    ParticleSet,
    TransferOperators,
    divergence_on_grid,
    grad_at_particles,
    grid_density,
    interp_to_particles,
    left_momentum_map,
    scatter_density,
    velocity_from_particles,
)

__all__ = [name for name in dir() if not name.startswith("_")]
