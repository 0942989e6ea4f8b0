"""Finite-horizon fractional-programming beamforming for large-scale MIMO."""

from fhbeam.linalg import (
    HermitianOperator,
    LinAlgError,
    NotConvergedError,
    SpectralInterval,
    logdet_hpd,
    max_eigenvalue,
    min_eigenvalue_bound,
    solve_hpd,
)
from fhbeam.network import (
    ChannelSet,
    SystemConfig,
    dbm_to_watt,
    generate_channels,
    objective_g,
    power_normalize,
    rate,
    scaled_noise_matrix,
    wsr,
)
from fhbeam.fp import (
    AuxState,
    QuadraticProgram,
    build_qp,
    eval_fq,
    eval_fr,
    gradient,
    update_aux,
    update_gamma,
    update_y,
)
from fhbeam.schedule import (
    StepSchedule,
    brute_force_minimax,
    chebyshev_nodes,
    chebyshev_schedule,
    constant_schedule,
    minimax_value,
)
from fhbeam.solvers import (
    IterationTrace,
    SolverConfig,
    SolverError,
    run_constant_gd,
    run_exact_wmmse,
    run_finite_horizon,
    run_solver,
    solve_qp_exact,
    solve_qp_finite_horizon,
)

__version__ = "0.1.0"
