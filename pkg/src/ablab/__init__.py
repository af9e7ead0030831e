"""Finite element laboratory for planar magnetic eigenvalue problems with a
moving flux pole, the associated slit limit problems, and rate extraction."""

from .assembly import (
    PowerDensity,
    ReducedSystem,
    SymSparse,
    assemble_boundary_load,
    assemble_jump_load,
    assemble_mass,
    assemble_stiffness,
    assemble_trace_sum_load,
    elementwise_energy,
    reduce_system,
)
from .blowup import (
    BlowupFit,
    fit_blowup,
    fit_blowup_sampler,
    nodal_ray_count,
    psi,
    psi_gradient,
    rotate_frame,
    wrap_angle,
)
from .abo import (
    AbConfig,
    AbEigenResult,
    AngleChart,
    build_pole_mesh,
    energy_discrepancy,
    fix_reference_sign,
    half_flux_potential,
    normalize_pair,
    solve_ab,
    theta,
)
from .sweep import (
    RateRecord,
    RateRow,
    StudyConfig,
    default_profile_grid,
    emit_reports,
    richardson2,
    run_L_profile_study,
    run_rate_study,
)
from .crack import (
    CrackSolution,
    L_profile,
    extrapolate_L,
    hardy_poincare_margins,
    identity_suite,
    moment_constancy,
    slit_profile_normal_derivative,
    solve_we,
    solve_we_unfolded,
    solve_wp,
)
from .eigensolve import EigenPair, detect_simplicity, smallest_eigenpairs
from .mesh import (
    CrackedMesh,
    CutSegment,
    CutSpec,
    JumpKind,
    Mesh,
    cut_mesh,
    evaluate,
    generate_disk_mesh,
    generate_half_disk_mesh,
    graded_interval,
    locate_points,
    ray_cut,
    read_mesh,
    write_mesh,
)

__version__ = "0.1.0"
