"""Finite-volume solver for nonlocal continuity equations on the circle.

States are nonnegative cell-mass vectors evolved by Lax-Friedrichs-type
updates under mean-field velocities of Kuramoto type; errors against a
reference mesh are measured in 1-Wasserstein and L1 distance. See
``nonlocalfv.cli`` for the command-line entry point.
"""

from .experiments import (
    BUILTIN_NAMES,
    ErrorTable,
    ExperimentSpec,
    StudyAborted,
    builtin_datum,
    preset,
    run_convergence_study,
)
from .measures import (
    DiscreteMeasure,
    Grid1D,
    Grid2D,
    GridDensity,
    InitialDatum,
    l1_distance_nested,
    project_hat,
    total_variation,
    wasserstein1_line,
    wasserstein1_torus,
)
from .scheme import (
    BoundaryLeakError,
    CFLViolationError,
    RunRecord,
    SchemeConfig,
    cfl_dt,
    run_to_time,
    weak_residual,
)
from .velocity import (
    KernelField,
    KuramotoIdentical,
    KuramotoNonIdentical,
    VelocityBounds,
    eval_velocity_1d,
    eval_velocity_2d,
)

__version__ = "0.1.0"
