"""Numerical laboratory for singular p-Laplacian problems with
discontinuous convection terms: P1 finite elements, mollified reaction
pipelines, sub-solution comparison, and measure-theoretic verifiers."""

from .config import ConfigError, RunConfig, build_config, parse_config
from .fields import DiscreteField, DistanceField, distance_field
from .measure import (
    BoxSet,
    GridField,
    IntervalCover,
    LipschitzMap,
    axis_project,
    cover_length,
    jacobian_counterexample,
    verify_locality,
    verify_null_projection,
)
from .mesh import GeometryError, Mesh, build_mesh, load_mesh, save_mesh
from .mollify import (
    MollifierFamily,
    RegularizedReactions,
    TruncatedF,
    eval_f_eps,
    eval_g_eps,
    growth_bounds_check,
    make_mollifiers,
    make_reactions,
    truncate_f,
)
from .nonlinearity import (
    ConditionReport,
    DomainError,
    EnvelopePair,
    NonlinearitySpec,
    check_conditions,
    check_hypotheses_f,
    check_hypotheses_g,
    envelopes_at,
    envelopes_trace,
)
from .pipeline import RunReport, run_measure_lab, run_pipeline, write_outputs
from .plap import (
    ConvergenceError,
    EigenPair,
    PlapConfig,
    apply_plap_residual,
    energy,
    first_eigenpair,
    solve_plap_dirichlet,
)
from .quadrature import (
    DIVERGENT,
    STABLE,
    UNSTABLE,
    SingularIntegral,
    hardy_quotient,
    integrate_singular,
)
from .scheme import (
    ContinuationTrace,
    StrongSolutionReport,
    Subsolution,
    build_subsolution,
    comparison_check,
    recover_reaction_fields,
    run_continuation,
    solve_regularized,
    strong_residual_check,
    verify_subsolution,
)

__version__ = "0.1.0"
