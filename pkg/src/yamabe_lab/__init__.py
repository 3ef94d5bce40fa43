"""Discrete laboratory for Yamabe-type flows and first-eigenvalue estimates."""

from .errors import (
    ConfigError,
    ConstructionError,
    DescriptorError,
    DomainError,
    PositivityError,
    PreconditionError,
    SolverError,
    StiffnessError,
    YamabeLabError,
)
from .geometry import (
    BackgroundGeometry,
    BackgroundSpec,
    ConformalLaw,
    ConformalState,
    average_scalar_curvature,
    build_background,
    bump_field,
    conformal_forms,
    from_graph,
    scalar_curvature,
    volume_element,
    weighted_diameter,
)
from .spectral import (
    EigenTracker,
    OperatorDescriptor,
    SpectralResult,
    dense_oracle,
    first_eigen,
    oracle_first,
)
from .flow import (
    FlowConfig,
    FlowTrace,
    curvature_evolution_residual,
    flow_step,
    run_flow,
    solve_yamabe,
)
from .heisenberg import build_heisenberg, cr_flow_step, run_cr_flow, webster_curvature
from .kernels import BACKEND

__version__ = "0.1.0"
