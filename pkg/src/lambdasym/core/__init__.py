from .ansatz import (
    Ansatz,
    CoefficientSystem,
    LambdaSymmetry,
    build_ansatz,
    extract_coefficient_system,
    find_lambda_symmetry,
    newton_multistart,
    solve_coefficient_system,
)
from .continuum import (
    ContinuousLambda,
    ContinuousVectorField,
    OdeSystem,
    check_ode_lambda_symmetry,
    classical_prolong,
    continuous_lambda_prolong,
    continuum_expansion,
    continuum_limit_check,
    olver_reduction_check,
    total_derivative,
)
from .determining import (
    DeterminingExpression,
    check_symmetry,
    determining_expression,
    eta_defect,
    eta_propagate,
    eta_residual,
)
from .errors import (
    AnsatzError,
    ConvergenceError,
    DomainError,
    InvariantError,
    LambdaSymError,
    NotReducibleError,
    ParseError,
    SamplingError,
    StencilError,
    UnboundSymbolError,
    UnknownSymbolError,
    UnsupportedSchemeError,
)
from .expr import (
    H,
    Binding,
    SamplingBox,
    differentiate,
    equivalent,
    evaluate,
    normalize,
    shift,
    stencil,
    to_text,
    u_,
    x_,
)
from .functions import FunctionEvaluator
from .parser import parse, parse_equation
from .prolong import ChiMultiplier, DiscreteVectorField, ProlongedField, apply_field, lambda_prolong, potential_weight
from .reduction import InvariantForm, ReducedMap, antiderivative, invariant, reduce_order, verify_reduction
from .report import CheckReport, ConvergenceReport, RunReport, VerificationReport
from .scheme import Lattice, Scheme, Trajectory, iterate_trajectory, load_scheme, parse_scheme, residual, solve_for_leading
