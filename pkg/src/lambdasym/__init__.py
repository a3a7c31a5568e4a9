__version__ = "0.1.0"

from lambdasym.core import (
    ChiMultiplier,
    DiscreteVectorField,
    Scheme,
    check_symmetry,
    find_lambda_symmetry,
    invariant,
    load_scheme,
    parse,
    reduce_order,
    verify_reduction,
)
