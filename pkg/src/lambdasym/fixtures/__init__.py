"""
Bundled schemes (*.scheme next to this file) and continuous fixtures.
"""

from fractions import Fraction
from pathlib import Path
from typing import List, NamedTuple, Union

import numpy as np
import sympy as sp

from lambdasym.core.continuum import ContinuousLambda, ContinuousVectorField, OdeSystem, total_derivative
from lambdasym.core.errors import LambdaSymError
from lambdasym.core.expr import U, X, jet_var
from lambdasym.core.scheme import Scheme, load_scheme

FIXTURE_DIR = Path(__file__).parent


def fixture_names() -> List[str]:
    return sorted(p.stem for p in FIXTURE_DIR.glob("*.scheme"))


def load_fixture(name: str) -> Scheme:
    path = FIXTURE_DIR / f"{name}.scheme"
    if not path.is_file():
        raise LambdaSymError(f"Unknown fixture {name}; available: {', '.join(fixture_names())}")
    return load_scheme(path)


def resolve_scheme(ref: Union[str, Path]) -> Scheme:
    """A scheme file path, or the name of a bundled fixture."""
    path = Path(ref)
    if path.is_file():
        return load_scheme(path)
    return load_fixture(str(ref))


class ContinuousFixture(NamedTuple):
    ode: OdeSystem
    vf: ContinuousVectorField
    lam: ContinuousLambda


# u2 = D_x F is a conservation law without point symmetries
OLVER_F = (X + X**2) * sp.exp(U)


def olver_fixture() -> ContinuousFixture:
    ode = OdeSystem(2, sp.expand(total_derivative(OLVER_F)), name="olver")
    return ContinuousFixture(ode, ContinuousVectorField(0, 1), ContinuousLambda(sp.diff(OLVER_F, U)))


def random_cubic(seed: int = 0, max_denominator: int = 100) -> sp.Expr:
    """g(x) with rational coefficients drawn from [-1, 1]."""
    rng = np.random.default_rng(seed)
    coefficients = [Fraction(float(c)).limit_denominator(max_denominator) for c in rng.uniform(-1.0, 1.0, size=4)]
    return sp.Add(*[sp.Rational(c.numerator, c.denominator) * X**i for i, c in enumerate(coefficients)])


def goldstein_fixture(seed: int = 0, p: int = 2) -> ContinuousFixture:
    """
    u2 = u1^2/u + g p u^p u1 + g' u^(p+1) with a generic cubic g; the field
    d/du with lambda = (u1 + g p u^(p+1))/u is a λ-symmetry.
    """
    g = random_cubic(seed)
    u1 = jet_var(1)
    f = u1**2 / U + g * p * U**p * u1 + sp.diff(g, X) * U ** (p + 1)
    lam = (u1 + g * p * U ** (p + 1)) / U
    return ContinuousFixture(OdeSystem(2, f, name=f"goldstein-p{p}"), ContinuousVectorField(0, 1), ContinuousLambda(lam))

