"""
Continuous λ-prolongation on the jet space (x, u, u1, u2, ...) and the h -> 0
limit check of the discrete two-point λ-prolongation.
"""

import logging
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Sequence

import numpy as np
import sympy as sp

from . import config
from .errors import ConvergenceError, LambdaSymError, UnsupportedSchemeError
from .expr import (
    H,
    U,
    X,
    LatticeFunction,
    SamplingBox,
    function_atoms,
    has_opaque_atoms,
    jet_var,
    lattice_symbols,
    normalize,
    parse_lattice_name,
    sample_values,
    to_text,
    u_,
    x_,
)
from .prolong import ChiMultiplier
from .report import CheckReport, ConvergenceReport
from .scheme import Scheme

logger = logging.getLogger(__name__)

EXACT_ERROR = 1e-12
RATIO_BAND = (1.6, 2.4)
CONSISTENCY_RATIO = 3.0


def _jet_order(e: sp.Expr) -> int:
    """Highest k with u_k in e (0 when only x and u appear)."""
    order = 0
    for s in e.free_symbols:
        if s.name.startswith("u") and s.name[1:].isdigit():
            order = max(order, int(s.name[1:]))
    return order


@dataclass(frozen=True)
class ContinuousVectorField:
    xi: sp.Expr = sp.Integer(0)
    phi: sp.Expr = sp.Integer(1)

    def __post_init__(self):
        object.__setattr__(self, "xi", sp.sympify(self.xi))
        object.__setattr__(self, "phi", sp.sympify(self.phi))
        for label, e in (("xi", self.xi), ("phi", self.phi)):
            if _jet_order(e) > 0:
                raise LambdaSymError(f"{label} must only depend on x and u, got {to_text(e)}")


@dataclass(frozen=True)
class ContinuousLambda:
    lam: sp.Expr = sp.Integer(0)

    def __post_init__(self):
        object.__setattr__(self, "lam", sp.sympify(self.lam))
        if _jet_order(self.lam) > 1:
            raise LambdaSymError(f"lambda may depend on x, u and u1 only, got {to_text(self.lam)}")


@dataclass(frozen=True)
class OdeSystem:
    """u_m = f(x, u, u1, ..., u_{m-1})."""

    order: int
    f: sp.Expr
    name: str = "ode"

    def __post_init__(self):
        object.__setattr__(self, "f", sp.sympify(self.f))
        if self.order < 1:
            raise LambdaSymError(f"ODE order must be at least 1, got {self.order}")
        if _jet_order(self.f) >= self.order:
            raise LambdaSymError(f"Right side of {self.name} must not involve u{self.order} or higher")

    @property
    def equation(self) -> sp.Expr:
        return jet_var(self.order) - self.f


def total_derivative(e: sp.Expr, order: Optional[int] = None) -> sp.Expr:
    """D_x e = de/dx + sum_k u_{k+1} de/du_k."""
    e = sp.sympify(e)
    order = _jet_order(e) if order is None else order
    return sp.diff(e, X) + sp.Add(*[jet_var(k + 1) * sp.diff(e, jet_var(k)) for k in range(order + 1)])


def continuous_lambda_prolong(vf: ContinuousVectorField, lam: ContinuousLambda, m: int) -> List[sp.Expr]:
    """
    phi^(k+1) = (D_x + lambda) phi^(k) - u_{k+1} (D_x + lambda) xi, with phi^(0) = phi.
    Returns [phi^(1), ..., phi^(m)]; lambda = 0 gives the classical prolongation.
    """
    if m < 1:
        raise LambdaSymError(f"Prolongation order must be at least 1, got {m}")
    drift = total_derivative(vf.xi) + lam.lam * vf.xi
    coefficients, current = [], vf.phi
    for k in range(m):
        current = sp.expand(total_derivative(current) + lam.lam * current - jet_var(k + 1) * drift)
        coefficients.append(current)
    return coefficients


def classical_prolong(vf: ContinuousVectorField, m: int) -> List[sp.Expr]:
    return continuous_lambda_prolong(vf, ContinuousLambda(), m)


def apply_continuous(vf: ContinuousVectorField, coefficients: Sequence[sp.Expr], e: sp.Expr) -> sp.Expr:
    e = sp.sympify(e)
    terms = [vf.xi * sp.diff(e, X), vf.phi * sp.diff(e, U)]
    terms.extend(c * sp.diff(e, jet_var(k + 1)) for k, c in enumerate(coefficients))
    return sp.Add(*terms)


def _guards(*exprs: sp.Expr) -> List[sp.Expr]:
    guards = []
    for e in exprs:
        denominator = sp.denom(sp.together(e))
        if denominator.free_symbols:
            guards.append(denominator)
    return guards


def check_ode_lambda_symmetry(
    ode: OdeSystem,
    vf: ContinuousVectorField,
    lam: ContinuousLambda,
    box: Optional[SamplingBox] = None,
    tol: float = config.TOLERANCE,
    samples: int = config.SAMPLES,
    seed: int = config.SEED,
    max_rejections: int = config.MAX_REJECTIONS,
) -> CheckReport:
    """X^(m,lambda)(u_m - f) with u_m := f, decided symbolically and sampled."""
    coefficients = continuous_lambda_prolong(vf, lam, ode.order)
    raw = apply_continuous(vf, coefficients, ode.equation).xreplace({jet_var(ode.order): ode.f})
    residual = normalize(raw)
    if residual == 0:
        verdict = "zero"
    elif has_opaque_atoms(residual):
        verdict = "undecided"
    else:
        verdict = "nonzero"
    if box is None:
        box = SamplingBox.covering([raw], guards=_guards(ode.f, lam.lam))
    values, rejected = sample_values([raw], box, samples=samples, seed=seed, max_rejections=max_rejections)
    magnitudes = np.abs(values[:, 0])
    subject = f"{ode.name}: xi={to_text(vf.xi)}, phi={to_text(vf.phi)}, lambda={to_text(lam.lam)}"
    passed = verdict == "zero" or float(magnitudes.max()) <= tol
    logger.info(f"{subject}: verdict={verdict} max|residual|={magnitudes.max():.3e} passed={passed}")
    return CheckReport(
        subject=subject,
        verdict=verdict,
        max_residual=float(magnitudes.max()),
        mean_residual=float(magnitudes.mean()),
        samples=samples,
        seed=seed,
        tol=tol,
        passed=passed,
        rejected=rejected,
        residual=to_text(residual),
    )


class ReductionCheck(NamedTuple):
    """w = u1 - F is annihilated by the λ-prolonged field and D_x w = 0 on shell."""

    invariant: str
    annihilated: bool
    conserved: bool

    @property
    def passed(self) -> bool:
        return self.annihilated and self.conserved

    def to_dict(self) -> dict:
        return {"invariant": self.invariant, "annihilated": self.annihilated, "conserved": self.conserved}


def olver_reduction_check(F: sp.Expr) -> ReductionCheck:
    """
    For u2 = D_x F(x, u) with xi = 0, phi = 1, lambda = F_u: the first integral
    w = u1 - F must be an invariant of the second λ-prolongation and its total
    derivative must vanish once u2 is replaced by D_x F.
    """
    F = sp.sympify(F)
    vf, lam = ContinuousVectorField(0, 1), ContinuousLambda(sp.diff(F, U))
    w = jet_var(1) - F
    annihilated = normalize(apply_continuous(vf, continuous_lambda_prolong(vf, lam, 2), w)) == 0
    conserved = normalize(total_derivative(w).xreplace({jet_var(2): total_derivative(F)})) == 0
    return ReductionCheck(to_text(w), annihilated, conserved)


def _partial(f: sp.Expr, dx: int, du: int) -> sp.Expr:
    for v, count in ((X, dx), (U, du)):
        if count:
            f = sp.diff(f, v, count)
    return f


def _continuous_function(node: LatticeFunction, terms: int) -> sp.Expr:
    """f[k](a) -> f(x + k h, a) as a Taylor polynomial around (x, u)."""
    if len(node.args) != 1:
        raise UnsupportedSchemeError(f"Cannot expand {to_text(node)}: one argument expected")
    delta = node.args[0] - U
    if normalize(delta.xreplace({H: 0})) != 0:
        raise UnsupportedSchemeError(f"Cannot expand {to_text(node)}: its argument must tend to u as h -> 0")
    f = sp.Function(node.stem)(X, U)
    return sp.Add(
        *[
            _partial(f, i, j + node.order) * (node.offset * H) ** i * delta**j / (sp.factorial(i) * sp.factorial(j))
            for i in range(terms + 1)
            for j in range(terms + 1 - i)
        ]
    )


def _jet_form(e: sp.Expr, terms: int) -> sp.Expr:
    mapping = {}
    for s in lattice_symbols(e):
        stem, k = parse_lattice_name(s.name)
        if stem == "x":
            mapping[s] = X + k * H
        else:
            mapping[s] = sp.Add(*[(k * H) ** j / sp.factorial(j) * jet_var(j) for j in range(terms + 1)])
    e = e.xreplace(mapping)
    return e.xreplace({node: _continuous_function(node, terms) for node in function_atoms(e)})


def _pole_order(e: sp.Expr) -> int:
    denominator = sp.denom(sp.together(e))
    try:
        return min(m[0] for m in sp.Poly(denominator, H).monoms())
    except sp.PolynomialError:
        raise UnsupportedSchemeError(f"Cannot locate the powers of h in the denominator {to_text(denominator)}")


def continuum_expansion(s: Scheme, order: int = 1, max_terms: int = 12) -> sp.Expr:
    """
    Expand a uniform-lattice scheme around the point (x, u) as h -> 0 with
    x[k] = x + k h, u[k] = sum_j (k h)^j / j! u_j and f[k](a) = f(x + k h, a).
    The lowest power of h is divided out; the result keeps the terms through
    h^order, so setting it to zero gives the continuous equation with its
    leading corrections.
    """
    if not s.lattice.uniform:
        raise UnsupportedSchemeError(f"{s.name}: the continuum expansion needs a uniform lattice")
    if order < 0:
        raise LambdaSymError(f"Expansion order must be non-negative, got {order}")
    poles = _pole_order(s.equation)
    for terms in range(max(order + poles, 1), max_terms + 1):
        # Taylor remainders are O(h^(terms + 1)), so the series is exact through h^(terms - poles)
        exact = terms - poles
        series = sp.expand(sp.series(_jet_form(s.equation, terms), H, 0, exact + 1).removeO())
        coefficients = {k: normalize(series.coeff(H, k)) for k in range(-poles, exact + 1)}
        nonzero = [k for k, c in coefficients.items() if c != 0]
        if nonzero and min(nonzero) + order <= exact:
            lead = min(nonzero)
            logger.debug(f"{s.name}: leading power h^{lead} after {terms} Taylor terms")
            return sp.Add(*[coefficients[k] * H ** (k - lead) for k in range(lead, lead + order + 1)])
    raise ConvergenceError(f"{s.name}: no nonvanishing term found with {max_terms} Taylor terms")


def _discrete_coefficient(vf: ContinuousVectorField, lam: ContinuousLambda, chi: Optional[ChiMultiplier]) -> sp.Expr:
    """
    The d/du_x coefficient of the two-point λ-prolongation in the variables
    (x, u, u1, h): x[1] = x + h, u[1] = u + h u1 and u_x = u1.
    """
    u1 = jet_var(1)
    ux = (u_(1) - u_(0)) / H
    at0, at1 = {X: x_(0), U: u_(0)}, {X: x_(1), U: u_(1)}
    if chi is not None:
        weight = chi.chi
    else:
        weight = sp.exp(H * lam.lam.xreplace({X: x_(0), U: u_(0), u1: ux}))
    discrete = (weight * vf.phi.xreplace(at1) - vf.phi.xreplace(at0)) / H - ux * (
        weight * vf.xi.xreplace(at1) - vf.xi.xreplace(at0)
    ) / H
    return discrete.xreplace({x_(0): X, u_(0): U, x_(1): X + H, u_(1): U + H * u1})


def _check_levels(h_values: Sequence[float]):
    if len(h_values) < 3:
        raise ConvergenceError(f"At least 3 refinement levels are needed, got {len(h_values)}")
    for coarse, fine in zip(h_values, h_values[1:]):
        if not abs(coarse - 2.0 * fine) <= 1e-12 * coarse:
            raise ConvergenceError(f"Each h must be half the previous one, got {coarse} then {fine}")


def continuum_limit_check(
    vf: ContinuousVectorField,
    lam: ContinuousLambda,
    h_values: Sequence[float],
    chi: Optional[ChiMultiplier] = None,
    box: Optional[SamplingBox] = None,
    samples: int = config.SAMPLES,
    seed: int = config.SEED,
    max_rejections: int = config.MAX_REJECTIONS,
) -> ConvergenceReport:
    """
    E(h) = max over samples of |discrete u_x coefficient - [(D_x+lambda)phi - u1 (D_x+lambda)xi]|.
    Passes when every E(h)/E(h/2) lies in [1.6, 2.4] (first order) or every
    E(h) <= 1e-12. With chi given, chi - exp(h lambda) must also shrink at
    second order.
    """
    h_values = [float(h) for h in h_values]
    _check_levels(h_values)
    discrete = _discrete_coefficient(vf, lam, chi)
    continuous = continuous_lambda_prolong(vf, lam, 1)[0]
    difference = discrete - continuous
    gap = None
    if chi is not None:
        gap = _discrete_coefficient(ContinuousVectorField(0, 1), lam, None) - _discrete_coefficient(
            ContinuousVectorField(0, 1), lam, chi
        )

    names = {s.name for s in (difference.free_symbols | {X, U, jet_var(1)})} - {H.name}
    errors, consistency = [], []
    for h in h_values:
        level = box or SamplingBox({name: config.INTERVAL for name in sorted(names)})
        level = SamplingBox(level.intervals, {**level.values, H.name: h}, level.functions, level.guards)
        exprs = [difference] if gap is None else [difference, gap * H]
        values, _ = sample_values(exprs, level, samples=samples, seed=seed, max_rejections=max_rejections)
        errors.append(float(np.max(np.abs(values[:, 0]))))
        if gap is not None:
            consistency.append(float(np.max(np.abs(values[:, 1]))))

    # no ratio where the finer error vanished
    ratios = [coarse / fine if fine > 0 else None for coarse, fine in zip(errors, errors[1:])]
    reason = None
    if max(errors) <= EXACT_ERROR:
        exact, passed = True, True
        ratios = [None] * len(ratios)
    else:
        exact = False
        if any(fine >= coarse for coarse, fine in zip(errors, errors[1:])):
            passed, reason = False, "error does not decrease monotonically"
        else:
            passed = all(r is not None and RATIO_BAND[0] <= r <= RATIO_BAND[1] for r in ratios)
            if not passed:
                reason = "error ratios outside the first-order band"
    if gap is not None and passed:
        for coarse, fine in zip(consistency, consistency[1:]):
            if coarse > EXACT_ERROR and (fine <= 0 or coarse / fine < CONSISTENCY_RATIO):
                passed, reason = False, "chi is not exp(h*lambda) up to O(h^2)"
                break
    logger.info(f"Continuum limit: errors {errors}, ratios {ratios}, passed={passed}")
    return ConvergenceReport(h_values, errors, ratios, passed, exact, consistency if gap is not None else None, reason)
