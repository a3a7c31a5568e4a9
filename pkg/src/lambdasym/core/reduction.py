import logging
from typing import List, NamedTuple, Optional, Tuple

import numpy as np
import sympy as sp
from tqdm import tqdm

from . import config
from .errors import InvariantError, NotReducibleError, StencilError
from .expr import (
    Binding,
    LatticeFunction,
    compile_expr,
    lattice_function,
    normalize,
    shift,
    to_text,
    u_,
)
from .prolong import ChiMultiplier, DiscreteVectorField, apply_field, lambda_prolong
from .report import VerificationReport
from .scheme import Scheme, Trajectory, iterate_trajectory

logger = logging.getLogger(__name__)

V = sp.Symbol("v")


class InvariantForm(NamedTuple):
    """v = u[1] - P(u[0]) with dP/du[0] = chi and P(0) = 0."""

    chi: ChiMultiplier
    P: sp.Expr
    v: sp.Expr

    def to_dict(self) -> dict:
        return {"chi": to_text(self.chi.chi), "P": to_text(self.P), "v": to_text(self.v)}


class ReducedMap(NamedTuple):
    """v[n+1] = R(v[n]); method is "symbolic" or "fitted"."""

    R: sp.Expr
    method: str
    fit_residual: Optional[float] = None
    verification: Optional[VerificationReport] = None

    def to_dict(self) -> dict:
        return {
            "R": to_text(self.R),
            "method": self.method,
            "fit_residual": self.fit_residual,
            "verification": None if self.verification is None else self.verification.to_dict(),
        }


def _integrate_term(term: sp.Expr, u0: sp.Symbol) -> sp.Expr:
    coefficient, dependent = term.as_independent(u0, as_Add=False)
    if dependent == 1:
        return coefficient * u0
    if dependent == u0:
        return coefficient * u0**2 / 2
    if dependent.is_Pow and dependent.base == u0 and dependent.exp.is_Integer and dependent.exp != -1:
        k = dependent.exp
        return coefficient * u0 ** (k + 1) / (k + 1)
    if isinstance(dependent, LatticeFunction) and dependent.order > 0 and dependent.args == (u0,):
        return coefficient * lattice_function(dependent.stem, dependent.offset, dependent.order - 1)(u0)
    raise InvariantError(f"No antiderivative in u[0] for {to_text(term)}")


def antiderivative(chi: ChiMultiplier) -> sp.Expr:
    """Term-wise P(u[0]) with dP/du[0] = chi and no constant term."""
    u0 = u_(0)
    P = sp.Add(*[_integrate_term(t, u0) for t in sp.Add.make_args(sp.expand(chi.chi))])
    if normalize(sp.diff(P, u0) - chi.chi) != 0:
        raise InvariantError(f"Antiderivative {to_text(P)} does not differentiate back to {to_text(chi.chi)}")
    return P


def invariant(chi: ChiMultiplier) -> InvariantForm:
    P = antiderivative(chi)
    v = u_(1) - P
    field = lambda_prolong(DiscreteVectorField(0, 1), chi, 0, 1)
    if apply_field(field, v) != 0:
        raise InvariantError(f"{to_text(v)} is not annihilated by the prolonged field")
    return InvariantForm(chi, P, v)


def invariant_series(inv: InvariantForm, t: Trajectory) -> Tuple[np.ndarray, np.ndarray]:
    """v[n] and its rounding magnitude for every n with u[n+1] available."""
    v = compile_expr(inv.v)
    pairs = [v(t.window(n, (0, 1))) for n in range(len(t) - 1)]
    if not pairs:
        return np.zeros(0), np.zeros(0)
    values, magnitudes = zip(*pairs)
    return np.asarray(values, dtype=float), np.asarray(magnitudes, dtype=float)


def _random_trajectories(
    s: Scheme, trials: int, steps: int, bind: Binding, seed: int, bound: float, progressbar: bool = False
) -> List[Trajectory]:
    rng = np.random.default_rng(seed)
    lo, hi = config.INTERVAL
    trajectories = []
    for _ in tqdm(range(trials), disable=not progressbar):
        init = rng.uniform(lo, hi, size=s.a + s.b)
        trajectories.append(iterate_trajectory(s, init, steps, bind, bound=bound))
    return trajectories


def _symbolic_reduction(s: Scheme, inv: InvariantForm) -> Optional[sp.Expr]:
    W = normalize(inv.v.xreplace({u_(1): s.solved_form}))
    W = normalize(W.xreplace({u_(0): V + shift(inv.P, -1)}))
    if W.free_symbols & {u_(-1), u_(0)}:
        return None
    return W


def _fitted_reduction(
    s: Scheme, inv: InvariantForm, bind: Binding, seed: int, trials: int, steps: int
) -> Optional[Tuple[sp.Expr, float]]:
    xs, ys = [], []
    for t in _random_trajectories(s, trials, steps, bind, seed, config.VERIFY_BOUND):
        values, _ = invariant_series(inv, t)
        xs.extend(values[:-1])
        ys.extend(values[1:])
    if len(xs) <= config.FIT_MAX_DEGREE:
        return None
    x, y = np.asarray(xs), np.asarray(ys)
    for degree in range(config.FIT_MAX_DEGREE + 1):
        coefficients = np.polyfit(x, y, degree)
        residual = float(np.max(np.abs(np.polyval(coefficients, x) - y) / (1.0 + np.abs(y))))
        if residual <= config.FIT_TOLERANCE:
            R = sp.Add(*[sp.Float(c) * V ** (degree - i) for i, c in enumerate(coefficients)])
            return R, residual
    return None


def reduce_order(
    s: Scheme,
    inv: InvariantForm,
    h: Optional[float] = None,
    seed: int = config.SEED,
    trials: int = 8,
    steps: int = 50,
) -> ReducedMap:
    """
    Rewrite the second-order scheme as v[n+1] = R(v[n]).

    u[1] is eliminated from v through the solved form, then u[0] is written as
    w + P(u[-1]) with w = v[n-1]; if the result no longer depends on u[-1] it is
    R(w). Otherwise R is fitted as a polynomial of degree <= 4 on trajectory
    data and kept only if it verifies on fresh trajectories.
    """
    if (s.a, s.b) != (1, 1):
        raise StencilError(f"Order reduction needs a stencil -1..1, {s.name} has -{s.a}..{s.b}")
    R = _symbolic_reduction(s, inv)
    if R is not None:
        logger.info(f"{s.name}: reduced map v -> {to_text(R)}")
        return ReducedMap(R, "symbolic")

    bind = s.binding(h)
    fitted = _fitted_reduction(s, inv, bind, seed, trials, steps)
    if fitted is not None:
        R, residual = fitted
        candidate = ReducedMap(R, "fitted", fit_residual=residual)
        report = verify_reduction(s, inv, candidate, trials=trials, steps=steps, tol=config.FIT_TOLERANCE, h=h, seed=seed + 1)
        if report.passed:
            logger.info(f"{s.name}: fitted reduced map v -> {to_text(R)}")
            return candidate._replace(verification=report)
    raise NotReducibleError(f"{s.name} is not reducible by the invariant {to_text(inv.v)}")


def verify_reduction(
    s: Scheme,
    inv: InvariantForm,
    r: ReducedMap,
    trials: int = 20,
    steps: int = 100,
    tol: float = config.TOLERANCE,
    h: Optional[float] = None,
    seed: int = config.SEED,
    bound: float = config.VERIFY_BOUND,
    progressbar: bool = False,
) -> VerificationReport:
    """
    Iterate the scheme from `trials` random starts in [0, 1] and measure
    |v[n+1] - R(v[n])| relative to the size of the terms that produced it.
    Trajectories are cut when |u| leaves `bound`; if none yields a single
    step the result is "inconclusive".
    """
    bind = s.binding(h)
    R = compile_expr(r.R)
    conserved = normalize(r.R - V) == 0
    deviations, drifts, divergent, measured = [], [], 0, 0
    for t in _random_trajectories(s, trials, steps, bind, seed, bound, progressbar):
        divergent += int(t.divergent)
        values, magnitudes = invariant_series(inv, t)
        if len(values) < 2:
            continue
        measured += 1
        for n in range(len(values) - 1):
            mapped, mapped_magnitude = R(bind.with_values({V.name: values[n]}))
            scale = 1.0 + magnitudes[n + 1] + mapped_magnitude
            deviations.append(abs(values[n + 1] - mapped) / scale)
        if conserved:
            drifts.extend(np.abs(values - values[0]) / (1.0 + magnitudes + magnitudes[0]))

    if not measured:
        status, max_deviation = "inconclusive", None
    else:
        max_deviation = float(max(deviations))
        status = "pass" if max_deviation <= tol else "fail"
    conservation = float(max(drifts)) if drifts else None
    logger.info(f"{s.name}: reduction {status}, max deviation {max_deviation} over {measured} trajectories")
    return VerificationReport(status, max_deviation, trials, steps, divergent, tol, seed, conservation)
