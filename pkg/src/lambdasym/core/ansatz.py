"""
Polynomial ansatz search for λ-symmetries.

chi = c0 + c1 u[0] + ... + cd u[0]^d (and optionally phi = p0 + p1 u[0] + ...)
is pushed through the determining expression; the coefficients of every window
monomial give polynomial equations in the unknowns which are then solved
exactly where sympy can, and by multi-start Gauss-Newton otherwise.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from typing import Dict, List, Mapping, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import sympy as sp
from tqdm import tqdm

from . import config
from .determining import DeterminingExpression, check_symmetry, determining_expression, place_lattice
from .errors import AnsatzError, DomainError, SamplingError
from .expr import (
    H,
    SamplingBox,
    function_atoms,
    inline_functions,
    lattice_symbols,
    normalize,
    substitute_numeric,
    to_text,
    u_,
)
from .prolong import ChiMultiplier, DiscreteVectorField
from .report import CheckReport
from .scheme import Scheme

logger = logging.getLogger(__name__)

Solution = Dict[sp.Symbol, sp.Expr]


class Ansatz(NamedTuple):
    chi: sp.Expr
    phi: sp.Expr
    chi_unknowns: Tuple[sp.Symbol, ...]
    phi_unknowns: Tuple[sp.Symbol, ...] = ()

    @property
    def unknowns(self) -> Tuple[sp.Symbol, ...]:
        return self.chi_unknowns + self.phi_unknowns

    @property
    def degree(self) -> int:
        return len(self.chi_unknowns) - 1

    def instantiate(self, solution: Mapping[sp.Symbol, sp.Expr]) -> Tuple[sp.Expr, sp.Expr]:
        """(phi, chi) with the unknowns replaced."""
        return sp.expand(self.phi.xreplace(dict(solution))), sp.expand(self.chi.xreplace(dict(solution)))


def _template(stem: str, degree: int) -> Tuple[sp.Expr, Tuple[sp.Symbol, ...]]:
    unknowns = tuple(sp.Symbol(f"{stem}{i}") for i in range(degree + 1))
    return sp.Add(*[c * u_(0) ** i for i, c in enumerate(unknowns)]), unknowns


def build_ansatz(
    d: int,
    with_phi: bool = False,
    d_phi: int = 1,
    max_degree: int = config.MAX_DEGREE,
    max_unknowns: int = config.MAX_UNKNOWNS,
) -> Ansatz:
    if not 0 <= d <= max_degree:
        raise AnsatzError(f"Ansatz degree {d} outside 0..{max_degree}")
    if with_phi and not 0 <= d_phi <= max_degree:
        raise AnsatzError(f"phi ansatz degree {d_phi} outside 0..{max_degree}")
    chi, chi_unknowns = _template("c", d)
    if not with_phi:
        return Ansatz(chi, sp.Integer(1), chi_unknowns)
    phi, phi_unknowns = _template("p", d_phi)
    if len(chi_unknowns) + len(phi_unknowns) > max_unknowns:
        raise AnsatzError(f"Ansatz needs {len(chi_unknowns) + len(phi_unknowns)} unknowns, at most {max_unknowns}")
    return Ansatz(chi, phi, chi_unknowns, phi_unknowns)


class CoefficientSystem(NamedTuple):
    """
    Polynomial equations in the unknowns. trace[i] names the window monomial
    (exact mode) or sample point (sampled mode) that produced equations[i]; h
    is the numeric spacing substituted in sampled mode.
    """

    equations: Tuple[sp.Expr, ...]
    unknowns: Tuple[sp.Symbol, ...]
    trace: Tuple[str, ...]
    mode: str = "exact"
    h: Optional[float] = None

    def __len__(self) -> int:
        return len(self.equations)


class _Fallback(Exception):
    pass


def _monomial_text(gens: Sequence[sp.Expr], exponents: Sequence[int]) -> str:
    parts = []
    for gen, e in zip(gens, exponents):
        if e:
            parts.append(to_text(gen) if e == 1 else f"{to_text(gen)}^{e}")
    return "*".join(parts) or "1"


def _exact_system(det: DeterminingExpression, unknowns: Tuple[sp.Symbol, ...]) -> CoefficientSystem:
    s: Scheme = det.scheme
    unknown_set = set(unknowns)
    e = det.raw
    if any(fn.inlinable for fn in s.functions.values()):
        e = inline_functions(e, s.functions)
    numerator, denominator = sp.fraction(normalize(place_lattice(e, s)))

    window = sorted(lattice_symbols(numerator), key=lambda sym: sym.name)
    atoms = numerator.atoms(sp.exp, sp.log, sp.sin, sp.cos) | function_atoms(numerator)
    atoms = sorted((a for a in atoms if lattice_symbols(a)), key=to_text)
    if any(a.free_symbols & unknown_set for a in atoms):
        raise _Fallback("unknowns inside a transcendental atom")
    mapping = {a: sp.Dummy(f"g{i}") for i, a in enumerate(atoms)}
    gens = window + [mapping[a] for a in atoms]
    names = window + atoms

    if denominator.free_symbols & unknown_set and gens:
        if not denominator.xreplace(mapping).is_polynomial(*gens):
            raise _Fallback("denominator with unknowns is not polynomial in the window")

    body = sp.expand(numerator.xreplace(mapping))
    if not gens:
        return CoefficientSystem((body,), unknowns, ("1",))
    try:
        poly = sp.Poly(body, *gens)
    except sp.PolynomialError as e:
        raise _Fallback(str(e)) from None

    equations, trace = [], []
    for exponents, coefficient in poly.terms():
        coefficient = sp.expand(coefficient)
        if lattice_symbols(coefficient):
            raise _Fallback(f"coefficient of {_monomial_text(names, exponents)} still depends on the window")
        equations.append(coefficient)
        trace.append(_monomial_text(names, exponents))
    return CoefficientSystem(tuple(equations), unknowns, tuple(trace))


def _sampled_system(
    det: DeterminingExpression,
    unknowns: Tuple[sp.Symbol, ...],
    h: Optional[float],
    seed: int,
    per_unknown: int,
    max_rejections: int,
) -> CoefficientSystem:
    s: Scheme = det.scheme
    hv = s.h_value(h)
    e = place_lattice(det.raw, s, hv)
    intervals = {sym.name: config.INTERVAL for sym in lattice_symbols(e)}
    box = SamplingBox(intervals, {H.name: hv}, dict(s.functions))
    rng = np.random.default_rng(seed)
    count = per_unknown * len(unknowns)
    equations, trace, rejected = [], [], 0
    while len(equations) < count:
        b = box.draw(rng)
        try:
            numeric = sp.fraction(sp.together(substitute_numeric(e, b)))[0]
        except (OverflowError, ZeroDivisionError, DomainError):
            numeric = sp.nan
        numeric = sp.expand(numeric)
        if numeric.has(sp.nan, sp.zoo, sp.oo, -sp.oo):
            rejected += 1
            if rejected > max_rejections:
                raise SamplingError(f"Sampled coefficient extraction exhausted after {rejected} rejections")
            continue
        equations.append(numeric)
        trace.append(", ".join(f"{k}={b.values[k]:.6g}" for k in sorted(intervals)))
    return CoefficientSystem(tuple(equations), unknowns, tuple(trace), mode="sampled", h=hv)


def extract_coefficient_system(
    det: DeterminingExpression,
    unknowns: Sequence[sp.Symbol],
    h: Optional[float] = None,
    seed: int = config.SEED,
    per_unknown: int = 3,
    max_rejections: int = config.MAX_REJECTIONS,
) -> CoefficientSystem:
    """
    Clear denominators of the determining residual and collect the coefficient
    of every monomial in the window variables (transcendental atoms of the
    window count as extra variables). When that is not possible, instantiate
    the window at per_unknown * len(unknowns) random points instead.
    """
    unknowns = tuple(unknowns)
    try:
        system = _exact_system(det, unknowns)
    except _Fallback as e:
        logger.info(f"Exact coefficient extraction for {det.scheme.name} failed ({e}); sampling instead")
        system = _sampled_system(det, unknowns, h, seed, per_unknown, max_rejections)
    logger.debug(f"{len(system)} {system.mode} equations in {', '.join(map(str, unknowns))}")
    return system


def _rationalize(value: float, max_denominator: int = config.RATIONAL_MAX_DENOMINATOR) -> sp.Rational:
    frac = Fraction(float(value)).limit_denominator(max_denominator)
    return sp.Rational(frac.numerator, frac.denominator)


def newton_multistart(
    equations: Sequence[sp.Expr],
    unknowns: Sequence[sp.Symbol],
    starts: int = config.NEWTON_STARTS,
    seed: int = config.SEED,
    maxiter: int = config.NEWTON_MAXITER,
    dedup: float = config.DEDUP_DISTANCE,
    tol: float = config.TOLERANCE,
    box: Tuple[float, float] = config.NEWTON_BOX,
    num_workers: int = 0,
    progressbar: bool = False,
) -> List[np.ndarray]:
    """
    Gauss-Newton on the least-squares residual of the system from `starts`
    seeded random points of `box`. Returns the distinct roots (|F| <= tol),
    sorted lexicographically.
    """
    unknowns = list(unknowns)
    fun = sp.lambdify(unknowns, list(equations), "numpy")
    jac = sp.lambdify(unknowns, sp.Matrix(list(equations)).jacobian(unknowns), "numpy")
    rng = np.random.default_rng(seed)
    initial = rng.uniform(box[0], box[1], size=(starts, len(unknowns)))

    def _residual(x: np.ndarray) -> np.ndarray:
        return np.asarray(fun(*x), dtype=float).reshape(-1)

    def _run(x0: np.ndarray) -> Optional[np.ndarray]:
        x = np.array(x0, dtype=float)
        with np.errstate(all="ignore"):
            for _ in range(maxiter):
                fx = _residual(x)
                if not np.all(np.isfinite(fx)):
                    return None
                if np.linalg.norm(fx) <= tol * 1e-6:
                    break
                jx = np.asarray(jac(*x), dtype=float).reshape(len(fx), len(x))
                step = np.linalg.lstsq(jx, -fx, rcond=None)[0]
                x = x + step
                if not np.all(np.isfinite(x)):
                    return None
                if np.linalg.norm(step) <= 1e-15 * (1.0 + np.linalg.norm(x)):
                    break
            fx = _residual(x)
        if np.all(np.isfinite(fx)) and np.linalg.norm(fx) <= tol:
            return x
        return None

    if num_workers > 0:
        with ThreadPoolExecutor(max_workers=num_workers) as executor:
            results = list(tqdm(executor.map(_run, initial), total=starts, disable=not progressbar))
    else:
        results = [_run(x0) for x0 in tqdm(initial, disable=not progressbar)]

    roots: List[np.ndarray] = []
    for x in results:
        if x is not None and all(np.linalg.norm(x - r) > dedup for r in roots):
            roots.append(x)
    logger.debug(f"Newton: {len(roots)} distinct roots from {starts} starts")
    return sorted(roots, key=tuple)


def _is_nonzero(e: sp.Expr, mode: str, tol: float) -> bool:
    if mode == "exact":
        return normalize(e) != 0
    return abs(float(e)) > tol


def _complete(solution: Mapping[sp.Symbol, sp.Expr], unknowns: Sequence[sp.Symbol]) -> Solution:
    """Fill unknowns left free by the solver with 0."""
    free = [u for u in unknowns if u not in solution]
    for value in solution.values():
        free.extend(u for u in sp.sympify(value).free_symbols if u in unknowns and u not in free)
    if free:
        logger.warning(f"Unknowns {', '.join(map(str, free))} are free; setting them to 0")
    zero = {u: sp.Integer(0) for u in free}
    return {u: normalize(sp.sympify(solution.get(u, 0)).xreplace(zero)) for u in unknowns}


def _sort_key(solution: Solution, unknowns: Sequence[sp.Symbol], h: float) -> Tuple[float, ...]:
    return tuple(float(sp.sympify(solution[u]).subs(H, h)) for u in unknowns)


def _solve_linear(equations, unknowns, mode, tol) -> List[Solution]:
    if mode == "exact":
        solutions = sp.linsolve(equations, list(unknowns))
        if not solutions:
            return []
        values = next(iter(solutions))
        return [_complete({u: v for u, v in zip(unknowns, values) if u != v}, unknowns)]
    rows, rhs = [], []
    for e in equations:
        poly = sp.Poly(e, *unknowns)
        rows.append([float(poly.coeff_monomial(u)) for u in unknowns])
        rhs.append(-float(poly.coeff_monomial(1)))
    a, b = np.asarray(rows), np.asarray(rhs)
    x, _, rank, _ = np.linalg.lstsq(a, b, rcond=None)
    if np.max(np.abs(a @ x - b)) > tol * (1.0 + np.max(np.abs(b))):
        return []
    if rank < len(unknowns):
        logger.warning("Sampled linear system is rank deficient; reporting the minimum-norm solution")
    solution = {}
    for u, v in zip(unknowns, x):
        r = _rationalize(v)
        solution[u] = r if abs(float(r) - v) <= tol else sp.Float(v)
    return [solution]


def _verify(equations, solution: Solution, h: float, tol: float) -> bool:
    for e in equations:
        value = sp.sympify(e).xreplace(solution).subs(H, h)
        if not value.is_number or abs(complex(value)) > tol:
            return False
    return True


def solve_coefficient_system(
    system: CoefficientSystem,
    starts: int = config.NEWTON_STARTS,
    seed: int = config.SEED,
    maxiter: int = config.NEWTON_MAXITER,
    dedup: float = config.DEDUP_DISTANCE,
    tol: float = config.TOLERANCE,
    h: Optional[float] = None,
    max_unknowns: int = config.MAX_UNKNOWNS,
    num_workers: int = 0,
    progressbar: bool = False,
) -> List[Solution]:
    """
    Verified real solutions of the system, sorted by their coefficients.

    Affine systems are solved exactly (linsolve, or least squares in sampled
    mode). Polynomial systems go to sympy's solver when they are small and exact;
    otherwise Gauss-Newton roots are rationalized where that still solves the
    system and are kept only if they pass a substitution check. An empty list
    means nothing was found, not that nothing exists.
    """
    unknowns = system.unknowns
    if len(unknowns) > max_unknowns:
        raise AnsatzError(f"{len(unknowns)} unknowns exceed the limit {max_unknowns}")
    hv = system.h if system.h is not None else (h if h is not None else config.DEFAULT_H)
    unknown_set = set(unknowns)

    equations = []
    for e in system.equations:
        e = sp.expand(e)
        if e == 0:
            continue
        if not e.free_symbols & unknown_set:
            if _is_nonzero(e, system.mode, tol):
                logger.info(f"Inconsistent equation {to_text(e)} = 0")
                return []
            continue
        if e not in equations:
            equations.append(e)

    if not equations:
        return [_complete({}, unknowns)]

    if all(sp.Poly(e, *unknowns).total_degree() <= 1 for e in equations):
        return _solve_linear(equations, unknowns, system.mode, tol)

    if system.mode == "exact" and len(unknowns) <= config.EXACT_SOLVE_MAX_UNKNOWNS:
        try:
            found = sp.solve(equations, list(unknowns), dict=True)
        except (NotImplementedError, sp.PolynomialError) as e:
            logger.info(f"Exact solve failed ({e}); falling back to Newton")
        else:
            solutions = []
            for sol in found:
                sol = _complete(sol, unknowns)
                if all(v.is_real is not False for v in sol.values()):
                    solutions.append(sol)
            return sorted(solutions, key=lambda sol: _sort_key(sol, unknowns, hv))

    numeric = [e.subs(H, _rationalize(hv)) for e in equations]
    roots = newton_multistart(
        numeric,
        unknowns,
        starts=starts,
        seed=seed,
        maxiter=maxiter,
        dedup=dedup,
        tol=tol,
        num_workers=num_workers,
        progressbar=progressbar,
    )
    solutions = []
    for root in roots:
        exact = {u: _rationalize(v) for u, v in zip(unknowns, root)}
        if _verify(numeric, exact, hv, tol):
            solutions.append(exact)
            continue
        approximate = {u: sp.Float(v) for u, v in zip(unknowns, root)}
        if _verify(numeric, approximate, hv, tol):
            solutions.append(approximate)
    return solutions


class LambdaSymmetry(NamedTuple):
    phi: sp.Expr
    chi: sp.Expr
    report: CheckReport
    coefficients: Dict[str, str]

    @property
    def lam(self) -> sp.Expr:
        return sp.log(self.chi) / H

    def to_dict(self) -> dict:
        return {
            "phi": to_text(self.phi),
            "chi": to_text(self.chi),
            "lambda": to_text(self.lam),
            "coefficients": dict(self.coefficients),
            "check": self.report.to_dict(),
        }


def _check_unknowns(s: Scheme, ansatz: Ansatz):
    names = {sym.name for sym in s.equation.free_symbols}
    clash = sorted(u.name for u in ansatz.unknowns if u.name in names)
    if clash:
        raise AnsatzError(f"Ansatz unknowns {', '.join(clash)} clash with symbols of {s.name}")


def _phi_normalizations(ansatz: Ansatz) -> List[Dict[sp.Symbol, sp.Expr]]:
    """phi is fixed up to scale: its lowest nonzero coefficient is set to 1."""
    if not ansatz.phi_unknowns:
        return [{}]
    fixes = []
    for j, p in enumerate(ansatz.phi_unknowns):
        fix = {q: sp.Integer(0) for q in ansatz.phi_unknowns[:j]}
        fix[p] = sp.Integer(1)
        fixes.append(fix)
    return fixes


def find_lambda_symmetry(
    s: Scheme,
    d: int,
    with_phi: bool = False,
    d_phi: int = 1,
    h: Optional[float] = None,
    tol: float = config.TOLERANCE,
    samples: int = config.SAMPLES,
    seed: int = config.SEED,
    starts: int = config.NEWTON_STARTS,
    num_workers: int = 0,
    progressbar: bool = False,
    xi_convention: str = "weighted",
) -> List[LambdaSymmetry]:
    """
    build_ansatz -> determining_expression -> extract -> solve -> check_symmetry.
    Every returned symmetry passed the check; chi identically 0 is discarded.
    """
    ansatz = build_ansatz(d, with_phi=with_phi, d_phi=d_phi)
    _check_unknowns(s, ansatz)
    det = determining_expression(
        s, DiscreteVectorField(0, ansatz.phi), ChiMultiplier(ansatz.chi), xi_convention=xi_convention
    )
    system = extract_coefficient_system(det, ansatz.unknowns, h=h, seed=seed)

    found: List[LambdaSymmetry] = []
    seen = set()
    for fix in _phi_normalizations(ansatz):
        fixed = CoefficientSystem(
            tuple(e.xreplace(fix) for e in system.equations),
            tuple(u for u in ansatz.unknowns if u not in fix),
            system.trace,
            system.mode,
            system.h,
        )
        solutions = solve_coefficient_system(
            fixed, starts=starts, seed=seed, tol=tol, h=h, num_workers=num_workers, progressbar=progressbar
        )
        for solution in solutions:
            solution = {**fix, **solution}
            phi, chi = ansatz.instantiate(solution)
            if normalize(chi) == 0 or normalize(phi) == 0:
                continue
            key = (to_text(phi), to_text(chi))
            if key in seen:
                continue
            seen.add(key)
            report = check_symmetry(
                s,
                DiscreteVectorField(0, phi),
                ChiMultiplier(chi),
                tol=tol,
                samples=samples,
                seed=seed,
                h=h,
                xi_convention=xi_convention,
            )
            if not report.passed:
                logger.info(f"Discarding unverified candidate phi={key[0]}, chi={key[1]}")
                continue
            coefficients = {u.name: to_text(solution[u]) for u in ansatz.unknowns}
            found.append(LambdaSymmetry(phi, chi, report, coefficients))
    logger.info(f"{s.name}: {len(found)} lambda-symmetries up to degree {d}")
    return found
