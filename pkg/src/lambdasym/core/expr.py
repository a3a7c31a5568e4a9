"""
Symbolic expressions over lattice-indexed variables.

Expressions are plain sympy trees. Lattice variables are symbols named u[k] and
x[k] (k is the offset from the base index n), h is the reserved positive
spacing, and index-dependent unknown functions f[k](arg) are undefined sympy
functions whose derivative is the next-order function symbol f'[k](arg).
"""

import logging
import math
import re
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Dict, FrozenSet, Iterable, Mapping, Optional, Sequence, Set, Tuple

import numpy as np
import sympy as sp
from sympy.core.function import AppliedUndef, UndefinedFunction
from sympy.printing.str import StrPrinter

from . import config
from .errors import DomainError, LambdaSymError, SamplingError, StencilError, UnboundSymbolError
from .functions import FunctionEvaluator

logger = logging.getLogger(__name__)

H = sp.Symbol("h", positive=True)
X = sp.Symbol("x")
U = sp.Symbol("u")

LATTICE_STEMS = ("u", "x")
_LATTICE_NAME = re.compile(r"^([ux])\[(-?\d+)\]$")


@lru_cache(maxsize=None)
def lattice_var(stem: str, offset: int) -> sp.Symbol:
    if stem not in LATTICE_STEMS:
        raise LambdaSymError(f"Unknown lattice variable {stem}")
    return sp.Symbol(f"{stem}[{offset}]")


def u_(offset: int) -> sp.Symbol:
    return lattice_var("u", offset)


def x_(offset: int) -> sp.Symbol:
    return lattice_var("x", offset)


def jet_var(order: int) -> sp.Symbol:
    """u, u1, u2, ... of the continuous jet space."""
    return U if order == 0 else sp.Symbol(f"u{order}")


def parse_lattice_name(name: str) -> Optional[Tuple[str, int]]:
    match = _LATTICE_NAME.match(name)
    if match is None:
        return None
    return match.group(1), int(match.group(2))


def is_lattice_symbol(node: sp.Basic) -> bool:
    return isinstance(node, sp.Symbol) and parse_lattice_name(node.name) is not None


class LatticeFunction(AppliedUndef):
    """Application of an index-dependent function symbol such as f[0](u[0])."""

    def fdiff(self, argindex=1):
        return lattice_function(self.stem, self.offset, self.order + 1)(*self.args)


@lru_cache(maxsize=None)
def lattice_function(stem: str, offset: int, order: int = 0) -> UndefinedFunction:
    name = f"{stem}{chr(39) * order}[{offset}]"
    return UndefinedFunction(name, bases=(LatticeFunction,), stem=stem, offset=offset, order=order)


def function_atoms(e: sp.Expr) -> Set[LatticeFunction]:
    return {a for a in e.atoms(AppliedUndef) if isinstance(a, LatticeFunction)}


def lattice_symbols(e: sp.Expr) -> Set[sp.Symbol]:
    return {s for s in e.free_symbols if is_lattice_symbol(s)}


def stencil(e: sp.Expr) -> FrozenSet[int]:
    offsets = {parse_lattice_name(s.name)[1] for s in lattice_symbols(e)}
    offsets.update(f.offset for f in function_atoms(e))
    return frozenset(offsets)


def _transform(node: sp.Basic, rule: Callable[[sp.Basic], Optional[sp.Basic]]) -> sp.Basic:
    out = rule(node)
    if out is not None:
        return out
    if not node.args:
        return node
    return node.func(*[_transform(arg, rule) for arg in node.args])


def shift(e: sp.Expr, j: int, max_offset: int = config.MAX_OFFSET) -> sp.Expr:
    """Translate the base index n -> n + j."""
    if j == 0:
        return e

    def _check(offset: int) -> int:
        if abs(offset) > max_offset:
            raise StencilError(f"Offset {offset} exceeds the bound {max_offset}")
        return offset

    def rule(node):
        if isinstance(node, sp.Symbol):
            parsed = parse_lattice_name(node.name)
            return lattice_var(parsed[0], _check(parsed[1] + j)) if parsed else node
        if isinstance(node, LatticeFunction):
            fn = lattice_function(node.stem, _check(node.offset + j), node.order)
            return fn(*[_transform(arg, rule) for arg in node.args])
        return None

    return _transform(sp.sympify(e), rule)


def differentiate(e: sp.Expr, v: sp.Symbol) -> sp.Expr:
    return sp.diff(e, v)


def normalize(e: sp.Expr) -> sp.Expr:
    """
    Rational canonical form: expanded numerator over expanded denominator with
    exact rational coefficients. exp, log and function symbols are opaque atoms.
    """
    return sp.cancel(sp.together(sp.sympify(e)))


def has_opaque_atoms(e: sp.Expr) -> bool:
    return bool(e.atoms(sp.exp, sp.log, sp.sin, sp.cos) or function_atoms(e))


class DslPrinter(StrPrinter):
    def _print_Pow(self, expr, rational=False):
        return super()._print_Pow(expr, rational=rational).replace("**", "^")

    def _print_Exp1(self, expr):
        return "exp(1)"


_PRINTER = DslPrinter()


def to_text(e: sp.Expr) -> str:
    return _PRINTER.doprint(sp.sympify(e))


@dataclass(frozen=True)
class Binding:
    """Numeric values for symbols (by name) and evaluators for function stems."""

    values: Mapping[str, float] = field(default_factory=dict)
    functions: Mapping[str, FunctionEvaluator] = field(default_factory=dict)

    def value(self, name: str) -> float:
        try:
            return self.values[name]
        except KeyError:
            raise UnboundSymbolError(name) from None

    def function(self, stem: str) -> FunctionEvaluator:
        try:
            return self.functions[stem]
        except KeyError:
            raise UnboundSymbolError(stem) from None

    def with_values(self, values: Mapping[str, float]) -> "Binding":
        merged = dict(self.values)
        merged.update(values)
        return Binding(merged, self.functions)


# A compiled node maps a binding to (value, magnitude), where magnitude bounds
# the size of the terms that were summed to produce value.
Compiled = Callable[[Binding], Tuple[float, float]]


def _guard(node: sp.Basic, run: Callable[[Binding], Tuple[float, float]]) -> Compiled:
    def guarded(b: Binding) -> Tuple[float, float]:
        try:
            return run(b)
        except (OverflowError, ZeroDivisionError) as e:
            raise DomainError(str(e), to_text(node)) from None

    return guarded


def _compile(node: sp.Basic) -> Compiled:
    if node.is_Number or node.is_NumberSymbol:
        c = float(node)
        return lambda b: (c, abs(c))

    if isinstance(node, sp.Symbol):
        name = node.name

        def run_symbol(b: Binding) -> Tuple[float, float]:
            v = b.value(name)
            return v, abs(v)

        return run_symbol

    if isinstance(node, LatticeFunction):
        stem, order = node.stem, node.order
        inner = _compile(node.args[0])

        def run_function(b: Binding) -> Tuple[float, float]:
            fn = b.function(stem)
            v, m = inner(b)
            y = fn(v, order)
            return y, abs(y) + abs(fn(v, order + 1)) * m

        return _guard(node, run_function)

    parts = [_compile(arg) for arg in node.args]

    if isinstance(node, sp.Add):

        def run_add(b: Binding) -> Tuple[float, float]:
            value, mag = 0.0, 0.0
            for part in parts:
                v, m = part(b)
                value += v
                mag += m
            return value, mag

        return run_add

    if isinstance(node, sp.Mul):

        def run_mul(b: Binding) -> Tuple[float, float]:
            value, mag = 1.0, 1.0
            for part in parts:
                v, m = part(b)
                value *= v
                mag *= m
            return value, mag

        return run_mul

    if isinstance(node, sp.Pow):
        base, exponent = parts[0], node.exp
        if not exponent.is_Number:
            raise LambdaSymError(f"Non-constant exponent in {to_text(node)}")
        k = int(exponent) if exponent.is_Integer else float(exponent)

        def run_pow(b: Binding) -> Tuple[float, float]:
            v, m = base(b)
            if k < 0 and v == 0.0:
                raise DomainError("division by zero", to_text(node))
            if not isinstance(k, int) and v < 0:
                raise DomainError("fractional power of a negative value", to_text(node))
            y = v**k
            if k >= 0:
                return y, m**k
            return y, abs(y) * abs(k) * m / abs(v)

        return _guard(node, run_pow)

    if isinstance(node, sp.exp):
        inner = parts[0]

        def run_exp(b: Binding) -> Tuple[float, float]:
            v, m = inner(b)
            y = math.exp(v)
            return y, y * (1.0 + m)

        return _guard(node, run_exp)

    if isinstance(node, sp.log):
        inner = parts[0]

        def run_log(b: Binding) -> Tuple[float, float]:
            v, m = inner(b)
            if v <= 0.0:
                raise DomainError("log of a non-positive value", to_text(node))
            y = math.log(v)
            return y, abs(y) + m / v

        return _guard(node, run_log)

    if isinstance(node, (sp.sin, sp.cos)):
        inner = parts[0]
        fn = math.sin if isinstance(node, sp.sin) else math.cos

        def run_trig(b: Binding) -> Tuple[float, float]:
            v, m = inner(b)
            y = fn(v)
            return y, abs(y) + m

        return run_trig

    raise LambdaSymError(f"Cannot evaluate {to_text(node)}")


@lru_cache(maxsize=4096)
def compile_expr(e: sp.Expr) -> Compiled:
    return _compile(sp.sympify(e))


def evaluate(e: sp.Expr, b: Binding) -> float:
    return compile_expr(e)(b)[0]


def evaluate_with_magnitude(e: sp.Expr, b: Binding) -> Tuple[float, float]:
    return compile_expr(e)(b)


def substitute_numeric(e: sp.Expr, b: Binding) -> sp.Expr:
    """
    Replace bound symbols by floats and evaluate function symbols whose argument
    became numeric; unbound symbols (for example ansatz unknowns) are kept.
    """

    def rule(node):
        if isinstance(node, sp.Symbol):
            return sp.Float(b.values[node.name]) if node.name in b.values else node
        if isinstance(node, LatticeFunction):
            arg = _transform(node.args[0], rule)
            if arg.is_Number and node.stem in b.functions:
                return sp.Float(b.functions[node.stem](float(arg), node.order))
            return node.func(arg)
        return None

    return _transform(sp.sympify(e), rule)


def inline_functions(e: sp.Expr, functions: Mapping[str, FunctionEvaluator]) -> sp.Expr:
    """Replace function symbols with an exact symbolic evaluator (poly) by their expression."""

    def rule(node):
        if isinstance(node, LatticeFunction):
            fn = functions.get(node.stem)
            arg = _transform(node.args[0], rule)
            if fn is not None and fn.inlinable:
                return fn.as_expr(arg, node.order)
            return node.func(arg)
        return None

    return _transform(sp.sympify(e), rule)


@dataclass(frozen=True)
class SamplingBox:
    """
    Sampling domain: an interval for every free symbol, fixed values for the
    rest, function evaluators, and guard expressions that must stay away from 0.
    """

    intervals: Mapping[str, Tuple[float, float]] = field(default_factory=dict)
    values: Mapping[str, float] = field(default_factory=dict)
    functions: Mapping[str, FunctionEvaluator] = field(default_factory=dict)
    guards: Tuple[sp.Expr, ...] = ()
    guard_threshold: float = 1e-8

    @classmethod
    def covering(
        cls,
        exprs: Iterable[sp.Expr],
        values: Optional[Mapping[str, float]] = None,
        functions: Optional[Mapping[str, FunctionEvaluator]] = None,
        interval: Tuple[float, float] = config.INTERVAL,
        intervals: Optional[Mapping[str, Tuple[float, float]]] = None,
        guards: Sequence[sp.Expr] = (),
    ) -> "SamplingBox":
        values = dict(values or {})
        chosen = dict(intervals or {})
        for e in list(exprs) + list(guards):
            for s in sp.sympify(e).free_symbols:
                if s.name not in values and s.name not in chosen:
                    chosen[s.name] = interval
        return cls(chosen, values, dict(functions or {}), tuple(guards))

    def with_guards(self, guards: Sequence[sp.Expr]) -> "SamplingBox":
        return SamplingBox(self.intervals, self.values, self.functions, self.guards + tuple(guards), self.guard_threshold)

    def draw(self, rng: np.random.Generator) -> Binding:
        values = dict(self.values)
        for name in sorted(self.intervals):
            lo, hi = self.intervals[name]
            values[name] = float(rng.uniform(lo, hi))
        return Binding(values, self.functions)

    def admits(self, b: Binding) -> bool:
        for g in self.guards:
            try:
                if abs(evaluate(g, b)) <= self.guard_threshold:
                    return False
            except DomainError:
                return False
        return True


def sample_values(
    exprs: Sequence[sp.Expr],
    box: SamplingBox,
    samples: int = config.SAMPLES,
    seed: int = config.SEED,
    max_rejections: int = config.MAX_REJECTIONS,
) -> Tuple[np.ndarray, int]:
    """
    Evaluate every expression at `samples` admissible points of the box.

    Points where a guard vanishes or an expression hits a domain error are
    rejected and redrawn. Returns the (samples, len(exprs)) value matrix and the
    number of rejected points.
    """
    rng = np.random.default_rng(seed)
    compiled = [compile_expr(sp.sympify(e)) for e in exprs]
    rows, rejected = [], 0
    while len(rows) < samples:
        b = box.draw(rng)
        try:
            if not box.admits(b):
                raise DomainError("guard vanishes", ", ".join(to_text(g) for g in box.guards))
            row = [fn(b)[0] for fn in compiled]
            if not all(math.isfinite(v) for v in row):
                raise DomainError("non-finite value", ", ".join(to_text(e) for e in exprs))
        except DomainError as e:
            rejected += 1
            logger.debug(f"Rejected sample point: {e}")
            if rejected > max_rejections:
                raise SamplingError(f"Sampling domain exhausted after {rejected} rejections: {e}") from None
            continue
        rows.append(row)
    return np.asarray(rows, dtype=float).reshape(samples, len(exprs)), rejected


def equivalent(
    e1: sp.Expr,
    e2: sp.Expr,
    box: Optional[SamplingBox] = None,
    tol: float = config.TOLERANCE,
    samples: int = config.SAMPLES,
    seed: int = config.SEED,
    max_rejections: int = config.MAX_REJECTIONS,
) -> bool:
    """|e1 - e2| <= tol * (1 + |e1|) at every sample point."""
    if box is None:
        box = SamplingBox.covering([e1, e2])
    values, _ = sample_values([e1, e2], box, samples=samples, seed=seed, max_rejections=max_rejections)
    return bool(np.all(np.abs(values[:, 0] - values[:, 1]) <= tol * (1.0 + np.abs(values[:, 0]))))


def window_binding(
    values: Sequence[float],
    base: int,
    offsets: Iterable[int],
    x_values: Optional[Sequence[float]] = None,
    extra: Optional[Mapping[str, float]] = None,
    functions: Optional[Mapping[str, FunctionEvaluator]] = None,
) -> Binding:
    """Bind u[k] (and x[k]) to values[base + k] for every offset k."""
    bound: Dict[str, float] = dict(extra or {})
    for k in offsets:
        if 0 <= base + k < len(values):
            bound[u_(k).name] = float(values[base + k])
            if x_values is not None:
                bound[x_(k).name] = float(x_values[base + k])
    return Binding(bound, dict(functions or {}))
