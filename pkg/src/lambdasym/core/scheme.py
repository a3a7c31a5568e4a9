import logging
import math
import re
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Dict, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import sympy as sp

from . import config
from .errors import DomainError, LambdaSymError, StencilError, UnsupportedSchemeError
from .expr import (
    H,
    Binding,
    SamplingBox,
    compile_expr,
    equivalent,
    lattice_symbols,
    normalize,
    stencil,
    to_text,
    u_,
    window_binding,
)
from .functions import FunctionEvaluator, format_functions, parse_functions
from .parser import parse, parse_equation

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Lattice:
    """
    kind is "uniform" (x[n+1] - x[n] = h) or "explicit" (given points x[n]).
    spacing None keeps h symbolic.
    """

    kind: str = "uniform"
    spacing: Optional[float] = None
    points: Optional[Tuple[float, ...]] = None
    origin: float = 0.0

    def __post_init__(self):
        if self.kind not in ("uniform", "explicit"):
            raise LambdaSymError(f"Unsupported lattice kind {self.kind}")
        if self.kind == "uniform" and self.spacing is not None and not self.spacing > 0:
            raise LambdaSymError(f"Lattice spacing must be positive, got {self.spacing}")
        if self.kind == "explicit":
            if not self.points or len(self.points) < 2:
                raise LambdaSymError("An explicit lattice needs at least two points")
            if any(b <= a for a, b in zip(self.points, self.points[1:])):
                raise LambdaSymError("Explicit lattice points must be increasing")

    @property
    def uniform(self) -> bool:
        return self.kind == "uniform"

    def x_values(self, count: int, h: Optional[float] = None) -> np.ndarray:
        if self.kind == "explicit":
            if count > len(self.points):
                raise StencilError(f"Explicit lattice has {len(self.points)} points, {count} requested")
            return np.asarray(self.points[:count], dtype=float)
        h = self.spacing if h is None else h
        if h is None:
            raise LambdaSymError("A numeric spacing is needed to place lattice points")
        return self.origin + h * np.arange(count, dtype=float)

    def describe(self) -> str:
        if self.kind == "explicit":
            return "explicit " + " ".join(f"{p:g}" for p in self.points)
        return "uniform " + ("h" if self.spacing is None else f"{self.spacing:g}")

    @classmethod
    def parse(cls, text: str) -> "Lattice":
        parts = text.split()
        if parts and parts[0] == "uniform" and len(parts) == 2:
            return cls("uniform", None if parts[1] == "h" else float(parts[1]))
        if parts and parts[0] == "explicit" and len(parts) > 2:
            return cls("explicit", points=tuple(float(p) for p in parts[1:]))
        raise LambdaSymError(f"Cannot parse the lattice: {text}")


@dataclass(frozen=True)
class Scheme:
    """
    Scalar difference scheme E(u[-a..b], x[-a..b], h) = 0 on a fixed lattice,
    optionally with the explicit form u[b] = G(u[-a..b-1], ...).
    """

    name: str
    a: int
    b: int
    equation: sp.Expr
    lattice: Lattice = field(default_factory=Lattice)
    solved: Optional[sp.Expr] = None
    functions: Mapping[str, FunctionEvaluator] = field(default_factory=dict)
    # known multiplier of a λ-symmetry, used when none is given explicitly
    chi: Optional[sp.Expr] = None

    def __post_init__(self):
        if self.a < 0 or self.b < 0:
            raise StencilError(f"Stencil bounds must be non-negative, got -{self.a}..{self.b}")
        offsets = stencil(self.equation)
        if not offsets or min(offsets) != -self.a or max(offsets) != self.b:
            raise StencilError(
                f"Equation of {self.name} has stencil {sorted(offsets)}, expected endpoints -{self.a} and {self.b}"
            )
        if self.solved is not None:
            if self.leading in lattice_symbols(self.solved) or not stencil(self.solved) <= set(self.window_offsets):
                raise StencilError(f"Solved form of {self.name} must only use u[{-self.a}..{self.b - 1}]")
            self._check_solved(self.solved)

    @property
    def leading(self) -> sp.Symbol:
        return u_(self.b)

    @property
    def window_offsets(self) -> Tuple[int, ...]:
        """Offsets of the free window variables u[-a..b-1]."""
        return tuple(range(-self.a, self.b))

    @cached_property
    def solved_form(self) -> sp.Expr:
        return self.solved if self.solved is not None else solve_for_leading(self)

    def on_shell(self, e: sp.Expr) -> sp.Expr:
        """Eliminate u[b] from e through the solved form."""
        return sp.sympify(e).xreplace({self.leading: self.solved_form})

    def h_value(self, h: Optional[float] = None) -> float:
        if h is not None:
            return h
        return self.lattice.spacing if self.lattice.spacing is not None else config.DEFAULT_H

    def binding(self, h: Optional[float] = None, **values: float) -> Binding:
        bound = {H.name: self.h_value(h)}
        bound.update(values)
        return Binding(bound, dict(self.functions))

    def _check_solved(self, g: sp.Expr):
        residual = self.equation.xreplace({self.leading: g})
        if normalize(residual) == 0:
            return
        box = SamplingBox.covering([residual], values={H.name: self.h_value()}, functions=self.functions)
        if not equivalent(residual, sp.Integer(0), box):
            raise UnsupportedSchemeError(f"Solved form of {self.name} does not annihilate its equation")

    def to_text(self) -> str:
        lines = [
            f"name = {self.name}",
            f"stencil = {-self.a}..{self.b}",
            f"lattice = {self.lattice.describe()}",
            f"equation = {to_text(self.equation)} = 0",
        ]
        if self.solved is not None:
            lines.append(f"solved = {to_text(self.solved)}")
        if self.functions:
            lines.append(f"functions = {format_functions(dict(self.functions))}")
        if self.chi is not None:
            lines.append(f"chi = {to_text(self.chi)}")
        return "\n".join(lines) + "\n"


def solve_for_leading(s: Scheme) -> sp.Expr:
    """
    Solve E = 0 for u[b] when E is affine in it: E = A u[b] + B gives G = -B / A.
    """
    ub = s.leading
    numerator, denominator = sp.fraction(normalize(s.equation))
    coefficient = normalize(sp.diff(numerator, ub))
    rest = sp.expand(numerator - coefficient * ub)
    if ub in denominator.free_symbols or coefficient == 0 or ub in (coefficient.free_symbols | rest.free_symbols):
        raise UnsupportedSchemeError(f"Equation of {s.name} is not affine in {ub}; supply the solved form")
    g = normalize(-rest / coefficient)
    logger.debug(f"Solved {s.name} for {ub}: {to_text(g)}")
    return g


@dataclass
class Trajectory:
    """u_n for n = 0..len(values)-1 on the lattice points x, with the binding used."""

    values: np.ndarray
    x: np.ndarray
    binding: Binding
    a: int
    b: int
    divergent: bool = False
    reason: Optional[str] = None

    def __len__(self) -> int:
        return len(self.values)

    def window(self, n: int, offsets: Sequence[int]) -> Binding:
        return window_binding(
            self.values, n, offsets, self.x, extra=self.binding.values, functions=self.binding.functions
        )

    def bases(self, lo: int, hi: int) -> range:
        """Base indices n whose window n+lo..n+hi lies inside the trajectory."""
        return range(-lo, len(self.values) - hi)


def iterate_trajectory(
    s: Scheme,
    init: Sequence[float],
    steps: int,
    bind: Optional[Binding] = None,
    bound: float = config.DIVERGENCE_BOUND,
) -> Trajectory:
    """
    Iterate u[b] = G(window) from a+b initial values. Iteration stops, and the
    trajectory is flagged divergent, when a value leaves |u| <= bound, becomes
    NaN, or G hits a domain error.
    """
    width = s.a + s.b
    if len(init) != width:
        raise LambdaSymError(f"Scheme {s.name} needs {width} initial values, got {len(init)}")
    bind = bind if bind is not None else s.binding()
    if not bind.functions and s.functions:
        bind = Binding(bind.values, dict(s.functions))
    h = bind.values.get(H.name)
    x = s.lattice.x_values(width + steps, h) if (h is not None or not s.lattice.uniform) else None
    g = compile_expr(s.solved_form)
    offsets = s.window_offsets

    values = list(float(v) for v in init)
    divergent, reason = False, None
    for step in range(steps):
        n = step + s.a
        window = window_binding(values, n, offsets, x, extra=bind.values, functions=bind.functions)
        try:
            nxt = g(window)[0]
        except DomainError as e:
            divergent, reason = True, str(e)
            break
        if not math.isfinite(nxt) or abs(nxt) > bound:
            divergent, reason = True, f"|u| exceeded {bound:g} at n={n + s.b}"
            break
        values.append(nxt)
    if divergent:
        logger.debug(f"Trajectory of {s.name} truncated after {len(values)} values: {reason}")
    if x is None:
        x = np.arange(len(values), dtype=float)
    return Trajectory(np.asarray(values, dtype=float), np.asarray(x[: len(values)]), bind, s.a, s.b, divergent, reason)


def residual(s: Scheme, t: Trajectory) -> float:
    """max over windows of |E|."""
    if len(t) < s.a + s.b + 1:
        raise StencilError(f"Trajectory of length {len(t)} holds no full stencil of {s.name}")
    e = compile_expr(s.equation)
    offsets = range(-s.a, s.b + 1)
    return max(abs(e(t.window(n, offsets))[0]) for n in t.bases(-s.a, s.b))


_FIELD = re.compile(r"^\s*([A-Za-z_]+)\s*=\s*(.*?)\s*$")


def parse_scheme(text: str, name: Optional[str] = None) -> Scheme:
    """
    Read the structured scheme format:

        name = ex2
        stencil = -1..1
        lattice = uniform h
        equation = (u[1]-2*u[0]+u[-1])/h^2 = ...
        solved = ...                        (optional)
        functions = f: builtin(exp)         (optional)
        chi = 1 + h*u[0]                    (optional)
    """
    fields: Dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0]
        if not line.strip():
            continue
        match = _FIELD.match(line)
        if match is None:
            raise LambdaSymError(f"Line {lineno}: expected 'key = value', got {line.strip()!r}")
        fields[match.group(1)] = match.group(2)

    missing = [key for key in ("stencil", "equation") if key not in fields]
    if missing:
        raise LambdaSymError(f"Scheme is missing the fields {', '.join(missing)}")

    match = re.fullmatch(r"\s*(-?\d+)\s*\.\.\s*(-?\d+)\s*", fields["stencil"])
    if match is None or int(match.group(1)) > 0 or int(match.group(2)) < 0:
        raise LambdaSymError(f"Cannot parse the stencil: {fields['stencil']}")

    return Scheme(
        name=fields.get("name", name or "scheme"),
        a=-int(match.group(1)),
        b=int(match.group(2)),
        equation=parse_equation(fields["equation"]),
        lattice=Lattice.parse(fields.get("lattice", "uniform h")),
        solved=parse(fields["solved"]) if "solved" in fields else None,
        functions=parse_functions(fields.get("functions")),
        chi=parse(fields["chi"]) if "chi" in fields else None,
    )


def load_scheme(path: Union[str, Path]) -> Scheme:
    path = Path(path)
    return parse_scheme(path.read_text(encoding="utf-8"), name=path.stem)
