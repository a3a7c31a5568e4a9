import math
import re
from typing import Dict, NamedTuple, Optional, Tuple

import numpy as np
import sympy as sp
from numpy.polynomial import Polynomial

from .errors import LambdaSymError


class FunctionEvaluator(NamedTuple):
    """
    Numeric stand-in for an index-dependent function symbol f[k].

    kind is one of "exp", "sin", "poly"; coefficients are only used by "poly"
    and are ordered from the constant term upwards.
    """

    kind: str
    coefficients: Tuple[float, ...] = ()

    def __call__(self, x: float, order: int = 0) -> float:
        if self.kind == "exp":
            return math.exp(x)
        if self.kind == "sin":
            return (math.sin, math.cos, lambda t: -math.sin(t), lambda t: -math.cos(t))[order % 4](x)
        if self.kind == "poly":
            return float(self.polynomial.deriv(order)(x)) if order else float(self.polynomial(x))
        raise LambdaSymError(f"Unsupported function kind {self.kind}")

    @property
    def polynomial(self) -> Polynomial:
        return Polynomial(np.asarray(self.coefficients, dtype=float))

    @property
    def inlinable(self) -> bool:
        return self.kind == "poly"

    def as_expr(self, arg: sp.Expr, order: int = 0) -> sp.Expr:
        t = sp.Dummy("t")
        if self.kind == "exp":
            base = sp.exp(t)
        elif self.kind == "sin":
            base = sp.sin(t)
        else:
            base = sum((sp.Rational(str(c)) * t**i for i, c in enumerate(self.coefficients)), sp.Integer(0))
        return sp.diff(base, t, order).subs(t, arg)

    def describe(self) -> str:
        if self.kind == "poly":
            return "poly " + " ".join(f"{c:g}" for c in self.coefficients)
        return self.kind

    @classmethod
    def parse(cls, text: str) -> "FunctionEvaluator":
        """
        Parse "exp", "sin", "poly 1 0 2" or the same wrapped in "builtin(...)".
        """
        body = text.strip()
        match = re.fullmatch(r"builtin\((.*)\)", body)
        if match:
            body = match.group(1).strip()
        parts = body.split()
        if not parts:
            raise LambdaSymError(f"Cannot parse the function evaluator: {text}")
        if parts[0] in ("exp", "sin") and len(parts) == 1:
            return cls(parts[0])
        if parts[0] == "poly" and len(parts) > 1:
            return cls("poly", tuple(float(c) for c in parts[1:]))
        raise LambdaSymError(f"Cannot parse the function evaluator: {text}")


def parse_functions(text: Optional[str]) -> Dict[str, FunctionEvaluator]:
    """
    Parse "f: builtin(exp); g: builtin(poly 0 1)".
    """
    functions = {}
    if not text:
        return functions
    for item in text.split(";"):
        if not item.strip():
            continue
        name, _, spec = item.partition(":")
        if not spec:
            raise LambdaSymError(f"Missing evaluator for function {name.strip()}")
        functions[name.strip()] = FunctionEvaluator.parse(spec)
    return functions


def format_functions(functions: Dict[str, FunctionEvaluator]) -> str:
    return "; ".join(f"{name}: builtin({fn.describe()})" for name, fn in sorted(functions.items()))
