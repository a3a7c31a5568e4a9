import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import sympy as sp

from .errors import LambdaSymError, StencilError
from .expr import H, normalize, shift, stencil, to_text, u_, x_
from .scheme import Lattice

logger = logging.getLogger(__name__)

XI_CONVENTIONS = ("weighted", "literal")


@dataclass(frozen=True)
class DiscreteVectorField:
    """
    Coefficients (xi, phi) of the field at the base point n, both functions of
    (x[0], u[0]) with the exponential potential factor stripped; eta is the
    optional potential component, which may use several lattice points.
    """

    xi: sp.Expr = sp.Integer(0)
    phi: sp.Expr = sp.Integer(1)
    eta: Optional[sp.Expr] = None

    def __post_init__(self):
        object.__setattr__(self, "xi", sp.sympify(self.xi))
        object.__setattr__(self, "phi", sp.sympify(self.phi))
        if self.eta is not None:
            object.__setattr__(self, "eta", sp.sympify(self.eta))
        for label, e in (("xi", self.xi), ("phi", self.phi)):
            if not stencil(e) <= {0}:
                raise StencilError(f"{label} must only depend on x[0] and u[0], got {to_text(e)}")

    def to_dict(self) -> dict:
        data = {"xi": to_text(self.xi), "phi": to_text(self.phi)}
        if self.eta is not None:
            data["eta"] = to_text(self.eta)
        return data


@dataclass(frozen=True)
class ChiMultiplier:
    """
    chi = exp(h lambda) at the base point. lam overrides log(chi)/h when the
    multiplier was built from lambda (non-uniform lattices need it).
    """

    chi: sp.Expr
    lam_expr: Optional[sp.Expr] = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "chi", sp.sympify(self.chi))
        if normalize(self.chi) == 0:
            raise LambdaSymError("chi must not vanish identically")
        if not stencil(self.chi) <= {0}:
            raise StencilError(f"chi must only depend on x[0] and u[0], got {to_text(self.chi)}")

    @property
    def lam(self) -> sp.Expr:
        if self.lam_expr is not None:
            return self.lam_expr
        return sp.log(self.chi) / H

    @classmethod
    def from_lambda(cls, lam: sp.Expr) -> "ChiMultiplier":
        lam = sp.sympify(lam)
        return cls(sp.exp(H * lam), lam)

    @classmethod
    def identity(cls) -> "ChiMultiplier":
        return cls(sp.Integer(1))

    def __str__(self) -> str:
        return to_text(self.chi)


@dataclass(frozen=True)
class ProlongedField:
    """Coefficients of d/dx[k] and d/du[k] for every offset k in [-a, b]."""

    a: int
    b: int
    coefficients: Dict[int, Tuple[sp.Expr, sp.Expr]]

    def x_coefficient(self, k: int) -> sp.Expr:
        return self.coefficients[k][0]

    def u_coefficient(self, k: int) -> sp.Expr:
        return self.coefficients[k][1]

    def describe(self) -> str:
        terms = []
        for k in sorted(self.coefficients):
            cx, cu = self.coefficients[k]
            if cx != 0:
                terms.append(f"({to_text(cx)})*d/d{x_(k)}")
            if cu != 0:
                terms.append(f"({to_text(cu)})*d/d{u_(k)}")
        return " + ".join(terms) or "0"


def potential_weight(chi: ChiMultiplier, k: int, lattice: Optional[Lattice] = None) -> sp.Expr:
    """
    W(k) = exp(w[n+k] - w[n]) where w[n+1] - w[n] = (x[n+1] - x[n]) lambda[n].

    On a uniform lattice this is the product chi[0] chi[1] ... chi[k-1] for
    k > 0 and 1 / (chi[-1] chi[-2] ... chi[k]) for k < 0.
    """
    if k == 0:
        return sp.Integer(1)
    if lattice is None or lattice.uniform:
        if k > 0:
            return sp.Mul(*[shift(chi.chi, i) for i in range(k)])
        return sp.Mul(*[1 / shift(chi.chi, -i - 1) for i in range(-k)])
    lam = chi.lam
    if k > 0:
        exponent = sum((x_(i + 1) - x_(i)) * shift(lam, i) for i in range(k))
    else:
        exponent = -sum((x_(-i) - x_(-i - 1)) * shift(lam, -i - 1) for i in range(-k))
    return sp.exp(exponent)


def lambda_prolong(
    vf: DiscreteVectorField,
    chi: ChiMultiplier,
    a: int,
    b: int,
    lattice: Optional[Lattice] = None,
    xi_convention: str = "weighted",
) -> ProlongedField:
    """
    Discrete lambda-prolongation on the stencil [-a, b]: the d/du[k] coefficient is
    W(k) shift(phi, k). With the "weighted" convention the d/dx[k] coefficient is
    W(k) shift(xi, k); "literal" puts the unweighted base coefficient xi on every
    d/dx[k].
    """
    if a < 0 or b < 0:
        raise StencilError(f"Stencil bounds must be non-negative, got -{a}..{b}")
    if xi_convention not in XI_CONVENTIONS:
        raise LambdaSymError(f"Unknown xi convention {xi_convention}, expected one of {XI_CONVENTIONS}")
    coefficients = {0: (vf.xi, vf.phi)}
    for k in range(-a, b + 1):
        if k == 0:
            continue
        weight = potential_weight(chi, k, lattice)
        x_part = weight * shift(vf.xi, k) if xi_convention == "weighted" else vf.xi
        coefficients[k] = (x_part, weight * shift(vf.phi, k))
    return ProlongedField(a, b, coefficients)


def apply_field(p: ProlongedField, e: sp.Expr, normalized: bool = True) -> sp.Expr:
    """sum_k [cx(k) de/dx[k] + cu(k) de/du[k]]."""
    e = sp.sympify(e)
    offsets = stencil(e)
    if offsets and (min(offsets) < -p.a or max(offsets) > p.b):
        raise StencilError(f"Stencil {sorted(offsets)} of {to_text(e)} exceeds the prolongation -{p.a}..{p.b}")
    terms = []
    for k, (cx, cu) in p.coefficients.items():
        if cx != 0:
            terms.append(cx * sp.diff(e, x_(k)))
        if cu != 0:
            terms.append(cu * sp.diff(e, u_(k)))
    result = sp.Add(*terms)
    return normalize(result) if normalized else result
