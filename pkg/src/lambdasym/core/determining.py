import logging
import math
from typing import NamedTuple, Optional, Sequence

import numpy as np
import sympy as sp

from . import config
from .errors import DomainError, LambdaSymError
from .expr import (
    H,
    Compiled,
    SamplingBox,
    compile_expr,
    has_opaque_atoms,
    lattice_symbols,
    normalize,
    parse_lattice_name,
    sample_values,
    shift,
    to_text,
    u_,
    x_,
)
from .prolong import ChiMultiplier, DiscreteVectorField, apply_field, lambda_prolong
from .report import CheckReport
from .scheme import Lattice, Scheme, Trajectory

logger = logging.getLogger(__name__)


class DeterminingExpression(NamedTuple):
    """
    The λ-prolonged field applied to the scheme with u[b] eliminated. raw is the
    on-shell expression before normalization (what gets sampled).
    """

    residual: sp.Expr
    raw: sp.Expr
    scheme: Scheme
    vf: DiscreteVectorField
    chi: ChiMultiplier

    @property
    def subject(self) -> str:
        return f"{self.scheme.name}: phi={to_text(self.vf.phi)}, chi={to_text(self.chi.chi)}"


def determining_expression(
    s: Scheme,
    vf: DiscreteVectorField,
    chi: ChiMultiplier,
    xi_convention: str = "weighted",
) -> DeterminingExpression:
    p = lambda_prolong(vf, chi, s.a, s.b, s.lattice, xi_convention=xi_convention)
    raw = s.on_shell(apply_field(p, s.equation, normalized=False))
    residual = normalize(raw)
    if s.leading in residual.free_symbols:
        raise LambdaSymError(f"Leading variable {s.leading} survived elimination in {s.name}")
    logger.debug(f"Determining residual of {s.name}: {to_text(residual)}")
    return DeterminingExpression(residual, raw, s, vf, chi)


def place_lattice(e: sp.Expr, s: Scheme, h: Optional[float] = None) -> sp.Expr:
    """
    Tie the x[k] of e to the lattice: x[k] = x[0] + k h on a uniform lattice, the
    given points (base index a) on an explicit one.
    """
    mapping = {}
    for sym in lattice_symbols(e):
        stem, k = parse_lattice_name(sym.name)
        if stem != "x":
            continue
        if s.lattice.uniform:
            if k != 0:
                mapping[sym] = x_(0) + k * H
        else:
            points = s.lattice.points
            if not 0 <= s.a + k < len(points):
                raise LambdaSymError(f"Explicit lattice of {s.name} has no point for {sym}")
            mapping[sym] = sp.Float(points[s.a + k])
    return e.xreplace(mapping) if mapping else e


def default_box(
    s: Scheme,
    exprs: Sequence[sp.Expr],
    chi: Optional[ChiMultiplier] = None,
    h: Optional[float] = None,
    interval=config.INTERVAL,
) -> SamplingBox:
    """
    Window variables and x[0] drawn from `interval`, h fixed to the lattice
    spacing (or the default), and the multipliers chi[-a..b-1] guarded away from 0.
    """
    guards = []
    if chi is not None:
        guards = [place_lattice(shift(chi.chi, k), s, h) for k in range(-s.a, s.b)]
    return SamplingBox.covering(
        [place_lattice(sp.sympify(e), s, h) for e in exprs],
        values={H.name: s.h_value(h)},
        functions=s.functions,
        interval=interval,
        guards=guards,
    )


def check_symmetry(
    s: Scheme,
    vf: DiscreteVectorField,
    chi: ChiMultiplier,
    box: Optional[SamplingBox] = None,
    tol: float = config.TOLERANCE,
    samples: int = config.SAMPLES,
    seed: int = config.SEED,
    max_rejections: int = config.MAX_REJECTIONS,
    h: Optional[float] = None,
    xi_convention: str = "weighted",
) -> CheckReport:
    """
    Decide the determining identity symbolically when the residual normalizes,
    and always sample it. Passes iff the residual is symbolically zero or its
    largest sampled magnitude is within tol.
    """
    det = determining_expression(s, vf, chi, xi_convention=xi_convention)
    if det.residual == 0:
        verdict = "zero"
    elif has_opaque_atoms(det.residual):
        verdict = "undecided"
    else:
        verdict = "nonzero"

    target = place_lattice(det.raw, s, h)
    if box is None:
        box = default_box(s, [target], chi, h)
    values, rejected = sample_values([target], box, samples=samples, seed=seed, max_rejections=max_rejections)
    magnitudes = np.abs(values[:, 0])
    max_residual = float(magnitudes.max())
    mean_residual = float(magnitudes.mean())
    passed = verdict == "zero" or max_residual <= tol
    logger.info(f"{det.subject}: verdict={verdict} max|residual|={max_residual:.3e} passed={passed}")
    return CheckReport(
        subject=det.subject,
        verdict=verdict,
        max_residual=max_residual,
        mean_residual=mean_residual,
        samples=samples,
        seed=seed,
        tol=tol,
        passed=passed,
        rejected=rejected,
        residual=to_text(det.residual),
    )


def _step(lattice: Optional[Lattice]) -> sp.Expr:
    if lattice is None or lattice.uniform:
        return H
    return x_(1) - x_(0)


def eta_residual(vf: DiscreteVectorField, lam: sp.Expr, lattice: Optional[Lattice] = None) -> sp.Expr:
    """
    Compatibility of the potential component eta with lambda:

        exp(h lam) (eta[1] - xi[1] lam) - (eta - xi lam) + h (xi dlam/dx[0] + phi dlam/du[0])

    where [1] is the forward shift. exp stays an atom.
    """
    if vf.eta is None:
        raise LambdaSymError("The vector field carries no eta component")
    lam = sp.sympify(lam)
    step = _step(lattice)
    return (
        sp.exp(step * lam) * (shift(vf.eta, 1) - shift(vf.xi, 1) * lam)
        - (vf.eta - vf.xi * lam)
        + step * (vf.xi * sp.diff(lam, x_(0)) + vf.phi * sp.diff(lam, u_(0)))
    )


class _EtaTerms(NamedTuple):
    lam: Compiled
    xi: Compiled
    xi_next: Compiled
    phi: Compiled
    lam_x: Compiled
    lam_u: Compiled


def _eta_terms(vf: DiscreteVectorField, lam: sp.Expr) -> _EtaTerms:
    lam = sp.sympify(lam)
    return _EtaTerms(
        compile_expr(lam),
        compile_expr(vf.xi),
        compile_expr(shift(vf.xi, 1)),
        compile_expr(vf.phi),
        compile_expr(sp.diff(lam, x_(0))),
        compile_expr(sp.diff(lam, u_(0))),
    )


def _step_value(t: Trajectory, n: int) -> float:
    return float(t.x[n + 1] - t.x[n])


def eta_propagate(eta0: float, vf: DiscreteVectorField, lam: sp.Expr, t: Trajectory) -> np.ndarray:
    """
    Forward recursion for eta along a trajectory:

        eta[n+1] = xi[n+1] lam[n] + exp(-h lam[n]) ((eta[n] - xi[n] lam[n]) - h (xi[n] dlam/dx + phi[n] dlam/du))
    """
    terms = _eta_terms(vf, lam)
    etas = [float(eta0)]
    for n in range(len(t) - 1):
        b = t.window(n, (0, 1))
        step = _step_value(t, n)
        lam_n = terms.lam(b)[0]
        try:
            weight = math.exp(step * lam_n)
        except OverflowError:
            weight = math.inf
        if weight == 0.0 or not math.isfinite(weight):
            raise DomainError(f"exp(h*lambda) = {weight} at n={n}", to_text(sp.sympify(lam)))
        xi_n, phi_n = terms.xi(b)[0], terms.phi(b)[0]
        drift = step * (xi_n * terms.lam_x(b)[0] + phi_n * terms.lam_u(b)[0])
        etas.append(terms.xi_next(b)[0] * lam_n + ((etas[-1] - xi_n * lam_n) - drift) / weight)
    return np.asarray(etas, dtype=float)


def eta_defect(etas: Sequence[float], vf: DiscreteVectorField, lam: sp.Expr, t: Trajectory) -> np.ndarray:
    """The compatibility residual evaluated at every step of (etas, t)."""
    terms = _eta_terms(vf, lam)
    defects = []
    for n in range(min(len(etas), len(t)) - 1):
        b = t.window(n, (0, 1))
        step = _step_value(t, n)
        lam_n = terms.lam(b)[0]
        xi_n, phi_n = terms.xi(b)[0], terms.phi(b)[0]
        defects.append(
            math.exp(step * lam_n) * (etas[n + 1] - terms.xi_next(b)[0] * lam_n)
            - (etas[n] - xi_n * lam_n)
            + step * (xi_n * terms.lam_x(b)[0] + phi_n * terms.lam_u(b)[0])
        )
    return np.asarray(defects, dtype=float)
