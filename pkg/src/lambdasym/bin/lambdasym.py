import csv
import io
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

import click
import numpy as np

from lambdasym import __version__
from lambdasym.core import config
from lambdasym.core.ansatz import find_lambda_symmetry
from lambdasym.core.continuum import ContinuousLambda, ContinuousVectorField, continuum_limit_check
from lambdasym.core.determining import check_symmetry
from lambdasym.core.errors import NotReducibleError
from lambdasym.core.expr import to_text
from lambdasym.core.parser import parse
from lambdasym.core.prolong import XI_CONVENTIONS, ChiMultiplier, DiscreteVectorField
from lambdasym.core.reduction import invariant, invariant_series, reduce_order, verify_reduction
from lambdasym.core.report import RunReport
from lambdasym.core.scheme import Scheme, iterate_trajectory
from lambdasym.fixtures import resolve_scheme

from .cli_base import cli


def _multiplier(chi: Optional[str], lam: Optional[str]) -> ChiMultiplier:
    if (chi is None) == (lam is None):
        raise click.UsageError("Give exactly one of --chi and --lambda.")
    if chi is not None:
        return ChiMultiplier(parse(chi))
    return ChiMultiplier.from_lambda(parse(lam))


def _default_multiplier(s: Scheme, chi: Optional[str]) -> Optional[ChiMultiplier]:
    if chi is not None:
        return ChiMultiplier(parse(chi))
    if s.chi is not None:
        return ChiMultiplier(s.chi)
    return None


def _emit(report: RunReport, emit: str, output: Optional[str]):
    text = report.to_json() if emit == "json" else report.to_text()
    click.echo(text)
    if output:
        Path(output).write_text(text + ("\n" if emit == "json" else ""), encoding="utf-8")
    if not report.passed:
        sys.exit(2)


@cli.command()
@click.argument("scheme")
@click.option("--xi", default="0", help="xi coefficient in x[0], u[0].")
@click.option("--phi", default="1", help="phi coefficient in x[0], u[0].")
@click.option("--chi", default=None, help="Multiplier chi = exp(h*lambda).")
@click.option("--lambda", "lam", default=None, help="lambda; converted to chi = exp(h*lambda).")
@click.option("--h", type=float, default=None, help="Numeric spacing for sampling (default: lattice spacing or 0.1).")
@click.option("--tol", type=float, default=config.TOLERANCE, help="Tolerance on the sampled residual.")
@click.option("--samples", type=int, default=config.SAMPLES, help="Number of sample points.")
@click.option("--seed", type=int, default=config.SEED, envvar="LAMBDASYM_SEED", help="Sampling seed.")
@click.option(
    "--xi-convention",
    type=click.Choice(XI_CONVENTIONS),
    default="weighted",
    help="Whether the d/dx[k] coefficients carry the potential weights.",
)
@click.option("--emit", type=click.Choice(["json", "text"]), default="json", help="Report format.")
@click.option("-o", "--output", type=click.Path(dir_okay=False), default=None, help="Also write the report here.")
def check(
    scheme: str,
    xi: str,
    phi: str,
    chi: Optional[str],
    lam: Optional[str],
    h: Optional[float],
    tol: float,
    samples: int,
    seed: int,
    xi_convention: str,
    emit: str,
    output: Optional[str],
):
    """Check a candidate λ-symmetry of SCHEME (a scheme file or fixture name)."""
    begin = time.time()
    s = resolve_scheme(scheme)
    multiplier = _multiplier(chi, lam)
    vf = DiscreteVectorField(parse(xi), parse(phi))
    result = check_symmetry(
        s, vf, multiplier, tol=tol, samples=samples, seed=seed, h=h, xi_convention=xi_convention
    )
    report = RunReport(
        version=__version__,
        command="check",
        scheme=s.name,
        inputs={
            "xi": to_text(vf.xi),
            "phi": to_text(vf.phi),
            "chi": to_text(multiplier.chi),
            "lambda": to_text(multiplier.lam),
            "h": s.h_value(h),
            "seed": seed,
            "xi_convention": xi_convention,
        },
        results={"check": result.to_dict()},
        passed=result.passed,
        elapsed=time.time() - begin,
    )
    _emit(report, emit, output)


@cli.command()
@click.argument("scheme")
@click.option("-d", "--chi-degree", type=click.IntRange(0, config.MAX_DEGREE), default=1, help="Degree of the chi ansatz.")
@click.option("--with-phi", is_flag=True, help="Search phi jointly with chi.")
@click.option("--phi-degree", type=click.IntRange(0, config.MAX_DEGREE), default=1, help="Degree of the phi ansatz.")
@click.option("--h", type=float, default=None, help="Numeric spacing for sampling (default: lattice spacing or 0.1).")
@click.option("--tol", type=float, default=config.TOLERANCE, help="Verification tolerance.")
@click.option("--samples", type=int, default=config.SAMPLES, help="Number of sample points.")
@click.option("--seed", type=int, default=config.SEED, envvar="LAMBDASYM_SEED", help="Seed for sampling and Newton starts.")
@click.option("--starts", type=int, default=config.NEWTON_STARTS, help="Newton restarts.")
@click.option(
    "--num-workers",
    type=int,
    default=0,
    envvar=config.NUM_WORKERS_ENV,
    help="Threads for Newton restarts.",
)
@click.option("--progress", is_flag=True, help="Show a progress bar.")
@click.option("--xi-convention", type=click.Choice(XI_CONVENTIONS), default="weighted")
@click.option("--emit", type=click.Choice(["json", "text"]), default="json", help="Report format.")
@click.option("-o", "--output", type=click.Path(dir_okay=False), default=None, help="Also write the report here.")
def find(
    scheme: str,
    chi_degree: int,
    with_phi: bool,
    phi_degree: int,
    h: Optional[float],
    tol: float,
    samples: int,
    seed: int,
    starts: int,
    num_workers: int,
    progress: bool,
    xi_convention: str,
    emit: str,
    output: Optional[str],
):
    """Search polynomial λ-symmetries of SCHEME up to the given degree."""
    begin = time.time()
    s = resolve_scheme(scheme)
    found = find_lambda_symmetry(
        s,
        chi_degree,
        with_phi=with_phi,
        d_phi=phi_degree,
        h=h,
        tol=tol,
        samples=samples,
        seed=seed,
        starts=starts,
        num_workers=num_workers,
        progressbar=progress,
        xi_convention=xi_convention,
    )
    results = {"found": len(found), "symmetries": [sym.to_dict() for sym in found]}
    if not found:
        results["message"] = f"none found up to degree {chi_degree}"
    report = RunReport(
        version=__version__,
        command="find",
        scheme=s.name,
        inputs={
            "chi_degree": chi_degree,
            "with_phi": with_phi,
            "phi_degree": phi_degree if with_phi else None,
            "h": s.h_value(h),
            "seed": seed,
            "xi_convention": xi_convention,
        },
        results=results,
        passed=True,
        elapsed=time.time() - begin,
    )
    _emit(report, emit, output)


@cli.command()
@click.argument("scheme")
@click.option("--chi", default=None, help="Multiplier of the λ-symmetry (default: the scheme's own, else a degree-1 search).")
@click.option("--h", type=float, default=None, help="Numeric spacing (default: lattice spacing or 0.1).")
@click.option("--verify-trials", type=int, default=20, help="Random trajectories to verify on.")
@click.option("--steps", type=int, default=100, help="Steps per trajectory.")
@click.option("--tol", type=float, default=config.TOLERANCE, help="Tolerance on |v[n+1] - R(v[n])|.")
@click.option("--seed", type=int, default=config.SEED, envvar="LAMBDASYM_SEED", help="Seed for initial conditions.")
@click.option("--progress", is_flag=True, help="Show a progress bar.")
@click.option("--emit", type=click.Choice(["json", "text"]), default="json", help="Report format.")
@click.option("-o", "--output", type=click.Path(dir_okay=False), default=None, help="Also write the report here.")
def reduce(
    scheme: str,
    chi: Optional[str],
    h: Optional[float],
    verify_trials: int,
    steps: int,
    tol: float,
    seed: int,
    progress: bool,
    emit: str,
    output: Optional[str],
):
    """Reduce SCHEME to a first-order map through the invariant of a λ-symmetry."""
    begin = time.time()
    s = resolve_scheme(scheme)
    multiplier = _default_multiplier(s, chi)
    if multiplier is None:
        found = find_lambda_symmetry(s, 1, h=h, seed=seed)
        if not found:
            raise click.ClickException(f"No λ-symmetry of degree 1 found for {s.name}; pass --chi")
        multiplier = ChiMultiplier(found[0].chi)

    inv = invariant(multiplier)
    results = {"invariant": inv.to_dict()}
    try:
        reduced = reduce_order(s, inv, h=h, seed=seed)
    except NotReducibleError as e:
        results["message"] = "not reducible by this invariant"
        results["detail"] = str(e)
        passed = False
    else:
        verification = verify_reduction(
            s, inv, reduced, trials=verify_trials, steps=steps, tol=tol, h=h, seed=seed, progressbar=progress
        )
        results["reduced"] = reduced.to_dict()
        results["verification"] = verification.to_dict()
        passed = verification.passed

    report = RunReport(
        version=__version__,
        command="reduce",
        scheme=s.name,
        inputs={"chi": to_text(multiplier.chi), "h": s.h_value(h), "seed": seed, "trials": verify_trials, "steps": steps},
        results=results,
        passed=passed,
        elapsed=time.time() - begin,
    )
    _emit(report, emit, output)


@cli.command()
@click.argument("scheme")
@click.option("--init", "init", type=float, multiple=True, help="Initial values u[0], u[1], ... (default: random).")
@click.option("--steps", type=int, default=100, help="Number of steps.")
@click.option("--chi", default=None, help="Multiplier whose invariant fills the v_n column.")
@click.option("--h", type=float, default=None, help="Numeric spacing (default: lattice spacing or 0.1).")
@click.option("--seed", type=int, default=config.SEED, envvar="LAMBDASYM_SEED", help="Seed for random initial values.")
@click.option("-o", "--output", type=click.Path(dir_okay=False), default=None, help="Write the CSV here.")
def evolve(
    scheme: str,
    init: Sequence[float],
    steps: int,
    chi: Optional[str],
    h: Optional[float],
    seed: int,
    output: Optional[str],
):
    """Iterate SCHEME and dump the trajectory as CSV (n, u_n, v_n)."""
    s = resolve_scheme(scheme)
    if not init:
        lo, hi = config.INTERVAL
        init = np.random.default_rng(seed).uniform(lo, hi, size=s.a + s.b)
    t = iterate_trajectory(s, list(init), steps, s.binding(h))
    multiplier = _default_multiplier(s, chi)
    values = invariant_series(invariant(multiplier), t)[0] if multiplier is not None else []

    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["n", "u_n", "v_n"])
    for n, u in enumerate(t.values):
        writer.writerow([n, repr(float(u)), repr(float(values[n])) if n < len(values) else ""])
    if output:
        Path(output).write_text(buffer.getvalue(), encoding="utf-8")
    else:
        click.echo(buffer.getvalue(), nl=False)
    if t.divergent:
        click.echo(f"Trajectory stopped early: {t.reason}", err=True)


@cli.command()
@click.option("--xi", default="0", help="xi(x, u).")
@click.option("--phi", default="1", help="phi(x, u).")
@click.option("--lambda", "lam", default="0", help="lambda(x, u, u1).")
@click.option("--chi", default=None, help="Discrete multiplier in u[0], x[0], h (default: exp(h*lambda)).")
@click.option("--h-start", type=float, default=0.1, help="Coarsest spacing.")
@click.option("--levels", type=click.IntRange(min=3), default=4, help="Number of halvings of h.")
@click.option("--samples", type=int, default=config.SAMPLES, help="Number of sample points.")
@click.option("--seed", type=int, default=config.SEED, envvar="LAMBDASYM_SEED", help="Sampling seed.")
@click.option("--emit", type=click.Choice(["json", "text"]), default="json", help="Report format.")
@click.option("-o", "--output", type=click.Path(dir_okay=False), default=None, help="Also write the report here.")
def limit(
    xi: str,
    phi: str,
    lam: str,
    chi: Optional[str],
    h_start: float,
    levels: int,
    samples: int,
    seed: int,
    emit: str,
    output: Optional[str],
):
    """Check that the discrete λ-prolongation converges to the continuous one."""
    begin = time.time()
    vf = ContinuousVectorField(parse(xi), parse(phi))
    lam_expr = ContinuousLambda(parse(lam))
    multiplier = ChiMultiplier(parse(chi)) if chi is not None else None
    h_values = [h_start / 2**i for i in range(levels)]
    result = continuum_limit_check(vf, lam_expr, h_values, chi=multiplier, samples=samples, seed=seed)
    report = RunReport(
        version=__version__,
        command="limit",
        scheme="continuum",
        inputs={
            "xi": to_text(vf.xi),
            "phi": to_text(vf.phi),
            "lambda": to_text(lam_expr.lam),
            "chi": None if multiplier is None else to_text(multiplier.chi),
            "seed": seed,
        },
        results={"convergence": result.to_dict()},
        passed=result.passed,
        elapsed=time.time() - begin,
    )
    _emit(report, emit, output)
