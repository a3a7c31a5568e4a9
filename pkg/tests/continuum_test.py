import pytest
import sympy as sp

from lambdasym.core.continuum import (
    ContinuousLambda,
    ContinuousVectorField,
    OdeSystem,
    check_ode_lambda_symmetry,
    classical_prolong,
    continuous_lambda_prolong,
    continuum_expansion,
    continuum_limit_check,
    olver_reduction_check,
    total_derivative,
)
from lambdasym.core.errors import ConvergenceError, LambdaSymError, UnsupportedSchemeError
from lambdasym.core.expr import H, U, X, jet_var, normalize, u_
from lambdasym.core.parser import parse
from lambdasym.core.prolong import ChiMultiplier
from lambdasym.core.scheme import parse_scheme
from lambdasym.fixtures import OLVER_F, goldstein_fixture, load_fixture, olver_fixture

u1, u2 = jet_var(1), jet_var(2)
LEVELS = [0.1, 0.05, 0.025, 0.0125]


def test_total_derivative():
    assert total_derivative(X * u1) == u1 + X * u2
    assert total_derivative(U**2) == 2 * U * u1
    assert total_derivative(sp.exp(U) * X) == sp.exp(U) + X * sp.exp(U) * u1


def test_prolongation():
    vf = ContinuousVectorField(X, U)
    assert classical_prolong(ContinuousVectorField(0, 1), 2) == [0, 0]
    first = continuous_lambda_prolong(ContinuousVectorField(0, 1), ContinuousLambda(U), 2)
    assert first[0] == U
    assert sp.expand(first[1] - (u1 + U**2)) == 0
    with pytest.raises(LambdaSymError):
        continuous_lambda_prolong(vf, ContinuousLambda(0), 0)


@pytest.mark.parametrize(
    "xi, phi",
    [(X, U), (0, 1), (X * U, U**2 + X), (U**2, sp.exp(X) * U)],
)
def test_zero_lambda_gives_the_classical_prolongation(xi, phi):
    vf = ContinuousVectorField(xi, phi)
    coefficients = continuous_lambda_prolong(vf, ContinuousLambda(0), 4)
    characteristic = vf.phi - vf.xi * u1
    for k, coefficient in enumerate(coefficients, start=1):
        derivative = characteristic
        for _ in range(k):
            derivative = total_derivative(derivative)
        assert normalize(coefficient - (derivative + vf.xi * jet_var(k + 1))) == 0
    assert classical_prolong(vf, 4) == coefficients


def test_olver_prolongation_coefficients():
    Fu = sp.diff(OLVER_F, U)
    first, second = continuous_lambda_prolong(ContinuousVectorField(0, 1), ContinuousLambda(Fu), 2)
    assert normalize(first - Fu) == 0
    assert normalize(second - (Fu**2 + u1 * sp.diff(OLVER_F, U, 2) + sp.diff(OLVER_F, X, U))) == 0


def test_constant_lambda():
    c = sp.Symbol("c")
    assert continuous_lambda_prolong(ContinuousVectorField(0, 1), ContinuousLambda(c), 2) == [c, c**2]


def test_free_equation_is_translation_invariant():
    report = check_ode_lambda_symmetry(OdeSystem(2, 0, name="free"), ContinuousVectorField(1, 0), ContinuousLambda(0))
    assert report.verdict == "zero"
    assert report.passed


def test_validation():
    with pytest.raises(LambdaSymError):
        ContinuousVectorField(0, u1)
    with pytest.raises(LambdaSymError):
        ContinuousLambda(u2)
    with pytest.raises(LambdaSymError):
        OdeSystem(2, u2)
    assert OdeSystem(2, U).equation == u2 - U


def test_olver_fixture():
    fixture = olver_fixture()
    report = check_ode_lambda_symmetry(fixture.ode, fixture.vf, fixture.lam)
    assert report.verdict == "zero"
    assert report.passed

    check = olver_reduction_check(OLVER_F)
    assert check.passed
    assert normalize(parse(check.to_dict()["invariant"]) - (u1 - OLVER_F)) == 0


def test_olver_fixture_has_no_plain_translation_symmetry():
    fixture = olver_fixture()
    report = check_ode_lambda_symmetry(fixture.ode, fixture.vf, ContinuousLambda(0))
    assert not report.passed


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_goldstein_family(seed):
    fixture = goldstein_fixture(seed=seed, p=2)
    report = check_ode_lambda_symmetry(fixture.ode, fixture.vf, fixture.lam, tol=1e-10)
    assert report.passed
    assert report.max_residual <= 1e-10


def test_limit_first_order():
    report = continuum_limit_check(ContinuousVectorField(X, U), ContinuousLambda(u1), LEVELS)
    assert report.passed
    assert not report.exact
    assert all(1.6 <= r <= 2.4 for r in report.ratios)
    assert report.errors[0] > report.errors[-1]


def test_limit_with_lambda_u():
    report = continuum_limit_check(ContinuousVectorField(0, 1), ContinuousLambda(U), LEVELS)
    assert report.passed
    assert all(1.6 <= r <= 2.4 for r in report.ratios)


def test_limit_with_rational_multiplier():
    report = continuum_limit_check(
        ContinuousVectorField(0, 1), ContinuousLambda(U), LEVELS, chi=ChiMultiplier(1 + H * u_(0))
    )
    assert report.passed
    assert report.exact
    assert report.ratios == [None, None, None]
    assert len(report.consistency) == len(LEVELS)


def test_limit_rejects_an_inconsistent_multiplier():
    report = continuum_limit_check(
        ContinuousVectorField(0, 1), ContinuousLambda(U), LEVELS, chi=ChiMultiplier(1 + 2 * H * u_(0))
    )
    assert not report.passed
    assert report.reason is not None


def test_limit_without_lambda_is_exact():
    report = continuum_limit_check(ContinuousVectorField(0, 1), ContinuousLambda(0), LEVELS)
    assert report.exact
    assert report.ratios == [None, None, None]
    assert report.passed
    assert max(report.errors) <= 1e-12


def test_limit_levels():
    with pytest.raises(ConvergenceError):
        continuum_limit_check(ContinuousVectorField(0, 1), ContinuousLambda(U), [0.1, 0.05])
    with pytest.raises(ConvergenceError):
        continuum_limit_check(ContinuousVectorField(0, 1), ContinuousLambda(U), [0.1, 0.04, 0.02])


def test_example_two_continuum_expansion():
    s = load_fixture("ex2")
    expected = u2 - U * u1 - H / 2 * (U**2 * u1 - U * u2 - 2 * u1**2 - U**4 / 4)
    assert normalize(continuum_expansion(s, 1) - expected) == 0
    assert normalize(continuum_expansion(s, 0) - (u2 - U * u1)) == 0


@pytest.mark.parametrize("name", ["ex1-exp", "ex1-cubic", "ex1-sin"])
def test_example_one_tends_to_a_conservation_law(name):
    f = sp.Function("f")(X, U)
    assert normalize(continuum_expansion(load_fixture(name), 0) - (u2 - total_derivative(f))) == 0


def test_expansion_divides_out_the_leading_power():
    assert normalize(continuum_expansion(load_fixture("free"), 1) - u2) == 0
    assert normalize(continuum_expansion(load_fixture("trivial"), 1) - (u1 + H * u2 / 2)) == 0


def test_expansion_needs_a_uniform_lattice():
    s = parse_scheme(
        """
        name = points
        stencil = 0..1
        lattice = explicit 0 0.5 1.5
        equation = u[1] - u[0] = 0
        """
    )
    with pytest.raises(UnsupportedSchemeError):
        continuum_expansion(s)
    with pytest.raises(LambdaSymError):
        continuum_expansion(load_fixture("free"), -1)
