import numpy as np
import pytest
import sympy as sp

from lambdasym.core.ansatz import (
    CoefficientSystem,
    build_ansatz,
    extract_coefficient_system,
    find_lambda_symmetry,
    newton_multistart,
    solve_coefficient_system,
)
from lambdasym.core.determining import determining_expression
from lambdasym.core.errors import AnsatzError
from lambdasym.core.expr import H, normalize, u_
from lambdasym.core.prolong import ChiMultiplier, DiscreteVectorField
from lambdasym.fixtures import load_fixture

c0, c1 = sp.symbols("c0 c1")


def test_build_ansatz():
    ansatz = build_ansatz(2)
    assert ansatz.chi == c0 + c1 * u_(0) + sp.Symbol("c2") * u_(0) ** 2
    assert ansatz.phi == 1
    assert ansatz.degree == 2
    assert [u.name for u in ansatz.unknowns] == ["c0", "c1", "c2"]

    joint = build_ansatz(1, with_phi=True, d_phi=1)
    assert [u.name for u in joint.unknowns] == ["c0", "c1", "p0", "p1"]
    phi, chi = joint.instantiate({c0: 1, c1: H, sp.Symbol("p0"): 1, sp.Symbol("p1"): 0})
    assert (phi, chi) == (1, 1 + H * u_(0))

    with pytest.raises(AnsatzError):
        build_ansatz(4)
    with pytest.raises(AnsatzError):
        build_ansatz(3, with_phi=True, d_phi=3, max_unknowns=5)


def test_exact_extraction():
    s = load_fixture("trivial")
    det = determining_expression(s, DiscreteVectorField(0, 1), ChiMultiplier(c0))
    system = extract_coefficient_system(det, (c0,))
    assert system.mode == "exact"
    assert system.equations == (c0 - 1,)

    ex2 = load_fixture("ex2")
    ansatz = build_ansatz(1)
    det = determining_expression(ex2, DiscreteVectorField(0, 1), ChiMultiplier(ansatz.chi))
    system = extract_coefficient_system(det, ansatz.unknowns)
    assert system.mode == "exact"
    assert len(system.trace) == len(system.equations) > 1


def test_sampled_extraction():
    s = load_fixture("trivial")
    det = determining_expression(s, DiscreteVectorField(0, 1), ChiMultiplier(sp.exp(c0 * u_(0))))
    system = extract_coefficient_system(det, (c0,), seed=2)
    assert system.mode == "sampled"
    assert len(system) == 3
    assert system.h == pytest.approx(0.1)
    assert all(e.free_symbols == {c0} for e in system.equations)


def test_solve_linear_systems():
    exact = CoefficientSystem((c0 - 1, c1 - H), (c0, c1), ("1", "u[0]"))
    assert solve_coefficient_system(exact) == [{c0: 1, c1: H}]

    sampled = CoefficientSystem((c0 - 0.5, 2 * c1 - 1.0), (c0, c1), ("p0", "p1"), mode="sampled", h=0.1)
    assert solve_coefficient_system(sampled) == [{c0: sp.Rational(1, 2), c1: sp.Rational(1, 2)}]

    inconsistent = CoefficientSystem((sp.Integer(1), c0), (c0,), ("1", "u[0]"))
    assert solve_coefficient_system(inconsistent) == []

    free = CoefficientSystem((c0 - 1,), (c0, c1), ("1",))
    assert solve_coefficient_system(free) == [{c0: 1, c1: 0}]


def test_solve_polynomial_systems():
    system = CoefficientSystem((c0**2 - 1,), (c0,), ("1",))
    assert solve_coefficient_system(system) == [{c0: -1}, {c0: 1}]

    too_many = CoefficientSystem((c0,), tuple(sp.symbols("a0:13")), ("1",))
    with pytest.raises(AnsatzError):
        solve_coefficient_system(too_many)


def test_newton_multistart():
    roots = newton_multistart([c0**2 - 2], [c0], starts=16, seed=0)
    assert len(roots) == 2
    assert roots[0][0] == pytest.approx(-np.sqrt(2))
    assert roots[1][0] == pytest.approx(np.sqrt(2))

    pairs = newton_multistart([c0 + c1 - 3, c0 * c1 - 2], [c0, c1], starts=64, seed=0, num_workers=2)
    found = sorted(tuple(np.round(r, 8)) for r in pairs)
    assert found == [(1.0, 2.0), (2.0, 1.0)]

    assert newton_multistart([c0**2 + 1], [c0], starts=8, seed=0) == []


def test_newton_multistart_is_deterministic():
    first = newton_multistart([c0**3 - c0], [c0], starts=16, seed=5)
    second = newton_multistart([c0**3 - c0], [c0], starts=16, seed=5)
    assert len(first) == len(second)
    assert all(np.array_equal(a, b) for a, b in zip(first, second))


def test_find_example_two():
    found = find_lambda_symmetry(load_fixture("ex2"), 1)
    assert len(found) == 1
    symmetry = found[0]
    assert normalize(symmetry.chi - (1 + H * u_(0))) == 0
    assert symmetry.phi == 1
    assert symmetry.coefficients == {"c0": "1", "c1": "h"}
    assert symmetry.report.passed
    assert symmetry.to_dict()["lambda"] == "log(h*u[0] + 1)/h"


def test_example_two_has_no_constant_multiplier():
    assert find_lambda_symmetry(load_fixture("ex2"), 0) == []


@pytest.mark.parametrize("name", ["trivial", "free"])
def test_constant_multiplier(name):
    found = find_lambda_symmetry(load_fixture(name), 0)
    assert [f.chi for f in found] == [1]


def test_find_cubic_example_one():
    found = find_lambda_symmetry(load_fixture("ex1-cubic"), 2)
    expected = 1 + H * (-1 + u_(0) / 2 + 3 * u_(0) ** 2)
    assert any(normalize(f.chi - expected) == 0 for f in found)
    assert all(f.report.passed for f in found)


def test_joint_search_normalizes_phi():
    found = find_lambda_symmetry(load_fixture("ex2"), 1, with_phi=True, d_phi=0)
    assert len(found) == 1
    assert found[0].phi == 1
    assert normalize(found[0].chi - (1 + H * u_(0))) == 0


def test_example_two_at_degree_two():
    found = find_lambda_symmetry(load_fixture("ex2"), 2)
    assert len(found) == 1
    assert found[0].coefficients == {"c0": "1", "c1": "h", "c2": "0"}
    assert normalize(found[0].chi - (1 + H * u_(0))) == 0


@pytest.mark.parametrize("name, degree", [("trivial", 0), ("ex2", 1)])
def test_raising_the_degree_keeps_every_solution(name, degree):
    s = load_fixture(name)
    lower = find_lambda_symmetry(s, degree)
    higher = find_lambda_symmetry(s, degree + 1)
    assert lower
    for symmetry in lower:
        assert any(normalize(symmetry.chi - other.chi) == 0 for other in higher)
