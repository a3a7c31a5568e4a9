from dataclasses import replace

import numpy as np
import pytest

from lambdasym.core.errors import LambdaSymError, StencilError, UnsupportedSchemeError
from lambdasym.core.expr import H, normalize, u_
from lambdasym.core.scheme import Lattice, iterate_trajectory, parse_scheme, residual, solve_for_leading
from lambdasym.fixtures import fixture_names, load_fixture, resolve_scheme

FREE = """
name = free
stencil = -1..1
lattice = uniform h
equation = u[1] - 2*u[0] + u[-1] = 0
"""


def test_fixtures_load():
    assert fixture_names() == ["ex1-cubic", "ex1-exp", "ex1-sin", "ex2", "free", "trivial"]
    for name in fixture_names():
        s = load_fixture(name)
        assert s.name == name
        assert s.chi is not None
    ex2 = load_fixture("ex2")
    assert (ex2.a, ex2.b) == (1, 1)
    assert ex2.chi == 1 + H * u_(0)
    assert set(load_fixture("ex1-exp").functions) == {"f"}
    with pytest.raises(LambdaSymError):
        load_fixture("missing")


def test_resolve_scheme_accepts_files(tmp_path):
    path = tmp_path / "mine.scheme"
    path.write_text(FREE, encoding="utf-8")
    assert resolve_scheme(str(path)).name == "free"
    assert resolve_scheme("trivial").name == "trivial"


def test_solve_for_leading():
    s = parse_scheme(FREE)
    assert solve_for_leading(s) == 2 * u_(0) - u_(-1)
    assert s.solved_form == 2 * u_(0) - u_(-1)

    ex2 = load_fixture("ex2")
    assert u_(1) not in ex2.solved_form.free_symbols
    assert normalize(ex2.equation.xreplace({u_(1): ex2.solved_form})) == 0


def test_non_affine_schemes_need_a_solved_form():
    s = parse_scheme("stencil = 0..1\nequation = u[1]^2 - u[0] = 0\n")
    with pytest.raises(UnsupportedSchemeError):
        s.solved_form

    s = parse_scheme("stencil = 0..1\nequation = u[1]^2 = u[0]^2\nsolved = u[0]\n")
    assert s.solved_form == u_(0)
    with pytest.raises(UnsupportedSchemeError):
        parse_scheme("stencil = 0..1\nequation = u[1]^2 - u[0] = 0\nsolved = u[0]^2\n")


def test_parse_scheme_errors():
    with pytest.raises(LambdaSymError):
        parse_scheme("stencil = -1..1\n")
    with pytest.raises(LambdaSymError):
        parse_scheme("stencil -1..1\nequation = u[1] = u[0]\n")
    with pytest.raises(StencilError):
        parse_scheme("stencil = -1..1\nequation = u[1] = u[0]\n")
    with pytest.raises(LambdaSymError):
        parse_scheme("stencil = 1..2\nequation = u[1] = u[0]\n")


def test_scheme_text_round_trip():
    for name in fixture_names():
        s = load_fixture(name)
        again = parse_scheme(s.to_text())
        assert normalize(again.equation - s.equation) == 0
        assert (again.a, again.b, again.chi) == (s.a, s.b, s.chi)
        assert dict(again.functions) == dict(s.functions)


def test_lattice():
    assert Lattice.parse("uniform h").spacing is None
    assert Lattice.parse("uniform 0.5").x_values(3).tolist() == [0.0, 0.5, 1.0]
    assert Lattice.parse("explicit 0 1 3").x_values(2).tolist() == [0.0, 1.0]
    with pytest.raises(LambdaSymError):
        Lattice("explicit", points=(0.0, 2.0, 1.0))
    with pytest.raises(LambdaSymError):
        Lattice("uniform", spacing=-1.0)
    with pytest.raises(StencilError):
        Lattice.parse("explicit 0 1 3").x_values(4)


def test_iterate_trajectory():
    s = parse_scheme(FREE)
    t = iterate_trajectory(s, [0.0, 0.1], 10, s.binding(0.1))
    assert len(t) == 12
    assert np.allclose(t.values, 0.1 * np.arange(12))
    assert np.allclose(t.x, 0.1 * np.arange(12))
    assert not t.divergent
    assert residual(s, t) <= 1e-12


def test_iterate_trajectory_stops_at_the_bound():
    s = parse_scheme(FREE)
    t = iterate_trajectory(s, [0.0, 1.0], 50, bound=10.0)
    assert t.divergent
    assert len(t) == 11
    assert "exceeded" in t.reason

    with pytest.raises(LambdaSymError):
        iterate_trajectory(s, [0.0], 5)


def test_iterate_with_function_symbols():
    s = load_fixture("ex1-sin")
    t = iterate_trajectory(s, [0.2, 0.3], 20, s.binding(0.1))
    assert len(t) == 22
    assert residual(s, t) <= 1e-10


def test_perturbed_trajectory_has_a_large_residual():
    s = load_fixture("ex2")
    t = iterate_trajectory(s, [0.2, 0.3], 20, s.binding(0.1))
    assert residual(s, t) <= 1e-10
    values = t.values.copy()
    values[5] += 0.01
    assert residual(s, replace(t, values=values)) > 1e-6
