import pytest
import sympy as sp

from lambdasym.core.errors import LambdaSymError, StencilError
from lambdasym.core.expr import H, SamplingBox, equivalent, normalize, shift, u_, x_
from lambdasym.core.prolong import ChiMultiplier, DiscreteVectorField, apply_field, lambda_prolong, potential_weight
from lambdasym.core.scheme import Lattice

CHI = ChiMultiplier(1 + H * u_(0) + x_(0) * u_(0) ** 2)


@pytest.mark.parametrize("j", range(-3, 4))
@pytest.mark.parametrize("k", range(-3, 4))
def test_potential_weight_telescopes(j, k):
    lhs = potential_weight(CHI, j) * shift(potential_weight(CHI, k), j)
    assert normalize(lhs - potential_weight(CHI, j + k)) == 0


def test_single_step_weight_is_exp_of_h_lambda():
    for chi in (CHI, ChiMultiplier(2 - sp.exp(-u_(0) ** 2)), ChiMultiplier.from_lambda(u_(0) * x_(0))):
        weight, expected = potential_weight(chi, 1), sp.exp(H * chi.lam)
        box = SamplingBox.covering([weight, expected], values={"h": 0.1})
        assert equivalent(weight, expected, box, tol=1e-10)


def test_potential_weight_products():
    chi = ChiMultiplier(1 + H * u_(0))
    assert potential_weight(chi, 0) == 1
    assert potential_weight(chi, 2) == (1 + H * u_(0)) * (1 + H * u_(1))
    assert normalize(potential_weight(chi, -1) - 1 / (1 + H * u_(-1))) == 0


def test_explicit_lattice_weight():
    lattice = Lattice("explicit", points=(0.0, 0.5, 1.5, 2.0))
    chi = ChiMultiplier.from_lambda(2)
    weight = potential_weight(chi, 2, lattice)
    assert sp.simplify(weight - sp.exp(2 * (x_(2) - x_(0)))) == 0
    back = potential_weight(chi, -1, lattice)
    assert sp.simplify(back - sp.exp(-2 * (x_(0) - x_(-1)))) == 0


def test_identity_multiplier_gives_the_standard_prolongation():
    vf = DiscreteVectorField(x_(0) * u_(0), u_(0) ** 2 + x_(0))
    p = lambda_prolong(vf, ChiMultiplier.identity(), 2, 2)
    for k in range(-2, 3):
        assert p.x_coefficient(k) == shift(vf.xi, k)
        assert p.u_coefficient(k) == shift(vf.phi, k)

    zero = lambda_prolong(vf, ChiMultiplier.from_lambda(0), 1, 1, Lattice("explicit", points=(0.0, 1.0, 3.0)))
    for k in range(-1, 2):
        assert p.u_coefficient(k) == zero.u_coefficient(k)


def test_xi_conventions():
    vf = DiscreteVectorField(x_(0), 1)
    weighted = lambda_prolong(vf, CHI, 1, 1)
    literal = lambda_prolong(vf, CHI, 1, 1, xi_convention="literal")
    assert literal.x_coefficient(1) == x_(0)
    assert normalize(weighted.x_coefficient(1) - CHI.chi * x_(1)) == 0
    assert weighted.u_coefficient(1) == literal.u_coefficient(1)
    with pytest.raises(LambdaSymError):
        lambda_prolong(vf, CHI, 1, 1, xi_convention="other")


def test_apply_field():
    chi = ChiMultiplier(1 + H * u_(0))
    p = lambda_prolong(DiscreteVectorField(0, 1), chi, 0, 1)
    assert apply_field(p, u_(1) - u_(0)) == H * u_(0)
    assert "d/du[1]" in p.describe()
    with pytest.raises(StencilError):
        apply_field(p, u_(2))


def test_field_and_multiplier_validation():
    with pytest.raises(StencilError):
        DiscreteVectorField(0, u_(1))
    with pytest.raises(LambdaSymError):
        ChiMultiplier(0)
    with pytest.raises(StencilError):
        ChiMultiplier(u_(-1))

    chi = ChiMultiplier.from_lambda(u_(0))
    assert chi.chi == sp.exp(H * u_(0))
    assert chi.lam == u_(0)
    assert ChiMultiplier(1 + H * u_(0)).lam == sp.log(1 + H * u_(0)) / H
    assert str(ChiMultiplier.identity()) == "1"
    assert DiscreteVectorField(0, 1, eta=u_(0)).to_dict() == {"xi": "0", "phi": "1", "eta": "u[0]"}
