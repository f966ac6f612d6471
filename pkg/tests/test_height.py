from fractions import Fraction

import numpy as np
import pytest
import sympy

from src.models.fractal import ProductFractal
from src.models.lattice import AffineLattice, MultiVector
from src.models.weights import Weights
from src.services.errors import DimensionMismatch, OutOfRange, PremiseViolation, UnsupportedFractal
from src.services.fractal import preset
from src.services.height import (
    choose_epsilon, constraint_margins, contraction_verify, critical_exponent_mc, cube_identity, eta_feasible,
    eta_from_zeta, eta_perturbed, explicit_eta, height_f, make_profile, perturbation_weights, phi_contraction_check,
    psi, psi_claim_check, zeta_lower_bounds,
)

TWO_ONE = Weights.parse('m=2 n=1 a=1/2,1/2 b=1')


def _grid(name, m, n):
    return ProductFractal.grid(m, n, preset(name))


def test_psi_of_shifted_lattices():
    assert psi(AffineLattice.build([[1, 0], [0, 1]], [Fraction(1, 2), 0])) == 2
    squeezed = AffineLattice.build([[4, 0], [0, Fraction(1, 4)]], [0, Fraction(1, 8)])
    assert psi(squeezed) == 8


def test_psi_is_infinite_on_homogeneous_lattices():
    assert psi(AffineLattice.standard(2)) is None


def test_height_of_shifted_square_lattice(unit_weights):
    profile = make_profile(unit_weights, [1])
    value = height_f(AffineLattice.build([[1, 0], [0, 1]], [Fraction(1, 2), 0]), profile, Fraction(1, 10))
    assert value.value == 112
    assert value.psi == 2
    assert value.certified


def test_height_is_infinite_without_a_shift(unit_weights):
    value = height_f(AffineLattice.standard(2), make_profile(unit_weights, [1]), Fraction(1, 10))
    assert value.infinite


def test_height_rejects_epsilon_outside_unit_interval(unit_weights):
    with pytest.raises(OutOfRange):
        height_f(AffineLattice.standard(2), make_profile(unit_weights, [1]), 2)


def test_profile_length_must_be_d_minus_one(unit_weights):
    with pytest.raises(DimensionMismatch):
        make_profile(unit_weights, [1, 1])


def test_cube_profile_for_two_by_one():
    profile = explicit_eta(_grid('interval', 2, 1), TWO_ONE)
    assert profile.etas == (2, 1)
    assert profile.eta == 1
    assert eta_feasible(profile)
    assert not eta_feasible(profile, strict=True)


def test_zeta_bounds_cases():
    cube = zeta_lower_bounds(_grid('interval', 2, 1), TWO_ONE)
    assert cube.case == 'cube'
    assert cube.values == (2, 1)

    cantor = zeta_lower_bounds(_grid('cantor', 2, 1), TWO_ONE)
    s = sympy.log(2) / sympy.log(3)
    assert cantor.case == 'n=1'
    assert [sympy.simplify(v - e) for v, e in zip(cantor.values, (2 * s, s))] == [0, 0]

    general = zeta_lower_bounds(_grid('cantor', 2, 2), Weights.equal(2, 2))
    assert general.case == 'exists-positive'
    assert general.values is None


def test_eta_from_zeta_needs_explicit_values():
    general = zeta_lower_bounds(_grid('cantor', 2, 2), Weights.equal(2, 2))
    with pytest.raises(UnsupportedFractal):
        eta_from_zeta(general, Weights.equal(2, 2))


def test_eta_from_zeta_with_slack():
    zeta = zeta_lower_bounds(_grid('interval', 2, 1), TWO_ONE)
    profile = eta_from_zeta(zeta, TWO_ONE, slack=Fraction(1, 2))
    assert profile.etas == (1, sympy.Rational(1, 2))


def test_constraint_margins_of_infeasible_profile():
    weights = Weights.equal(2, 2)
    margins = constraint_margins([sympy.Integer(1), sympy.Integer(4), sympy.Integer(1)], weights.d)
    assert margins[(2, 1)] == sympy.Rational(-3, 2)
    assert not eta_feasible(make_profile(weights, [1, 4, 1]))


def test_cube_identity_holds_for_weighted_systems():
    for text in ('m=2 n=1 a=1/2,1/2 b=1', 'm=2 n=1 a=2/3,1/3 b=1', 'm=1 n=2 a=1 b=3/4,1/4'):
        lhs, rhs, holds = cube_identity(Weights.parse(text))
        assert holds, text
        assert lhs == rhs


@pytest.mark.parametrize('m, n, etas', [(1, 3, (1, sympy.Rational(3, 2), 3)), (2, 2, (2, 1, 2))])
def test_cube_profile_is_feasible(m, n, etas):
    profile = explicit_eta(_grid('interval', m, n), Weights.equal(m, n))
    assert profile.etas == etas
    assert eta_feasible(profile)


def _random_weights(rng, size):
    raw = sorted((int(v) for v in rng.integers(1, 10, size=size)), reverse=True)
    return tuple(Fraction(v, sum(raw)) for v in raw)


def test_cube_identity_on_random_weights():
    rng = np.random.default_rng(41)
    for _ in range(40):
        m, n = (int(v) for v in rng.integers(1, 4, size=2))
        weights = Weights(a=_random_weights(rng, m), b=_random_weights(rng, n))
        lhs, rhs, holds = cube_identity(weights)
        assert holds, weights.format()


def test_perturbation_weights():
    assert perturbation_weights(3) == (2, 2)
    assert perturbation_weights(4) == (3, 4, 3)


def test_perturbation_grows_every_margin_by_two_delta_j_squared():
    profile = explicit_eta(_grid('interval', 2, 1), TWO_ONE)
    delta = Fraction(1, 10)
    before = constraint_margins(profile.etas, profile.d)
    after = constraint_margins(eta_perturbed(profile, delta).etas, profile.d)
    for (i, j), margin in before.items():
        assert sympy.simplify(after[(i, j)] - margin - 2 * sympy.Rational(1, 10) * j ** 2) == 0


def test_perturbed_profile_becomes_strictly_feasible():
    profile = explicit_eta(_grid('interval', 2, 1), TWO_ONE)
    assert eta_perturbed(profile, Fraction(1, 100)).strict


def test_choose_epsilon_satisfies_the_smallness_conditions():
    profile = eta_perturbed(explicit_eta(_grid('interval', 2, 1), TWO_ONE), Fraction(1, 10))
    eps = choose_epsilon(profile, 1, 4, 16)
    target = 4 ** -float(profile.eta)
    alpha = float(profile.alpha)
    assert 2 * float(eps) ** alpha * 16 <= target
    assert float(eps) * 16 <= target
    assert eps.numerator == 1


def test_choose_epsilon_needs_positive_alpha():
    profile = explicit_eta(_grid('interval', 2, 1), TWO_ONE)
    with pytest.raises(PremiseViolation):
        choose_epsilon(profile, 1, 4, 16)


def test_critical_exponent_of_an_invariant_vector(unit_weights):
    report = critical_exponent_mc(_grid('cantor', 1, 1), unit_weights, 1, Fraction(1, 2), samples=512,
                                  vector=MultiVector.monomial((0,), 2))
    assert report.mean == pytest.approx(1.0)
    assert not report.diverging
    assert [size for size, _ in report.running_means] == [64, 128, 256, 512]


def test_critical_exponent_rejects_bad_grade(unit_weights):
    with pytest.raises(OutOfRange):
        critical_exponent_mc(_grid('cantor', 1, 1), unit_weights, 2, 1)


def test_psi_claim_under_the_flow():
    x = AffineLattice.build([[1, 0], [0, 1]], [Fraction(1, 2), Fraction(1, 3)])
    g = [[Fraction(4), Fraction(0)], [Fraction(0), Fraction(1, 4)]]
    assert psi_claim_check(x, g, 4)


SHIFTED = AffineLattice.build([[1, 0], [0, 1]], [Fraction(1, 2), Fraction(1, 3)])


def test_contraction_verify_report(unit_weights):
    report = contraction_verify(SHIFTED, make_profile(unit_weights, [1]), Fraction(1, 4), 4,
                                _grid('cantor', 1, 1), samples=100, seed=2)
    # f ≤ 16 + 4·4 + 12 on every sample while the bound is at least ε^−2·4 = 64
    assert report.status == 'pass'
    assert report.mean + 3 * report.stderr <= report.bound
    assert report.samples == 100
    assert report.psi_term
    # every sample carries the constant term ε^−2
    assert report.mean >= 16
    assert report.max_sample >= report.mean


def test_contraction_verify_on_homogeneous_input(unit_weights):
    report = contraction_verify(AffineLattice.standard(2), make_profile(unit_weights, [1]), Fraction(1, 4), 4,
                                _grid('cantor', 1, 1), samples=100)
    assert not report.psi_term
    assert any('homogeneous' in note for note in report.notes)


def test_contraction_verify_needs_enough_samples(unit_weights):
    with pytest.raises(PremiseViolation):
        contraction_verify(SHIFTED, make_profile(unit_weights, [1]), Fraction(1, 4), 4, _grid('cantor', 1, 1),
                           samples=50)


def test_phi_contraction_terms(unit_weights):
    terms = phi_contraction_check(SHIFTED, make_profile(unit_weights, [1]), 4, _grid('cantor', 1, 1),
                                  samples=100, C_hat=1.0)
    assert [term.grade for term in terms] == [1]
    assert terms[0].mean > 0
    assert terms[0].bound > 0
    assert terms[0].to_dict()['passed'] == terms[0].passed
