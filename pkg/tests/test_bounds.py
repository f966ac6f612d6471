from fractions import Fraction

import numpy as np
import pytest
import sympy

from src.models.weights import Weights
from src.services.bounds import (
    SCENARIOS, bound_contraction, bound_corollary_suite, bound_fixed_theta, bound_fixed_xi, bound_general_estimate,
    bound_preset, cantor_corollary, cube_corollary, equal_cube_corollary, interval_product, preset_grid,
)
from src.services.errors import OutOfRange, PremiseViolation, UnsupportedFractal
from src.services.height import explicit_eta, make_profile

LOG_RATIO = sympy.log(2) / sympy.log(3)


def _same(a, b):
    return sympy.simplify(a - b) == 0


def test_cheung_preset():
    report = bound_preset('cheung')
    assert report.value == sympy.Rational(4, 3)
    assert report.to_dict()['value'] == '4/3'
    assert report.checks['cube_identity']


@pytest.mark.parametrize('m, n', [(1, 1), (2, 1), (1, 2), (2, 2), (3, 2)])
def test_equal_weight_cube_presets(m, n):
    report = bound_preset(f'equal-{m}x{n}')
    assert report.value == sympy.Integer(m * n) - sympy.Rational(m * n, m + n)
    assert report.within_ambient


def test_cantor_preset_halves_the_dimension():
    report = bound_preset('cantor-1x1')
    assert _same(report.value, LOG_RATIO / 2)


def test_unknown_preset():
    with pytest.raises(OutOfRange):
        bound_preset('square')


def test_fixed_theta_picks_the_best_pivot():
    weights = Weights.parse('m=2 n=1 a=2/3,1/3 b=1')
    hausdorff, packing, pivot = bound_fixed_theta(weights, interval_product(2), 1, 0)
    assert hausdorff.value == 0
    assert pivot == 2
    assert packing.value == 0


def test_fixed_theta_full_escape_of_mass_gives_the_ambient_dimension():
    weights = Weights.equal(2, 1)
    hausdorff, _, _ = bound_fixed_theta(weights, interval_product(2), 1, 1)
    assert hausdorff.value == 2


def test_fixed_theta_packing_uses_the_upper_mass():
    weights = Weights.equal(2, 1)
    hausdorff, packing, _ = bound_fixed_theta(weights, interval_product(2), 1, Fraction(1, 4), Fraction(1, 2))
    assert hausdorff.value == sympy.Rational(1, 2)
    assert packing.value == 1


def test_fixed_theta_rejects_inverted_masses():
    with pytest.raises(OutOfRange):
        bound_fixed_theta(Weights.equal(1, 1), interval_product(1), 1, Fraction(1, 2), Fraction(1, 4))


def test_fixed_xi_with_omega():
    weights = Weights.equal(1, 1)
    report = bound_fixed_xi(weights, preset_grid('interval', 1, 1), omega=1)
    assert report.value == sympy.Rational(1, 3)


def test_fixed_xi_needs_exactly_one_parameter():
    weights = Weights.equal(1, 1)
    with pytest.raises(PremiseViolation):
        bound_fixed_xi(weights, preset_grid('interval', 1, 1), q=1, omega=1)


def test_fixed_xi_general_grid_needs_a_profile():
    with pytest.raises(UnsupportedFractal):
        bound_fixed_xi(Weights.equal(2, 2), preset_grid('cantor', 2, 2), q=1)


def test_fixed_xi_clamps_negative_values():
    weights = Weights.equal(1, 1)
    report = bound_fixed_xi(weights, preset_grid('cantor', 1, 1), q=1, profile=make_profile(weights, [4]))
    assert report.clamped
    assert report.value == 0
    assert report.raw < 0


def test_corollaries_match_their_closed_forms():
    weights = Weights.equal(2, 1)
    assert cube_corollary(weights, q=1) == sympy.Rational(4, 3)
    assert equal_cube_corollary(2, 1, q=1) == sympy.Rational(4, 3)
    assert _same(cantor_corollary(Weights.equal(1, 1), preset_grid('cantor', 1, 1), q=1), LOG_RATIO / 2)


@pytest.mark.parametrize('scenario', [
    'fixed-theta-zero-emass', 'fixed-theta-general', 'fixed-xi-cube', 'fixed-xi-cantor', 'omega-variants',
])
def test_corollary_suite_agrees_with_parent_formulas(scenario):
    reports = bound_corollary_suite(Weights.equal(2, 1), scenario, q=Fraction(1, 2), emass=Fraction(1, 4))
    checks = [report.checks for report in reports if report.checks]
    assert checks
    assert all(all(values.values()) for values in checks)


def test_omega_limit_vanishes_for_one_by_one():
    reports = bound_corollary_suite(Weights.equal(1, 1), 'omega-variants')
    limit = next(r for r in reports if r.formula == 'fixed-xi/cube/omega-limit')
    assert limit.value == 0
    assert limit.checks['matches_parent']


def test_corollary_suite_rejects_unknown_scenarios():
    with pytest.raises(OutOfRange):
        bound_corollary_suite(Weights.equal(1, 1), 'everything')


def test_contraction_bounds():
    reports = bound_contraction(1, Fraction(1, 2), 1, 2, a=Fraction(1, 2))
    assert [r.value for r in reports] == [sympy.Rational(3, 4), sympy.Rational(1, 2)]


def test_contraction_rejects_fast_rates():
    with pytest.raises(PremiseViolation):
        bound_contraction(1, 3, 1, 2)


def test_general_estimate_on_the_square():
    weights = Weights.equal(1, 1)
    profile = explicit_eta(preset_grid('interval', 1, 1), weights)
    plain, growth = bound_general_estimate(profile, 1, 1, gamma=Fraction(1, 2))
    assert plain.value == sympy.Rational(1, 2)
    assert growth.value == sympy.Rational(1, 4)


def _random_weights(rng, size):
    raw = sorted((int(v) for v in rng.integers(1, 8, size=size)), reverse=True)
    return tuple(Fraction(v, sum(raw)) for v in raw)


def test_corollary_suite_on_random_slices():
    rng = np.random.default_rng(17)
    for _ in range(30):
        m, n = (int(v) for v in rng.integers(1, 4, size=2))
        weights = Weights(a=_random_weights(rng, m), b=_random_weights(rng, n))
        scenarios = [s for s in SCENARIOS if s != 'fixed-xi-cantor' or m == 1 or n == 1]
        scenario = scenarios[int(rng.integers(0, len(scenarios)))]
        q = Fraction(int(rng.integers(1, 9)), 8)
        emass = Fraction(int(rng.integers(0, 8)), 8)
        omega = [Fraction(1, 2), 1, 3][int(rng.integers(0, 3))]
        reports = bound_corollary_suite(weights, scenario, q=q, emass=emass, omega=omega)
        checks = [report.checks for report in reports if report.checks]
        assert checks, (weights.format(), scenario)
        assert all(all(values.values()) for values in checks), (weights.format(), scenario, q, emass, omega)
