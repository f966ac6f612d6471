import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest

from src.models.approximation import ApproximationRecord, PointSpec
from src.models.lattice import AffineLattice
from src.models.weights import Weights
from src.services.diophantine import (
    approximation_sweep, best_approximation, dani_forward, dani_omega, div_fraction, emass_estimate,
    singular_indicator, trajectory, uniform_exponent_estimate,
)
from src.services.errors import PremiseViolation
from src.services.fractal import bernoulli_sample
from src.services.numeric import parse_real

TWO_ONE = Weights.parse('m=2 n=1 a=1/2,1/2 b=1')
DANI_WEIGHTS = [
    'm=1 n=1 a=1 b=1',
    'm=2 n=1 a=1/2,1/2 b=1',
    'm=2 n=1 a=2/3,1/3 b=1',
    'm=1 n=2 a=1 b=3/4,1/4',
    'm=2 n=2 a=1/2,1/2 b=1/2,1/2',
    'm=3 n=1 a=1/3,1/3,1/3 b=1',
]


def _record(q, residual, T):
    return ApproximationRecord(T=Fraction(T), p=(0,), q=(q,), residual=(Fraction(residual),),
                               value=abs(Fraction(residual)))


def test_best_approximation_five_sevenths(unit_weights):
    record = best_approximation([[Fraction(5, 7)]], [Fraction(0)], unit_weights, Fraction(3))
    assert record.q == (3,)
    assert record.p == (-2,)
    assert record.residual == (Fraction(1, 7),)
    assert record.value == Fraction(1, 7)


def test_best_approximation_exact_solution_for_integer_theta():
    weights = Weights.parse('m=2 n=1 a=1/2,1/2 b=1')
    record = best_approximation([[Fraction(2)], [Fraction(-3)]], [0, 0], weights, Fraction(5))
    assert record.exact_solution
    assert record.q == (1,)


def test_best_approximation_needs_horizon_at_least_one(unit_weights):
    with pytest.raises(PremiseViolation):
        best_approximation([[Fraction(1, 3)]], [0], unit_weights, Fraction(1, 2))


def test_sweep_values_are_nonincreasing_in_T(unit_weights):
    grid = [Fraction(2 ** k) for k in range(1, 8)]
    records = approximation_sweep([[parse_real('golden')]], [Fraction(1, 2)], unit_weights, grid)
    values = [float(r.value) for r in records]
    assert all(later <= earlier for earlier, later in zip(values, values[1:]))


def test_uniform_exponent_of_golden_ratio_is_near_zero(unit_weights):
    grid = [Fraction(2 ** k) for k in range(2, 15)]
    curve = uniform_exponent_estimate([[parse_real('golden')]], [0], unit_weights, grid)
    assert not curve.rational
    assert curve.estimate == pytest.approx(0.0, abs=0.15)


def test_uniform_exponent_marks_rational_theta(unit_weights):
    curve = uniform_exponent_estimate([[Fraction(2, 5)]], [0], unit_weights, [Fraction(2), Fraction(8), Fraction(32)])
    assert curve.rational
    assert curve.to_dict()['omega_hat'] == 'inf'


def test_uniform_exponent_requires_increasing_grid(unit_weights):
    with pytest.raises(PremiseViolation):
        uniform_exponent_estimate([[Fraction(1, 3)]], [0], unit_weights, [Fraction(4), Fraction(2)])


def test_singular_indicator_on_rational_theta(unit_weights):
    indicator = singular_indicator([[Fraction(1, 2)]], [0], unit_weights, [Fraction(1, 10)],
                                   [Fraction(2), Fraction(4), Fraction(8)])
    assert indicator.improvable == (True,)


def test_dani_forward_example(unit_weights):
    result = dani_forward(unit_weights, Fraction(8), Fraction(1, 4), _record(1, Fraction(1, 32), 8))
    assert result.tau == 16
    assert result.bound == Fraction(1, 2)
    assert result.certified


def test_dani_omega_example(unit_weights):
    result = dani_omega(unit_weights, 1, Fraction(4), _record(1, Fraction(1, 16), 4))
    assert result.tau == 8
    assert result.bound == Fraction(1, 2)
    assert result.certified


def test_dani_forward_high_precision_weights():
    weights = Weights.parse('m=2 n=1 a=1/2,1/2 b=1')
    approx = ApproximationRecord(T=Fraction(3), p=(0, 0), q=(1,), residual=(Fraction(1, 27), Fraction(1, 27)),
                                 value=Fraction(1, 729))
    result = dani_forward(weights, Fraction(3), Fraction(1, 9), approx)
    assert float(result.tau) == pytest.approx(9 ** (1 / 3) * 3)
    assert float(result.bound) == pytest.approx(9 ** (-1 / 3))
    assert result.certified


def test_dani_forward_rejects_failed_premise(unit_weights):
    with pytest.raises(PremiseViolation):
        dani_forward(unit_weights, Fraction(8), Fraction(1, 4), _record(1, Fraction(1, 16), 8))


def test_dani_forward_rejects_delta_outside_unit_interval(unit_weights):
    with pytest.raises(PremiseViolation):
        dani_forward(unit_weights, Fraction(8), Fraction(2), _record(1, Fraction(1, 32), 8))


def test_trajectory_of_zero_theta(unit_weights):
    point = PointSpec.from_values(unit_weights, 0)
    record = trajectory(point, unit_weights, 3, 10)
    assert record.exact
    assert record.lambda0_values() == [Fraction(1, 3 ** k) for k in range(1, 11)]
    assert all(v == 0 for v in record.affine_values())


def test_trajectory_rows_carry_csv_columns(unit_weights):
    point = PointSpec.from_values(unit_weights, 0, [Fraction(1, 2)])
    rows = trajectory(point, unit_weights, 2, 3).rows()
    assert [row['k'] for row in rows] == [1, 2, 3]
    assert {'t', 'log_t', 'lambda0', 'lambda0_affine', 'witness_1', 'witness_affine_2'} <= set(rows[0])


def test_trajectory_from_lattice_point(unit_weights):
    x = AffineLattice.build([[1, 0], [0, 1]], [0, Fraction(1, 2)])
    record = trajectory(PointSpec.from_lattice(unit_weights, x), unit_weights, 2, 2)
    assert record.affine_values() == [Fraction(1, 4), Fraction(1, 8)]


def test_trajectory_rejects_base_at_most_one(unit_weights):
    with pytest.raises(PremiseViolation):
        trajectory(PointSpec.from_values(unit_weights, 0), unit_weights, 1, 3)


def test_emass_of_zero_theta(unit_weights):
    point = PointSpec.from_values(unit_weights, 0)
    estimate = emass_estimate(point, unit_weights, 3, Fraction(1, 10), 50, refinement=1)
    assert estimate.count == 48
    assert estimate.raw_fraction >= Fraction(9, 10)
    assert estimate.lower_fraction <= estimate.continuous_fraction <= estimate.upper_fraction
    assert estimate.sandwich_holds


def test_div_fraction_of_far_shift_is_small(unit_weights):
    point = PointSpec.from_values(unit_weights, parse_real('golden'), [Fraction(1, 2)])
    fraction = div_fraction(point, unit_weights, Fraction(1, 20), 6, Fraction(1, 4))
    assert 0.0 <= fraction.fraction <= 0.2


def test_trajectory_of_golden_theta_stays_bounded(unit_weights):
    point = PointSpec.from_values(unit_weights, parse_real('golden'), [Fraction(1, 2)])
    record = trajectory(point, unit_weights, 2, 10)
    assert not record.exact
    values = record.lambda0_values()
    assert all(isinstance(v, mpmath.mpf) for v in values)
    # badly approximable: q‖qθ‖ ≥ 0.38 keeps every orbit point away from the cusp
    assert all(0.6 <= v <= 1 for v in values)
    assert all(v > 0 for v in record.affine_values())


def test_emass_of_zero_theta_with_refinement(unit_weights):
    point = PointSpec.from_values(unit_weights, 0)
    estimate = emass_estimate(point, unit_weights, 3, Fraction(1, 10), 20, refinement=4)
    assert estimate.count == 18
    assert estimate.continuous_fraction == Fraction(71, 80)
    assert estimate.sandwich_holds


def test_emass_of_golden_theta_with_refinement(unit_weights):
    point = PointSpec.from_values(unit_weights, parse_real('golden'))
    estimate = emass_estimate(point, unit_weights, 3, Fraction(1, 10), 20, refinement=4)
    assert estimate.count == 0
    assert estimate.continuous_fraction == 0
    assert estimate.sandwich_holds


def test_emass_of_golden_decimal_over_a_long_horizon(unit_weights):
    point = PointSpec.from_values(unit_weights, parse_real('1.6180339887'))
    estimate = emass_estimate(point, unit_weights, 3, Fraction(1, 20), 200, refinement=1, prec=256)
    assert estimate.count == 0
    assert estimate.raw_fraction <= Fraction(1, 10)


def test_emass_of_zero_theta_over_a_long_horizon(unit_weights):
    point = PointSpec.from_values(unit_weights, 0)
    estimate = emass_estimate(point, unit_weights, 3, Fraction(1, 20), 200, refinement=1, prec=256)
    assert estimate.count == 198
    assert estimate.raw_fraction >= Fraction(9, 10)


def test_emass_sandwich_on_a_cantor_point(unit_weights, cantor):
    rng = np.random.default_rng(21)
    theta = bernoulli_sample(cantor, 12, rng)[0]
    estimate = emass_estimate(PointSpec.from_values(unit_weights, theta), unit_weights, 3, Fraction(1, 10), 12,
                              refinement=2)
    assert estimate.lower_fraction <= estimate.continuous_fraction <= estimate.upper_fraction
    assert estimate.sandwich_holds


def test_emass_sandwich_for_two_by_one_weights(cantor):
    rng = np.random.default_rng(22)
    theta = [[bernoulli_sample(cantor, 10, rng)[0]], [bernoulli_sample(cantor, 10, rng)[0]]]
    estimate = emass_estimate(PointSpec.from_values(TWO_ONE, theta), TWO_ONE, 4, Fraction(1, 5), 8, refinement=2)
    assert estimate.sandwich_holds


def test_div_fraction_on_the_geometric_grid(unit_weights):
    # λ̃₀(g_{2^k}x) = 2^k/2, so the indicator is one at k = 0, 1 only
    point = PointSpec.from_values(unit_weights, 0, [Fraction(1, 2)])
    fraction = div_fraction(point, unit_weights, Fraction(1), 4, Fraction(1), base=2)
    assert fraction.samples == 7
    assert fraction.fraction == pytest.approx(1.5 * math.log(2) / 4)


def test_div_surface_grids_agree_on_a_far_shift(unit_weights):
    point = PointSpec.from_values(unit_weights, parse_real('golden'), [Fraction(1, 2)])
    geometric = div_fraction(point, unit_weights, Fraction(1, 20), 6, Fraction(1, 4), base=2)
    logarithmic = div_fraction(point, unit_weights, Fraction(1, 20), 6, Fraction(1, 4))
    assert geometric.fraction <= 0.2
    assert logarithmic.fraction <= 0.2


def _residuals(rng, exponents, M=50):
    """Rationals with |r_i| ≤ 2^{-exponent_i}"""
    return tuple(Fraction(int(rng.integers(-M, M + 1)), M * 2 ** e) for e in exponents)


def _denominators(rng, weights, e2):
    q = tuple(int(rng.integers(-2 ** math.floor(e2 * b), 2 ** math.floor(e2 * b) + 1)) for b in weights.b)
    return q if any(q) else (1,) + q[1:]


@pytest.mark.parametrize('text', DANI_WEIGHTS)
def test_dani_forward_on_random_rational_approximations(text):
    weights = Weights.parse(text)
    rng = np.random.default_rng(31)
    for _ in range(25):
        e1, e2 = int(rng.integers(1, 6)), int(rng.integers(2, 9))
        delta, t = Fraction(1, 2 ** e1), Fraction(2 ** e2)
        residual = _residuals(rng, [math.ceil((e1 + e2) * a) for a in weights.a])
        approx = ApproximationRecord(T=t, p=(0,) * weights.m, q=_denominators(rng, weights, e2),
                                     residual=residual, value=max(abs(r) for r in residual))
        result = dani_forward(weights, t, delta, approx)
        assert result.certified
        assert float(result.image_norm) <= float(result.bound) * (1 + 1e-12)


@pytest.mark.parametrize('omega', [Fraction(1, 2), 1, 3])
@pytest.mark.parametrize('text', DANI_WEIGHTS)
def test_dani_omega_on_random_rational_approximations(text, omega):
    weights = Weights.parse(text)
    rng = np.random.default_rng(32)
    for _ in range(25):
        e2 = int(rng.integers(1, 7))
        t = Fraction(2 ** e2)
        residual = _residuals(rng, [math.ceil(e2 * (1 + omega) * a) for a in weights.a])
        approx = ApproximationRecord(T=t, p=(0,) * weights.m, q=_denominators(rng, weights, e2),
                                     residual=residual, value=max(abs(r) for r in residual))
        result = dani_omega(weights, omega, t, approx)
        assert result.certified
        assert float(result.image_norm) <= float(result.bound) * (1 + 1e-12)
