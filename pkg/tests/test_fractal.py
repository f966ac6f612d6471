import math
from fractions import Fraction

import numpy as np
import pytest
import sympy

from src.models.fractal import ProductFractal
from src.services.covering import box_counting_estimate
from src.services.errors import InvalidFractal, OutOfRange
from src.services.fractal import (
    FractalSampler, ball_intersection_check, ball_intersection_constant, bernoulli_sample, coding_map, cylinders,
    k_beta, measure_ball_constant, parse_fractal, parse_ifs, preset, pushforward_scaled,
)


def test_cantor_preset(cantor):
    assert cantor.p == 2
    assert cantor.c == Fraction(1, 3)
    assert cantor.alpha == 1
    assert sympy.simplify(cantor.dimension - sympy.log(2) / sympy.log(3)) == 0


def test_parse_ifs_text_matches_preset(cantor):
    parsed = parse_ifs('dim=1 c=1/3 maps=(+1,0),(+1,2/3)')
    assert parsed.c == cantor.c
    assert parsed.hull == cantor.hull
    assert [m.translation for m in parsed.maps] == [m.translation for m in cantor.maps]


@pytest.mark.parametrize('text', [
    'dim=1 c=3/2 maps=(+1,0)',
    'dim=1 c=1/2 maps=(+1,0),(+1,1/4),(+1,1/2)',
    'dim=1 maps=(+1,0)',
    'nonsense',
])
def test_parse_ifs_rejects_bad_systems(text):
    with pytest.raises(InvalidFractal):
        parse_ifs(text)


def test_cylinders_at_depth_two(cantor):
    cells = list(cylinders(cantor, 2))
    assert len(cells) == 4
    assert all(cell.diameter == Fraction(1, 9) for cell in cells)
    assert sum(cell.measure for cell in cells) == 1
    assert [cell.box.lower[0] for cell in cells] == [0, Fraction(2, 9), Fraction(2, 3), Fraction(8, 9)]


def test_product_cylinders_multiply_counts_and_measures():
    grid = ProductFractal.grid(1, 2, [preset('cantor'), preset('interval')])
    cells = list(cylinders(grid, 1))
    assert len(cells) == 4
    assert all(cell.measure == Fraction(1, 4) for cell in cells)
    assert cells[0].label() == '0|0'


def test_coding_map_converges_to_right_endpoint(cantor):
    for depth in (1, 4, 8):
        coded = coding_map(cantor, [1] * depth)
        assert coded.point == (1 - Fraction(1, 3 ** depth),)
        assert abs(1 - coded.point[0]) <= coded.radius


def test_coding_map_rejects_letters_outside_alphabet(cantor):
    with pytest.raises(OutOfRange):
        coding_map(cantor, [0, 2])


def test_k_beta(cantor):
    assert k_beta(cantor, Fraction(1, 50)) == 3
    assert k_beta(cantor, 1) == 0
    with pytest.raises(OutOfRange):
        k_beta(cantor, 2)


def test_parse_fractal_layouts():
    grid = parse_fractal('cantor', 2, 1)
    assert grid.shape == (2, 1)
    assert len(grid.factors) == 2
    product = parse_fractal('carpet', 2, 1, layout='product')
    assert product.ambient_dim == 2
    with pytest.raises(InvalidFractal):
        parse_fractal('cantor;interval;cantor', 2, 1)


def test_sampler_is_deterministic_per_seed(cantor):
    first = FractalSampler(cantor, seed=7, depth=20).sample(50)
    again = FractalSampler(cantor, seed=7, depth=20).sample(50)
    other = FractalSampler(cantor, seed=8, depth=20).sample(50)
    assert np.array_equal(first, again)
    assert not np.array_equal(first, other)


def test_sampler_points_do_not_depend_on_block_boundaries(cantor):
    sampler = FractalSampler(cantor, seed=3, depth=12)
    block = sampler.sample(2000)
    assert np.array_equal(sampler.point(1500), block[1500])


def test_sampler_stays_inside_the_middle_thirds_gaps(cantor):
    points = FractalSampler(cantor, seed=1, depth=30).sample(500)[:, 0]
    assert np.all((points <= 1 / 3 + 1e-12) | (points >= 2 / 3 - 1e-12))


def test_pushforward_rejects_scale_outside_window():
    grid = ProductFractal.grid(1, 1, preset('cantor'))
    with pytest.raises(OutOfRange):
        pushforward_scaled(grid, [[Fraction(4)]])


def test_box_counting_recovers_cantor_dimension(cantor):
    estimate = box_counting_estimate(list(cylinders(cantor, 8)), [Fraction(1, 3 ** k) for k in range(1, 7)])
    assert estimate.counts == tuple(2 ** k for k in range(1, 7))
    assert estimate.slope == pytest.approx(math.log(2) / math.log(3))


def test_box_counting_of_interval_has_slope_one():
    estimate = box_counting_estimate(list(cylinders(preset('interval'), 8)), [Fraction(1, 2 ** k) for k in range(1, 7)])
    assert estimate.slope == pytest.approx(1.0)


def test_ball_intersection_check_is_bounded(cantor):
    worst = ball_intersection_check(cantor, [Fraction(1, 10), Fraction(1, 30)], points=200)
    assert set(worst) == {'1/10', '1/30'}
    assert all(1 <= count <= 4 for count in worst.values())


def test_bernoulli_sample_uses_only_cantor_digits(cantor):
    point = bernoulli_sample(cantor, 6, np.random.default_rng(11))[0]
    scaled = point * 3 ** 6
    assert scaled.denominator == 1
    digits = []
    value = int(scaled)
    for _ in range(6):
        value, digit = divmod(value, 3)
        digits.append(digit)
    assert set(digits) <= {0, 2}


def test_measure_ball_constant_for_cantor(cantor):
    lam, depth, centres = measure_ball_constant(cantor, depth=6)
    assert depth == 6
    assert centres == 64
    # the unit ball around any centre holds the whole attractor
    assert lam >= 1


def test_ball_intersection_constant_for_cantor(cantor):
    constants = ball_intersection_constant(cantor, depth=6)
    assert constants.intersection == math.floor(constants.measure_ball * 6 ** cantor.dimension_float) + 1
    assert constants.intersection >= 4
    assert constants.to_dict()['L'] == constants.intersection
