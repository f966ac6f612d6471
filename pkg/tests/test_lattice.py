import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest

from src.config import settings
from src.models.lattice import AffineLattice, MultiVector
from src.services.errors import ConfigError, EnumerationBudgetExceeded, InvalidShape, OutOfRange, PremiseViolation
from src.services.height import psi
from src.services.lattice import (
    covolume, dual_lattice, emm_check, exterior_action, format_lattice, is_primitive, lambda0,
    lambda0_affine, lll_reduce, operator_norm, phi_l, pi_minus, pi_plus, read_lattice, reduce_lattice, saturate,
    sublattice_record, successive_candidates, wedge, wedge_covolume,
)
from src.services.numeric import mat_mul

DIAGONAL = [[Fraction(4), Fraction(0)], [Fraction(0), Fraction(1, 4)]]


def test_lambda0_standard_lattice():
    assert lambda0(AffineLattice.standard(3)).value == 1


def test_lambda0_diagonal_lattice():
    short = lambda0(AffineLattice.build(DIAGONAL))
    assert short.value == Fraction(1, 4)
    assert [abs(v) for v in short.witness] == [0, Fraction(1, 4)]


def test_lambda0_affine_of_shifted_grid():
    x = AffineLattice.build([[1, 0], [0, 1]], [Fraction(1, 2), Fraction(1, 2)])
    assert lambda0_affine(x).value == Fraction(1, 2)


def test_lambda0_affine_is_zero_on_homogeneous_lattice():
    assert lambda0_affine(AffineLattice.standard(2)).value == 0


def test_lambda0_of_skewed_basis_matches_reduced_lattice():
    skewed = AffineLattice.build([[1, 7], [0, 1]])
    reduced, _ = reduce_lattice(skewed)
    assert lambda0(skewed).value == 1
    assert lambda0(reduced).value == 1


def test_lambda0_scales_at_most_by_operator_norm():
    x = AffineLattice.build([[1, Fraction(3, 7)], [0, 1]])
    g = [[Fraction(3), Fraction(1)], [Fraction(2), Fraction(1)]]
    assert lambda0(x.act(g)).value <= operator_norm(g) * lambda0(x).value


def test_build_rejects_non_unimodular_basis():
    with pytest.raises(InvalidShape):
        AffineLattice.build([[2, 0], [0, 1]])


def test_wedge_covolume_examples():
    assert wedge_covolume([[2, 0], [0, Fraction(1, 2)]]) == 1
    assert wedge_covolume([[3, 4]]) == 4
    assert wedge([[1, 0], [1, 1]]).coefficient((0, 1)) == 1
    assert wedge_covolume([[1, 2], [2, 4]]) == 0


def test_wedge_covolume_invariant_under_unimodular_recombination():
    generators = [[1, 2, 0], [0, 1, 3]]
    recombined = [[a + 2 * b for a, b in zip(*generators)], generators[1]]
    assert wedge_covolume(recombined) == wedge_covolume(generators)


def test_exterior_action_top_grade_is_determinant():
    g = [[Fraction(2), Fraction(0)], [Fraction(0), Fraction(1, 2)]]
    image = exterior_action(g, 2).apply(MultiVector.monomial((0, 1), 2))
    assert image.coefficient((0, 1)) == 1


def test_exterior_action_is_functorial():
    g = [[Fraction(1), Fraction(2), Fraction(0)], [Fraction(0), Fraction(1), Fraction(1)], [Fraction(1), Fraction(0), Fraction(1)]]
    h = [[Fraction(2), Fraction(0), Fraction(1)], [Fraction(1), Fraction(1), Fraction(0)], [Fraction(0), Fraction(3), Fraction(1)]]
    assert exterior_action(mat_mul(g, h), 2).matrix == exterior_action(g, 2).compose(exterior_action(h, 2)).matrix


def test_exterior_action_grade_out_of_range():
    with pytest.raises(OutOfRange):
        exterior_action([[1, 0], [0, 1]], 3)


def test_projections_split_by_index_membership():
    x = MultiVector.from_dict(1, 3, {(0,): Fraction(1), (1,): Fraction(2), (2,): Fraction(3)})
    assert pi_plus(x, 2).as_dict() == {(0,): 1, (1,): 2}
    assert pi_minus(x, 2).as_dict() == {(2,): 3}

    grade_two = MultiVector.from_dict(2, 3, {(0, 1): Fraction(5), (0, 2): Fraction(7)})
    assert pi_plus(grade_two, 2).as_dict() == {(0, 1): 5}


def test_phi_examples():
    diagonal = AffineLattice.build(DIAGONAL)
    assert phi_l(AffineLattice.standard(2), 1).value == 1
    assert phi_l(diagonal, 1).value == 4
    assert phi_l(diagonal, 2).value == 1
    assert phi_l(AffineLattice.standard(3), 3).value == 1


def test_phi_middle_grade_is_certified():
    result = phi_l(AffineLattice.standard(3), 2)
    assert result.value == 1
    assert result.certified
    assert result.record.primitive


def test_phi_ignores_the_shift():
    shifted = AffineLattice.build(DIAGONAL, [0, Fraction(1, 8)])
    assert phi_l(shifted, 1).value == 4


def test_saturation_and_primitivity():
    assert not is_primitive([[2, 0, 0]])
    assert is_primitive([[1, 0, 0], [0, 1, 0]])
    assert saturate([[2, 4, 0]]) == [[1, 2, 0]]


def test_covolume_of_trivial_subgroup_is_one():
    assert covolume(AffineLattice.standard(2), []) == 1


def test_emm_coordinate_subgroups():
    x = AffineLattice.standard(3)
    first = sublattice_record(x, [[1, 0, 0], [0, 1, 0]])
    second = sublattice_record(x, [[0, 1, 0], [0, 0, 1]])
    report = emm_check(x, first, second)
    assert report.ratio == 1
    assert report.intersection_rank == 1
    assert report.sum_rank == 3
    assert report.within_bound


def test_emm_identical_subgroups():
    x = AffineLattice.build([[1, 1, 0], [0, 1, 0], [0, 0, 1]])
    record = sublattice_record(x, [[1, 0, 0], [0, 0, 1]])
    assert emm_check(x, record, record).ratio == 1


def test_emm_rejects_non_primitive_input():
    x = AffineLattice.standard(2)
    with pytest.raises(PremiseViolation):
        emm_check(x, sublattice_record(x, [[2, 0]]), sublattice_record(x, [[0, 1]]))


def test_lattice_file_round_trip():
    text = '4 0\n0 1/4\nshift: 0 1/8\n'
    x = read_lattice(text)
    assert x.shift == (0, Fraction(1, 8))
    assert format_lattice(x) == text


def test_lll_reduce_recovers_the_standard_basis():
    reduced, coords = lll_reduce([[Fraction(1), Fraction(0)], [Fraction(7), Fraction(1)]])
    assert reduced == [[1, 0], [0, 1]]
    assert coords == [[1, 0], [-7, 1]]


def test_successive_candidates_of_the_square_lattice():
    assert len(successive_candidates(AffineLattice.standard(2), 1)) == 8
    primitive = successive_candidates(AffineLattice.standard(2), 1, primitive_only=True)
    assert {tuple(z) for _, z in primitive} == {(1, 0), (0, 1), (1, 1), (1, -1)}


def _random_unimodular(rng, d, steps=6):
    """Product of integer shears, so the determinant is one"""
    u = [[int(i == j) for j in range(d)] for i in range(d)]
    for _ in range(steps if d > 1 else 0):
        i, j = rng.choice(d, size=2, replace=False)
        k = int(rng.integers(-2, 3))
        u = [[u[r][c] + (k * u[j][c] if r == i else 0) for c in range(d)] for r in range(d)]
    return u


def _random_lattice(rng, d, shift=False):
    """Shear times a rational diagonal of determinant one times an integer unimodular matrix"""
    scales = [Fraction(int(rng.integers(1, 3)), int(rng.integers(1, 3))) for _ in range(d - 1)]
    diagonal = scales + [1 / math.prod(scales, start=Fraction(1))]
    shear = [[Fraction(int(i == j)) if j <= i else Fraction(int(rng.integers(-3, 4)), 4) for j in range(d)]
             for i in range(d)]
    rows = mat_mul(shear, [[diagonal[i] * v for v in row] for i, row in enumerate(_random_unimodular(rng, d))])
    v = [Fraction(int(rng.integers(0, 7)), 7) for _ in range(d)] if shift else None
    return AffineLattice.build(rows, v)


def _brute_phi_hyperplane(x):
    """
    Least plane covolume over pairs (u, v). A reduced basis of any plane with
    sup covolume at most V has |u| ≤ sqrt(2V) and |v| ≤ 2V/λ₀.
    """
    V = phi_l(x, 2).record.covolume
    first = successive_candidates(x, Fraction(math.ceil(math.sqrt(2 * V) * 100) + 1, 100), primitive_only=True)
    second = successive_candidates(x, 2 * V / lambda0(x).value, primitive_only=True)
    best = None
    for u, _ in first:
        for v, _ in second:
            value = wedge_covolume([u, v])
            if value != 0 and (best is None or value < best):
                best = value
    return best


def test_phi_hyperplane_uses_the_dual_lattice():
    x = AffineLattice.build([[2, 0, 0], [0, 1, 0], [0, 0, Fraction(1, 2)]])
    result = phi_l(x, 2)
    # the plane spanned by the two shortest directions has covolume 1/2
    assert result.value == 2
    assert result.certified
    assert result.record.primitive
    assert result.record.covolume == Fraction(1, 2)


def test_dual_lattice_of_a_diagonal_lattice():
    dual = dual_lattice(AffineLattice.build([[2, 0, 0], [0, 1, 0], [0, 0, Fraction(1, 2)]]))
    assert dual.basis == ((Fraction(1, 2), 0, 0), (0, 1, 0), (0, 0, 2))
    assert lambda0(dual).value == Fraction(1, 2)


def test_phi_hyperplane_matches_a_pair_scan():
    rng = np.random.default_rng(11)
    for _ in range(3):
        x = _random_lattice(rng, 3)
        assert phi_l(x, 2).value == 1 / _brute_phi_hyperplane(x)


def test_phi_hyperplane_on_a_high_precision_lattice():
    with mpmath.workprec(160):
        g = [[mpmath.mpf(3) ** 5, 0, 0], [0, mpmath.mpf(1), 0], [0, 0, mpmath.mpf(3) ** -5]]
        x = AffineLattice.standard(3).act(g)
        result = phi_l(x, 2)
        assert result.certified
        assert abs(result.value - mpmath.mpf(3) ** 5) < mpmath.mpf(2) ** -100


def test_act_carries_row_rounding_bounds():
    with mpmath.workprec(128):
        g = [[mpmath.mpf(3) ** 20, 0], [0, mpmath.mpf(3) ** -20]]
        x = AffineLattice.standard(2).act(g)
        assert not x.is_exact
        assert len(x.error) == 2
        assert x.error[1] < x.error[0]
        short = lambda0(x)
        assert abs(short.value / mpmath.mpf(3) ** -20 - 1) < mpmath.mpf(2) ** -90


def test_rebased_keeps_the_lattice():
    x = AffineLattice.build([[1, Fraction(2, 5)], [0, 1]], [Fraction(1, 3), Fraction(1, 2)])
    y = x.rebased([[1, 3], [0, 1]])
    assert lambda0(y).value == lambda0(x).value
    assert lambda0_affine(y).value == lambda0_affine(x).value


def test_exterior_action_is_functorial_on_random_matrices():
    rng = np.random.default_rng(3)
    for d in (3, 4):
        for _ in range(4):
            g, h = ([[Fraction(int(rng.integers(-4, 5)), int(rng.integers(1, 4))) for _ in range(d)]
                     for _ in range(d)] for _ in range(2))
            for grade in range(1, d + 1):
                composed = exterior_action(g, grade).compose(exterior_action(h, grade))
                assert exterior_action(mat_mul(g, h), grade).matrix == composed.matrix


def test_covolume_is_invariant_under_random_recombination():
    rng = np.random.default_rng(5)
    for d in (3, 4):
        for _ in range(4):
            x = _random_lattice(rng, d)
            rows = _random_unimodular(rng, d)
            for grade in range(1, d):
                coords = rows[:grade]
                mixed = [[int(v) for v in row] for row in mat_mul(_random_unimodular(rng, grade, steps=3), coords)]
                assert covolume(x, mixed) == covolume(x, coords)


def test_phi_one_and_psi_invert_the_shortest_vectors():
    rng = np.random.default_rng(7)
    for d in (2, 3, 4):
        for _ in range(3):
            x = _random_lattice(rng, d, shift=True)
            moved = x.rebased(_random_unimodular(rng, d))
            shortest = lambda0(x.homogeneous_part()).value
            assert lambda0(moved.homogeneous_part()).value == shortest
            assert phi_l(moved, 1).value * shortest == 1
            if not x.homogeneous():
                assert psi(moved) * lambda0_affine(x).value == 1
            else:
                assert psi(moved) is None


def test_emm_bound_on_random_primitive_pairs():
    rng = np.random.default_rng(13)
    for d in (2, 3, 4, 5):
        for _ in range(3):
            x = _random_lattice(rng, d)
            first_rows, second_rows = _random_unimodular(rng, d), _random_unimodular(rng, d)
            l1, l2 = (int(v) for v in rng.integers(1, d, size=2))
            report = emm_check(x, sublattice_record(x, first_rows[:l1]), sublattice_record(x, second_rows[:l2]))
            assert report.within_bound, (d, l1, l2)


def test_subset_budget_stops_the_middle_grade_scan():
    settings.update(subset_budget=1)
    with pytest.raises(EnumerationBudgetExceeded):
        phi_l(AffineLattice.standard(4), 2)


def test_subset_budget_must_be_positive():
    with pytest.raises(ConfigError):
        settings.update(subset_budget=0)
    assert settings.subset_budget > 0
