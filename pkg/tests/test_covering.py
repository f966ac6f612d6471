from dataclasses import replace
from fractions import Fraction

import pytest
import sympy

from src.models.approximation import PointSpec
from src.models.cover import CoverParams
from src.models.fractal import ProductFractal
from src.models.weights import FlowTime
from src.services.covering import (
    cover_count_bound, depth_indices, initial_state, refine_cover, run_cover, separation_check,
    validate_params,
)
from src.services.diophantine import orbit_lattices
from src.services.errors import OutOfRange, PremiseViolation
from src.services.numeric import parse_real


@pytest.fixture
def params(unit_weights, cantor):
    return CoverParams(weights=unit_weights, fractal=ProductFractal.product([cantor]), t=Fraction(3),
                       epsilon=Fraction(1, 4), delta=Fraction(1, 100), q_prime=Fraction(9, 10), N=3,
                       samples=3)


def _with(params, **changes):
    return replace(params, **changes)


def test_validate_params_returns_group_weights(params):
    assert validate_params(params) == (Fraction(1),)


def test_validate_params_rejects_large_delta(params):
    # 2δ must stay below ε·c·t^(−w) = 1/36
    with pytest.raises(PremiseViolation):
        validate_params(_with(params, delta=Fraction(1, 72)))


def test_validate_params_rejects_q_prime_outside_unit_interval(params):
    with pytest.raises(PremiseViolation):
        validate_params(_with(params, q_prime=Fraction(3, 2)))


def test_depth_indices_for_cantor(params):
    assert depth_indices(params, 0).P == (3,)
    assert depth_indices(params, 2).P == (5,)
    assert depth_indices(params, 3).P == (6,)
    assert not any(depth_indices(params, 2).clamped)


def test_depth_indices_with_pivot(params):
    indices = depth_indices(params, 2, pivot=1)
    assert indices.K == (6,)
    with pytest.raises(OutOfRange):
        depth_indices(params, 2, pivot=2)


def test_depth_indices_clamp_wide_balls(unit_weights, cantor):
    wide = CoverParams(weights=unit_weights, fractal=ProductFractal.product([cantor]), t=Fraction(100),
                       epsilon=Fraction(1, 2), delta=Fraction(1, 1000), q_prime=Fraction(1), N=1)
    assert depth_indices(wide, 0).P == (5,)
    assert depth_indices(_with(wide, delta=Fraction(3, 4)), 0).clamped == (True,)


def test_initial_state_covers_the_attractor(params):
    state = initial_state(params)
    assert len(state.nodes) == 8
    assert state.measure_sum == 1


def test_cover_count_bound_limit(params):
    bound = cover_count_bound(params, 1, Fraction(1, 10), Fraction(1, 1000), L=2)
    assert bound.N_gamma == 3
    assert bound.B == 8
    assert sympy.simplify(bound.limit - sympy.log(2) / sympy.log(3) / 5) == 0
    assert bound.value > 0


def test_cover_count_bound_needs_n_gamma_above_m(params):
    with pytest.raises(OutOfRange):
        cover_count_bound(params, 1, 0, Fraction(1, 60), L=2)


def test_run_cover_keeps_the_measure_recursion(params):
    run = run_cover(params, Fraction(1, 3), L=2)
    assert len(run.steps) == params.N
    assert run.recursion_holds
    measures = [step.measure_after for step in run.steps]
    assert all(later <= earlier for earlier, later in zip([Fraction(1)] + measures, measures))
    assert 0 <= run.final_measure <= 1
    assert {row['depth'] for row in run.rows} == {0, 1, 2, 3}
    assert set(run.I) <= {1, 2, 3}
    assert set(run.Q) <= {1, 2, 3}


def test_run_cover_unrefined_steps_keep_every_child(params):
    run = run_cover(params, Fraction(1, 3), L=2)
    for step in run.steps:
        if not step.refined:
            assert step.measure_after == step.measure_before
            assert step.pruned == 0


def test_run_cover_with_gamma_attaches_the_bound(params):
    run = run_cover(params, Fraction(1, 3), L=2, gamma=Fraction(1, 1000))
    assert run.bound is not None
    assert run.bound.N_gamma == 3
    assert run.to_dict()['bound']['pivot'] == 1


def test_separation_of_passing_shifts(params):
    # 2δ t^(−j) = 1/150 at step 1
    assert separation_check(params, 1, [(Fraction(0),), (Fraction(1, 200),)])
    assert not separation_check(params, 1, [(Fraction(0),), (Fraction(1, 100),)])


@pytest.fixture
def orbit(params):
    point = PointSpec.from_values(params.weights, Fraction(1, 3))
    base = FlowTime.for_weights(params.t, params.weights, 128)
    return orbit_lattices(point, params.weights, base, params.N, 128)


def test_refine_cover_outside_q_keeps_every_child(params, orbit):
    state, step = refine_cover(params, initial_state(params), orbit, 1, in_I=False, in_Q=False, L=2)
    assert state.j == 1
    assert state.depths == (4,)
    assert len(state.nodes) == 16
    assert state.measure_sum == 1
    assert not step.refined
    assert step.pruned == 0
    assert step.max_children == 2
    assert step.factor == 1
    assert step.recursion_ok
    assert step.separation_ok is None


def test_refine_cover_inside_q_never_grows_the_measure(params, orbit):
    state, step = refine_cover(params, initial_state(params), orbit, 1, in_I=False, in_Q=True, L=2)
    assert step.refined
    assert step.factor == 1
    assert step.measure_after <= step.measure_before
    assert step.alive_after + step.pruned == 16
    assert step.recursion_ok


def test_refine_cover_needs_the_previous_state(params, orbit):
    with pytest.raises(PremiseViolation):
        refine_cover(params, initial_state(params), orbit, 2, in_I=False, in_Q=False, L=2)


def test_refine_cover_needs_the_orbit_step(params, orbit):
    with pytest.raises(OutOfRange):
        refine_cover(params, initial_state(params), orbit[:1], 1, in_I=False, in_Q=False, L=2)


def test_run_cover_of_golden_theta(params):
    run = run_cover(params, parse_real('golden'), L=2)
    # λ₀ stays above 0.6 along a badly approximable orbit
    assert run.I == ()
    assert run.recursion_holds
    assert run.aggregate_holds


def _alive_measure(rows, depth):
    return sum((Fraction(row['measure']) for row in rows if row['depth'] == depth and row['alive']), Fraction(0))


def test_six_step_cover_against_recomputed_measures(params):
    long_run = _with(params, N=6)
    run = run_cover(long_run, Fraction(1, 4), L=2)
    assert len(run.steps) == 6

    depths = [initial_state(long_run).depths[0]] + [step.depths[0] for step in run.steps]
    previous = _alive_measure(run.rows, 0)
    assert previous == 1
    for j, step in enumerate(run.steps, start=1):
        current = _alive_measure(run.rows, j)
        assert current == step.measure_after
        assert all(Fraction(row['measure_sum']) == current for row in run.rows if row['depth'] == j)
        assert step.measure_before == previous
        if step.refined:
            assert current <= 2 * Fraction(1, 2 ** (depths[j] - depths[j - 1])) * previous
        else:
            assert current == previous
        previous = current
    assert run.final_measure == previous

    # cantor at t = 3 with unit weight: t^(−s) = 1/2
    q_N = long_run.q_prime * long_run.N
    exponent = q_N - len(run.I) if len(run.Q) > q_N else Fraction(len(run.Q) - len(run.I))
    assert run.exponent == exponent
    aggregate = 2 ** 6 * 2 ** 6 * 2 ** 6 * 2 ** -float(exponent)
    assert float(run.aggregate_bound) == pytest.approx(aggregate, rel=1e-9)
    assert run.final_measure <= aggregate
    assert run.aggregate_holds
