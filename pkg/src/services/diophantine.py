"""
Diophantine Service
Best approximations, uniform exponents, the Dani time changes, orbit scans,
escape of mass and Div fractions
"""

import math
import logging
from fractions import Fraction
from itertools import product
from typing import Dict, List, Optional, Sequence, Tuple

import mpmath
import sympy

from src.config import settings
from src.models.approximation import (
    ApproximationRecord, DaniResult, DivFraction, EMassEstimate, ExponentCurve, ExponentPoint,
    PointSpec, SingularIndicator, TrajectoryPoint, TrajectoryRecord,
)
from src.models.lattice import AffineLattice
from src.models.weights import FlowTime, Weights
from src.services.core import flow_matrix, quasi_norm, quasi_norm_leq
from src.services.errors import EnumerationBudgetExceeded, PremiseViolation
from src.services.lattice import lambda0, lambda0_affine, reduce_lattice
from src.services.numeric import (
    Real, evaluate, floor_int, format_number, is_exact, less_equal, lift, mat_mul, mat_vec,
    monomial_leq, mul, nearest_int, power, to_float, to_mpf, transpose,
)

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Best approximations
# ---------------------------------------------------------------------------

def _integer_exponents(w: Sequence[Fraction]) -> Tuple[List[int], int]:
    """e_i with |x_i|^{e_i} ordered like |x_i|^{1/w_i}"""
    scale = math.lcm(*(Fraction(v).numerator for v in w))
    return [Fraction(v).denominator * (scale // Fraction(v).numerator) for v in w], scale


def _root_floor(T, w: Fraction) -> int:
    """Largest integer k ≥ 0 with k ≤ T^w"""
    if is_exact(T):
        top = floor_int(Fraction(T) ** w.numerator)
        return int(sympy.integer_nthroot(top, w.denominator)[0])
    return floor_int(mpmath.power(T, to_mpf(w)))


def _q_order(weights: Weights, T_max) -> List[Tuple[int, Tuple[int, ...]]]:
    """
    Nonzero q with ‖q‖_b ≤ T_max ordered by shell, then reverse-lexicographically
    so that positive leading entries come first within a shell.
    """
    exps, _ = _integer_exponents(weights.b)
    bounds = [_root_floor(T_max, b) for b in weights.b]
    size = math.prod(2 * B + 1 for B in bounds) - 1
    if size > settings.enum_budget:
        raise EnumerationBudgetExceeded('too many denominators below the horizon', points=size,
                                        budget=settings.enum_budget)
    ordered = []
    for q in product(*(range(-B, B + 1) for B in bounds)):
        if any(q):
            shell = max(abs(v) ** e for v, e in zip(q, exps))
            ordered.append((shell, q))
    ordered.sort(key=lambda item: (item[0], tuple(-v for v in item[1])))
    return ordered


def approximation_sweep(theta, xi, weights: Weights, T_grid: Sequence[Real],
                        prec: Optional[int] = None) -> List[ApproximationRecord]:
    """
    Best approximations for every horizon in T_grid, in one pass over q.
    Denominators are visited in increasing ‖q‖_b, so the admissible set for
    each T is a prefix of the scan.
    """
    prec = prec or settings.prec
    if not T_grid:
        return []
    with mpmath.workprec(prec):
        m, n = weights.m, weights.n
        values = lift([evaluate(v, prec) for row in theta for v in row] + [evaluate(v, prec) for v in xi])
        theta = [values[i * n:(i + 1) * n] for i in range(m)]
        xi = values[m * n:]
        T_values = [evaluate(T, prec) for T in T_grid]
        if any(not less_equal(1, T) for T in T_values):
            raise PremiseViolation('no admissible denominator below T < 1')

        a_exps, _ = _integer_exponents(weights.a)
        _, b_scale = _integer_exponents(weights.b)
        order = sorted(range(len(T_values)), key=lambda i: to_float(T_values[i]))
        T_max = T_values[order[-1]]
        scan = _q_order(weights, T_max)

        results: Dict[int, ApproximationRecord] = {}
        best = None
        position = 0
        for index in order:
            T = T_values[index]
            limit = Fraction(T) ** b_scale if is_exact(T) else mpmath.power(T, b_scale)
            while position < len(scan) and less_equal(scan[position][0], limit):
                q = scan[position][1]
                target = [v + s for v, s in zip(mat_vec(theta, list(q)), xi)]
                p = [nearest_int(-v) for v in target]
                residual = [pi + v for pi, v in zip(p, target)]
                key = max(abs(r) ** e for r, e in zip(residual, a_exps))
                if best is None or key < best[0]:
                    best = (key, tuple(p), q, tuple(residual))
                position += 1
            _, p, q, residual = best
            results[index] = ApproximationRecord(T=T, p=p, q=q, residual=residual,
                                                 value=quasi_norm(list(residual), weights.a))
        logger.debug('approximation sweep scanned %d denominators', position)
        return [results[i] for i in range(len(T_values))]


def best_approximation(theta, xi, weights: Weights, T, prec: Optional[int] = None) -> ApproximationRecord:
    """Exact minimiser of ‖p+θq+ξ‖_a over 0 < ‖q‖_b ≤ T"""
    return approximation_sweep(theta, xi, weights, [T], prec)[0]


def uniform_exponent_estimate(theta, xi, weights: Weights, T_grid: Sequence[Real],
                              prec: Optional[int] = None) -> ExponentCurve:
    """
    ω(T) = −1 − log‖p+θq+ξ‖_a / log T along the grid, with the running tail infimum.
    The estimate is the tail infimum over the second half of the grid.
    """
    prec = prec or settings.prec
    grid = list(T_grid)
    for previous, current in zip(grid, grid[1:]):
        if not less_equal(previous, current) or previous == current:
            raise PremiseViolation('T grid must be increasing')
    records = approximation_sweep(theta, xi, weights, grid, prec)
    omegas: List[Optional[float]] = []
    with mpmath.workprec(prec):
        for record in records:
            T = to_mpf(record.T)
            if T <= 1:
                omegas.append(None)
            elif record.exact_solution:
                omegas.append(math.inf)
            else:
                omegas.append(float(-1 - mpmath.log(to_mpf(record.value)) / mpmath.log(T)))

    tails: List[Optional[float]] = [None] * len(omegas)
    running = None
    for i in range(len(omegas) - 1, -1, -1):
        if omegas[i] is not None:
            running = omegas[i] if running is None else min(running, omegas[i])
        tails[i] = running
    points = tuple(ExponentPoint(T=r.T, record=r, omega=w, tail_infimum=tail)
                   for r, w, tail in zip(records, omegas, tails))
    rational = any(r.exact_solution for r in records[len(records) // 2:])
    estimate = tails[len(tails) // 2] if tails else None
    return ExponentCurve(points=points, rational=rational, estimate=estimate, horizon=records[-1].T)


def singular_indicator(theta, xi, weights: Weights, eps_grid: Sequence[Real], T_grid: Sequence[Real],
                       omega=None, prec: Optional[int] = None) -> SingularIndicator:
    """
    For each ε, whether every horizon T of the grid has (p, q) with
    ‖p+θq+ξ‖_a ≤ ε/T and ‖q‖_b ≤ T; optionally the same with T^{−1−ω}.
    """
    prec = prec or settings.prec
    records = approximation_sweep(theta, xi, weights, T_grid, prec)
    improvable, failures = [], {}
    with mpmath.workprec(prec):
        for eps in eps_grid:
            eps = evaluate(eps, prec)
            ok = True
            for record in records:
                bound = eps / record.T if is_exact(eps) and is_exact(record.T) else to_mpf(eps) / to_mpf(record.T)
                if not quasi_norm_leq(list(record.residual), weights.a, bound):
                    failures[eps] = record.T
                    ok = False
                    break
            improvable.append(ok)
        omega_ok = None
        if omega is not None:
            omega = Fraction(omega)
            omega_ok = all(
                monomial_leq([(abs(r), Fraction(1))], [(record.T, (-1 - omega) * a)])
                for record in records for r, a in zip(record.residual, weights.a)
            )
    return SingularIndicator(epsilons=tuple(eps_grid), horizons=tuple(T_grid),
                             improvable=tuple(improvable), omega=omega,
                             omega_improvable=omega_ok, failures=failures)


# ---------------------------------------------------------------------------
# Dani correspondence
# ---------------------------------------------------------------------------

def _leq(lhs, rhs, exact: bool) -> bool:
    if exact:
        return monomial_leq(lhs, rhs)
    slack = 1 + mpmath.ldexp(1, -(mpmath.mp.prec // 2))
    return monomial_leq(lhs, list(rhs) + [(slack, Fraction(1))])


def _image(weights: Weights, tau, approx: ApproximationRecord) -> Real:
    coords = [Fraction(0) if r == 0 else mul(r, power(tau, a)) for r, a in zip(approx.residual, weights.a)]
    coords += [mul(q, power(tau, -b)) for q, b in zip(approx.q, weights.b)]
    if all(is_exact(v) for v in coords):
        return max(abs(Fraction(v)) for v in coords)
    return max(abs(to_mpf(v)) for v in coords)


def _check_premises(weights: Weights, approx: ApproximationRecord, residual_bound, t, exact: bool):
    residual_ok = all(_leq([(abs(r), Fraction(1))], residual_bound(a), exact)
                      for r, a in zip(approx.residual, weights.a))
    q_ok = all(_leq([(abs(q), Fraction(1))], [(t, b)], exact) for q, b in zip(approx.q, weights.b))
    if not residual_ok:
        raise PremiseViolation('approximation does not meet the residual premise')
    if not q_ok:
        raise PremiseViolation('denominator exceeds ‖q‖_b ≤ t')


def dani_forward(weights: Weights, t, delta, approx: ApproximationRecord) -> DaniResult:
    """
    From ‖p+θq+ξ‖_a ≤ δ/t, ‖q‖_b ≤ t to the short vector g_τ z with
    τ = δ^{−a_m/(a_m+b_n)}·t and ‖g_τ z‖ ≤ δ^{a_m b_n/(a_m+b_n)}.
    """
    if not (0 < delta <= 1):
        raise PremiseViolation('δ must lie in (0, 1]', delta=format_number(delta))
    exact = is_exact(t) and is_exact(delta) and all(is_exact(r) for r in approx.residual)
    delta = Fraction(delta) if is_exact(delta) else delta
    a_m, b_n = weights.a[-1], weights.b[-1]
    s = a_m + b_n
    _check_premises(weights, approx, lambda a: [(delta, a), (t, -a)], t, exact)

    tau = mul(power(delta, -a_m / s), t)
    bound = power(delta, a_m * b_n / s)
    rhs = [(delta, a_m * b_n / s)]
    certified = all(
        _leq([(abs(r), Fraction(1)), (delta, -a_m * a / s), (t, a)], rhs, exact)
        for r, a in zip(approx.residual, weights.a)
    ) and all(
        _leq([(abs(q), Fraction(1)), (delta, a_m * b / s), (t, -b)], rhs, exact)
        for q, b in zip(approx.q, weights.b)
    )
    if not certified:
        logger.error('Dani forward inequality failed for q=%s t=%s δ=%s', approx.q,
                     format_number(t), format_number(delta))
    return DaniResult(tau=tau, bound=bound, certified=certified, image_norm=_image(weights, tau, approx))


def dani_omega(weights: Weights, omega, t, approx: ApproximationRecord) -> DaniResult:
    """
    From ‖p+θq+ξ‖_a ≤ t^{−1−ω}, ‖q‖_b ≤ t to τ = t^{1+a_mω/(a_m+b_n)} with
    ‖g_τ z‖ ≤ τ^{−a_m b_n ω/(a_m+b_n+a_m ω)}.
    """
    omega = Fraction(omega)
    if omega < 0:
        raise PremiseViolation('ω must be nonnegative')
    if not less_equal(1, t):
        raise PremiseViolation('t must be at least 1', t=format_number(t))
    exact = is_exact(t) and all(is_exact(r) for r in approx.residual)
    a_m, b_n = weights.a[-1], weights.b[-1]
    s = a_m + b_n
    _check_premises(weights, approx, lambda a: [(t, (-1 - omega) * a)], t, exact)

    exponent = 1 + a_m * omega / s
    tau = power(t, exponent)
    bound_exponent = -a_m * b_n * omega / s
    bound = power(t, bound_exponent)
    rhs = [(t, bound_exponent)]
    certified = all(
        _leq([(abs(r), Fraction(1)), (t, a * exponent)], rhs, exact)
        for r, a in zip(approx.residual, weights.a)
    ) and all(
        _leq([(abs(q), Fraction(1)), (t, -b * exponent)], rhs, exact)
        for q, b in zip(approx.q, weights.b)
    )
    if not certified:
        logger.error('Dani ω inequality failed for q=%s t=%s ω=%s', approx.q, format_number(t), omega)
    return DaniResult(tau=tau, bound=bound, certified=certified, image_norm=_image(weights, tau, approx))


# ---------------------------------------------------------------------------
# Orbits
# ---------------------------------------------------------------------------

def working_precision(point: PointSpec, flow_exact: bool, log2_growth: float, prec: int) -> int:
    """Bits needed to follow an orbit whose flow entries grow like 2^{log2_growth}"""
    if flow_exact and not point.symbolic:
        return prec
    if point.lattice is not None and not point.lattice.is_exact:
        return prec
    escalated = prec + math.ceil(2 * log2_growth) + 32
    if escalated > prec:
        logger.info('Escalating working precision from %d to %d bits', prec, escalated)
    return escalated


def _base_time(t, weights: Weights, prec: int) -> FlowTime:
    value = evaluate(t, prec)
    if not less_equal(1, value) or value == 1:
        raise PremiseViolation('flow base must exceed 1', t=format_number(value))
    return FlowTime.for_weights(value, weights, prec)


def _follow(x0: AffineLattice, g, transform: List[List[int]]):
    """g·x0 re-based by the previous unimodular transform, then LLL-reduced"""
    moved = x0.act(g)
    warm = moved.rebased(transform)
    reduced, coords = reduce_lattice(warm)
    return reduced, mat_mul(transform, transpose(coords))


def orbit_lattices(point: PointSpec, weights: Weights, base: FlowTime, N: int, prec: int) -> List[Tuple[FlowTime, AffineLattice]]:
    """The points g_{t^k} x for k = 0..N, each carried with an LLL-reduced basis"""
    x0 = point.at(prec)
    transform = [[int(i == j) for j in range(weights.d)] for i in range(weights.d)]
    orbit = [(base.iterate(0), reduce_lattice(x0)[0])]
    for k in range(1, N + 1):
        tk = base.iterate(k)
        reduced, transform = _follow(x0, flow_matrix(weights, tk), transform)
        orbit.append((tk, reduced))
    return orbit


def trajectory(point: PointSpec, weights: Weights, t, N: int, prec: Optional[int] = None) -> TrajectoryRecord:
    """λ₀(π(g_{t^k}x)) and λ̃₀(g_{t^k}x) for k = 1..N"""
    prec = prec or settings.prec
    if N < 1:
        raise PremiseViolation('horizon N must be at least 1')
    nominal = _base_time(t, weights, prec)
    growth = N * math.log2(to_float(nominal.value))
    P = working_precision(point, nominal.is_exact, growth, prec)
    with mpmath.workprec(P):
        base = _base_time(t, weights, P)
        orbit = orbit_lattices(point, weights, base, N, P)
        points = []
        for k, (tk, lattice) in enumerate(orbit[1:], start=1):
            short = lambda0(lattice.homogeneous_part())
            if lattice.homogeneous():
                affine_value, affine_witness = short.value - short.value, tuple(v - v for v in short.witness)
            else:
                affine = lambda0_affine(lattice)
                affine_value, affine_witness = affine.value, affine.witness
            points.append(TrajectoryPoint(
                k=k, t=tk.value, log_t=k * math.log(to_float(base.value)),
                lambda0=short.value, lambda0_affine=affine_value,
                witness=short.witness, witness_affine=affine_witness,
            ))
    logger.info('Trajectory finished: N=%d precision=%d', N, P)
    return TrajectoryRecord(base=base.value, points=tuple(points), precision=P, exact=base.is_exact and not point.symbolic)


def emass_estimate(point: PointSpec, weights: Weights, t, eps, N: int, refinement: int = 4,
                   prec: Optional[int] = None) -> EMassEstimate:
    """
    #I(t, ε, N)/N where I collects k ≤ N with λ₀(π(g_{t^k}x)) ≤ ε, together with
    the continuous-time fraction sampled `refinement` times per step and the
    discretization sandwich
        #I(t, ε/t, n)/(n+1) ≤ continuous fraction ≤ (#I(t, tε, n)+1)/n
    checked at every horizon n ≤ N.
    """
    prec = prec or settings.prec
    if N < 1 or refinement < 1:
        raise PremiseViolation('N and refinement must be positive')
    nominal = _base_time(t, weights, prec)
    growth = (N + 1) * math.log2(to_float(nominal.value))
    P = working_precision(point, nominal.is_exact, growth, prec)

    with mpmath.workprec(P):
        base = _base_time(t, weights, P)
        eps = evaluate(eps, P)
        if not less_equal(0, eps) or eps == 0:
            raise PremiseViolation('ε must be positive')
        tv = base.value
        low_eps = eps / tv if is_exact(eps) and is_exact(tv) else to_mpf(eps) / to_mpf(tv)
        high_eps = mul(eps, tv)

        orbit = orbit_lattices(point, weights, base, N, P)
        values = [lambda0(lattice.homogeneous_part()).value for _, lattice in orbit]
        in_i = [less_equal(v, eps) for v in values]
        in_low = [less_equal(v, low_eps) for v in values]
        in_high = [less_equal(v, high_eps) for v in values]

        fractions = [FlowTime.for_weights(power(tv, Fraction(j, refinement)), weights, P)
                     for j in range(refinement)]
        flows = [flow_matrix(weights, f) for f in fractions]
        sampled = []
        for k in range(N):
            lattice = orbit[k][1]
            for j, g in enumerate(flows):
                moved = lattice if j == 0 else reduce_lattice(lattice.act(g))[0]
                sampled.append(less_equal(lambda0(moved.homogeneous_part()).value, eps))

    holds = True
    for n in range(1, N + 1):
        continuous = Fraction(sum(sampled[:n * refinement]), n * refinement)
        lower = Fraction(sum(in_low[1:n + 1]), n + 1)
        upper = Fraction(sum(in_high[1:n + 1]) + 1, n)
        if not (lower <= continuous <= upper):
            holds = False
            logger.warning('EMass sandwich violated at horizon %d', n)

    count = sum(in_i[1:])
    lower_count = sum(in_low[1:])
    upper_count = sum(in_high[1:])
    estimate = EMassEstimate(
        epsilon=eps, N=N, base=tv, count=count, raw_fraction=Fraction(count, N),
        lower_count=lower_count, upper_count=upper_count,
        lower_fraction=Fraction(lower_count, N + 1), upper_fraction=Fraction(upper_count + 1, N),
        continuous_fraction=Fraction(sum(sampled), N * refinement), refinement=refinement,
        sandwich_holds=holds,
    )
    logger.info('EMass estimate N=%d count=%d fraction=%s', N, count, estimate.raw_fraction)
    return estimate


def _log_grid(point: PointSpec, weights: Weights, step, T_max: float, prec: int) -> Tuple[List[float], List[Real]]:
    """λ̃₀(g_{e^s}x) on s = i·step, with e^s in high precision"""
    P = working_precision(point, False, T_max / math.log(2), prec)
    count = math.ceil(T_max / to_float(step))
    with mpmath.workprec(P):
        x0 = point.at(P)
        transform = [[int(i == j) for j in range(weights.d)] for i in range(weights.d)]
        times, values = [], []
        for i in range(count + 1):
            s = min(to_mpf(step) * i, mpmath.mpf(T_max))
            time = FlowTime.high_precision(mpmath.exp(s), P)
            lattice, transform = _follow(x0, flow_matrix(weights, time), transform)
            times.append(float(s))
            values.append(lambda0_affine(lattice).value)
    return times, values


def _geometric_grid(point: PointSpec, weights: Weights, t, step, T_max: float,
                    prec: int) -> Tuple[List[float], List[Real]]:
    """
    λ̃₀ along the orbit g_{t^k}x, each step of length ln t cut into
    ⌈ln t / step⌉ pieces. The nodes t^k are exact whenever t and x are.
    """
    nominal = _base_time(t, weights, prec)
    log_t = math.log(to_float(nominal.value))
    N = max(1, math.ceil(T_max / log_t))
    refinement = max(1, math.ceil(log_t / to_float(step)))
    P = working_precision(point, nominal.is_exact, (N + 1) * math.log2(to_float(nominal.value)), prec)
    with mpmath.workprec(P):
        base = _base_time(t, weights, P)
        orbit = orbit_lattices(point, weights, base, N, P)
        flows = [flow_matrix(weights, FlowTime.for_weights(power(base.value, Fraction(j, refinement)), weights, P))
                 for j in range(1, refinement)]
        times, values = [], []
        for k, (_, lattice) in enumerate(orbit):
            times.append(k * log_t)
            values.append(lambda0_affine(lattice).value)
            if k == N:
                break
            for j, g in enumerate(flows, start=1):
                times.append((k + j / refinement) * log_t)
                values.append(lambda0_affine(reduce_lattice(lattice.act(g))[0]).value)
    return times, values


def div_surface(point: PointSpec, weights: Weights, eps_grid: Sequence[Real], horizons: Sequence[Real],
                step, prec: Optional[int] = None, base=None) -> List[DivFraction]:
    """
    Fractions of [0, T] on which λ̃₀(g_{e^s}x) ≤ ε, for every (ε, T) pair.
    The indicator is sampled on the grid s = i·step, or on the geometric grid
    of `base` refined to the step, and integrated with the trapezoidal rule.
    """
    prec = prec or settings.prec
    step = Fraction(step) if is_exact(step) else step
    if step <= 0:
        raise PremiseViolation('sampling step must be positive')
    T_max = max(to_float(T) for T in horizons)
    if T_max <= 0:
        raise PremiseViolation('horizon T must be positive')
    if base is None:
        times, values = _log_grid(point, weights, step, T_max, prec)
    else:
        times, values = _geometric_grid(point, weights, base, step, T_max, prec)

    surface = []
    for T in horizons:
        T_float = to_float(T)
        for eps in eps_grid:
            indicator = [1.0 if less_equal(v, eps) else 0.0 for v in values]
            total = 0.0
            for i in range(len(times) - 1):
                if times[i] >= T_float:
                    break
                right = min(times[i + 1], T_float)
                total += (indicator[i] + indicator[i + 1]) / 2 * (right - times[i])
            surface.append(DivFraction(epsilon=eps, horizon=T, step=step,
                                       fraction=min(1.0, total / T_float), samples=len(times)))
    return surface


def div_fraction(point: PointSpec, weights: Weights, eps, T, step, prec: Optional[int] = None,
                 base=None) -> DivFraction:
    return div_surface(point, weights, [eps], [T], step, prec, base)[0]
