"""
Covering Service
Depth indices, cover refinement along the orbit of a fixed matrix, cover-count
bounds and box-counting estimates
"""

import math
import logging
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from itertools import combinations, product
from typing import Dict, List, Optional, Sequence, Tuple

import mpmath
import numpy as np
import sympy

from src.config import settings
from src.models.approximation import PointSpec
from src.models.cover import (
    BoxCountEstimate, CoverBound, CoverNode, CoverParams, CoverRun, CoverState, CoverStep, DepthIndices,
)
from src.models.fractal import Box, SimilarityIFS
from src.models.lattice import AffineLattice
from src.models.weights import FlowTime
from src.services.core import act, flow_matrix, translation_vector
from src.services.diophantine import orbit_lattices, working_precision
from src.services.errors import EnumerationBudgetExceeded, OutOfRange, PremiseViolation
from src.services.fractal import ball_intersection_constant, coding_map, cylinder
from src.services.lattice import lambda0, lambda0_affine
from src.services.numeric import (
    Real, evaluate, format_number, less_equal, monomial_leq, mul, parse_rational, to_float, to_mpf,
    to_sympy,
)

logger = logging.getLogger(__name__)

# letters appended to a cell's word before its sample points are coded
SAMPLE_EXTENSION = 8


# ---------------------------------------------------------------------------
# Parameters and depth indices
# ---------------------------------------------------------------------------

def validate_params(params: CoverParams) -> Tuple[Fraction, ...]:
    """Check the run parameters and return the group weights w_i"""
    w = params.group_weights
    t, eps, delta = params.t, params.epsilon, params.delta
    if not less_equal(1, t) or t == 1:
        raise PremiseViolation('base t must exceed 1', t=format_number(t))
    if not less_equal(0, eps) or eps == 0 or not less_equal(0, delta) or delta == 0:
        raise PremiseViolation('ε and δ must be positive')
    if not 0 < params.q_prime <= 1:
        raise PremiseViolation("q′ must lie in (0, 1]", q_prime=params.q_prime)
    if params.N < 1 or params.M < 1:
        raise PremiseViolation('N and M must be positive', N=params.N, M=params.M)
    if params.samples < 1:
        raise PremiseViolation('at least one sample per cell is needed')
    for i, (ifs, wi) in enumerate(zip(params.fractal.factors, w), start=1):
        # 2δ < ε c_i t^{−w_i}
        if monomial_leq([(mul(eps, ifs.c), Fraction(1)), (t, -wi)], [(2 * delta, Fraction(1))]):
            raise PremiseViolation('δ must satisfy 2δ < ε·c_i·t^(−w_i)', factor=i,
                                   delta=format_number(delta), epsilon=format_number(eps))
    return w


def _largest_depth(ifs: SimilarityIFS, ball: List[Tuple[Real, Fraction]]) -> Tuple[int, bool]:
    """Largest P ≥ 0 with ball ≤ α c^P, or (0, True) when the ball already exceeds α"""
    alpha = ifs.alpha
    if not monomial_leq(ball, [(alpha, Fraction(1))]):
        return 0, True
    log_ball = sum(to_float(e) * math.log(to_float(b)) for b, e in ball)
    guess = max(0, int((log_ball - math.log(to_float(alpha))) / math.log(to_float(ifs.c))))
    P = guess
    while P > 0 and not monomial_leq(ball, [(alpha, Fraction(1)), (ifs.c, Fraction(P))]):
        P -= 1
    while monomial_leq(ball, [(alpha, Fraction(1)), (ifs.c, Fraction(P + 1))]):
        P += 1
    return P, False


def depth_indices(params: CoverParams, j: int, pivot: Optional[int] = None) -> DepthIndices:
    """
    P_i(j): α_i c_i^{P+1} < 2δ t^{−j w_i} ≤ α_i c_i^P.
    K_i(j): α_i c_i^K < 2δ t^{−j max(w_k, w_i)} ≤ α_i c_i^{K−1} for the pivot group k
    (without a pivot the exponent is w_i itself).
    Zero-dimensional factors are pinned to 1.
    """
    if j < 0:
        raise OutOfRange('step index must be nonnegative', j=j)
    w = params.group_weights
    if pivot is not None and not 1 <= pivot <= len(w):
        raise OutOfRange('pivot group out of range', pivot=pivot, groups=len(w))
    two_delta = 2 * params.delta
    P, K, clamped = [], [], []
    for ifs, wi in zip(params.fractal.factors, w):
        if ifs.p == 1:
            P.append(1)
            K.append(1)
            clamped.append(False)
            continue
        depth, flag = _largest_depth(ifs, [(two_delta, Fraction(1)), (params.t, -j * wi)])
        top = max(wi, w[pivot - 1]) if pivot is not None else wi
        fine, _ = _largest_depth(ifs, [(two_delta, Fraction(1)), (params.t, -j * top)])
        if flag:
            logger.debug('P clamped to 0 at step %d (ball wider than the attractor)', j)
        P.append(depth)
        K.append(fine + 1)
        clamped.append(flag)
    return DepthIndices(j=j, P=tuple(P), K=tuple(K), clamped=tuple(clamped))


# ---------------------------------------------------------------------------
# Cells and the aliveness test
# ---------------------------------------------------------------------------

def _node(params: CoverParams, words: Sequence[Tuple[int, ...]], alive: bool = True) -> CoverNode:
    pieces = [cylinder(ifs, word) for ifs, word in zip(params.fractal.factors, words)]
    box = Box(lower=tuple(v for c in pieces for v in c.box.lower),
              upper=tuple(v for c in pieces for v in c.box.upper))
    measure = math.prod((c.measure for c in pieces), start=Fraction(1))
    return CoverNode(words=tuple(tuple(w) for w in words), box=box, alive=alive, measure=measure)


def _extensions(ifs: SimilarityIFS, count: int, rng: np.random.Generator) -> List[List[int]]:
    top = ifs.p - 1
    patterns = [[0] * SAMPLE_EXTENSION, [top] * SAMPLE_EXTENSION,
                [0 if i % 2 == 0 else top for i in range(SAMPLE_EXTENSION)]]
    while len(patterns) < count:
        patterns.append([int(e) for e in rng.integers(0, ifs.p, size=SAMPLE_EXTENSION)])
    return patterns[:count]


def cell_samples(params: CoverParams, words: Sequence[Tuple[int, ...]], j: int, index: int) -> List[Tuple[Fraction, ...]]:
    """Sample shifts ξ inside a cell: its words extended by fixed patterns, then Philox-drawn letters"""
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([params.seed, j, index])))
    per_factor = []
    for ifs, word in zip(params.fractal.factors, words):
        per_factor.append([coding_map(ifs, list(word) + ext).point
                           for ext in _extensions(ifs, params.samples, rng)])
    return [tuple(v for point in combo for v in point) for combo in zip(*per_factor)]


def delta_test(params: CoverParams, lattice: AffineLattice, g, xi: Sequence[Fraction]) -> bool:
    """λ̃₀(g_t^j x + g_t^j v(ξ)) ≤ δ, with `lattice` the reduced g_t^j x"""
    shift = act(g, translation_vector(list(xi), params.weights))
    moved = lattice.with_shift(shift)
    return less_equal(lambda0_affine(moved).value, params.delta)


def _child_alive(task) -> Optional[Tuple[Fraction, ...]]:
    """First sampled ξ in the cell that passes the δ-test, or None"""
    params, lattice, g, words, j, index, prec = task
    with mpmath.workprec(prec):
        for xi in cell_samples(params, words, j, index):
            if delta_test(params, lattice, g, xi):
                return xi
    return None


def separation_check(params: CoverParams, j: int, shifts: Sequence[Sequence[Fraction]]) -> bool:
    """
    Two shifts in one depth-(j−1) cell that both pass the δ-test at a step
    outside I(t, ε) differ by at most 2δ t^{−j w_i} on every factor block.
    """
    w = params.group_weights
    blocks, offset = [], 0
    for ifs in params.fractal.factors:
        blocks.append(range(offset, offset + ifs.dim))
        offset += ifs.dim
    for first, second in combinations(shifts, 2):
        for block, wi in zip(blocks, w):
            gap = max(abs(Fraction(first[i]) - Fraction(second[i])) for i in block)
            if not monomial_leq([(gap, Fraction(1))], [(2 * params.delta, Fraction(1)), (params.t, -j * wi)]):
                logger.error('Separation of passing shifts fails at step %d', j)
                return False
    return True


# ---------------------------------------------------------------------------
# Refinement
# ---------------------------------------------------------------------------

def initial_state(params: CoverParams) -> CoverState:
    """All cylinders at depths P_i(0), every one alive"""
    depths = depth_indices(params, 0).P
    total = math.prod(ifs.p ** P for ifs, P in zip(params.fractal.factors, depths))
    if total > settings.enum_budget:
        raise EnumerationBudgetExceeded('initial cover is too large', cells=total, budget=settings.enum_budget)
    families = [list(product(range(ifs.p), repeat=P)) for ifs, P in zip(params.fractal.factors, depths)]
    nodes = tuple(_node(params, words) for words in product(*families))
    return CoverState(j=0, depths=depths, nodes=nodes)


def refine_cover(params: CoverParams, state: CoverState, orbit: Sequence[Tuple[FlowTime, AffineLattice]],
                 j: int, in_I: bool, in_Q: bool, L: int) -> Tuple[CoverState, CoverStep]:
    """
    Pass from depth P(j−1) to P(j). At steps in Q∖I(t, ε) a child stays alive
    only if one of its sampled shifts passes the δ-test; at every other step
    all children of alive cells are kept.
    """
    if j >= len(orbit):
        raise OutOfRange('trajectory too short for this step', j=j, available=len(orbit) - 1)
    if state.j != j - 1:
        raise PremiseViolation('cover state is not at the previous step', state=state.j, j=j)
    depths = depth_indices(params, j).P
    growth = [new - old for new, old in zip(depths, state.depths)]
    if any(g < 0 for g in growth):
        raise PremiseViolation('depth indices decreased', step=j)
    refined = in_Q and not in_I
    parents = state.alive

    children: List[Tuple[int, Tuple[Tuple[int, ...], ...]]] = []
    for position, parent in enumerate(parents):
        tails = [list(product(range(ifs.p), repeat=g)) for ifs, g in zip(params.fractal.factors, growth)]
        for tail in product(*tails):
            words = tuple(w + t for w, t in zip(parent.words, tail))
            children.append((position, words))
    budget = settings.enum_budget
    if len(children) > budget:
        raise EnumerationBudgetExceeded('cover refinement exceeds the enumeration budget',
                                        cells=len(children), budget=budget)

    witnesses: List[Optional[Tuple[Fraction, ...]]]
    if refined:
        tj, lattice = orbit[j]
        g = flow_matrix(params.weights, tj)
        prec = mpmath.mp.prec
        tasks = [(params, lattice, g, words, j, index, prec) for index, (_, words) in enumerate(children)]
        if settings.threads > 1 and len(tasks) > 1:
            with ProcessPoolExecutor(max_workers=settings.threads) as pool:
                witnesses = list(pool.map(_child_alive, tasks, chunksize=16))
        else:
            witnesses = [_child_alive(task) for task in tasks]
    else:
        witnesses = [None] * len(children)

    nodes, per_parent = [], [0] * len(parents)
    passing: Dict[int, List[Tuple[Fraction, ...]]] = {}
    for (position, words), witness in zip(children, witnesses):
        alive = witness is not None if refined else True
        if alive:
            per_parent[position] += 1
        if witness is not None:
            passing.setdefault(position, []).append(witness)
        nodes.append(_node(params, words, alive=alive))
    new_state = CoverState(j=j, depths=depths, nodes=tuple(nodes))

    before, after = state.measure_sum, new_state.measure_sum
    shrink = math.prod((Fraction(1, ifs.p ** g) for ifs, g in zip(params.fractal.factors, growth)),
                       start=Fraction(1))
    if refined:
        factor = L * shrink
        holds = after <= factor * before
        separation = all(separation_check(params, j, shifts) for shifts in passing.values())
    else:
        factor = Fraction(1)
        holds = after == before
        separation = None
    if not holds:
        logger.error('Measure-sum recursion fails at step %d: %s > %s·%s', j, after, factor, before)
    step = CoverStep(
        j=j, in_I=in_I, in_Q=in_Q, refined=refined, depths=depths,
        alive_before=len(parents), alive_after=len(new_state.alive),
        pruned=len(nodes) - len(new_state.alive), max_children=max(per_parent, default=0),
        measure_before=before, measure_after=after, factor=factor,
        recursion_ok=holds, separation_ok=separation,
    )
    logger.debug('cover step %d: refined=%s alive %d→%d', j, refined, step.alive_before, step.alive_after)
    return new_state, step


# ---------------------------------------------------------------------------
# Driver
# ---------------------------------------------------------------------------

def _dimensions(params: CoverParams) -> List[mpmath.mpf]:
    return [mpmath.log(ifs.p) / mpmath.log(1 / to_mpf(ifs.c)) if ifs.p > 1 else mpmath.mpf(0)
            for ifs in params.fractal.factors]


def intersection_constant(params: CoverParams) -> Tuple[int, list]:
    """L = Π L_i over positive-dimensional factors"""
    constants = [ball_intersection_constant(ifs) for ifs in params.fractal.factors if ifs.p > 1]
    return math.prod((c.intersection for c in constants), start=1), constants


def aggregate_bounds(params: CoverParams, L: int, Q_count: int, I_count: int) -> Tuple[Real, Real, Real]:
    """
    (exponent e, L^N (Πp)^N (Π t^{−s_i w_i})^e, and 2^N times that).
    e = q′N − #I when #Q > q′N, else #Q − #I.
    """
    N, w = params.N, params.group_weights
    q_N = params.q_prime * N
    exponent = q_N - I_count if Q_count > q_N else Fraction(Q_count - I_count)
    s = _dimensions(params)
    t = to_mpf(params.t)
    p_total = math.prod(ifs.p for ifs in params.fractal.factors)
    decay = mpmath.fprod(mpmath.power(t, -si * to_mpf(wi)) for si, wi in zip(s, w))
    base = mpmath.power(L, N) * mpmath.power(p_total, N) * mpmath.power(decay, to_mpf(exponent))
    return exponent, base, mpmath.power(2, N) * base


def run_cover(params: CoverParams, theta, L: Optional[int] = None, pivot: Optional[int] = None,
              gamma=None, prec: Optional[int] = None) -> CoverRun:
    """
    Build the orbit of u(θ)Z^d, derive I(t, ε) and Q, refine the cover for
    j = 1..N and check the measure-sum recursion and the aggregate bound.
    """
    prec = prec or settings.prec
    validate_params(params)
    weights = params.weights
    point = PointSpec.from_values(weights, theta)
    nominal = FlowTime.for_weights(evaluate(params.t, prec), weights, prec)
    P = working_precision(point, nominal.is_exact, params.N * math.log2(to_float(params.t)), prec)
    logger.info('Cover run: N=%d δ=%s ε=%s q′=%s', params.N, format_number(params.delta),
                format_number(params.epsilon), params.q_prime)

    with mpmath.workprec(P):
        base = FlowTime.for_weights(evaluate(params.t, P), weights, P)
        orbit = orbit_lattices(point, weights, base, params.N, P)
        heights = [lambda0(lattice.homogeneous_part()).value for _, lattice in orbit]
        I = tuple(k for k in range(1, params.N + 1) if less_equal(heights[k], 2 * params.epsilon))

        constants = []
        if L is None:
            L, constants = intersection_constant(params)
        state = initial_state(params)
        reference = params.reference or cell_samples(params, state.nodes[0].words, 0, 0)[0]
        reference = tuple(parse_rational(v) for v in reference)
        Q = tuple(k for k in range(1, params.N + 1)
                  if delta_test(params, orbit[k][1], flow_matrix(weights, orbit[k][0]), reference))

        run = CoverRun(params=params, constants=tuple(constants), L=L, I=I, Q=Q, reference=reference)
        run.rows.extend(node.to_row(0, state.measure_sum) for node in state.nodes)
        for j in range(1, params.N + 1):
            state, step = refine_cover(params, state, orbit, j, j in I, j in Q, L)
            run.steps.append(step)
            total = state.measure_sum
            run.rows.extend(node.to_row(j, total) for node in state.nodes)
        run.final = state
        run.exponent, run.measure_bound, run.aggregate_bound = aggregate_bounds(params, L, len(Q), len(I))

    if gamma is not None:
        run.bound = cover_count_bound(params, pivot or 1, Fraction(len(I), params.N), gamma, L=L)
    logger.info('Cover run finished: #I=%d #Q=%d final measure=%s recursion=%s aggregate=%s',
                len(I), len(Q), run.final_measure, run.recursion_holds, run.aggregate_holds)
    return run


# ---------------------------------------------------------------------------
# Covering numbers
# ---------------------------------------------------------------------------

def _scale_index(params: CoverParams, wk: Fraction, gamma: Fraction) -> int:
    """Smallest N with 2δ t^{−N w_k} ≤ γ"""
    two_delta = 2 * params.delta
    ratio = math.log(to_float(two_delta) / to_float(gamma)) / (to_float(wk) * math.log(to_float(params.t)))
    N = max(0, math.ceil(ratio))
    while N > 0 and monomial_leq([(two_delta, Fraction(1)), (params.t, -(N - 1) * wk)], [(gamma, Fraction(1))]):
        N -= 1
    while not monomial_leq([(two_delta, Fraction(1)), (params.t, -N * wk)], [(gamma, Fraction(1))]):
        N += 1
    return N


def cover_count_bound(params: CoverParams, pivot: int, i_fraction, gamma, L: Optional[int] = None,
                      prec: Optional[int] = None) -> CoverBound:
    """
    Upper bound on log C_γ(Z(M)) / −log γ:

        (log D + N_γ log B + Σ_i s_i[N_γ max(w_i, w_k) − w_i q′N_γ + w_i #I] log t)
        / (−log 2δ + (N_γ − 1) w_k log t)

    with D = Π (α_i / 2δc_i)^{s_i} over positive-dimensional factors and
    B = 2LΠp_i. `limit` is the t → ∞ form (1/w_k) Σ s_i(max(w_i, w_k) − w_i q′ + w_i #I/N);
    `horizon_limit` keeps log B at the given t.
    """
    prec = prec or settings.prec
    w = validate_params(params)
    if not 1 <= pivot <= len(w):
        raise OutOfRange('pivot group out of range', pivot=pivot, groups=len(w))
    gamma = parse_rational(gamma)
    i_fraction = parse_rational(i_fraction)
    if gamma <= 0:
        raise OutOfRange('γ must be positive')
    if not 0 <= i_fraction <= 1:
        raise OutOfRange('#I/N must lie in [0, 1]', fraction=str(i_fraction))
    wk = w[pivot - 1]
    N = _scale_index(params, wk, gamma)
    if N <= params.M:
        raise OutOfRange('γ too large: N_γ must exceed M', N_gamma=N, M=params.M, gamma=str(gamma))
    if L is None:
        L, _ = intersection_constant(params)

    indices = depth_indices(params, N, pivot=pivot)
    factors = params.fractal.factors
    within = all(monomial_leq([(ifs.alpha, Fraction(1)), (ifs.c, Fraction(K))], [(gamma, Fraction(1))])
                 for ifs, K in zip(factors, indices.K) if ifs.p > 1)
    I_count = i_fraction * N
    q = params.q_prime

    with mpmath.workprec(prec):
        s = _dimensions(params)
        t = to_mpf(params.t)
        two_delta = 2 * to_mpf(params.delta)
        D = mpmath.fprod(mpmath.power(to_mpf(ifs.alpha) / (two_delta * to_mpf(ifs.c)), si)
                         for ifs, si in zip(factors, s) if ifs.p > 1)
        B = 2 * L * math.prod(ifs.p for ifs in factors)
        spread = mpmath.fsum(si * to_mpf(max(wi, wk) - wi * q + wi * i_fraction) for si, wi in zip(s, w))
        growth = mpmath.fsum(si * to_mpf(N * max(wi, wk) - wi * q * N + wi * I_count) for si, wi in zip(s, w))
        numerator = mpmath.log(D) + N * mpmath.log(B) + growth * mpmath.log(t)
        denominator = -mpmath.log(two_delta) + (N - 1) * to_mpf(wk) * mpmath.log(t)
        value = numerator / denominator
        horizon = (mpmath.log(B) + spread * mpmath.log(t)) / (to_mpf(wk) * mpmath.log(t))

    limit = sum((ifs.dimension * to_sympy(max(wi, wk) - wi * q + wi * i_fraction)
                 for ifs, wi in zip(factors, w) if ifs.p > 1), sympy.Integer(0)) / to_sympy(wk)
    limit = sympy.simplify(limit)
    logger.info('Cover-count bound at γ=%s: N_γ=%d value=%.6g', gamma, N, float(value))
    return CoverBound(pivot=pivot, gamma=gamma, N_gamma=N, M=params.M, I_count=I_count, D=D, B=B, L=L,
                      value=float(value), limit=limit, horizon_limit=float(horizon),
                      K=indices.K, cells_within_gamma=within)


def _as_points(data) -> np.ndarray:
    if isinstance(data, np.ndarray):
        return data.reshape(len(data), -1) if data.ndim == 1 else data
    items = list(data)
    if items and hasattr(items[0], 'box'):
        return np.array([[(float(lo) + float(hi)) / 2 for lo, hi in zip(item.box.lower, item.box.upper)]
                         for item in items])
    return np.array([[to_float(v) for v in point] for point in items], dtype=float).reshape(len(items), -1)


def box_counting_estimate(data, gammas: Optional[Sequence] = None) -> BoxCountEstimate:
    """
    Count grid boxes of side γ that hold a point, then regress log count on −log γ.
    Accepts an array of points, a list of coordinate tuples, or cells with a `box`
    (cylinders and cover nodes, represented by their centres).
    """
    points = _as_points(data)
    if points.size == 0:
        raise PremiseViolation('box counting needs a nonempty point set')
    gammas = [to_float(g) for g in gammas] if gammas is not None else [2.0 ** -k for k in range(1, 11)]
    if len(gammas) < 2 or any(g <= 0 for g in gammas):
        raise OutOfRange('box counting needs at least two positive scales')
    counts = []
    for g in gammas:
        cells = np.floor(points / g).astype(np.int64)
        counts.append(int(len(np.unique(cells, axis=0))))
    slope, intercept = np.polyfit(-np.log(gammas), np.log(counts), 1)
    return BoxCountEstimate(gammas=tuple(gammas), counts=tuple(counts), slope=float(slope),
                            intercept=float(intercept))
