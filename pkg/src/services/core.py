"""
Core Service
Quasi-norms, the weighted diagonal flow g_t, unipotent and translation elements
"""

import logging
from fractions import Fraction
from typing import List, Sequence

from src.models.lattice import AffineLattice
from src.models.weights import FlowTime, WeightExponents, Weights
from src.services.errors import DimensionMismatch, InvalidShape, InvalidWeights
from src.services.numeric import (
    Matrix, Real, is_exact, lift, lift_matrix, mat_mul, mat_vec, maximum, monomial_leq, power,
)

logger = logging.getLogger(__name__)


def _check_weight_vector(x: Sequence[Real], w: Sequence[Fraction]):
    if len(x) != len(w):
        raise DimensionMismatch('vector and weight lengths differ', x=len(x), w=len(w))
    if any(Fraction(v) <= 0 for v in w):
        raise InvalidWeights('weight entries must be positive')


def quasi_norm(x: Sequence[Real], w: Sequence[Fraction]):
    """max_i |x_i|^{1/w_i}; exact rational whenever every power is rational"""
    _check_weight_vector(x, w)
    if all(v == 0 for v in x):
        return Fraction(0)
    return maximum(power(abs(v), 1 / Fraction(wi)) for v, wi in zip(x, w))


def quasi_norm_leq(x: Sequence[Real], w: Sequence[Fraction], eps: Real) -> bool:
    """
    Exact test of quasi_norm(x, w) ≤ eps.
    |x_i|^{1/w_i} ≤ eps  ⇔  |x_i| ≤ eps^{w_i}, decided without taking roots.
    """
    _check_weight_vector(x, w)
    return all(monomial_leq([(abs(v), Fraction(1))], [(eps, Fraction(wi))]) for v, wi in zip(x, w))


def flow_matrix(weights: Weights, t: FlowTime) -> Matrix:
    """g_t = diag(t^{a_1},…,t^{a_m}, t^{-b_1},…,t^{-b_n})"""
    diagonal = lift([t.power(e) for e in weights.exponents])
    d = weights.d
    zero = diagonal[0] - diagonal[0]
    return [[diagonal[i] if i == j else zero for j in range(d)] for i in range(d)]


def unipotent(theta: Sequence[Sequence[Real]], weights: Weights) -> Matrix:
    """u(θ) = [[I_m, θ], [0, I_n]]"""
    m, n = weights.m, weights.n
    if len(theta) != m or any(len(row) != n for row in theta):
        raise InvalidShape(f'θ must be an {m}x{n} matrix')
    rows = []
    for i in range(m):
        rows.append([Fraction(int(i == j)) for j in range(m)] + list(theta[i]))
    for j in range(n):
        rows.append([Fraction(0)] * m + [Fraction(int(j == k)) for k in range(n)])
    return lift_matrix(rows)


def translation_vector(xi: Sequence[Real], weights: Weights) -> List[Real]:
    """v(ξ) = (ξ, 0)"""
    if len(xi) != weights.m:
        raise InvalidShape(f'ξ must have {weights.m} entries')
    return lift(list(xi) + [Fraction(0)] * weights.n)


def weight_exponents(weights: Weights) -> WeightExponents:
    """w_l = a_m+…+a_{m+1-l} for l ≤ m and b_n+…+b_{l-m+1} for l ≥ m"""
    m, n = weights.m, weights.n
    values = []
    for l in range(1, weights.d):
        if l <= m:
            values.append(sum(weights.a[m - l:], Fraction(0)))
        else:
            values.append(sum(weights.b[l - m:], Fraction(0)))
    return WeightExponents(w=tuple(values))


def monomial_exponent(weights: Weights, index: Sequence[int]) -> Fraction:
    """Exponent of t in g_t e_I: Σ a_i over I∩[1,m] minus Σ b_j over the rest"""
    exponents = weights.exponents
    return sum((exponents[i] for i in index), Fraction(0))


def act(g: Matrix, x: Sequence[Real]) -> List[Real]:
    return mat_vec(lift_matrix(g), lift(list(x)))


def compose(g: Matrix, h: Matrix) -> Matrix:
    return mat_mul(lift_matrix(g), lift_matrix(h))


def affine_point(theta: Sequence[Sequence[Real]], xi: Sequence[Real], weights: Weights) -> AffineLattice:
    """[u(θ), v(ξ)]Z^d = u(θ)Z^d + v(ξ)"""
    basis = unipotent(theta, weights)
    shift = translation_vector(xi, weights)
    if is_exact(basis[0][0]) != is_exact(shift[0]):
        combined = lift([x for row in basis for x in row] + shift)
        d = weights.d
        basis = [combined[i * d:(i + 1) * d] for i in range(d)]
        shift = combined[d * d:]
    return AffineLattice.build(basis, shift, check_unimodular=False)
