"""
Lattice Service
Certified shortest-vector search, exterior powers, covolumes, φ_l and the EMM check
"""

import math
import logging
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations, product
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import mpmath

from src.config import settings
from src.models.lattice import (
    AffineLattice, EmmReport, MultiVector, PhiResult, ShortVector, SublatticeRecord,
)
from src.services.errors import (
    DimensionMismatch, EnumerationBudgetExceeded, InvalidShape, OutOfRange,
    PrecisionExhausted, PremiseViolation,
)
from src.services.numeric import (
    Matrix, Real, ceil_int, clear_denominators, determinant, floor_int, format_number,
    integer_content, inverse, is_exact, left_kernel, lift, lift_matrix, mat_mul, mat_vec,
    nearest_int, operator_norm as sup_operator_norm, parse_rational, row_reduce,
    saturate_rows, sup_norm, to_float, to_mpf, transpose, unit_roundoff,
)

logger = logging.getLogger(__name__)

LLL_DELTA = Fraction(3, 4)


# ---------------------------------------------------------------------------
# Basis reduction
# ---------------------------------------------------------------------------

def _dot(x, y):
    return sum((p * q for p, q in zip(x, y)), 0)


def _gram_schmidt(vectors):
    ortho, mu, norms = [], [], []
    for i, v in enumerate(vectors):
        w = list(v)
        row = []
        for j in range(i):
            coefficient = _dot(v, ortho[j]) / norms[j]
            row.append(coefficient)
            w = [a - coefficient * b for a, b in zip(w, ortho[j])]
        ortho.append(w)
        mu.append(row)
        norms.append(_dot(w, w))
    return ortho, mu, norms


def lll_reduce(vectors: Sequence[Sequence[Real]], delta=LLL_DELTA) -> Tuple[List[List[Real]], List[List[int]]]:
    """
    LLL-reduce a list of independent vectors.
    Returns the reduced vectors and their integer coordinates in the input basis.
    """
    b = [list(v) for v in vectors]
    n = len(b)
    coords = [[int(i == j) for j in range(n)] for i in range(n)]
    if n < 2:
        return b, coords
    if not is_exact(b[0][0]):
        delta = to_mpf(delta)
    _, mu, norms = _gram_schmidt(b)
    k = 1
    iterations = 0
    limit = 10000 * n * n
    while k < n:
        iterations += 1
        if iterations > limit:
            raise PrecisionExhausted('basis reduction did not terminate at this precision')
        for j in range(k - 1, -1, -1):
            q = nearest_int(mu[k][j])
            if q:
                b[k] = [x - q * y for x, y in zip(b[k], b[j])]
                coords[k] = [x - q * y for x, y in zip(coords[k], coords[j])]
                for i in range(j):
                    mu[k][i] = mu[k][i] - q * mu[j][i]
                mu[k][j] = mu[k][j] - q
        if norms[k] >= (delta - mu[k][k - 1] ** 2) * norms[k - 1]:
            k += 1
        else:
            b[k], b[k - 1] = b[k - 1], b[k]
            coords[k], coords[k - 1] = coords[k - 1], coords[k]
            _, mu, norms = _gram_schmidt(b)
            k = max(k - 1, 1)
    return b, coords


def reduce_lattice(x: AffineLattice) -> Tuple[AffineLattice, List[List[int]]]:
    """
    Same point of X̃ with an LLL-reduced basis.
    The reduced basis is recomputed from the original one and the integer
    transformation, so no rounding accumulates in high-precision mode.
    """
    _, coords = lll_reduce(x.generators())
    return x.rebased(transpose(coords)), coords


# ---------------------------------------------------------------------------
# Certified enumeration
# ---------------------------------------------------------------------------

@dataclass
class _Box:
    lattice: AffineLattice
    transform: List[List[int]]
    ranges: List[range]
    tolerance: List[Real]

    @property
    def size(self) -> int:
        return math.prod(len(r) for r in self.ranges)


def _row_tolerance(x: AffineLattice, z_bound: Sequence[int]) -> List[Real]:
    """Per-row rounding radius of B·z + v for integer z with |z_k| ≤ z_bound_k"""
    if x.is_exact:
        return [Fraction(0)] * x.d
    u = unit_roundoff()
    spread = sum(z_bound) + 1
    return [e * spread + (x.d + 1) * u * (sum((abs(b) * z for b, z in zip(row, z_bound)), 0) + abs(s))
            for e, row, s in zip(x.row_errors(), x.basis, x.shift)]


def _witness_error(x: AffineLattice, z: Sequence[int]) -> Real:
    """Rounding radius of B·z + v evaluated at the working precision"""
    return max(_row_tolerance(x, [abs(v) for v in z]))


def _ranges(centre, inv, reach, slack: int) -> List[range]:
    ranges = []
    for c, row in zip(centre, inv):
        spread = sum((abs(v) * r for v, r in zip(row, reach)), 0)
        ranges.append(range(ceil_int(c - spread) - slack, floor_int(c + spread) + 1 + slack))
    return ranges


def _box(x: AffineLattice, transform, radius, budget: int) -> _Box:
    """
    Integer box holding every z with ‖Bz + v‖ ≤ radius. On high-precision
    lattices each row is widened by its rounding radius over the box, and the
    widened box must fit in the first one.
    """
    basis = x.basis_matrix()
    inv = inverse(basis)
    centre = [-c for c in mat_vec(inv, list(x.shift))]
    slack = 0 if x.is_exact else 1
    ranges = _ranges(centre, inv, [radius] * x.d, slack)
    tolerance = _row_tolerance(x, [max(abs(r.start), abs(r.stop - 1)) for r in ranges])
    if not x.is_exact:
        widened = _ranges(centre, inv, [radius + tau for tau in tolerance], 0)
        if any(w.start < r.start or w.stop > r.stop for w, r in zip(widened, ranges)):
            raise PrecisionExhausted('rounding radius is comparable to the search radius',
                                     radius=format_number(radius), prec=mpmath.mp.prec)
    box = _Box(lattice=x, transform=transform, ranges=ranges, tolerance=tolerance)
    if box.size > budget:
        raise EnumerationBudgetExceeded('integer box exceeds the enumeration budget',
                                        points=box.size, budget=budget)
    return box


def _scan(box: _Box, radius) -> Iterator[Tuple[List[Real], Tuple[int, ...], Tuple[int, ...]]]:
    x = box.lattice
    basis = x.basis_matrix()
    limits = [radius + tau for tau in box.tolerance]
    for z in product(*box.ranges):
        y = [sum((row[i] * z[i] for i in range(len(z)) if z[i]), 0) + s for row, s in zip(basis, x.shift)]
        if all(abs(v) <= limit for v, limit in zip(y, limits)):
            original = tuple(sum(box.transform[j][i] * z[j] for j in range(len(z))) for i in range(len(z)))
            yield y, original, z


def _key(vector):
    return (sup_norm(vector), tuple(vector))


def lambda0(x: AffineLattice, include_zero: bool = False, budget: Optional[int] = None) -> ShortVector:
    """
    Least sup-norm over the vectors of BZ^d + v (nonzero ones unless include_zero).
    On a homogeneous lattice this is λ₀; with include_zero on a shifted lattice it is λ̃₀.
    """
    budget = budget or settings.enum_budget
    d = x.d
    zero_vector = tuple(x.shift[0] - x.shift[0] for _ in range(d))
    if include_zero and x.homogeneous():
        return ShortVector(value=zero_vector[0], witness=zero_vector, coordinates=(0,) * d,
                           radius=zero_vector[0], points_scanned=0)

    reduced, transform = reduce_lattice(x)
    if x.homogeneous():
        radius = min(sup_norm(col) for col in reduced.generators())
    else:
        radius = sup_norm(reduced.shift)

    box = _box(reduced, transform, radius, budget)
    best = None
    for y, z, local in _scan(box, radius):
        if not include_zero and (all(c == 0 for c in local) if x.homogeneous() else all(v == 0 for v in y)):
            continue
        if best is None or _key(y) < _key(best[0]):
            best = (y, z, local)
    if best is None:
        raise PremiseViolation('enumeration found no vector within the starting radius')

    value = sup_norm(best[0])
    if not x.is_exact:
        floor = 4 * _witness_error(reduced, best[2])
        if value <= floor:
            raise PrecisionExhausted('shortest vector is not separated from the rounding radius',
                                     value=format_number(value), radius=format_number(floor),
                                     prec=mpmath.mp.prec)
    logger.debug('lambda0 d=%d scanned=%d value=%s', d, box.size, format_number(value))
    return ShortVector(value=value, witness=tuple(best[0]), coordinates=tuple(best[1]),
                       radius=radius, points_scanned=box.size)


def lambda0_affine(x: AffineLattice, budget: Optional[int] = None) -> ShortVector:
    """λ̃₀: the least norm over all vectors of the affine lattice, zero included"""
    return lambda0(x, include_zero=True, budget=budget)


def successive_candidates(x: AffineLattice, radius, budget: Optional[int] = None,
                          primitive_only: bool = False) -> List[Tuple[List[Real], Tuple[int, ...]]]:
    """
    All nonzero vectors of π(x) with sup-norm ≤ radius, with their integer coordinates.
    With primitive_only, keeps one primitive vector per ± pair.
    """
    budget = budget or settings.enum_budget
    homogeneous = x.homogeneous_part()
    reduced, transform = reduce_lattice(homogeneous)
    box = _box(reduced, transform, radius, budget)
    found = []
    for y, z, _ in _scan(box, radius):
        if all(c == 0 for c in z):
            continue
        if primitive_only:
            if integer_content(z) != 1:
                continue
            first = next(c for c in z if c != 0)
            if first < 0:
                continue
        found.append((y, z))
    found.sort(key=lambda item: (_key(item[0]), item[1]))
    return found


# ---------------------------------------------------------------------------
# Exterior algebra
# ---------------------------------------------------------------------------

def _minor(matrix: Matrix, rows: Sequence[int], cols: Sequence[int]):
    return determinant([[matrix[r][c] for c in cols] for r in rows])


def wedge(vectors: Sequence[Sequence[Real]]) -> MultiVector:
    """v_1 ∧ … ∧ v_l in the monomial basis"""
    if not vectors:
        raise DimensionMismatch('wedge of an empty family')
    d = len(vectors[0])
    if any(len(v) != d for v in vectors):
        raise DimensionMismatch('wedge factors have different lengths')
    l = len(vectors)
    if l > d:
        raise OutOfRange('grade exceeds dimension', grade=l, d=d)
    columns = transpose(lift_matrix(vectors))
    coefficients = {index: _minor(columns, index, range(l)) for index in MultiVector.index_sets(l, d)}
    return MultiVector.from_dict(l, d, coefficients)


def wedge_covolume(generators: Sequence[Sequence[Real]]) -> Real:
    """Sup-norm of v_1∧…∧v_l; zero exactly when the generators are dependent"""
    return wedge(generators).norm()


@dataclass(frozen=True)
class ExteriorMap:
    """Matrix of ∧^l g in the lexicographic monomial basis"""
    grade: int
    d: int
    indices: Tuple[Tuple[int, ...], ...]
    matrix: Tuple[Tuple[Real, ...], ...]

    def apply(self, vector: MultiVector) -> MultiVector:
        if vector.grade != self.grade or vector.d != self.d:
            raise DimensionMismatch('multivector grade or dimension does not match the map')
        source = vector.as_dict()
        values = lift([source.get(index, 0) for index in self.indices])
        image = mat_vec([list(row) for row in self.matrix], values)
        return MultiVector.from_dict(self.grade, self.d, dict(zip(self.indices, image)))

    def compose(self, other: 'ExteriorMap') -> 'ExteriorMap':
        product_matrix = mat_mul([list(r) for r in self.matrix], [list(r) for r in other.matrix])
        return ExteriorMap(self.grade, self.d, self.indices, tuple(tuple(r) for r in product_matrix))

    def norm(self) -> Real:
        return sup_operator_norm([list(r) for r in self.matrix])


def exterior_action(g: Matrix, grade: int) -> ExteriorMap:
    d = len(g)
    if not 1 <= grade <= d:
        raise OutOfRange('grade out of range', grade=grade, d=d)
    g = lift_matrix(g)
    indices = tuple(MultiVector.index_sets(grade, d))
    matrix = tuple(tuple(_minor(g, rows, cols) for cols in indices) for rows in indices)
    return ExteriorMap(grade=grade, d=d, indices=indices, matrix=matrix)


def operator_norm(g: Matrix, grade: int = 1) -> Real:
    """Sup-norm operator norm of ∧^grade g"""
    if grade == 1:
        return sup_operator_norm(lift_matrix(g))
    return exterior_action(g, grade).norm()


def _is_plus(index: Sequence[int], grade: int, m: int) -> bool:
    return sum(1 for i in index if i < m) == min(grade, m)


def pi_plus(vector: MultiVector, m: int) -> MultiVector:
    """Projection onto V_l^+: monomials e_I with #(I ∩ [1,m]) = min(l, m)"""
    kept = {k: v for k, v in vector.coefficients if _is_plus(k, vector.grade, m)}
    return MultiVector.from_dict(vector.grade, vector.d, kept)


def pi_minus(vector: MultiVector, m: int) -> MultiVector:
    kept = {k: v for k, v in vector.coefficients if not _is_plus(k, vector.grade, m)}
    return MultiVector.from_dict(vector.grade, vector.d, kept)


# ---------------------------------------------------------------------------
# Sublattices
# ---------------------------------------------------------------------------

def saturate(coordinates: Sequence[Sequence[int]]) -> List[List[int]]:
    """Integer basis of the primitive closure Z^d ∩ span_Q(coordinates)"""
    reduced, pivots = row_reduce([[Fraction(c) for c in row] for row in coordinates])
    if not pivots:
        return []
    rows = [clear_denominators(row) for row in reduced]
    return saturate_rows(rows)


def is_primitive(coordinates: Sequence[Sequence[int]]) -> bool:
    """Independent integer rows span a primitive subgroup iff their maximal minors are coprime"""
    rows = [list(map(int, row)) for row in coordinates]
    l, d = len(rows), len(rows[0])
    minors = [int(_minor(rows, range(l), cols)) for cols in combinations(range(d), l)]
    return integer_content(minors) == 1


def sublattice_record(x: AffineLattice, coordinates: Sequence[Sequence[int]]) -> SublatticeRecord:
    basis = x.basis_matrix()
    generators = [mat_vec(basis, list(c)) for c in coordinates]
    covolume = wedge_covolume(generators)
    return SublatticeRecord(
        generators=tuple(tuple(g) for g in generators),
        coordinates=tuple(tuple(int(v) for v in c) for c in coordinates),
        covolume=covolume,
        primitive=covolume != 0 and is_primitive(coordinates),
    )


def covolume(x: AffineLattice, coordinates: Sequence[Sequence[int]]) -> Real:
    """‖Λ_l‖ of the subgroup with the given integer coordinates; ‖{0}‖ = 1"""
    if not coordinates:
        return Fraction(1)
    basis = x.basis_matrix()
    return wedge_covolume([mat_vec(basis, list(c)) for c in coordinates])


def completeness_radius(d: int, grade: int, best_covolume, shortest) -> float:
    """
    Radius that certifies a φ_l search.

    A rank-l subgroup of sup covolume V has Euclidean covolume at most
    sqrt(C(d,l))·V; Minkowski's second theorem with λ_1 ≥ λ₀(Λ) bounds its
    l-th minimum, and a basis exists with ‖b_i‖ ≤ max(1, i/2)·λ_i.
    """
    ball = math.pi ** (grade / 2) / math.gamma(grade / 2 + 1)
    constant = max(1.0, grade / 2) * 2 ** grade * math.sqrt(math.comb(d, grade)) / ball
    return constant * to_float(best_covolume) / to_float(shortest) ** (grade - 1)


def dual_lattice(x: AffineLattice) -> AffineLattice:
    """
    Λ* = B^{-T}Z^d of the homogeneous part. On high-precision lattices every
    entry carries the bound 2‖B⁻¹‖²(d·e + d³u‖B‖) on the perturbed inverse.
    """
    basis = x.basis_matrix()
    inv = inverse(basis)
    rows = transpose(inv)
    if x.is_exact:
        return AffineLattice.build(rows, check_unimodular=False)
    d = x.d
    inv_norm = sup_operator_norm(inv)
    perturbation = d * max(x.row_errors()) + d ** 3 * unit_roundoff() * sup_operator_norm(basis)
    if 2 * inv_norm * perturbation >= 1:
        raise PrecisionExhausted('basis is too ill-conditioned to invert', prec=mpmath.mp.prec)
    bound = 2 * inv_norm ** 2 * perturbation
    return AffineLattice.build(rows, check_unimodular=False, error=[bound] * d)


def _phi_hyperplane(homogeneous: AffineLattice, budget: int) -> PhiResult:
    """
    φ_{d−1} from the dual lattice: Λ ∩ w^⊥ has sup covolume covol(Λ)·‖w‖
    for primitive w ∈ Λ*, so the least one sits on a shortest dual vector.
    """
    reduced, transform = reduce_lattice(homogeneous)
    shortest = lambda0(dual_lattice(reduced), budget=budget)
    kernel = left_kernel([[Fraction(c)] for c in shortest.coordinates])
    local = saturate([clear_denominators(row) for row in kernel])
    unwind = transpose(transform)
    coords = [mat_vec(unwind, row) for row in local]
    record = sublattice_record(homogeneous, coords)
    logger.debug('phi_%d from the dual lattice: covolume %s', homogeneous.d - 1, format_number(record.covolume))
    return PhiResult(grade=homogeneous.d - 1, value=1 / record.covolume, certified=True, record=record,
                     radius=shortest.value)


def phi_l(x: AffineLattice, grade: int, budget: Optional[int] = None) -> PhiResult:
    """φ_l(π x) = 1 / least covolume of a primitive rank-l subgroup"""
    budget = budget or settings.enum_budget
    d = x.d
    if not 1 <= grade <= d:
        raise OutOfRange('grade out of range', grade=grade, d=d)
    homogeneous = x.homogeneous_part()
    if grade == d:
        coords = [[int(i == j) for j in range(d)] for i in range(d)]
        record = sublattice_record(homogeneous, coords)
        return PhiResult(grade=grade, value=1 / record.covolume, certified=True, record=record, radius=0)
    if grade == d - 1 and d > 2:
        return _phi_hyperplane(homogeneous, budget)
    shortest = lambda0(homogeneous, budget=budget)
    if grade == 1:
        record = sublattice_record(homogeneous, [shortest.coordinates])
        return PhiResult(grade=1, value=1 / shortest.value, certified=True, record=record,
                         radius=shortest.value)

    reduced, _ = reduce_lattice(homogeneous)
    radius = Fraction(max(sup_norm(c) for c in reduced.generators())) if x.is_exact \
        else max(sup_norm(c) for c in reduced.generators())
    best = None
    while True:
        try:
            candidates = successive_candidates(homogeneous, radius, budget=budget, primitive_only=True)
        except EnumerationBudgetExceeded:
            logger.info('phi_%d search stopped by the enumeration budget at radius %s', grade,
                        format_number(radius))
            break
        if math.comb(len(candidates), grade) > settings.subset_budget:
            logger.info('phi_%d subset scan exceeds the budget (%d candidates)', grade, len(candidates))
            break
        for subset in combinations(candidates, grade):
            value = wedge_covolume([v for v, _ in subset])
            if value == 0:
                continue
            key = (value, tuple(sorted(z for _, z in subset)))
            if best is None or key < best[0]:
                best = (key, [z for _, z in subset])
        if best is not None:
            needed = completeness_radius(d, grade, best[0][0], shortest.value)
            if to_float(radius) >= needed:
                record = sublattice_record(homogeneous, best[1])
                return PhiResult(grade=grade, value=1 / record.covolume, certified=True,
                                 record=record, radius=radius)
            target = Fraction(needed) * Fraction(1000001, 1000000) if x.is_exact else to_mpf(needed) * 1.000001
            radius = min(2 * radius, target)
        else:
            radius = 2 * radius

    if best is None:
        raise EnumerationBudgetExceeded('no rank-l subgroup found within the budget', grade=grade)
    record = sublattice_record(homogeneous, best[1])
    return PhiResult(grade=grade, value=1 / record.covolume, certified=False, record=record, radius=radius)


def _span_basis(rows: Sequence[Sequence[Fraction]]) -> List[List[int]]:
    reduced, pivots = row_reduce([[Fraction(v) for v in row] for row in rows])
    return [clear_denominators(row) for row in reduced] if pivots else []


def emm_check(x: AffineLattice, first: SublatticeRecord, second: SublatticeRecord) -> EmmReport:
    """
    ‖Λ1∩Λ2‖·‖Λ1+Λ2‖ / (‖Λ1‖·‖Λ2‖) for primitive Λ1, Λ2.
    The sup-norm constant is sqrt(C(d,l1)·C(d,l2)), from the Euclidean
    inequality with constant 1 and the norm comparison on each exterior power.
    """
    if not x.homogeneous():
        raise PremiseViolation('EMM check needs a homogeneous lattice')
    for record in (first, second):
        if not is_primitive(record.coordinates):
            raise PremiseViolation('sublattice is not primitive', coordinates=record.coordinates)
    a = [[Fraction(v) for v in row] for row in first.coordinates]
    b = [[Fraction(v) for v in row] for row in second.coordinates]

    stacked = a + [[-v for v in row] for row in b]
    kernel = left_kernel(stacked)
    meet_vectors = []
    for y in kernel:
        combination = [sum((y[i] * a[i][k] for i in range(len(a))), Fraction(0)) for k in range(x.d)]
        meet_vectors.append(combination)
    meet_basis = _span_basis(meet_vectors) if meet_vectors else []
    meet = saturate_rows(meet_basis) if meet_basis else []

    join_basis = _span_basis(a + b)
    join = saturate_rows(join_basis)

    meet_covolume = covolume(x, meet)
    join_covolume = covolume(x, join)
    ratio = (meet_covolume * join_covolume) / (first.covolume * second.covolume)
    constant_squared = math.comb(x.d, first.rank) * math.comb(x.d, second.rank)
    within = ratio * ratio <= constant_squared
    return EmmReport(ratio=ratio, constant_squared=constant_squared, intersection_rank=len(meet),
                     sum_rank=len(join), within_bound=within)


# ---------------------------------------------------------------------------
# Lattice files
# ---------------------------------------------------------------------------

def read_lattice(text: str) -> AffineLattice:
    """Rows of rationals (row-major basis matrix), optionally a final 'shift:' row"""
    rows, shift = [], None
    for line in text.splitlines():
        line = line.split('#', 1)[0].strip()
        if not line:
            continue
        if line.lower().startswith('shift:'):
            shift = [parse_rational(v) for v in line[6:].split()]
            continue
        rows.append([parse_rational(v) for v in line.split()])
    if not rows:
        raise InvalidShape('lattice file has no rows')
    return AffineLattice.build(rows, shift)


def format_lattice(x: AffineLattice) -> str:
    lines = [' '.join(format_number(v) for v in row) for row in x.basis]
    if not x.homogeneous():
        lines.append('shift: ' + ' '.join(format_number(v) for v in x.shift))
    return '\n'.join(lines) + '\n'
