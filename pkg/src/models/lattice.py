from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import Dict, List, Optional, Sequence, Tuple

import mpmath

from src.services.errors import DimensionMismatch, InvalidShape
from src.services.numeric import (
    Matrix, Real, determinant, floor_int, format_number, inverse, is_exact, lift, lift_matrix,
    mat_mul, mat_vec, same_kind, sup_norm, to_mpf, transpose, unit_roundoff, vec_sub,
)


def _as_tuple_matrix(rows) -> Tuple[Tuple[Real, ...], ...]:
    return tuple(tuple(row) for row in rows)


@dataclass(frozen=True)
class AffineLattice:
    """
    The point B·Z^d + v of the space of affine unimodular lattices.
    Columns of `basis` are the lattice generators; the shift is stored in its
    canonical form with B⁻¹v ∈ [0,1)^d.

    High-precision lattices carry `error`: for each row, a bound on the
    absolute rounding error of every basis and shift entry in that row.
    Exact lattices have no error entries.
    """
    basis: Tuple[Tuple[Real, ...], ...]
    shift: Tuple[Real, ...]
    error: Tuple[Real, ...] = ()

    @classmethod
    def build(cls, basis: Sequence[Sequence[Real]], shift: Optional[Sequence[Real]] = None,
              check_unimodular: bool = True, error: Optional[Sequence[Real]] = None) -> 'AffineLattice':
        d = len(basis)
        if any(len(row) != d for row in basis):
            raise InvalidShape('lattice basis must be square', rows=d)
        shift = list(shift) if shift is not None else [0] * d
        if len(shift) != d:
            raise DimensionMismatch('shift length differs from lattice dimension', d=d, shift=len(shift))
        values = lift([x for row in basis for x in row] + list(shift))
        rows = [values[i * d:(i + 1) * d] for i in range(d)]
        vector = values[d * d:]
        if check_unimodular:
            det = abs(determinant(rows))
            if is_exact(det):
                if det != 1:
                    raise InvalidShape('lattice basis is not unimodular', det=det)
            elif abs(det - 1) > mpmath.ldexp(1, -mpmath.mp.prec // 2):
                raise InvalidShape('lattice basis is not unimodular', det=format_number(det))
        canonical, moved = _canonical_shift(rows, vector)
        if is_exact(values[0]):
            return cls(basis=_as_tuple_matrix(rows), shift=tuple(canonical))

        u = unit_roundoff()
        inherited = list(error) if error else [0] * d
        row_error = [e + (d + 1) * u * max(max(abs(v) for v in row), abs(s))
                     for e, row, s in zip(inherited, rows, vector)]
        if any(moved):
            steps = sum(abs(k) for k in moved)
            row_error = [e * (1 + steps) + (d + 1) * u * sum(abs(b * k) for b, k in zip(row, moved))
                         for e, row in zip(row_error, rows)]
        return cls(basis=_as_tuple_matrix(rows), shift=tuple(canonical), error=tuple(row_error))

    @classmethod
    def standard(cls, d: int) -> 'AffineLattice':
        return cls.build([[Fraction(int(i == j)) for j in range(d)] for i in range(d)])

    @property
    def d(self) -> int:
        return len(self.shift)

    @property
    def is_exact(self) -> bool:
        return all(is_exact(x) for x in self.shift) and all(is_exact(x) for row in self.basis for x in row)

    def basis_matrix(self) -> Matrix:
        return [list(row) for row in self.basis]

    def generators(self) -> List[List[Real]]:
        """Basis vectors, i.e. the columns of B"""
        return transpose(self.basis_matrix())

    def row_errors(self) -> List[Real]:
        return list(self.error) if self.error else [mpmath.mpf(0)] * self.d

    def homogeneous(self) -> bool:
        return all(x == 0 for x in self.shift)

    def homogeneous_part(self) -> 'AffineLattice':
        """Projection π dropping the shift"""
        zero = [Fraction(0) if is_exact(x) else to_mpf(0) for x in self.shift]
        return AffineLattice(basis=self.basis, shift=tuple(zero), error=self.error)

    def vector(self, coords: Sequence[int]) -> List[Real]:
        """The point B·z + v for integer coordinates z"""
        image = mat_vec(self.basis_matrix(), list(coords))
        return [x + y for x, y in zip(image, self.shift)]

    def act(self, g: Sequence[Sequence[Real]]) -> 'AffineLattice':
        """g·(BZ^d + v) = (gB)Z^d + gv"""
        g = lift_matrix(g)
        if len(g) != self.d:
            raise DimensionMismatch('matrix size differs from lattice dimension', d=self.d, g=len(g))
        g, basis, (shift,) = same_kind(g, self.basis_matrix(), [list(self.shift)])
        error = None
        if not is_exact(basis[0][0]):
            u = unit_roundoff()
            scale = [e + (self.d + 1) * u * max(max(abs(v) for v in row), abs(s))
                     for e, row, s in zip(self.row_errors(), basis, shift)]
            error = [sum((abs(gij) * s for gij, s in zip(row, scale)), 0) for row in g]
        return AffineLattice.build(mat_mul(g, basis), mat_vec(g, shift), check_unimodular=False, error=error)

    def rebased(self, transform: Sequence[Sequence[int]]) -> 'AffineLattice':
        """Same point with basis B·U for a unimodular integer matrix U"""
        transform = [[int(v) for v in row] for row in transform]
        basis = mat_mul(self.basis_matrix(), transform)
        error = None
        if not self.is_exact:
            u = unit_roundoff()
            columns = transpose(transform)
            growth = max(sum(abs(v) for v in col) for col in columns)
            error = [e * growth + (self.d + 1) * u * max(sum(abs(b * c) for b, c in zip(row, col)) for col in columns)
                     for e, row in zip(self.row_errors(), self.basis)]
        return AffineLattice.build(basis, self.shift, check_unimodular=False, error=error)

    def with_shift(self, shift: Sequence[Real]) -> 'AffineLattice':
        """Same lattice, another shift"""
        return AffineLattice.build(self.basis_matrix(), shift, check_unimodular=False, error=self.error or None)

    def __repr__(self):
        return f'<AffineLattice d={self.d} homogeneous={self.homogeneous()}>'

    def to_dict(self) -> Dict:
        data = {
            'd': self.d,
            'basis': [[format_number(x) for x in row] for row in self.basis],
            'shift': [format_number(x) for x in self.shift],
            'homogeneous': self.homogeneous(),
            'exact': self.is_exact,
        }
        if self.error:
            data['rounding'] = format_number(max(self.error))
        return data


def _canonical_shift(rows: Matrix, shift: List[Real]) -> Tuple[List[Real], List[int]]:
    """v − B·k with k = ⌊B⁻¹v⌋, together with k"""
    if all(x == 0 for x in shift):
        return shift, [0] * len(shift)
    moved = [floor_int(c) for c in mat_vec(inverse(rows), shift)]
    if not any(moved):
        return shift, moved
    return vec_sub(shift, mat_vec(rows, moved)), moved


@dataclass(frozen=True)
class MultiVector:
    """Element of the l-th exterior power in the monomial basis e_I"""
    grade: int
    d: int
    coefficients: Tuple[Tuple[Tuple[int, ...], Real], ...]

    @classmethod
    def from_dict(cls, grade: int, d: int, coefficients: Dict[Tuple[int, ...], Real]) -> 'MultiVector':
        items = tuple(sorted((tuple(k), v) for k, v in coefficients.items() if v != 0))
        return cls(grade=grade, d=d, coefficients=items)

    @classmethod
    def monomial(cls, index: Sequence[int], d: int) -> 'MultiVector':
        return cls.from_dict(len(index), d, {tuple(index): Fraction(1)})

    @staticmethod
    def index_sets(grade: int, d: int) -> List[Tuple[int, ...]]:
        """Monomial indices I ⊂ {0..d-1} with |I| = grade, in lexicographic order"""
        return list(combinations(range(d), grade))

    def as_dict(self) -> Dict[Tuple[int, ...], Real]:
        return dict(self.coefficients)

    def coefficient(self, index: Sequence[int]) -> Real:
        return self.as_dict().get(tuple(index), Fraction(0))

    def norm(self) -> Real:
        """Coefficient sup-norm"""
        return sup_norm([v for _, v in self.coefficients])

    def is_zero(self) -> bool:
        return not self.coefficients

    def to_dict(self) -> Dict:
        return {
            'grade': self.grade,
            'd': self.d,
            'coefficients': {','.join(str(i + 1) for i in k): format_number(v) for k, v in self.coefficients},
        }


@dataclass(frozen=True)
class SublatticeRecord:
    """A rank-l subgroup of a lattice given by generators in ambient coordinates"""
    generators: Tuple[Tuple[Real, ...], ...]
    coordinates: Tuple[Tuple[int, ...], ...]
    covolume: Real
    primitive: bool

    @property
    def rank(self) -> int:
        return len(self.generators)

    def __repr__(self):
        return f'<SublatticeRecord rank={self.rank} covolume={format_number(self.covolume)}>'

    def to_dict(self) -> Dict:
        return {
            'rank': self.rank,
            'generators': [[format_number(x) for x in g] for g in self.generators],
            'coordinates': [list(c) for c in self.coordinates],
            'covolume': format_number(self.covolume),
            'primitive': self.primitive,
        }


@dataclass(frozen=True)
class ShortVector:
    """Result of a shortest-vector search: the minimum and a vector attaining it"""
    value: Real
    witness: Tuple[Real, ...]
    coordinates: Tuple[int, ...]
    radius: Real
    points_scanned: int

    def to_dict(self) -> Dict:
        return {
            'value': format_number(self.value),
            'witness': [format_number(x) for x in self.witness],
            'coordinates': list(self.coordinates),
            'radius': format_number(self.radius),
            'points_scanned': self.points_scanned,
        }


@dataclass(frozen=True)
class PhiResult:
    """φ_l: reciprocal of the least covolume of a primitive rank-l subgroup"""
    grade: int
    value: Real
    certified: bool
    record: Optional[SublatticeRecord]
    radius: Real

    def to_dict(self) -> Dict:
        return {
            'grade': self.grade,
            'value': format_number(self.value),
            'certified': self.certified,
            'uncertified': not self.certified,
            'sublattice': self.record.to_dict() if self.record else None,
            'radius': format_number(self.radius),
        }


@dataclass(frozen=True)
class EmmReport:
    """‖Λ1∩Λ2‖·‖Λ1+Λ2‖ / (‖Λ1‖·‖Λ2‖) against the sup-norm constant"""
    ratio: Real
    constant_squared: int
    intersection_rank: int
    sum_rank: int
    within_bound: bool

    def to_dict(self) -> Dict:
        return {
            'ratio': format_number(self.ratio),
            'constant': format_number(mpmath.sqrt(self.constant_squared)),
            'constant_squared': self.constant_squared,
            'intersection_rank': self.intersection_rank,
            'sum_rank': self.sum_rank,
            'within_bound': self.within_bound,
        }
