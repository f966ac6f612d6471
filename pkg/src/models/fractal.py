from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import sympy

from src.services.numeric import Real, format_number, mat_vec


@dataclass(frozen=True)
class Box:
    """Axis-aligned box [lower, upper] (open or closed depending on use)"""
    lower: Tuple[Fraction, ...]
    upper: Tuple[Fraction, ...]

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def diameter(self) -> Fraction:
        return max(u - l for l, u in zip(self.lower, self.upper))

    def corners(self) -> List[Tuple[Fraction, ...]]:
        corners = [()]
        for l, u in zip(self.lower, self.upper):
            corners = [c + (v,) for c in corners for v in (l, u)]
        return corners

    def contains(self, other: 'Box') -> bool:
        return all(l <= ol and ou <= u for l, u, ol, ou in zip(self.lower, self.upper, other.lower, other.upper))

    def open_disjoint(self, other: 'Box') -> bool:
        """Interiors do not meet"""
        return any(u <= ol or ou <= l for l, u, ol, ou in zip(self.lower, self.upper, other.lower, other.upper))

    @classmethod
    def bounding(cls, points: Sequence[Sequence[Fraction]]) -> 'Box':
        columns = list(zip(*points))
        return cls(lower=tuple(min(c) for c in columns), upper=tuple(max(c) for c in columns))

    def to_dict(self) -> Dict:
        return {'lower': [str(v) for v in self.lower], 'upper': [str(v) for v in self.upper]}


@dataclass(frozen=True)
class SimilarityMap:
    """x ↦ c·O·x + w"""
    orthogonal: Tuple[Tuple[Fraction, ...], ...]
    translation: Tuple[Fraction, ...]

    @property
    def is_signed_permutation(self) -> bool:
        return all(sum(1 for v in row if v != 0) == 1 and all(v in (0, 1, -1) for v in row)
                   for row in self.orthogonal)

    def apply(self, c: Fraction, x: Sequence[Real]) -> List[Real]:
        rotated = mat_vec([list(r) for r in self.orthogonal], list(x))
        return [c * v + w for v, w in zip(rotated, self.translation)]

    def image_box(self, c: Fraction, box: Box) -> Box:
        """Bounding box of the image; the image itself when O is a signed permutation"""
        return Box.bounding([self.apply(c, corner) for corner in box.corners()])

    def to_text(self) -> str:
        signs = ''.join(
            next(('+' if v > 0 else '-') + str(j + 1) for j, v in enumerate(row) if v != 0)
            for row in self.orthogonal
        ) if self.is_signed_permutation else 'O'
        return '(' + ','.join([signs] + [str(v) for v in self.translation]) + ')'


@dataclass(frozen=True)
class SimilarityIFS:
    """Equal-ratio similarity IFS with its attractor hull and OSC witness"""
    dim: int
    c: Fraction
    maps: Tuple[SimilarityMap, ...]
    hull: Box
    witness: Box
    name: str = ''

    @property
    def p(self) -> int:
        return len(self.maps)

    @property
    def alpha(self) -> Fraction:
        """Sup-norm diameter of the attractor"""
        return self.hull.diameter

    @property
    def dimension(self) -> sympy.Expr:
        return sympy.expand_log(sympy.log(self.p) / sympy.log(1 / sympy.Rational(self.c.numerator, self.c.denominator)),
                                force=True)

    @property
    def dimension_float(self) -> float:
        return float(sympy.N(self.dimension, 30))

    def to_text(self) -> str:
        return f"dim={self.dim} c={self.c} maps={','.join(m.to_text() for m in self.maps)}"

    def __repr__(self):
        return f'<SimilarityIFS {self.name or self.to_text()}>'

    def to_dict(self) -> Dict:
        return {
            'name': self.name,
            'dim': self.dim,
            'c': str(self.c),
            'p': self.p,
            'maps': [m.to_text() for m in self.maps],
            'hull': self.hull.to_dict(),
            'witness': self.witness.to_dict(),
            'alpha': str(self.alpha),
            'dimension': str(self.dimension),
            'dimension_float': self.dimension_float,
        }


@dataclass(frozen=True)
class ProductFractal:
    """
    K = K_1 × … × K_l. Either a fixed-θ product with ambient dims summing to
    m, or an m×n grid of one-dimensional factors laid out row-major.
    """
    factors: Tuple[SimilarityIFS, ...]
    shape: Optional[Tuple[int, int]] = None

    @classmethod
    def grid(cls, m: int, n: int, ifs) -> 'ProductFractal':
        if isinstance(ifs, SimilarityIFS):
            entries = (ifs,) * (m * n)
        else:
            entries = tuple(ifs)
        return cls(factors=entries, shape=(m, n))

    @classmethod
    def product(cls, factors: Sequence[SimilarityIFS]) -> 'ProductFractal':
        return cls(factors=tuple(factors))

    @property
    def is_grid(self) -> bool:
        return self.shape is not None

    @property
    def ambient_dim(self) -> int:
        return sum(f.dim for f in self.factors)

    @property
    def dimensions(self) -> List[sympy.Expr]:
        return [f.dimension for f in self.factors]

    @property
    def dimension(self) -> sympy.Expr:
        return sympy.simplify(sum(self.dimensions, sympy.Integer(0)))

    def entry(self, i: int, j: int) -> SimilarityIFS:
        m, n = self.shape
        return self.factors[i * n + j]

    def is_full_cube(self) -> bool:
        """Every factor is a full unit-type interval/cube, i.e. has dimension equal to its ambient dimension"""
        return all(f.dimension == f.dim for f in self.factors)

    def to_dict(self) -> Dict:
        return {
            'factors': [f.to_dict() for f in self.factors],
            'shape': list(self.shape) if self.shape else None,
            'dimension': str(self.dimension),
            'dimension_float': float(sympy.N(self.dimension, 30)),
        }


@dataclass(frozen=True)
class Cylinder:
    words: Tuple[Tuple[int, ...], ...]
    box: Box
    depth: int
    measure: Fraction

    @property
    def diameter(self) -> Fraction:
        return self.box.diameter

    def label(self) -> str:
        return '|'.join(''.join(str(e) for e in w) for w in self.words)

    def to_dict(self) -> Dict:
        return {
            'word': self.label(),
            'depth': self.depth,
            'box': self.box.to_dict(),
            'measure': str(self.measure),
        }


@dataclass(frozen=True)
class CodedPoint:
    point: Tuple[Fraction, ...]
    radius: Fraction

    def to_dict(self) -> Dict:
        return {'point': [str(v) for v in self.point], 'radius': str(self.radius)}


@dataclass(frozen=True)
class FractalConstants:
    """Covering constants λ̂ and L with the scan that produced them"""
    measure_ball: float
    intersection: int
    depth: int
    centres: int
    notes: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict:
        return {
            'lambda': self.measure_ball,
            'L': self.intersection,
            'scan_depth': self.depth,
            'centres': self.centres,
            'notes': self.notes,
        }
