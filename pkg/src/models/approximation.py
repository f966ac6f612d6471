from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import mpmath

from src.models.lattice import AffineLattice
from src.models.weights import Weights
from src.services.errors import InvalidShape
from src.services.numeric import (
    Real, evaluate, format_number, is_symbolic, parse_real, to_float,
)


@dataclass(frozen=True)
class PointSpec:
    """
    Starting point [u(θ), v(ξ)]Z^d, or an explicit lattice.
    θ and ξ keep their parsed form (rationals or sympy constants) so the point
    can be rebuilt at any working precision.
    """
    weights: Weights
    theta: Tuple[Tuple[object, ...], ...] = ()
    xi: Tuple[object, ...] = ()
    lattice: Optional[AffineLattice] = None

    @classmethod
    def from_values(cls, weights: Weights, theta, xi=None) -> 'PointSpec':
        rows = _matrix(theta, weights.m, weights.n)
        xi = xi if xi is not None else [0] * weights.m
        if not isinstance(xi, (list, tuple)):
            xi = [xi]
        if len(xi) != weights.m:
            raise InvalidShape(f'ξ must have {weights.m} entries')
        return cls(weights=weights,
                   theta=tuple(tuple(parse_real(v) for v in row) for row in rows),
                   xi=tuple(parse_real(v) for v in xi))

    @classmethod
    def from_lattice(cls, weights: Weights, lattice: AffineLattice) -> 'PointSpec':
        if lattice.d != weights.d:
            raise InvalidShape('lattice dimension differs from m+n', d=lattice.d)
        return cls(weights=weights, lattice=lattice)

    @property
    def symbolic(self) -> bool:
        return any(is_symbolic(v) for row in self.theta for v in row) or any(is_symbolic(v) for v in self.xi)

    def theta_at(self, prec: int) -> List[List[Real]]:
        return [[evaluate(v, prec) for v in row] for row in self.theta]

    def xi_at(self, prec: int) -> List[Real]:
        return [evaluate(v, prec) for v in self.xi]

    def at(self, prec: int) -> AffineLattice:
        if self.lattice is not None:
            return self.lattice
        from src.services.core import affine_point
        with mpmath.workprec(prec):
            return affine_point(self.theta_at(prec), self.xi_at(prec), self.weights)

    def to_dict(self) -> Dict:
        if self.lattice is not None:
            return {'lattice': self.lattice.to_dict()}
        return {
            'theta': [[format_number(v) for v in row] for row in self.theta],
            'xi': [format_number(v) for v in self.xi],
            'symbolic': self.symbolic,
        }


def _matrix(theta, m: int, n: int):
    if not isinstance(theta, (list, tuple)):
        theta = [[theta]]
    elif theta and not isinstance(theta[0], (list, tuple)):
        theta = [list(theta[i * n:(i + 1) * n]) for i in range(m)] if len(theta) == m * n else [theta]
    if len(theta) != m or any(len(row) != n for row in theta):
        raise InvalidShape(f'θ must be an {m}x{n} matrix')
    return theta


@dataclass(frozen=True)
class ApproximationRecord:
    """Best (p, q) for ‖p+θq+ξ‖_a under ‖q‖_b ≤ T"""
    T: Real
    p: Tuple[int, ...]
    q: Tuple[int, ...]
    residual: Tuple[Real, ...]
    value: Real

    @property
    def exact_solution(self) -> bool:
        return all(r == 0 for r in self.residual)

    def __repr__(self):
        return f'<ApproximationRecord T={format_number(self.T)} q={self.q} p={self.p}>'

    def to_dict(self) -> Dict:
        return {
            'T': format_number(self.T),
            'p': list(self.p),
            'q': list(self.q),
            'residual': [format_number(r) for r in self.residual],
            'value': format_number(self.value),
            'value_float': to_float(self.value),
        }


@dataclass(frozen=True)
class ExponentPoint:
    T: Real
    record: ApproximationRecord
    omega: Optional[float]
    tail_infimum: Optional[float] = None

    def to_dict(self) -> Dict:
        return {
            'T': format_number(self.T),
            'omega': _float_or_inf(self.omega),
            'tail_infimum': _float_or_inf(self.tail_infimum),
            'q': list(self.record.q),
            'p': list(self.record.p),
            'value': format_number(self.record.value),
        }


@dataclass(frozen=True)
class ExponentCurve:
    points: Tuple[ExponentPoint, ...]
    rational: bool
    estimate: Optional[float]
    horizon: Real

    def to_dict(self) -> Dict:
        return {
            'points': [p.to_dict() for p in self.points],
            'rational': self.rational,
            'omega_hat': 'inf' if self.rational else _float_or_inf(self.estimate),
            'horizon': format_number(self.horizon),
        }


@dataclass(frozen=True)
class DaniResult:
    """Time change of the Dani correspondence and the certified bound on g_τ z"""
    tau: Real
    bound: Real
    certified: bool
    image_norm: Real

    def to_dict(self) -> Dict:
        return {
            'tau': format_number(self.tau),
            'bound': format_number(self.bound),
            'certified': self.certified,
            'image_norm': format_number(self.image_norm),
        }


@dataclass(frozen=True)
class TrajectoryPoint:
    k: int
    t: Real
    log_t: float
    lambda0: Real
    lambda0_affine: Real
    witness: Tuple[Real, ...]
    witness_affine: Tuple[Real, ...]

    def to_row(self) -> Dict:
        row = {
            'k': self.k,
            't': format_number(self.t),
            'log_t': self.log_t,
            'lambda0': format_number(self.lambda0),
            'lambda0_affine': format_number(self.lambda0_affine),
        }
        for i, value in enumerate(self.witness, start=1):
            row[f'witness_{i}'] = format_number(value)
        for i, value in enumerate(self.witness_affine, start=1):
            row[f'witness_affine_{i}'] = format_number(value)
        return row


@dataclass(frozen=True)
class TrajectoryRecord:
    """λ₀ and λ̃₀ along g_{t^k} x for k = 1..N"""
    base: Real
    points: Tuple[TrajectoryPoint, ...]
    precision: int
    exact: bool

    @property
    def N(self) -> int:
        return len(self.points)

    def lambda0_values(self) -> List[Real]:
        return [p.lambda0 for p in self.points]

    def affine_values(self) -> List[Real]:
        return [p.lambda0_affine for p in self.points]

    def rows(self) -> List[Dict]:
        return [p.to_row() for p in self.points]

    def to_dict(self) -> Dict:
        return {
            'base': format_number(self.base),
            'N': self.N,
            'precision': self.precision,
            'exact': self.exact,
            'lambda0': [format_number(v) for v in self.lambda0_values()],
            'lambda0_affine': [format_number(v) for v in self.affine_values()],
        }


@dataclass(frozen=True)
class EMassEstimate:
    epsilon: Real
    N: int
    base: Real
    count: int
    raw_fraction: Fraction
    lower_count: int
    upper_count: int
    lower_fraction: Fraction
    upper_fraction: Fraction
    continuous_fraction: Fraction
    refinement: int
    sandwich_holds: bool

    def to_dict(self) -> Dict:
        return {
            'epsilon': format_number(self.epsilon),
            'N': self.N,
            'base': format_number(self.base),
            'count': self.count,
            'fraction': str(self.raw_fraction),
            'fraction_float': to_float(self.raw_fraction),
            'lower_count': self.lower_count,
            'upper_count': self.upper_count,
            'lower_fraction': str(self.lower_fraction),
            'upper_fraction': str(self.upper_fraction),
            'continuous_fraction': str(self.continuous_fraction),
            'refinement': self.refinement,
            'sandwich_holds': self.sandwich_holds,
        }


@dataclass(frozen=True)
class DivFraction:
    epsilon: Real
    horizon: Real
    step: Real
    fraction: float
    samples: int

    def to_dict(self) -> Dict:
        return {
            'epsilon': format_number(self.epsilon),
            'T': format_number(self.horizon),
            'step': format_number(self.step),
            'fraction': self.fraction,
            'samples': self.samples,
        }


@dataclass(frozen=True)
class SingularIndicator:
    """Horizon-certified Dirichlet-improvability data per ε"""
    epsilons: Tuple[Real, ...]
    horizons: Tuple[Real, ...]
    improvable: Tuple[bool, ...]
    omega: Optional[Real] = None
    omega_improvable: Optional[bool] = None
    failures: Dict = field(default_factory=dict)

    def to_dict(self) -> Dict:
        return {
            'epsilons': [format_number(e) for e in self.epsilons],
            'horizons': [format_number(T) for T in self.horizons],
            'improvable': list(self.improvable),
            'omega': format_number(self.omega) if self.omega is not None else None,
            'omega_improvable': self.omega_improvable,
            'first_failure': {format_number(k): format_number(v) for k, v in self.failures.items()},
        }


def _float_or_inf(value):
    if value is None:
        return None
    if value == float('inf'):
        return 'inf'
    return float(value)
