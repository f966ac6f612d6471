from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Tuple

import sympy

from src.models.fractal import Box, FractalConstants, ProductFractal
from src.models.weights import Weights
from src.services.numeric import Real, format_number, less_equal


@dataclass(frozen=True)
class CoverParams:
    """
    Inputs of a covering run for a fixed matrix θ: base t, thresholds ε and δ,
    target fraction q′, horizon N, commitment depth M and the product fractal
    K = K_1 × … × K_l whose factor blocks carry equal a-weights.
    """
    weights: Weights
    fractal: ProductFractal
    t: Real
    epsilon: Real
    delta: Real
    q_prime: Fraction
    N: int
    M: int = 1
    samples: int = 9
    seed: int = 0
    reference: Optional[Tuple[Fraction, ...]] = None

    @property
    def group_weights(self) -> Tuple[Fraction, ...]:
        from src.services.fractal import factor_weights
        return factor_weights(self.fractal, self.weights.a)

    def to_dict(self) -> Dict:
        return {
            'weights': self.weights.to_dict(),
            'fractal': [f.to_text() for f in self.fractal.factors],
            't': format_number(self.t),
            'epsilon': format_number(self.epsilon),
            'delta': format_number(self.delta),
            'q_prime': str(self.q_prime),
            'N': self.N,
            'M': self.M,
            'samples': self.samples,
            'seed': self.seed,
            'reference': [str(v) for v in self.reference] if self.reference else None,
        }


@dataclass(frozen=True)
class DepthIndices:
    """P_i(j) and, for a pivot group, K_i(j); clamped marks factors whose ball exceeds α_i"""
    j: int
    P: Tuple[int, ...]
    K: Tuple[int, ...]
    clamped: Tuple[bool, ...]

    def to_dict(self) -> Dict:
        return {'j': self.j, 'P': list(self.P), 'K': list(self.K), 'clamped': list(self.clamped)}


@dataclass(frozen=True)
class CoverNode:
    """Product cylinder at depths (P_1(j),…,P_l(j))"""
    words: Tuple[Tuple[int, ...], ...]
    box: Box
    alive: bool
    measure: Fraction

    @property
    def depths(self) -> Tuple[int, ...]:
        return tuple(len(w) for w in self.words)

    def label(self) -> str:
        return '|'.join(''.join(str(e) for e in w) or '-' for w in self.words)

    def to_row(self, depth: int, measure_sum: Fraction) -> Dict:
        return {
            'depth': depth,
            'node_word': self.label(),
            'alive': int(self.alive),
            'measure': str(self.measure),
            'measure_sum': str(measure_sum),
        }


@dataclass(frozen=True)
class CoverState:
    j: int
    depths: Tuple[int, ...]
    nodes: Tuple[CoverNode, ...]

    @property
    def measure_sum(self) -> Fraction:
        return sum((node.measure for node in self.nodes if node.alive), Fraction(0))

    @property
    def alive(self) -> Tuple[CoverNode, ...]:
        return tuple(node for node in self.nodes if node.alive)


@dataclass(frozen=True)
class CoverStep:
    j: int
    in_I: bool
    in_Q: bool
    refined: bool
    depths: Tuple[int, ...]
    alive_before: int
    alive_after: int
    pruned: int
    max_children: int
    measure_before: Fraction
    measure_after: Fraction
    factor: Fraction
    recursion_ok: bool
    separation_ok: Optional[bool] = None

    def to_dict(self) -> Dict:
        return {
            'j': self.j,
            'in_I': self.in_I,
            'in_Q': self.in_Q,
            'refined': self.refined,
            'depths': list(self.depths),
            'alive_before': self.alive_before,
            'alive_after': self.alive_after,
            'pruned': self.pruned,
            'max_children': self.max_children,
            'measure_before': str(self.measure_before),
            'measure_after': str(self.measure_after),
            'factor': str(self.factor),
            'recursion_ok': self.recursion_ok,
            'separation_ok': self.separation_ok,
        }


@dataclass(frozen=True)
class CoverBound:
    """Right side of the covering-number estimate at scale γ, with every constant echoed"""
    pivot: int
    gamma: Real
    N_gamma: int
    M: int
    I_count: Real
    D: Real
    B: Real
    L: int
    value: float
    limit: sympy.Expr
    horizon_limit: float
    K: Tuple[int, ...]
    cells_within_gamma: bool

    def to_dict(self) -> Dict:
        return {
            'pivot': self.pivot,
            'gamma': format_number(self.gamma),
            'N_gamma': self.N_gamma,
            'M': self.M,
            'I_count': format_number(self.I_count),
            'D': format_number(self.D),
            'B': format_number(self.B),
            'L': self.L,
            'value': self.value,
            'limit': str(self.limit),
            'limit_float': float(sympy.N(self.limit, 30)),
            'horizon_limit': self.horizon_limit,
            'K': list(self.K),
            'cells_within_gamma': self.cells_within_gamma,
        }


@dataclass(frozen=True)
class BoxCountEstimate:
    gammas: Tuple[float, ...]
    counts: Tuple[int, ...]
    slope: float
    intercept: float

    def curve(self) -> List[Dict]:
        return [{'gamma': g, 'count': c} for g, c in zip(self.gammas, self.counts)]

    def to_dict(self) -> Dict:
        return {'slope': self.slope, 'intercept': self.intercept, 'curve': self.curve()}


@dataclass
class CoverRun:
    params: CoverParams
    constants: Tuple[FractalConstants, ...]
    L: int
    I: Tuple[int, ...]
    Q: Tuple[int, ...]
    reference: Tuple[Fraction, ...]
    steps: List[CoverStep] = field(default_factory=list)
    rows: List[Dict] = field(default_factory=list)
    final: Optional[CoverState] = None
    measure_bound: Optional[Real] = None
    aggregate_bound: Optional[Real] = None
    exponent: Optional[Real] = None
    bound: Optional[CoverBound] = None

    @property
    def recursion_holds(self) -> bool:
        return all(step.recursion_ok for step in self.steps)

    @property
    def separation_holds(self) -> bool:
        return all(step.separation_ok is not False for step in self.steps)

    @property
    def final_measure(self) -> Fraction:
        return self.final.measure_sum if self.final else Fraction(0)

    @property
    def aggregate_holds(self) -> bool:
        return self.aggregate_bound is not None and less_equal(self.final_measure, self.aggregate_bound)

    def to_dict(self) -> Dict:
        return {
            'params': self.params.to_dict(),
            'constants': [c.to_dict() for c in self.constants],
            'L': self.L,
            'I': list(self.I),
            'Q': list(self.Q),
            'reference': [str(v) for v in self.reference],
            'steps': [s.to_dict() for s in self.steps],
            'final_measure': str(self.final_measure),
            'final_alive': len(self.final.alive) if self.final else 0,
            'separation_holds': self.separation_holds,
            'recursion_holds': self.recursion_holds,
            'measure_bound': format_number(self.measure_bound) if self.measure_bound is not None else None,
            'aggregate_bound': format_number(self.aggregate_bound) if self.aggregate_bound is not None else None,
            'aggregate_holds': self.aggregate_holds,
            'exponent': format_number(self.exponent) if self.exponent is not None else None,
            'bound': self.bound.to_dict() if self.bound else None,
        }
