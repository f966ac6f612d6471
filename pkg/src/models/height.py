from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import sympy

from src.models.weights import Weights
from src.services.numeric import Real, format_number


def _text(value) -> str:
    return 'inf' if value is None else str(value)


@dataclass(frozen=True)
class EtaProfile:
    """
    Exponents η_1..η_{d−1} with η = min_l w_l η_l and
    α_η = min over (i, j) of 1 − (η_i/2)(1/η_{i−j} + 1/η_{i+j}).
    """
    weights: Weights
    etas: Tuple[sympy.Expr, ...]
    eta: sympy.Expr
    alpha: sympy.Expr
    strict: bool = False
    source: str = ''

    @property
    def d(self) -> int:
        return self.weights.d

    def __getitem__(self, l: int) -> sympy.Expr:
        """η_l for 1 ≤ l ≤ d−1"""
        return self.etas[l - 1]

    def to_dict(self) -> Dict:
        return {
            'd': self.d,
            'etas': [str(v) for v in self.etas],
            'etas_float': [float(sympy.N(v, 30)) for v in self.etas],
            'eta': str(self.eta),
            'alpha': str(self.alpha),
            'strict': self.strict,
            'source': self.source,
        }


@dataclass(frozen=True)
class ZetaBounds:
    """Lower bounds l ↦ ζ_l(μ); `values` is None when only positivity is known"""
    case: str
    values: Optional[Tuple[sympy.Expr, ...]]

    def to_dict(self) -> Dict:
        return {
            'case': self.case,
            'values': [str(v) for v in self.values] if self.values is not None else None,
            'values_float': [float(sympy.N(v, 30)) for v in self.values] if self.values is not None else None,
        }


@dataclass(frozen=True)
class HeightValue:
    """f_{ε,η̂}(x) with its ingredients; value None stands for +∞"""
    value: Optional[Real]
    psi: Optional[Real]
    phis: Tuple[Real, ...]
    certified: bool

    @property
    def infinite(self) -> bool:
        return self.value is None

    def to_dict(self) -> Dict:
        return {
            'value': _text(self.value) if self.value is None else format_number(self.value),
            'psi': 'inf' if self.psi is None else format_number(self.psi),
            'phis': [format_number(v) for v in self.phis],
            'infinite': self.infinite,
            'certified': self.certified,
        }


@dataclass(frozen=True)
class HeightParams:
    """ε, t and the calibrated constants Ĉ, b̂, ξ̂(t) of one contraction check"""
    epsilon: Real
    t: Real
    C_hat: float
    b_hat: float
    xi_hat: float
    smallness: bool

    def to_dict(self) -> Dict:
        return {
            'epsilon': format_number(self.epsilon),
            't': format_number(self.t),
            'C_hat': self.C_hat,
            'b_hat': self.b_hat,
            'xi_hat': self.xi_hat,
            'smallness': self.smallness,
        }


@dataclass
class ContractionReport:
    status: str
    profile: EtaProfile
    params: HeightParams
    samples: int
    seed: int
    f_x: Optional[float]
    mean: float
    stderr: float
    bound: float
    psi_term: bool
    C_O: float
    max_sample: float
    lipschitz_violations: int = 0
    psi_claim_violations: int = 0
    decomposition_violations: int = 0
    term_maxima: Dict[str, float] = field(default_factory=dict)
    pilot: List[Dict] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)

    @property
    def margin(self) -> float:
        return self.bound - (self.mean + 3 * self.stderr)

    @property
    def passed(self) -> bool:
        return self.status == 'pass'

    def to_dict(self) -> Dict:
        return {
            'status': self.status,
            'profile': self.profile.to_dict(),
            'params': self.params.to_dict(),
            'samples': self.samples,
            'seed': self.seed,
            'f_x': self.f_x,
            'mean': self.mean,
            'stderr': self.stderr,
            'bound': self.bound,
            'margin': self.margin,
            'psi_term': self.psi_term,
            'C_O': self.C_O,
            'max_sample': self.max_sample,
            'lipschitz_violations': self.lipschitz_violations,
            'psi_claim_violations': self.psi_claim_violations,
            'decomposition_violations': self.decomposition_violations,
            'term_maxima': self.term_maxima,
            'pilot': self.pilot,
            'notes': self.notes,
        }


@dataclass(frozen=True)
class PhiContractionTerm:
    grade: int
    mean: float
    stderr: float
    bound: float

    @property
    def passed(self) -> bool:
        return self.mean + 3 * self.stderr <= self.bound

    def to_dict(self) -> Dict:
        return {'grade': self.grade, 'mean': self.mean, 'stderr': self.stderr, 'bound': self.bound,
                'passed': self.passed}


@dataclass(frozen=True)
class CriticalExponentReport:
    grade: int
    gamma: float
    samples: int
    mean: float
    stderr: float
    running_means: Tuple[Tuple[int, float], ...]
    diverging: bool
    worst_vector: Dict

    def to_dict(self) -> Dict:
        return {
            'grade': self.grade,
            'gamma': self.gamma,
            'samples': self.samples,
            'mean': self.mean,
            'stderr': self.stderr,
            'running_means': [{'samples': n, 'mean': m} for n, m in self.running_means],
            'diverging': self.diverging,
            'verdict': 'divergent' if self.diverging else 'finite-mean',
            'worst_vector': self.worst_vector,
        }
