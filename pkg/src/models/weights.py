import re
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce
from typing import Dict, List, Optional, Tuple

import mpmath

from src.services.errors import InvalidWeights, PremiseViolation
from src.services.numeric import exact_root, format_number, is_exact, parse_rational, power, to_mpf

# key=value pairs; values may themselves hold commas ("a=1/2,1/2")
_PAIR = re.compile(r'(\w+)=([^=\s]+?)(?=(?:[,\s]+\w+=)|\s*$)')


@dataclass(frozen=True)
class Weights:
    a: Tuple[Fraction, ...]
    b: Tuple[Fraction, ...]

    def __post_init__(self):
        object.__setattr__(self, 'a', tuple(Fraction(x) for x in self.a))
        object.__setattr__(self, 'b', tuple(Fraction(x) for x in self.b))
        self.validate()

    def validate(self):
        if not self.a or not self.b:
            raise InvalidWeights('both weight vectors must be nonempty')
        for name, vector in (('a', self.a), ('b', self.b)):
            if any(x <= 0 for x in vector):
                raise InvalidWeights(f'{name} has a nonpositive entry', weights=self.format())
            if any(x < y for x, y in zip(vector, vector[1:])):
                raise InvalidWeights(f'{name} must be nonincreasing', weights=self.format())
            if sum(vector) != 1:
                raise InvalidWeights(f'{name} must sum to 1', weights=self.format())

    @property
    def m(self) -> int:
        return len(self.a)

    @property
    def n(self) -> int:
        return len(self.b)

    @property
    def d(self) -> int:
        return self.m + self.n

    @property
    def common_denominator(self) -> int:
        return reduce(lambda acc, x: acc * x.denominator // math.gcd(acc, x.denominator), self.a + self.b, 1)

    @property
    def exponents(self) -> Tuple[Fraction, ...]:
        """Flow exponents (a_1..a_m, -b_1..-b_n) of the diagonal action"""
        return self.a + tuple(-x for x in self.b)

    def is_equal(self) -> bool:
        return len(set(self.a)) == 1 and len(set(self.b)) == 1

    def groups(self) -> List[Tuple[int, Fraction]]:
        """Runs of equal a-weights as (size, common value)"""
        runs: List[Tuple[int, Fraction]] = []
        for value in self.a:
            if runs and runs[-1][1] == value:
                runs[-1] = (runs[-1][0] + 1, value)
            else:
                runs.append((1, value))
        return runs

    @classmethod
    def equal(cls, m: int, n: int) -> 'Weights':
        if m < 1 or n < 1:
            raise InvalidWeights('m and n must be positive')
        return cls(a=(Fraction(1, m),) * m, b=(Fraction(1, n),) * n)

    @classmethod
    def parse(cls, text: str) -> 'Weights':
        """Parse 'm=2 n=1 a=1/2,1/2 b=1' or the short form 'm=1,n=1' (equal weights)"""
        pairs = dict((key.lower(), value) for key, value in _PAIR.findall(text.strip()))
        if not pairs:
            raise InvalidWeights(f'cannot parse weights {text!r}')
        try:
            a = tuple(parse_rational(x) for x in pairs['a'].split(',')) if 'a' in pairs else None
            b = tuple(parse_rational(x) for x in pairs['b'].split(',')) if 'b' in pairs else None
            m = int(pairs['m']) if 'm' in pairs else (len(a) if a else None)
            n = int(pairs['n']) if 'n' in pairs else (len(b) if b else None)
        except ValueError:
            raise InvalidWeights(f'cannot parse weights {text!r}')
        if m is None or n is None:
            raise InvalidWeights(f'weights need m and n (or a and b): {text!r}')
        a = a or (Fraction(1, m),) * m
        b = b or (Fraction(1, n),) * n
        if len(a) != m or len(b) != n:
            raise InvalidWeights('lengths of a/b do not match m/n', weights=text)
        return cls(a=a, b=b)

    def format(self) -> str:
        return (f"m={self.m} n={self.n} a={','.join(str(x) for x in self.a)} "
                f"b={','.join(str(x) for x in self.b)}")

    def __repr__(self):
        return f'<Weights {self.format()}>'

    def to_dict(self) -> Dict:
        return {
            'm': self.m,
            'n': self.n,
            'a': [str(x) for x in self.a],
            'b': [str(x) for x in self.b],
            'common_denominator': self.common_denominator,
        }


@dataclass(frozen=True)
class WeightExponents:
    w: Tuple[Fraction, ...]

    def __getitem__(self, l: int) -> Fraction:
        """w_l for 1 ≤ l ≤ d−1"""
        if not 1 <= l <= len(self.w):
            raise IndexError(f'grade {l} outside 1..{len(self.w)}')
        return self.w[l - 1]

    def __len__(self):
        return len(self.w)

    def to_dict(self) -> Dict:
        return {'w': [str(x) for x in self.w]}


@dataclass(frozen=True)
class FlowTime:
    """
    Time parameter of the diagonal flow.

    The exact kind stores t = tau^D so that every t^{a_i}, t^{-b_j} with
    D·a_i integral is rational. The high-precision kind stores t as an mpf.
    """
    kind: str
    tau: Optional[Fraction] = None
    D: int = 1
    value_mpf: Optional[mpmath.mpf] = None
    prec: int = 128

    @classmethod
    def exact(cls, tau, D: int = 1) -> 'FlowTime':
        tau = Fraction(tau)
        if tau <= 0:
            raise PremiseViolation('flow time must be positive', tau=tau)
        return cls(kind='exact', tau=tau, D=int(D))

    @classmethod
    def high_precision(cls, value, prec: int = 128) -> 'FlowTime':
        with mpmath.workprec(prec):
            value = to_mpf(value)
        if value <= 0:
            raise PremiseViolation('flow time must be positive')
        return cls(kind='high', value_mpf=value, prec=prec)

    @classmethod
    def for_weights(cls, t, weights: Weights, prec: int = 128) -> 'FlowTime':
        """Exact kind whenever t is rational with a rational D-th root, else high precision"""
        if is_exact(t):
            t = Fraction(t)
            D = weights.common_denominator
            root = exact_root(t, D) if t > 0 else None
            if root is not None:
                return cls.exact(root, D)
            if all(is_exact(power(t, e)) for e in weights.exponents):
                return cls.exact(t, 1)
        return cls.high_precision(t, prec)

    @property
    def is_exact(self) -> bool:
        return self.kind == 'exact'

    @property
    def value(self):
        if self.is_exact:
            return self.tau ** self.D
        return self.value_mpf

    def power(self, w):
        """t^w; exact when D·w is an integer or the root happens to be rational"""
        w = Fraction(w)
        if self.is_exact:
            scaled = w * self.D
            if scaled.denominator == 1:
                return self.tau ** int(scaled)
            return power(self.value, w)
        with mpmath.workprec(self.prec):
            return mpmath.power(self.value_mpf, to_mpf(w))

    def times(self, other: 'FlowTime') -> 'FlowTime':
        if self.is_exact and other.is_exact and self.D == other.D:
            return FlowTime.exact(self.tau * other.tau, self.D)
        prec = max(self.prec, other.prec)
        with mpmath.workprec(prec):
            return FlowTime.high_precision(to_mpf(self.value) * to_mpf(other.value), prec)

    def iterate(self, k: int) -> 'FlowTime':
        """t^k"""
        if self.is_exact:
            return FlowTime.exact(self.tau ** k, self.D)
        with mpmath.workprec(self.prec):
            return FlowTime.high_precision(mpmath.power(self.value_mpf, k), self.prec)

    def to_dict(self) -> Dict:
        if self.is_exact:
            return {'kind': 'exact', 'tau': str(self.tau), 'D': self.D, 't': str(self.value)}
        return {'kind': 'high', 't': format_number(self.value_mpf), 'prec': self.prec}
