"""
Exact and high-precision number helpers.

Values are either exact rationals (fractions.Fraction) or mpmath floats
evaluated under an explicit working precision. Matrices are plain lists of
rows so that both kinds flow through the same code.
"""

import re
import math
import logging
from fractions import Fraction
from functools import reduce
from typing import List, Optional, Sequence, Tuple, Union

import mpmath
import sympy
from sympy.ntheory.continued_fraction import continued_fraction_reduce

from src.services.errors import ConfigError, DimensionMismatch, PremiseViolation

logger = logging.getLogger(__name__)

Real = Union[int, Fraction, mpmath.mpf, float]
Matrix = List[List[Real]]
Vector = List[Real]

# Names accepted inside symbolic real literals
SYMBOLS = {
    'golden': sympy.GoldenRatio,
    'phi': sympy.GoldenRatio,
    'pi': sympy.pi,
    'e': sympy.E,
    'sqrt': sympy.sqrt,
}


# ---------------------------------------------------------------------------
# Parsing and evaluation
# ---------------------------------------------------------------------------

def parse_rational(text) -> Fraction:
    """Parse '5/7', '0.25', '3' or a number into an exact Fraction"""
    if isinstance(text, Fraction):
        return text
    if isinstance(text, int):
        return Fraction(text)
    if isinstance(text, float):
        return Fraction(str(text))
    try:
        return Fraction(str(text).strip())
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f'not an exact rational: {text!r}')


# sign, integer part and digits of a plain decimal literal
_DECIMAL = re.compile(r'^([+-]?)(\d+)\.(\d+)$')

# shortest run of shared continued-fraction terms read as a repeating block
MIN_PERIODIC_TERMS = 8


def _shared_terms(lo: Fraction, hi: Fraction, limit: int = 400) -> List[int]:
    """Continued-fraction terms common to every real in [lo, hi]"""
    terms: List[int] = []
    while len(terms) < limit:
        a = math.floor(lo)
        if a != math.floor(hi):
            break
        terms.append(a)
        lo, hi = lo - a, hi - a
        if lo == 0:
            break
        lo, hi = 1 / hi, 1 / lo
    return terms


def _periodic_tail(terms: Sequence[int]) -> Optional[Tuple[int, int]]:
    """(start, period) when the terms end in at least three copies of one block"""
    for period in range(1, len(terms) // 3 + 1):
        for start in range(len(terms)):
            tail = terms[start:]
            if len(tail) < max(3 * period, MIN_PERIODIC_TERMS):
                break
            if all(tail[i] == tail[i - period] for i in range(period, len(tail))):
                return start, period
    return None


def _decimal_real(text: str) -> Optional[Union[Fraction, sympy.Expr]]:
    """
    A decimal literal names a real known to the digits shown. It is read as
    the quadratic irrational whose continued fraction repeats through every
    term the rounding interval determines, and as the exact rational otherwise.
    """
    match = _DECIMAL.match(text)
    if match is None:
        return None
    sign, whole, digits = match.groups()
    value = Fraction(int(whole + digits), 10 ** len(digits))
    half = Fraction(1, 2 * 10 ** len(digits))
    terms = _shared_terms(value - half, value + half)
    found = _periodic_tail(terms)
    if found is not None:
        start, period = found
        surd = continued_fraction_reduce(terms[:start] + [terms[start:start + period]])
        if exact_sign(surd - to_sympy(value - half)) >= 0 and exact_sign(to_sympy(value + half) - surd) >= 0:
            surd = -surd if sign == '-' else surd
            logger.info('Reading decimal %s as %s', text, surd)
            return surd
    return -value if sign == '-' else value


def parse_real(text) -> Union[Fraction, sympy.Expr]:
    """
    Parse a real literal. p/q and integer literals are exact rationals,
    decimals go through _decimal_real, and anything else goes through sympy
    so it can be evaluated at any precision.
    """
    if isinstance(text, (int, Fraction, float)):
        return parse_rational(text)
    if isinstance(text, sympy.Expr):
        expr = text
    else:
        decimal = _decimal_real(str(text).strip())
        if decimal is not None:
            return decimal
        try:
            return parse_rational(text)
        except ConfigError:
            pass
        try:
            expr = sympy.sympify(str(text), locals=SYMBOLS)
        except (sympy.SympifyError, SyntaxError, TypeError):
            raise ConfigError(f'cannot parse real literal {text!r}')
    if expr.free_symbols or not expr.is_real:
        raise ConfigError(f'literal is not a real constant: {text!r}')
    if expr.is_Rational:
        return Fraction(int(expr.p), int(expr.q))
    return expr


def is_exact(value) -> bool:
    return isinstance(value, (int, Fraction))


def is_symbolic(value) -> bool:
    return isinstance(value, sympy.Expr)


def to_mpf(value) -> mpmath.mpf:
    if isinstance(value, Fraction):
        return mpmath.mpf(value.numerator) / value.denominator
    if isinstance(value, sympy.Expr):
        dps = int(mpmath.mp.prec * 0.30103) + 10
        return mpmath.mpf(str(sympy.N(value, dps)))
    return mpmath.mpf(value)


def to_sympy(value) -> sympy.Expr:
    """Exact sympy form of a Fraction, int or parsed real"""
    if isinstance(value, Fraction):
        return sympy.Rational(value.numerator, value.denominator)
    if isinstance(value, (float, mpmath.mpf)):
        raise PremiseViolation('floating values have no exact symbolic form', value=str(value))
    return sympy.sympify(value)


def exact_sign(expr) -> int:
    """Sign of a closed-form real; zero only when sympy proves it"""
    expr = sympy.simplify(to_sympy(expr))
    if expr == 0 or expr.equals(0):
        return 0
    return 1 if sympy.N(expr, 60) > 0 else -1


def exact_argmin(values: Sequence) -> int:
    """Index of the first smallest closed-form real"""
    best = 0
    for index in range(1, len(values)):
        if exact_sign(to_sympy(values[index]) - to_sympy(values[best])) < 0:
            best = index
    return best


def evaluate(value, prec: int):
    """Evaluate a parsed real at `prec` bits; exact rationals stay exact"""
    if is_exact(value):
        return Fraction(value)
    with mpmath.workprec(prec):
        return to_mpf(value)


def unit_roundoff() -> mpmath.mpf:
    """Relative error of one mpf operation at the working precision, with 16 bits of headroom"""
    return mpmath.ldexp(1, -(mpmath.mp.prec - 16))


def to_float(value) -> float:
    if isinstance(value, Fraction):
        return value.numerator / value.denominator
    if isinstance(value, sympy.Expr):
        return float(sympy.N(value, 30))
    return float(value)


def format_number(value) -> str:
    """Stable text form used in JSON artifacts"""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, int):
        return str(value)
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, sympy.Expr):
        return str(value)
    if isinstance(value, float):
        if math.isinf(value):
            return 'inf'
        return repr(value)
    if mpmath.isinf(value):
        return 'inf'
    return mpmath.nstr(value, 30)


# ---------------------------------------------------------------------------
# Scalars
# ---------------------------------------------------------------------------

def floor_int(x) -> int:
    if isinstance(x, (int, Fraction, float)):
        return math.floor(x)
    return int(mpmath.floor(x))


def ceil_int(x) -> int:
    if isinstance(x, (int, Fraction, float)):
        return math.ceil(x)
    return int(mpmath.ceil(x))


def nearest_int(x) -> int:
    """Nearest integer; exact half-way ties resolve to the smaller integer"""
    return ceil_int(x - Fraction(1, 2)) if is_exact(x) else ceil_int(x - mpmath.mpf(0.5))


def exact_root(x: Fraction, k: int) -> Optional[Fraction]:
    """k-th root of a nonnegative rational when it is rational, else None"""
    if x < 0:
        raise PremiseViolation('root of a negative number', value=x)
    num, num_exact = sympy.integer_nthroot(x.numerator, k)
    if not num_exact:
        return None
    den, den_exact = sympy.integer_nthroot(x.denominator, k)
    if not den_exact:
        return None
    return Fraction(int(num), int(den))


def power(x, exponent):
    """x**exponent for x ≥ 0; exact when the result is rational"""
    exponent = Fraction(exponent) if is_exact(exponent) else exponent
    if is_exact(x) and is_exact(exponent):
        x = Fraction(x)
        if x == 0:
            if exponent <= 0:
                raise PremiseViolation('zero raised to a nonpositive power')
            return Fraction(0)
        root = exact_root(x, exponent.denominator)
        if root is not None:
            return root ** exponent.numerator
        return mpmath.power(to_mpf(x), to_mpf(exponent))
    base = to_mpf(x)
    if base == 0:
        return mpmath.mpf(0)
    return mpmath.power(base, to_mpf(exponent))


def monomial_leq(lhs: Sequence[Tuple[Real, Fraction]], rhs: Sequence[Tuple[Real, Fraction]]) -> bool:
    """
    Decide Π b^e (lhs) ≤ Π b^e (rhs) for nonnegative bases and rational exponents.
    Exact when all bases are rational: exponents are cleared to integers first.
    """
    def is_zero(side):
        return any(base == 0 and exponent > 0 for base, exponent in side)

    for side in (lhs, rhs):
        for base, exponent in side:
            if base < 0:
                raise PremiseViolation('negative base in power comparison', base=base)
            if base == 0 and exponent < 0:
                raise PremiseViolation('zero base with negative exponent')
    if is_zero(lhs):
        return True
    if is_zero(rhs):
        return False

    factors = [(base, exponent) for base, exponent in lhs if exponent != 0]
    factors += [(base, -exponent) for base, exponent in rhs if exponent != 0]
    if all(is_exact(base) and is_exact(exponent) for base, exponent in factors):
        scale = reduce(lambda acc, f: acc * Fraction(f[1]).denominator // math.gcd(acc, Fraction(f[1]).denominator),
                       factors, 1)
        product = Fraction(1)
        for base, exponent in factors:
            product *= Fraction(base) ** int(Fraction(exponent) * scale)
        return product <= 1
    total = mpmath.mpf(0)
    for base, exponent in factors:
        total += to_mpf(exponent) * mpmath.log(to_mpf(base))
    return total <= 0


def lift(values: Sequence[Real]) -> List[Real]:
    """Bring a sequence to one number kind: all Fraction, or all mpf if any entry is inexact"""
    if all(is_exact(v) for v in values):
        return [Fraction(v) for v in values]
    return [v if isinstance(v, mpmath.mpf) else to_mpf(v) for v in values]


def lift_matrix(a: Sequence[Sequence[Real]]) -> Matrix:
    flat = [v for row in a for v in row]
    if all(is_exact(v) for v in flat):
        return [[Fraction(v) for v in row] for row in a]
    return [[v if isinstance(v, mpmath.mpf) else to_mpf(v) for v in row] for row in a]


def _high_precision(value) -> bool:
    return isinstance(value, mpmath.mpf) or is_symbolic(value)


def same_kind(*matrices: Sequence[Sequence[Real]]) -> List[Matrix]:
    """
    Bring several matrices to one number kind. Entries are left as they are
    unless some entry is an mpf or a sympy constant, in which case every
    entry becomes an mpf at the working precision.
    """
    if any(_high_precision(v) for a in matrices for row in a for v in row):
        return [[[v if isinstance(v, mpmath.mpf) else to_mpf(v) for v in row] for row in a] for a in matrices]
    return [[list(row) for row in a] for a in matrices]


def _one(exact: bool):
    return Fraction(1) if exact else mpmath.mpf(1)


def coerce(a, b):
    if is_exact(a) == is_exact(b) or isinstance(a, float) or isinstance(b, float):
        return a, b
    return (to_mpf(a) if is_exact(a) else a), (to_mpf(b) if is_exact(b) else b)


def mul(a, b):
    a, b = coerce(a, b)
    return a * b


def add(a, b):
    a, b = coerce(a, b)
    return a + b


def less_equal(a, b) -> bool:
    a, b = coerce(a, b)
    return a <= b


def maximum(values):
    values = lift(list(values))
    return max(values)


def minimum(values):
    values = lift(list(values))
    return min(values)


def monomial_value(factors: Sequence[Tuple[Real, Fraction]]):
    value = Fraction(1)
    for base, exponent in factors:
        value = mul(value, power(base, exponent))
    return value


# ---------------------------------------------------------------------------
# Vectors and matrices
# ---------------------------------------------------------------------------

def sup_norm(x: Sequence[Real]):
    return max((abs(v) for v in x), default=Fraction(0))


def identity(d: int) -> Matrix:
    return [[Fraction(int(i == j)) for j in range(d)] for i in range(d)]


def zeros(rows: int, cols: int) -> Matrix:
    return [[Fraction(0)] * cols for _ in range(rows)]


def transpose(a: Matrix) -> Matrix:
    return [list(col) for col in zip(*a)]


def mat_mul(a: Matrix, b: Matrix) -> Matrix:
    if len(a[0]) != len(b):
        raise DimensionMismatch('matrix product shapes do not match',
                                left=f'{len(a)}x{len(a[0])}', right=f'{len(b)}x{len(b[0])}')
    a, b = same_kind(a, b)
    cols = transpose(b)
    return [[sum((x * y for x, y in zip(row, col)), 0) for col in cols] for row in a]


def mat_vec(a: Matrix, x: Sequence[Real]) -> Vector:
    if len(a[0]) != len(x):
        raise DimensionMismatch('matrix/vector shapes do not match', matrix=len(a[0]), vector=len(x))
    a, (x,) = same_kind(a, [x])
    return [sum((v * w for v, w in zip(row, x)), 0) for row in a]


def vec_add(x: Sequence[Real], y: Sequence[Real]) -> Vector:
    x, y = same_kind([x, y])[0]
    return [a + b for a, b in zip(x, y)]


def vec_sub(x: Sequence[Real], y: Sequence[Real]) -> Vector:
    x, y = same_kind([x, y])[0]
    return [a - b for a, b in zip(x, y)]


def operator_norm(a: Matrix):
    """Operator norm for the sup-norm on vectors: the largest absolute row sum"""
    return max(sum((abs(v) for v in row), 0) for row in a)


def _pivot_row(rows: Matrix, col: int, start: int) -> Optional[int]:
    best = None
    for r in range(start, len(rows)):
        value = rows[r][col]
        if value == 0:
            continue
        if is_exact(value):
            return r
        if best is None or abs(value) > abs(rows[best][col]):
            best = r
    return best


def determinant(a: Matrix):
    if not a:
        return Fraction(1)
    rows = lift_matrix(a)
    n = len(rows)
    det = _one(is_exact(rows[0][0]))
    for col in range(n):
        pivot = _pivot_row(rows, col, col)
        if pivot is None:
            return Fraction(0)
        if pivot != col:
            rows[col], rows[pivot] = rows[pivot], rows[col]
            det = -det
        det = det * rows[col][col]
        for r in range(col + 1, n):
            factor = rows[r][col] / rows[col][col]
            if factor != 0:
                rows[r] = [x - factor * y for x, y in zip(rows[r], rows[col])]
    return det


def inverse(a: Matrix) -> Matrix:
    n = len(a)
    a = lift_matrix(a)
    one = _one(is_exact(a[0][0]))
    zero = one - one
    rows = [list(row) + [one if i == j else zero for j in range(n)] for i, row in enumerate(a)]
    for col in range(n):
        pivot = _pivot_row(rows, col, col)
        if pivot is None:
            raise PremiseViolation('matrix is singular')
        rows[col], rows[pivot] = rows[pivot], rows[col]
        lead = rows[col][col]
        rows[col] = [x / lead for x in rows[col]]
        for r in range(n):
            if r != col and rows[r][col] != 0:
                factor = rows[r][col]
                rows[r] = [x - factor * y for x, y in zip(rows[r], rows[col])]
    return [row[n:] for row in rows]


def row_reduce(rows: Matrix) -> Tuple[Matrix, List[int]]:
    """Reduced row echelon form of an exact matrix with its pivot columns"""
    rows = [[Fraction(x) for x in row] for row in rows]
    pivots = []
    r = 0
    cols = len(rows[0]) if rows else 0
    for col in range(cols):
        pivot = _pivot_row(rows, col, r)
        if pivot is None:
            continue
        rows[r], rows[pivot] = rows[pivot], rows[r]
        lead = rows[r][col]
        rows[r] = [x / lead for x in rows[r]]
        for other in range(len(rows)):
            if other != r and rows[other][col] != 0:
                factor = rows[other][col]
                rows[other] = [x - factor * y for x, y in zip(rows[other], rows[r])]
        pivots.append(col)
        r += 1
        if r == len(rows):
            break
    return rows[:r], pivots


def rank(rows: Matrix) -> int:
    if not rows:
        return 0
    return len(row_reduce(rows)[1])


def left_kernel(rows: Matrix) -> Matrix:
    """Basis of {y : y·rows = 0} over the rationals"""
    columns = transpose(rows)
    reduced, pivots = row_reduce(columns)
    size = len(rows)
    free = [c for c in range(size) if c not in pivots]
    basis = []
    for f in free:
        y = [Fraction(0)] * size
        y[f] = Fraction(1)
        for row, p in zip(reduced, pivots):
            y[p] = -row[f]
        basis.append(y)
    return basis


# ---------------------------------------------------------------------------
# Integer linear algebra
# ---------------------------------------------------------------------------

def xgcd(a: int, b: int) -> Tuple[int, int, int]:
    """Return (g, x, y) with a·x + b·y = g = gcd(a, b) ≥ 0"""
    old_r, r = a, b
    old_x, x = 1, 0
    old_y, y = 0, 1
    while r != 0:
        q = old_r // r
        old_r, r = r, old_r - q * r
        old_x, x = x, old_x - q * x
        old_y, y = y, old_y - q * y
    if old_r < 0:
        old_r, old_x, old_y = -old_r, -old_x, -old_y
    return old_r, old_x, old_y


def clear_denominators(vector: Sequence[Fraction]) -> List[int]:
    """Smallest primitive integer vector on the same ray"""
    vector = [Fraction(x) for x in vector]
    scale = reduce(lambda acc, x: acc * x.denominator // math.gcd(acc, x.denominator), vector, 1)
    ints = [int(x * scale) for x in vector]
    g = reduce(math.gcd, ints, 0)
    return [x // g for x in ints] if g > 1 else ints


def integer_content(vector: Sequence[int]) -> int:
    return reduce(math.gcd, (abs(int(v)) for v in vector), 0)


def saturate_rows(rows: Sequence[Sequence[int]]) -> List[List[int]]:
    """
    Basis of Z^d ∩ span_Q(rows) for independent integer rows.

    Integer column operations bring the rows to lower-triangular form
    rows = [H | 0]·W with W unimodular; the first l rows of W then span the
    primitive closure.
    """
    work = [[int(x) for x in row] for row in rows]
    l = len(work)
    d = len(work[0]) if work else 0
    w_rows = [[int(i == j) for j in range(d)] for i in range(d)]
    for r in range(l):
        if r >= d:
            raise PremiseViolation('more rows than columns in saturation')
        for c in range(r + 1, d):
            a, b = work[r][r], work[r][c]
            if b == 0:
                continue
            g, x, y = xgcd(a, b)
            ag, bg = a // g, b // g
            for row in work:
                col_r, col_c = row[r], row[c]
                row[r] = x * col_r + y * col_c
                row[c] = -bg * col_r + ag * col_c
            row_r, row_c = w_rows[r], w_rows[c]
            w_rows[r] = [ag * u + bg * v for u, v in zip(row_r, row_c)]
            w_rows[c] = [-y * u + x * v for u, v in zip(row_r, row_c)]
        if work[r][r] == 0:
            raise PremiseViolation('rows are linearly dependent')
    return w_rows[:l]
