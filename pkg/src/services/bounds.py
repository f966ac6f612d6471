"""
Bounds Service
Closed-form upper bounds for the dimension of divergent-on-average parameters
on fractals, corollary evaluators cross-checked against their parent
formulas, and named presets
"""

import re
import logging
from typing import Dict, List, Optional, Tuple

import sympy

from src.models.bound import BoundReport
from src.models.fractal import ProductFractal
from src.models.height import EtaProfile
from src.models.weights import Weights
from src.services.errors import OutOfRange, PremiseViolation, UnsupportedFractal
from src.services.fractal import factor_weights, preset
from src.services.height import cube_identity, explicit_eta
from src.services.numeric import exact_argmin, exact_sign, parse_real, to_sympy

logger = logging.getLogger(__name__)

SCENARIOS = (
    'fixed-theta-zero-emass',
    'fixed-theta-general',
    'fixed-xi-cube',
    'fixed-xi-cantor',
    'omega-variants',
)

_PRESET = re.compile(r'^(equal|cantor)-(\d+)x(\d+)$')


def _number(value) -> sympy.Expr:
    if isinstance(value, sympy.Expr):
        return value
    return to_sympy(parse_real(value))


def _omega(value) -> sympy.Expr:
    if isinstance(value, str) and value.strip().lower() in ('oo', 'inf', 'infinity'):
        return sympy.oo
    return _number(value)


def _in_unit_interval(name: str, value: sympy.Expr, open_left: bool = False):
    low = exact_sign(value)
    if (low <= 0 if open_left else low < 0) or exact_sign(value - 1) > 0:
        raise OutOfRange(f'{name} outside {"(0, 1]" if open_left else "[0, 1]"}', **{name: value})


def _agree(a: sympy.Expr, b: sympy.Expr) -> bool:
    return exact_sign(a - b) == 0


def _report(formula: str, raw: sympy.Expr, ambient: int, inputs: Dict, pivot: Optional[int] = None,
            checks: Optional[Dict[str, bool]] = None) -> BoundReport:
    raw = sympy.simplify(raw)
    clamped = exact_sign(raw) < 0
    if clamped:
        logger.info('%s is negative (%s); reporting 0', formula, raw)
    return BoundReport(formula=formula, value=sympy.Integer(0) if clamped else raw, raw=raw, ambient=ambient,
                       inputs=inputs, pivot=pivot, clamped=clamped, checks=dict(checks or {}))


def interval_product(m: int) -> ProductFractal:
    """[0,1]^m as a product of one-dimensional full factors"""
    return ProductFractal.product([preset('interval')] * m)


def preset_grid(name: str, m: int, n: int) -> ProductFractal:
    return ProductFractal.grid(m, n, preset(name))


# ---------------------------------------------------------------------------
# Fixed θ
# ---------------------------------------------------------------------------

def fixed_theta_value(dims, w, q, emass, pivot: int) -> sympy.Expr:
    """(1/w_k) Σ_i s_i (max{w_i, w_k} − w_i q + w_i E) for pivot k (1-based)"""
    wk = to_sympy(w[pivot - 1])
    total = sympy.Integer(0)
    for s, wi in zip(dims, w):
        wi = to_sympy(wi)
        total += s * (sympy.Max(wi, wk) - wi * q + wi * emass)
    return sympy.simplify(total / wk)


def _fixed_theta_scan(dims, w, q, emass) -> Tuple[sympy.Expr, int]:
    values = [fixed_theta_value(dims, w, q, emass, k) for k in range(1, len(w) + 1)]
    best = exact_argmin(values)
    return values[best], best + 1


def bound_fixed_theta(weights: Weights, fractal: ProductFractal, q, emass_lower,
                      emass_upper=None) -> Tuple[BoundReport, BoundReport, int]:
    """
    Hausdorff (lower EMass) and packing (upper EMass) bounds for the ξ in K
    with the orbit of (θ, ξ) divergent on average with proportion q,
    minimized over every pivot group k.
    """
    q, lower = _number(q), _number(emass_lower)
    upper = lower if emass_upper is None else _number(emass_upper)
    _in_unit_interval('q', q, open_left=True)
    _in_unit_interval('emass_lower', lower)
    _in_unit_interval('emass_upper', upper)
    if exact_sign(upper - lower) < 0:
        raise OutOfRange('upper EMass below the lower one', lower=lower, upper=upper)
    w = factor_weights(fractal, weights.a)
    dims = fractal.dimensions
    inputs = {'weights': weights.format(), 'dims': ','.join(map(str, dims)),
              'groups': ','.join(map(str, w)), 'q': q}

    hausdorff_value, hausdorff_pivot = _fixed_theta_scan(dims, w, q, lower)
    packing_value, packing_pivot = _fixed_theta_scan(dims, w, q, upper)
    hausdorff = _report('fixed-theta/hausdorff', hausdorff_value, weights.m, {**inputs, 'emass': lower},
                        pivot=hausdorff_pivot)
    packing = _report('fixed-theta/packing', packing_value, weights.m, {**inputs, 'emass': upper},
                      pivot=packing_pivot)
    return hausdorff, packing, hausdorff_pivot


def equal_weight_form(fractal: ProductFractal, q, emass) -> sympy.Expr:
    """dim K·(1 − q + E); m(1 − q) + m·E on the full cube"""
    return sympy.simplify(fractal.dimension * (1 - _number(q) + _number(emass)))


# ---------------------------------------------------------------------------
# Fixed ξ
# ---------------------------------------------------------------------------

def bound_fixed_xi(weights: Weights, grid: ProductFractal, q=None, omega=None,
                   profile: Optional[EtaProfile] = None) -> BoundReport:
    """
    dim_P(K) − (q/(a_1+b_1))·min_l η_l w_l, or with an exponent ω the variant
    dim_P(K) − (min_l η_l w_l + η_1 a_m b_n ω/(a_m + b_n + a_m ω))/(a_1+b_1).
    """
    if (q is None) == (omega is None):
        raise PremiseViolation('give exactly one of q and ω')
    if profile is None:
        try:
            profile = explicit_eta(grid, weights)
        except UnsupportedFractal:
            raise UnsupportedFractal('no explicit η for this fractal; pass an η profile')
    if profile.weights != weights:
        raise PremiseViolation('η profile was built for other weights')

    m, n = weights.m, weights.n
    a1, b1 = to_sympy(weights.a[0]), to_sympy(weights.b[0])
    am, bn = to_sympy(weights.a[-1]), to_sympy(weights.b[-1])
    dim_p = grid.dimension
    inputs = {'weights': weights.format(), 'dim_P': dim_p, 'eta_source': profile.source,
              'etas': ','.join(map(str, profile.etas)), 'eta': profile.eta}
    checks = {}
    if profile.source == 'cube':
        checks['cube_identity'] = cube_identity(weights)[2]

    if q is not None:
        q = _number(q)
        _in_unit_interval('q', q, open_left=True)
        raw = dim_p - q * profile.eta / (a1 + b1)
        return _report('fixed-xi/q', raw, m * n, {**inputs, 'q': q}, checks=checks)

    omega = _omega(omega)
    if exact_sign(omega) <= 0:
        raise OutOfRange('ω must be positive', omega=omega)
    if omega is sympy.oo:
        extra = profile[1] * bn
    else:
        extra = profile[1] * am * bn * omega / (am + bn + am * omega)
    raw = dim_p - (profile.eta + extra) / (a1 + b1)
    return _report('fixed-xi/omega', raw, m * n, {**inputs, 'omega': omega}, checks=checks)


def cube_corollary(weights: Weights, q=None, omega=None) -> sympy.Expr:
    """mn − (min{m a_m, n b_n} [+ m a_m b_n ω/(a_m + b_n + a_m ω)])/(a_1+b_1)"""
    m, n = weights.m, weights.n
    a1, b1 = to_sympy(weights.a[0]), to_sympy(weights.b[0])
    am, bn = to_sympy(weights.a[-1]), to_sympy(weights.b[-1])
    head = sympy.Min(m * am, n * bn)
    if q is not None:
        return sympy.simplify(m * n - _number(q) * head / (a1 + b1))
    omega = _omega(omega)
    extra = m * bn if omega is sympy.oo else m * am * bn * omega / (am + bn + am * omega)
    return sympy.simplify(m * n - (head + extra) / (a1 + b1))


def equal_cube_corollary(m: int, n: int, q=None, omega=None) -> sympy.Expr:
    """mn − q·mn/(m+n), or mn − (mn/(m+n))(1 + mω/(m+n+nω))"""
    share = sympy.Rational(m * n, m + n)
    if q is not None:
        return m * n - _number(q) * share
    omega = _omega(omega)
    if omega is sympy.oo:
        return m * n - share * (1 + sympy.Rational(m, n))
    return sympy.simplify(m * n - share * (1 + m * omega / (m + n + n * omega)))


def _uniform_dimension(grid: ProductFractal) -> sympy.Expr:
    dims = grid.dimensions
    if any(not _agree(s, dims[0]) for s in dims[1:]):
        raise UnsupportedFractal('the closed form needs equal entry dimensions')
    return dims[0]


def cantor_corollary(weights: Weights, grid: ProductFractal, q=None, omega=None) -> sympy.Expr:
    """s times the cube form, for m = 1 or n = 1 with every entry of dimension s"""
    if weights.m != 1 and weights.n != 1:
        raise UnsupportedFractal('the Cantor closed form needs m = 1 or n = 1')
    return sympy.simplify(_uniform_dimension(grid) * cube_corollary(weights, q=q, omega=omega))


# ---------------------------------------------------------------------------
# Corollary suite
# ---------------------------------------------------------------------------

def _fixed_xi_pair(weights: Weights, grid: ProductFractal, formula: str, closed: sympy.Expr,
                   q=None, omega=None) -> List[BoundReport]:
    parent = bound_fixed_xi(weights, grid, q=q, omega=omega)
    checks = {'matches_parent': _agree(closed, parent.raw)}
    if weights.is_equal() and formula.startswith('fixed-xi/cube'):
        checks['matches_equal_weight_form'] = _agree(closed, equal_cube_corollary(weights.m, weights.n, q, omega))
    inputs = {'weights': weights.format(), 'q': q, 'omega': omega}
    return [parent, _report(formula, closed, weights.m * weights.n, inputs, checks=checks)]


def bound_corollary_suite(weights: Weights, scenario: str, q=1, emass=0, omega=1,
                          fractal: Optional[ProductFractal] = None) -> List[BoundReport]:
    """Evaluate the corollaries of one scenario next to their parent formulas"""
    if scenario not in SCENARIOS:
        raise OutOfRange(f'unknown scenario {scenario!r}', choices=','.join(SCENARIOS))
    m, n = weights.m, weights.n
    reports: List[BoundReport] = []

    if scenario.startswith('fixed-theta'):
        fractal = fractal or interval_product(m)
        if scenario == 'fixed-theta-zero-emass':
            hausdorff, packing, _ = bound_fixed_theta(weights, fractal, 1, 0, 0)
            checks = {'matches_parent': _agree(hausdorff.raw, 0) and _agree(packing.raw, 0)}
            reports += [hausdorff, packing,
                        _report('fixed-theta/zero-emass', sympy.Integer(0), m, {'weights': weights.format()},
                                checks=checks)]
            return reports
        q, emass = _number(q), _number(emass)
        hausdorff, packing, pivot = bound_fixed_theta(weights, fractal, q, emass)
        reports += [hausdorff, packing]
        if weights.is_equal():
            closed = equal_weight_form(fractal, q, emass)
            reports.append(_report('fixed-theta/equal-weights', closed, m, {'q': q, 'emass': emass},
                                   checks={'matches_parent': _agree(closed, hausdorff.raw)}))
        if _agree(q, 1) and exact_sign(emass - 1) < 0:
            reports.append(_report('fixed-theta/below-m', hausdorff.raw, m, {'emass': emass}, pivot=pivot,
                                   checks={'strictly_below_m': exact_sign(hausdorff.raw - m) < 0}))
        return reports

    if scenario == 'fixed-xi-cube':
        grid = fractal or preset_grid('interval', m, n)
        return _fixed_xi_pair(weights, grid, 'fixed-xi/cube', cube_corollary(weights, q=q), q=q)

    if scenario == 'fixed-xi-cantor':
        grid = fractal or preset_grid('cantor', m, n)
        return _fixed_xi_pair(weights, grid, 'fixed-xi/cantor', cantor_corollary(weights, grid, q=q), q=q)

    cube = preset_grid('interval', m, n)
    reports += _fixed_xi_pair(weights, cube, 'fixed-xi/cube/omega', cube_corollary(weights, omega=omega),
                              omega=omega)
    if m == 1 or n == 1:
        grid = fractal or preset_grid('cantor', m, n)
        reports += _fixed_xi_pair(weights, grid, 'fixed-xi/cantor/omega',
                                  cantor_corollary(weights, grid, omega=omega), omega=omega)
    w = sympy.Symbol('omega', positive=True)
    limit = sympy.limit(cube_corollary(weights, omega=w), w, sympy.oo)
    at_infinity = bound_fixed_xi(weights, cube, omega='oo')
    reports.append(_report('fixed-xi/cube/omega-limit', limit, m * n, {'weights': weights.format()},
                           checks={'matches_parent': _agree(limit, at_infinity.raw)}))
    return reports


# ---------------------------------------------------------------------------
# General estimates
# ---------------------------------------------------------------------------

def bound_contraction(s, beta, p, a1_plus_b1, a=None, ambient: Optional[int] = None) -> List[BoundReport]:
    """s − pβ/(a_1+b_1) and, with a growth rate a, s − (a+β)/(a_1+b_1)"""
    s, beta, p, total = _number(s), _number(beta), _number(p), _number(a1_plus_b1)
    _in_unit_interval('p', p, open_left=True)
    if exact_sign(total) <= 0 or exact_sign(beta) <= 0:
        raise PremiseViolation('β and a_1+b_1 must be positive')
    if exact_sign(total * s - beta) <= 0:
        raise PremiseViolation('the contraction rate needs β < (a_1+b_1)s', beta=beta, s=s)
    ambient = ambient if ambient is not None else int(sympy.ceiling(s))
    inputs = {'s': s, 'beta': beta, 'p': p, 'a1_plus_b1': total}
    reports = [_report('contraction', s - p * beta / total, ambient, inputs)]
    if a is not None:
        a = _number(a)
        if exact_sign(a) <= 0 or exact_sign(total * s - beta - a) < 0:
            raise OutOfRange('growth rate outside (0, (a_1+b_1)s − β]', a=a)
        reports.append(_report('contraction/growth', s - (a + beta) / total, ambient, {**inputs, 'a': a}))
    return reports


def bound_general_estimate(profile: EtaProfile, s, p, gamma=None) -> List[BoundReport]:
    """s − pη/(a_1+b_1) and, with γ, s − (η + η_1 γ)/(a_1+b_1)"""
    weights = profile.weights
    s, p = _number(s), _number(p)
    _in_unit_interval('p', p, open_left=True)
    total = to_sympy(weights.a[0] + weights.b[0])
    ambient = weights.m * weights.n
    inputs = {'s': s, 'p': p, 'eta': profile.eta, 'eta_1': profile[1]}
    reports = [_report('general-estimate', s - p * profile.eta / total, ambient, inputs)]
    if gamma is not None:
        gamma = _number(gamma)
        ceiling = (s * total - profile.eta) / profile[1]
        if exact_sign(gamma) <= 0 or exact_sign(gamma - ceiling) > 0:
            raise OutOfRange('γ outside (0, (s(a_1+b_1) − η)/η_1]', gamma=gamma, ceiling=sympy.simplify(ceiling))
        reports.append(_report('general-estimate/growth', s - (profile.eta + profile[1] * gamma) / total,
                               ambient, {**inputs, 'gamma': gamma}))
    return reports


# ---------------------------------------------------------------------------
# Presets
# ---------------------------------------------------------------------------

def preset_names() -> List[str]:
    return ['cheung', 'equal-<m>x<n>', 'cantor-<m>x<n>']


def bound_preset(name: str) -> BoundReport:
    """cheung: (m, n) = (2, 1) on the full square; equal-MxN; cantor-MxN (m or n equal to 1)"""
    name = name.strip().lower()
    if name == 'cheung':
        kind, m, n = 'equal', 2, 1
    else:
        match = _PRESET.match(name)
        if not match:
            raise OutOfRange(f'unknown preset {name!r}', choices=','.join(preset_names()))
        kind, m, n = match.group(1), int(match.group(2)), int(match.group(3))
    if m < 1 or n < 1:
        raise OutOfRange('preset dimensions must be positive', m=m, n=n)
    weights = Weights.equal(m, n)
    grid = preset_grid('interval' if kind == 'equal' else 'cantor', m, n)
    report = bound_fixed_xi(weights, grid, q=1)
    logger.info('preset %s -> %s', name, report.value)
    return BoundReport(formula=report.formula, value=report.value, raw=report.raw, ambient=report.ambient,
                       inputs={**report.inputs, 'preset': name}, pivot=report.pivot, clamped=report.clamped,
                       checks=report.checks)
