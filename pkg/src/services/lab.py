"""
Lab Service
One entry point per lab command, shared by the click CLI and the HTTP routes.
Each takes a plain dict of inputs (CLI options or a JSON body) and returns an
Outcome holding the JSON result and any CSV tables.
"""

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Dict, List, Optional

from src.config import settings
from src.models.cover import CoverParams
from src.models.fractal import ProductFractal
from src.models.lattice import AffineLattice
from src.services.bounds import (
    SCENARIOS, bound_contraction, bound_corollary_suite, bound_fixed_theta, bound_fixed_xi,
    bound_general_estimate, bound_preset,
)
from src.services.covering import box_counting_estimate, cover_count_bound, run_cover
from src.services.diophantine import (
    best_approximation, dani_forward, dani_omega, div_surface, emass_estimate, singular_indicator,
    trajectory, uniform_exponent_estimate,
)
from src.services.errors import ConfigError, OutOfRange, UnsupportedFractal
from src.services.fractal import (
    PRESETS, ball_intersection_check, ball_intersection_constant, cylinders, parse_ifs, FractalSampler,
)
from src.services.height import (
    choose_epsilon, constraint_margins, contraction_verify, critical_exponent_mc, cube_identity,
    eta_feasible, eta_perturbed, explicit_eta, height_f, phi_contraction_check, psi, zeta_lower_bounds,
)
from src.services.lattice import (
    covolume, emm_check, format_lattice, lambda0, lambda0_affine, phi_l, read_lattice, reduce_lattice,
    sublattice_record,
)
from src.services.numeric import format_number, parse_rational, parse_real
from src.services.payload import (
    fractal_from, int_value, matrix_from, optional, point_from, profile_from, rational_list, real_list,
    theta_xi, weights_from,
)
from src.services.reporting import store_run, summary_document

logger = logging.getLogger(__name__)

DEFAULT_T_MAX = 1024


@dataclass
class Outcome:
    subcommand: str
    config: Dict[str, Any]
    result: Any
    tables: Dict[str, List[Dict]] = field(default_factory=dict)

    def document(self) -> Dict:
        return summary_document(self.subcommand, self.config, self.result,
                                seed=self.config.get('seed'), prec=self.config.get('prec'))


def _config(data: Dict, **extra) -> Dict:
    config = {key: value for key, value in data.items() if value is not None}
    config.setdefault('seed', settings.seed)
    config.setdefault('prec', settings.prec)
    config.update(extra)
    return config


def _prec(data: Dict) -> int:
    return int_value(data, 'prec', settings.prec)


def _seed(data: Dict) -> int:
    return int_value(data, 'seed', settings.seed)


def _flat(row: Dict) -> Dict:
    """Lists become space-separated cells so CSV columns stay scalar"""
    return {key: ' '.join(str(v) for v in value) if isinstance(value, list) else value
            for key, value in row.items()}


def _horizons(data: Dict) -> List:
    """Explicit 'T' list, else powers of two up to 'T_max'"""
    if data.get('T') is not None:
        return real_list(data['T'])
    T_max = parse_rational(data.get('T_max', DEFAULT_T_MAX))
    grid, T = [], Fraction(2)
    while T <= T_max:
        grid.append(T)
        T *= 2
    if not grid:
        raise OutOfRange('T_max must be at least 2', T_max=str(T_max))
    return grid


def _coordinates(value) -> List[List[int]]:
    if value is None:
        raise ConfigError('integer coordinates are required')
    if isinstance(value, str):
        value = [row.split(',') for row in value.split(';') if row.strip()]
    return [[int(v) for v in row] for row in value]


def _lattice(data: Dict, d: int) -> AffineLattice:
    """The lattice given as text, else Z^d with the optional 'shift'"""
    if data.get('lattice'):
        return read_lattice(data['lattice'])
    shift = rational_list(data.get('shift')) or None
    x = AffineLattice.standard(d)
    return AffineLattice.build(x.basis_matrix(), shift) if shift else x


# ---------------------------------------------------------------------------
# Diophantine
# ---------------------------------------------------------------------------

def approximation(data: Dict) -> Outcome:
    weights = weights_from(data.get('weights'))
    theta, xi = theta_xi(data, weights)
    record = best_approximation(theta, xi, weights, parse_real(data.get('T', DEFAULT_T_MAX)), _prec(data))
    return Outcome('approximation', _config(data), record.to_dict())


def exponent(data: Dict) -> Outcome:
    """Best approximations and ω(T) along a horizon grid, with the Sing indicator when ε are given"""
    weights = weights_from(data.get('weights'))
    theta, xi = theta_xi(data, weights)
    grid = _horizons(data)
    prec = _prec(data)
    curve = uniform_exponent_estimate(theta, xi, weights, grid, prec)
    result = curve.to_dict()
    if data.get('eps') is not None:
        indicator = singular_indicator(theta, xi, weights, real_list(data['eps']), grid,
                                       omega=optional(data, 'omega', parse_rational), prec=prec)
        result['singular'] = indicator.to_dict()
    rows = [_flat(point.to_dict()) for point in curve.points]
    return Outcome('exponent', _config(data), result, {'curve': rows})


def dani(data: Dict) -> Outcome:
    """Best approximation at T = t pushed through the forward or the ω time change"""
    weights = weights_from(data.get('weights'))
    theta, xi = theta_xi(data, weights)
    t = parse_real(data.get('t', DEFAULT_T_MAX))
    approx = best_approximation(theta, xi, weights, t, _prec(data))
    if data.get('omega') is not None:
        result = dani_omega(weights, parse_rational(data['omega']), approx.T, approx)
    else:
        result = dani_forward(weights, approx.T, parse_rational(data.get('delta', 1)), approx)
    return Outcome('dani', _config(data), {'approximation': approx.to_dict(), 'dani': result.to_dict()})


def trajectory_run(data: Dict) -> Outcome:
    weights = weights_from(data.get('weights'))
    point = point_from(data, weights)
    record = trajectory(point, weights, parse_real(data.get('t', 2)), int_value(data, 'N', 10), _prec(data))
    result = {'point': point.to_dict(), **record.to_dict()}
    return Outcome('trajectory', _config(data), result, {'trajectory': record.rows()})


def emass(data: Dict) -> Outcome:
    weights = weights_from(data.get('weights'))
    point = point_from(data, weights)
    estimate = emass_estimate(point, weights, parse_real(data.get('t', 2)), parse_real(data.get('eps', '1/10')),
                              int_value(data, 'N', 50), refinement=int_value(data, 'refinement', 4),
                              prec=_prec(data))
    return Outcome('emass', _config(data), {'point': point.to_dict(), **estimate.to_dict()})


def divfrac(data: Dict) -> Outcome:
    """Div fractions on the (ε, T) surface"""
    weights = weights_from(data.get('weights'))
    point = point_from(data, weights)
    eps_grid = real_list(data.get('eps', '1/10'))
    horizons = real_list(data.get('T', '10'))
    base = parse_real(data['t']) if data.get('t') else None
    surface = div_surface(point, weights, eps_grid, horizons, parse_rational(data.get('step', '1/8')), _prec(data), base)
    rows = [d.to_dict() for d in surface]
    return Outcome('divfrac', _config(data), {'point': point.to_dict(), 'surface': rows}, {'surface': rows})


# ---------------------------------------------------------------------------
# Fractals
# ---------------------------------------------------------------------------

def _ifs_or_product(text: Optional[str]):
    parts = [p for p in (text or 'cantor').split(';') if p.strip()]
    if len(parts) == 1:
        return parse_ifs(parts[0])
    return ProductFractal.product([parse_ifs(p) for p in parts])


def ifs(data: Dict) -> Outcome:
    """
    Actions: 'cylinders' (depth), 'sample' (count, seed), 'constants'
    (λ̂ and L, optional β list), 'box-count' (box dimension of a sample)
    and 'presets'.
    """
    action = data.get('action', 'cylinders')
    if action == 'presets':
        return Outcome('ifs', _config(data), {'presets': {name: PRESETS[name]().to_dict() for name in sorted(PRESETS)}})
    fractal = _ifs_or_product(data.get('fractal'))
    result: Dict[str, Any] = {'fractal': fractal.to_dict(), 'dimension': str(fractal.dimension)}
    tables: Dict[str, List[Dict]] = {}

    if action == 'cylinders':
        depth = int_value(data, 'depth', 3)
        cells = [c.to_dict() for c in cylinders(fractal, depth)]
        result['cylinders'] = cells
        tables['cylinders'] = [{'word': c['word'], 'depth': c['depth'], 'measure': c['measure']} for c in cells]
    elif action in ('sample', 'box-count'):
        count = int_value(data, 'count', 1000)
        points = FractalSampler(fractal, seed=_seed(data), depth=int_value(data, 'depth', 40)).sample(count)
        if action == 'sample':
            tables['samples'] = [{f'x_{i + 1}': float(v) for i, v in enumerate(row)} for row in points]
            result['count'] = count
            result['mean'] = points.mean(axis=0).tolist()
        else:
            estimate = box_counting_estimate(points)
            result['box_count'] = estimate.to_dict()
            tables['box_count'] = estimate.curve()
    elif action == 'constants':
        factors = (fractal,) if not isinstance(fractal, ProductFractal) else fractal.factors
        result['constants'] = [ball_intersection_constant(f, int_value(data, 'depth', 10)).to_dict()
                               for f in factors if f.p > 1]
        if data.get('beta') is not None:
            betas = rational_list(data['beta'])
            result['ball_counts'] = [ball_intersection_check(f, betas) for f in factors if f.p > 1]
    else:
        raise ConfigError(f'unknown ifs action {action!r}')
    return Outcome('ifs', _config(data), result, tables)


# ---------------------------------------------------------------------------
# Lattices
# ---------------------------------------------------------------------------

def lattice(data: Dict) -> Outcome:
    """Actions on a lattice file: lambda0, phi, covolume, emm, reduce, psi"""
    if not data.get('lattice'):
        raise ConfigError('a lattice is required')
    x = read_lattice(data['lattice'])
    action = data.get('action', 'lambda0')
    result: Dict[str, Any] = {'lattice': x.to_dict()}
    if action == 'lambda0':
        result['lambda0'] = lambda0(x.homogeneous_part()).to_dict()
        if not x.homogeneous():
            result['lambda0_affine'] = lambda0_affine(x).to_dict()
    elif action == 'phi':
        grades = [int_value(data, 'grade', 1)] if data.get('grade') is not None else range(1, x.d + 1)
        result['phi'] = [phi_l(x, grade).to_dict() for grade in grades]
    elif action == 'covolume':
        coords = _coordinates(data.get('coordinates'))
        result['covolume'] = format_number(covolume(x, coords))
        result['record'] = sublattice_record(x, coords).to_dict()
    elif action == 'emm':
        first = sublattice_record(x, _coordinates(data.get('first')))
        second = sublattice_record(x, _coordinates(data.get('second')))
        result['emm'] = emm_check(x, first, second).to_dict()
    elif action == 'reduce':
        reduced, coords = reduce_lattice(x)
        result['reduced'] = format_lattice(reduced)
        result['transform'] = coords
    elif action == 'psi':
        value = psi(x)
        result['psi'] = 'inf' if value is None else format_number(value)
    else:
        raise ConfigError(f'unknown lattice action {action!r}')
    return Outcome('lattice', _config(data), result)


# ---------------------------------------------------------------------------
# Covering
# ---------------------------------------------------------------------------

def _cover_params(data: Dict) -> CoverParams:
    weights = weights_from(data.get('weights'))
    reference = rational_list(data.get('reference')) or None
    return CoverParams(
        weights=weights,
        fractal=fractal_from(data.get('fractal'), weights, layout='product'),
        t=parse_rational(data.get('t', 4)),
        epsilon=parse_rational(data.get('epsilon', '1/4')),
        delta=parse_rational(data.get('delta', '1/64')),
        q_prime=parse_rational(data.get('q_prime', 1)),
        N=int_value(data, 'N', 6),
        M=int_value(data, 'M', 1),
        samples=int_value(data, 'samples', settings.alive_samples),
        seed=_seed(data),
        reference=tuple(reference) if reference else None,
    )


def cover(data: Dict) -> Outcome:
    """Refinement run along the orbit of θ, plus the cover-count bound when γ is given"""
    params = _cover_params(data)
    theta = matrix_from(data.get('theta', 0), params.weights.m, params.weights.n)
    L = optional(data, 'L', int)
    run = run_cover(params, theta, L=L, pivot=optional(data, 'pivot', int),
                    gamma=optional(data, 'gamma', parse_rational), prec=_prec(data))
    result = run.to_dict()
    tables = {'cover': run.rows, 'steps': [_flat(step.to_dict()) for step in run.steps]}
    alive = run.final.alive if run.final else ()
    if len(alive) > 1:
        estimate = box_counting_estimate(alive)
        result['box_count'] = estimate.to_dict()
        tables['box_count'] = estimate.curve()
    return Outcome('cover', _config(data), result, tables)


def cover_bound(data: Dict) -> Outcome:
    params = _cover_params(data)
    bound = cover_count_bound(params, int_value(data, 'pivot', 1), data.get('i_fraction', 0),
                              data.get('gamma', '1/1000'), L=optional(data, 'L', int), prec=_prec(data))
    return Outcome('cover-bound', _config(data), bound.to_dict())


# ---------------------------------------------------------------------------
# Height
# ---------------------------------------------------------------------------

def _scales(data: Dict, weights):
    return matrix_from(data['r'], weights.m, weights.n) if data.get('r') is not None else None


def height_verify(data: Dict) -> Outcome:
    """Monte-Carlo contraction check of f_{ε,η} at one point, optionally per grade"""
    weights = weights_from(data.get('weights'))
    grid = fractal_from(data.get('fractal'), weights)
    profile = profile_from(data, weights, grid)
    x = _lattice(data, weights.d)
    eps = parse_rational(data.get('eps', '1/4'))
    t = parse_real(data.get('t', 4))
    r = _scales(data, weights)
    samples = int_value(data, 'samples', 10_000)
    report = contraction_verify(x, profile, eps, t, grid, r=r, samples=samples, seed=_seed(data), prec=_prec(data))
    result = {'height': height_f(x, profile, eps).to_dict(), **report.to_dict()}
    tables = {}
    if data.get('phi'):
        terms = phi_contraction_check(x, profile, t, grid, r=r, samples=min(samples, 1000), seed=_seed(data),
                                      C_hat=report.params.C_hat, prec=_prec(data))
        result['phi_terms'] = [term.to_dict() for term in terms]
        tables['phi_terms'] = result['phi_terms']
    return Outcome('height-verify', _config(data), result, tables)


def zeta(data: Dict) -> Outcome:
    """
    Lower bounds on ζ_l, the explicit η profile and, when γ is given, the
    Monte-Carlo critical-exponent integral for one grade or every grade.
    """
    weights = weights_from(data.get('weights'))
    grid = fractal_from(data.get('fractal'), weights)
    result: Dict[str, Any] = {'zeta': zeta_lower_bounds(grid, weights).to_dict()}
    try:
        profile = explicit_eta(grid, weights)
        result['eta'] = profile.to_dict()
        result['eta_feasible'] = eta_feasible(profile)
    except UnsupportedFractal as exc:
        logger.info('No explicit η profile: %s', exc)
        result['eta'] = None
    if grid.is_full_cube():
        lhs, rhs, holds = cube_identity(weights)
        result['cube_identity'] = {'lhs': str(lhs), 'rhs': str(rhs), 'holds': holds}

    tables: Dict[str, List[Dict]] = {}
    if data.get('gamma') is not None:
        grades = [int_value(data, 'grade', 1)] if data.get('grade') is not None else range(1, weights.d)
        reports = [critical_exponent_mc(grid, weights, grade, parse_real(data['gamma']), r=_scales(data, weights),
                                        samples=int_value(data, 'samples', 4096), seed=_seed(data))
                   for grade in grades]
        result['critical'] = [report.to_dict() for report in reports]
        tables['running_means'] = [{'grade': report.grade, 'samples': n, 'mean': mean}
                                   for report in reports for n, mean in report.running_means]
    return Outcome('zeta', _config(data), result, tables)


def eta(data: Dict) -> Outcome:
    """η profile with its constraint margins, an optional δ-perturbation and the ε recipe"""
    weights = weights_from(data.get('weights'))
    grid = fractal_from(data.get('fractal'), weights)
    profile = profile_from(data, weights, grid)
    result: Dict[str, Any] = {
        'profile': profile.to_dict(),
        'feasible': eta_feasible(profile),
        'strictly_feasible': eta_feasible(profile, strict=True),
        'margins': [{'i': i, 'j': j, 'margin': str(margin)}
                    for (i, j), margin in sorted(constraint_margins(profile.etas, profile.d).items())],
    }
    if data.get('delta') is not None:
        perturbed = eta_perturbed(profile, parse_rational(data['delta']))
        result['perturbed'] = perturbed.to_dict()
        profile = perturbed
    if all(data.get(key) is not None for key in ('C', 't', 'xi')):
        result['epsilon'] = str(choose_epsilon(profile, parse_real(data['C']), parse_real(data['t']),
                                               parse_real(data['xi'])))
    return Outcome('eta', _config(data), result)


# ---------------------------------------------------------------------------
# Bounds
# ---------------------------------------------------------------------------

FORMULAS = ('fixed-theta', 'fixed-xi', 'suite', 'contraction', 'general-estimate')


def bound(data: Dict) -> Outcome:
    """A preset, or one formula family: fixed-theta, fixed-xi, suite, contraction, general-estimate"""
    if data.get('preset'):
        report = bound_preset(data['preset'])
        return Outcome('bound', _config(data), [report.to_dict()], {'bounds': [_bound_row(report.to_dict())]})

    formula = data.get('formula', 'fixed-xi')
    weights = weights_from(data.get('weights'))
    if formula == 'fixed-theta':
        fractal = fractal_from(data.get('fractal'), weights, layout='product')
        hausdorff, packing, _ = bound_fixed_theta(weights, fractal, data.get('q', 1), data.get('emass', 0),
                                                  data.get('emass_upper'))
        reports = [hausdorff, packing]
    elif formula == 'fixed-xi':
        grid = fractal_from(data.get('fractal'), weights)
        profile = profile_from(data, weights, grid) if data.get('etas') is not None or data.get('zeta') else None
        omega = data.get('omega')
        q = data.get('q', 1) if omega is None else None
        reports = [bound_fixed_xi(weights, grid, q=q, omega=omega, profile=profile)]
    elif formula == 'suite':
        scenario = data.get('scenario', SCENARIOS[0])
        fractal = None
        if data.get('fractal'):
            layout = 'product' if scenario.startswith('fixed-theta') else 'grid'
            fractal = fractal_from(data['fractal'], weights, layout=layout)
        reports = bound_corollary_suite(weights, scenario, q=data.get('q', 1), emass=data.get('emass', 0),
                                        omega=data.get('omega', 1), fractal=fractal)
    elif formula == 'contraction':
        reports = bound_contraction(data.get('s'), data.get('beta'), data.get('p', 1), data.get('a1_plus_b1'),
                                    a=data.get('a'), ambient=optional(data, 'ambient', int))
    elif formula == 'general-estimate':
        grid = fractal_from(data.get('fractal'), weights)
        profile = profile_from(data, weights, grid)
        reports = bound_general_estimate(profile, data.get('s', grid.dimension), data.get('p', 1),
                                         gamma=data.get('gamma'))
    else:
        raise ConfigError(f'unknown formula {formula!r}', choices=','.join(FORMULAS))
    rows = [report.to_dict() for report in reports]
    return Outcome('bound', _config(data), rows, {'bounds': [_bound_row(row) for row in rows]})


def _bound_row(row: Dict) -> Dict:
    return {key: row[key] for key in ('formula', 'value', 'value_float', 'ambient', 'pivot', 'clamped')}


COMMANDS: Dict[str, Callable[[Dict], Outcome]] = {
    'approximation': approximation,
    'exponent': exponent,
    'dani': dani,
    'trajectory': trajectory_run,
    'emass': emass,
    'divfrac': divfrac,
    'ifs': ifs,
    'lattice': lattice,
    'cover': cover,
    'cover-bound': cover_bound,
    'height-verify': height_verify,
    'zeta': zeta,
    'eta': eta,
    'bound': bound,
}


def execute(name: str, data: Dict) -> Outcome:
    if name not in COMMANDS:
        raise ConfigError(f'unknown command {name!r}', choices=','.join(sorted(COMMANDS)))
    logger.info('Running %s', name)
    return COMMANDS[name](data)


SEED_PRESETS = ('cheung', 'equal-1x1', 'equal-2x1', 'equal-2x2', 'equal-3x2', 'cantor-1x1')


def seed_preset_runs():
    """Store one bound run per canonical preset; the caller owns the application context"""
    return [store_run(execute('bound', {'preset': name}).document()) for name in SEED_PRESETS]
