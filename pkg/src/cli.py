"""
Command line interface for the lab.

Every subcommand prints its JSON summary (sorted keys, reproducibility
header) to stdout, writes JSON and CSV artifacts under --out when given and
records the run in the registry with --store. Domain errors exit 1, bad
configuration exits 2.
"""

import logging
from typing import Dict, Optional

import click
import pandas as pd

from src.config import configure_logging, settings
from src.services.errors import ConfigError, LabError
from src.services.lab import Outcome, execute
from src.services.reporting import dumps, store_run, write_artifacts

logger = logging.getLogger(__name__)

GLOBAL_OPTIONS = (
    click.option('--weights', default=None, help="Weights, e.g. 'm=2 n=1 a=1/2,1/2 b=1' or 'm=1,n=1'."),
    click.option('--fractal', default=None, help="IFS preset or text; 'a;b' lists factors or grid entries."),
    click.option('--seed', type=int, default=None, help='Random seed (DLAB_SEED).'),
    click.option('--prec', type=int, default=None, help='Minimum working precision in bits (DLAB_PREC).'),
    click.option('--out', type=click.Path(file_okay=False), default=None, help='Directory for JSON/CSV artifacts.'),
    click.option('--threads', type=int, default=None, help='Worker processes (DLAB_THREADS).'),
    click.option('--store/--no-store', default=None, help='Record the run in the registry.'),
)

GLOBAL_KEYS = ('weights', 'fractal', 'seed', 'prec', 'out', 'threads', 'store')


def global_options(func):
    for option in reversed(GLOBAL_OPTIONS):
        func = option(func)
    return func


def _read(path: Optional[str]) -> Optional[str]:
    if path is None:
        return None
    with open(path, encoding='utf-8') as handle:
        return handle.read()


def _merge(ctx: click.Context, local: Dict) -> Dict:
    """Subcommand-level global options win over the group's"""
    merged = dict(ctx.obj or {})
    merged.update({key: value for key, value in local.items() if value is not None})
    return merged


def _emit_error(ctx: click.Context, error: LabError, code: int):
    click.echo(dumps(error.to_dict()))
    ctx.exit(code)


def _run(ctx: click.Context, name: str, data: Dict, options: Dict) -> Optional[Outcome]:
    lab = _merge(ctx, {key: options.pop(key, None) for key in GLOBAL_KEYS})
    try:
        settings.update(prec=lab.get('prec'), seed=lab.get('seed'), threads=lab.get('threads'))
    except ConfigError as e:
        _emit_error(ctx, e, 2)
    data = {key: value for key, value in data.items() if value is not None}
    for key in ('weights', 'fractal'):
        if lab.get(key) is not None:
            data.setdefault(key, lab[key])
    data.setdefault('seed', settings.seed)
    data.setdefault('prec', settings.prec)

    try:
        outcome = execute(name, data)
    except ConfigError as e:
        _emit_error(ctx, e, 2)
    except LabError as e:
        logger.error('%s failed: %s', name, e.message)
        _emit_error(ctx, e, 1)

    document = outcome.document()
    click.echo(dumps(document))
    if lab.get('out'):
        stem = f"{name}_seed{settings.seed}"
        for path in write_artifacts(lab['out'], stem, document, outcome.tables):
            click.echo(f'wrote {path}', err=True)
    if lab.get('store'):
        from src.main import app
        with app.app_context():
            record = store_run(document)
        click.echo(f'stored run {record.id}', err=True)
    return outcome


@click.group(context_settings={'auto_envvar_prefix': 'DLAB', 'help_option_names': ['-h', '--help']})
@global_options
@click.option('--log-level', default=None, help='Logging level (DLAB_LOG_LEVEL).')
@click.pass_context
def cli(ctx, log_level, **options):
    """dlab: weighted inhomogeneous Diophantine approximation laboratory"""
    ctx.ensure_object(dict)
    ctx.obj.update({key: value for key, value in options.items() if value is not None})
    try:
        settings.update(log_level=log_level.upper() if log_level else None)
    except ConfigError as e:
        _emit_error(ctx, e, 2)
    configure_logging(settings.log_level)


# ---------------------------------------------------------------------------
# Diophantine
# ---------------------------------------------------------------------------

def point_options(func):
    func = click.option('--lattice', 'lattice_file', type=click.Path(exists=True, dir_okay=False), default=None,
                        help='Start from the lattice in this file instead of θ, ξ.')(func)
    func = click.option('--xi', default=None, help='ξ entries, comma separated.')(func)
    func = click.option('--theta', default=None, help="θ rows separated by ';', entries by ','.")(func)
    return func


@cli.command()
@global_options
@click.option('--theta', required=True, help="θ rows separated by ';', entries by ','.")
@click.option('--xi', default=None, help='ξ entries, comma separated.')
@click.option('--T', 'horizons', default=None, help='Horizon grid, comma separated.')
@click.option('--T-max', 't_max', default=None, help='Largest power-of-two horizon when --T is absent.')
@click.option('--eps', default=None, help='ε grid for the Sing indicator.')
@click.option('--omega', default=None, help='ω for the ω-improvability indicator.')
@click.pass_context
def exponent(ctx, theta, xi, horizons, t_max, eps, omega, **options):
    """Best approximations and the ω̂ curve"""
    _run(ctx, 'exponent', {'theta': theta, 'xi': xi, 'T': horizons, 'T_max': t_max, 'eps': eps,
                           'omega': omega}, options)


@cli.command()
@global_options
@click.option('--theta', required=True)
@click.option('--xi', default=None)
@click.option('--t', default='1024', show_default=True, help='Horizon of the best approximation.')
@click.option('--delta', default=None, help='δ of the forward time change.')
@click.option('--omega', default=None, help='ω of the exponent time change.')
@click.pass_context
def dani(ctx, theta, xi, t, delta, omega, **options):
    """Push a best approximation through the Dani time change"""
    _run(ctx, 'dani', {'theta': theta, 'xi': xi, 't': t, 'delta': delta, 'omega': omega}, options)


@cli.command()
@global_options
@point_options
@click.option('--t', default='2', show_default=True, help='Flow base t > 1.')
@click.option('--N', 'horizon', type=int, default=10, show_default=True)
@click.pass_context
def trajectory(ctx, theta, xi, lattice_file, t, horizon, **options):
    """λ₀ and λ̃₀ along g_{t^k} x, k = 1..N"""
    _run(ctx, 'trajectory', {'theta': theta, 'xi': xi, 'lattice': _read(lattice_file), 't': t, 'N': horizon},
         options)


@cli.command()
@global_options
@point_options
@click.option('--t', default='2', show_default=True)
@click.option('--eps', default='1/10', show_default=True)
@click.option('--N', 'horizon', type=int, default=50, show_default=True)
@click.option('--refinement', type=int, default=4, show_default=True, help='Continuous-time samples per step.')
@click.pass_context
def emass(ctx, theta, xi, lattice_file, t, eps, horizon, refinement, **options):
    """Escape-of-mass fraction #I(t, ε, N)/N with its discretization sandwich"""
    _run(ctx, 'emass', {'theta': theta, 'xi': xi, 'lattice': _read(lattice_file), 't': t, 'eps': eps,
                        'N': horizon, 'refinement': refinement}, options)


@cli.command()
@global_options
@point_options
@click.option('--eps', default='1/10', show_default=True, help='ε grid, comma separated.')
@click.option('--T', 'horizons', default='10', show_default=True, help='Horizons, comma separated.')
@click.option('--step', default='1/8', show_default=True, help='Sampling step in log time.')
@click.option('--t', default=None, help='Rational flow base for the geometric grid.')
@click.pass_context
def divfrac(ctx, theta, xi, lattice_file, eps, horizons, step, t, **options):
    """Fractions of [0, T] with λ̃₀ ≤ ε on the (ε, T) surface"""
    _run(ctx, 'divfrac', {'theta': theta, 'xi': xi, 'lattice': _read(lattice_file), 'eps': eps,
                          'T': horizons, 'step': step, 't': t}, options)


# ---------------------------------------------------------------------------
# Covering
# ---------------------------------------------------------------------------

@cli.command()
@global_options
@click.option('--theta', default='0', show_default=True)
@click.option('--t', default='4', show_default=True)
@click.option('--epsilon', default='1/4', show_default=True)
@click.option('--delta', default='1/64', show_default=True)
@click.option('--q-prime', default='1', show_default=True)
@click.option('--N', 'horizon', type=int, default=6, show_default=True)
@click.option('--M', 'commitment', type=int, default=1, show_default=True)
@click.option('--samples', type=int, default=None, help='Samples per cell (DLAB_ALIVE_SAMPLES).')
@click.option('--L', 'intersection', type=int, default=None, help='Override the ball-intersection constant.')
@click.option('--pivot', type=int, default=None)
@click.option('--gamma', default=None, help='Evaluate the cover-count bound at this scale.')
@click.option('--i-fraction', default=None, help='#I/N for --bound-only.')
@click.option('--reference', default=None, help='Reference shift ξ*, comma separated.')
@click.option('--bound-only', is_flag=True, help='Only evaluate the cover-count bound.')
@click.pass_context
def cover(ctx, theta, t, epsilon, delta, q_prime, horizon, commitment, samples, intersection, pivot, gamma,
          i_fraction, reference, bound_only, **options):
    """Cover refinement along the orbit of θ and the cover-count bound"""
    data = {'theta': theta, 't': t, 'epsilon': epsilon, 'delta': delta, 'q_prime': q_prime, 'N': horizon,
            'M': commitment, 'samples': samples, 'L': intersection, 'pivot': pivot, 'gamma': gamma,
            'i_fraction': i_fraction, 'reference': reference}
    _run(ctx, 'cover-bound' if bound_only else 'cover', data, options)


# ---------------------------------------------------------------------------
# Height
# ---------------------------------------------------------------------------

def profile_options(func):
    func = click.option('--slack', default=None, help='Slack subtracted with --zeta-lower.')(func)
    func = click.option('--zeta-lower', is_flag=True, help='Derive η from the ζ lower bounds.')(func)
    func = click.option('--etas', default=None, help='η_1..η_{d−1}, comma separated.')(func)
    return func


def _profile(etas, zeta_lower, slack) -> Dict:
    return {'etas': etas, 'zeta': 'lower' if zeta_lower else None, 'slack': slack}


@cli.command('height-verify')
@global_options
@profile_options
@click.option('--lattice', 'lattice_file', type=click.Path(exists=True, dir_okay=False), default=None)
@click.option('--shift', default=None, help='Shift of Z^d when no lattice file is given.')
@click.option('--eps', default='1/4', show_default=True)
@click.option('--t', default='4', show_default=True)
@click.option('--r', 'scales', default=None, help='Scaling matrix r for μ^(r).')
@click.option('--samples', type=int, default=10_000, show_default=True)
@click.option('--phi', is_flag=True, help='Also check each φ_l term.')
@click.pass_context
def height_verify(ctx, etas, zeta_lower, slack, lattice_file, shift, eps, t, scales, samples, phi, **options):
    """Monte-Carlo check of the height contraction inequality"""
    data = {**_profile(etas, zeta_lower, slack), 'lattice': _read(lattice_file), 'shift': shift, 'eps': eps,
            't': t, 'r': scales, 'samples': samples, 'phi': phi or None}
    _run(ctx, 'height-verify', data, options)


@cli.command()
@global_options
@click.option('--gamma', default=None, help='Exponent γ of the critical integral.')
@click.option('--grade', type=int, default=None)
@click.option('--samples', type=int, default=4096, show_default=True)
@click.option('--r', 'scales', default=None)
@click.pass_context
def zeta(ctx, gamma, grade, samples, scales, **options):
    """ζ lower bounds, the explicit η profile and the critical-exponent Monte Carlo"""
    _run(ctx, 'zeta', {'gamma': gamma, 'grade': grade, 'samples': samples, 'r': scales}, options)


@cli.command()
@global_options
@profile_options
@click.option('--delta', default=None, help='Perturb the profile by δ.')
@click.option('--C', 'constant', default=None)
@click.option('--t', default=None)
@click.option('--xi', 'xi_t', default=None, help='ξ(t) for the ε recipe.')
@click.pass_context
def eta(ctx, etas, zeta_lower, slack, delta, constant, t, xi_t, **options):
    """η profile, its feasibility margins and the ε recipe"""
    data = {**_profile(etas, zeta_lower, slack), 'delta': delta, 'C': constant, 't': t, 'xi': xi_t}
    _run(ctx, 'eta', data, options)


# ---------------------------------------------------------------------------
# Bounds, fractals, lattices
# ---------------------------------------------------------------------------

@cli.command()
@global_options
@click.option('--preset', default=None, help="cheung, equal-MxN or cantor-MxN.")
@click.option('--formula', default='fixed-xi', show_default=True,
              type=click.Choice(['fixed-theta', 'fixed-xi', 'suite', 'contraction', 'general-estimate']))
@click.option('--scenario', default=None)
@click.option('--q', default=None)
@click.option('--emass', 'emass_value', default=None)
@click.option('--emass-upper', default=None)
@click.option('--omega', default=None, help="ω, or 'oo' for the limit.")
@click.option('--s', default=None)
@click.option('--beta', default=None)
@click.option('--p', default=None)
@click.option('--a1-plus-b1', default=None)
@click.option('--a', 'growth', default=None)
@click.option('--gamma', default=None)
@click.option('--etas', default=None)
@click.pass_context
def bound(ctx, preset, formula, scenario, q, emass_value, emass_upper, omega, s, beta, p, a1_plus_b1, growth,
          gamma, etas, **options):
    """Closed-form dimension bounds; JSON on stdout, a table on stderr"""
    data = {'preset': preset, 'formula': formula, 'scenario': scenario, 'q': q, 'emass': emass_value,
            'emass_upper': emass_upper, 'omega': omega, 's': s, 'beta': beta, 'p': p,
            'a1_plus_b1': a1_plus_b1, 'a': growth, 'gamma': gamma, 'etas': etas}
    outcome = _run(ctx, 'bound', data, options)
    if outcome is not None:
        click.echo(pd.DataFrame(outcome.tables['bounds']).to_string(index=False), err=True)


@cli.command()
@global_options
@click.option('--action', default='cylinders', show_default=True,
              type=click.Choice(['cylinders', 'sample', 'constants', 'box-count', 'presets']))
@click.option('--depth', type=int, default=None)
@click.option('--count', type=int, default=None)
@click.option('--beta', default=None, help='β list for the ball-intersection scan.')
@click.pass_context
def ifs(ctx, action, depth, count, beta, **options):
    """Cylinders, Bernoulli samples and covering constants of an IFS"""
    _run(ctx, 'ifs', {'action': action, 'depth': depth, 'count': count, 'beta': beta}, options)


@cli.command()
@global_options
@click.argument('lattice_file', type=click.Path(exists=True, dir_okay=False))
@click.option('--action', default='lambda0', show_default=True,
              type=click.Choice(['lambda0', 'phi', 'covolume', 'emm', 'reduce', 'psi']))
@click.option('--grade', type=int, default=None)
@click.option('--coordinates', default=None, help="Integer rows separated by ';'.")
@click.option('--first', default=None)
@click.option('--second', default=None)
@click.pass_context
def lattice(ctx, lattice_file, action, grade, coordinates, first, second, **options):
    """λ₀, φ_l, covolumes and the EMM check for a lattice file"""
    _run(ctx, 'lattice', {'lattice': _read(lattice_file), 'action': action, 'grade': grade,
                          'coordinates': coordinates, 'first': first, 'second': second}, options)


@cli.command()
@click.option('--subcommand', default=None)
@click.option('--show', 'run_id', type=int, default=None, help='Print one stored run in full.')
@click.option('--limit', type=int, default=20, show_default=True)
def runs(subcommand, run_id, limit):
    """List runs stored in the registry"""
    from src.main import app
    from src.models.run import RunRecord, db
    with app.app_context():
        if run_id is not None:
            record = db.session.get(RunRecord, run_id)
            if record is None:
                raise click.ClickException(f'no run {run_id}')
            click.echo(dumps(record.to_dict()))
            return
        query = RunRecord.query
        if subcommand:
            query = query.filter(RunRecord.subcommand == subcommand)
        records = query.order_by(RunRecord.id.desc()).limit(limit).all()
        click.echo(dumps({'runs': [record.to_dict(with_summary=False) for record in records]}))


def main():
    cli(auto_envvar_prefix='DLAB')


if __name__ == '__main__':
    main()
