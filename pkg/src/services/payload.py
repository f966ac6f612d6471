"""
Payload Service
Turns CLI strings and JSON request bodies into the lab's value types
"""

import logging
from typing import Any, Dict, List, Optional

from src.models.approximation import PointSpec
from src.models.fractal import ProductFractal
from src.models.height import EtaProfile
from src.models.weights import Weights
from src.services.errors import ConfigError, InvalidShape
from src.services.fractal import parse_fractal
from src.services.height import eta_from_zeta, explicit_eta, make_profile, zeta_lower_bounds
from src.services.lattice import read_lattice
from src.services.numeric import parse_rational, parse_real

logger = logging.getLogger(__name__)

DEFAULT_WEIGHTS = 'm=1,n=1'
DEFAULT_FRACTAL = 'interval'


def weights_from(value: Any = None) -> Weights:
    """'m=2 n=1 a=1/2,1/2 b=1', the short 'm=1,n=1', or {'m','n','a','b'}"""
    if isinstance(value, Weights):
        return value
    if isinstance(value, dict):
        parts = [f'{key}={value[key]}' for key in ('m', 'n') if key in value]
        for key in ('a', 'b'):
            if key in value:
                entries = value[key]
                entries = entries if isinstance(entries, str) else ','.join(str(v) for v in entries)
                parts.append(f'{key}={entries}')
        value = ' '.join(parts)
    return Weights.parse(value or DEFAULT_WEIGHTS)


def fractal_from(value: Optional[str], weights: Weights, layout: str = 'grid') -> ProductFractal:
    return parse_fractal(value or DEFAULT_FRACTAL, weights.m, weights.n, layout=layout)


def real_list(value: Any) -> List:
    """'1/2, 0.3, golden' or a JSON list, parsed entry by entry"""
    if value is None:
        return []
    if isinstance(value, (list, tuple)):
        return [parse_real(v) for v in value]
    return [parse_real(v) for v in str(value).split(',') if v.strip()]


def rational_list(value: Any) -> List:
    if value is None:
        return []
    if isinstance(value, (list, tuple)):
        return [parse_rational(v) for v in value]
    return [parse_rational(v) for v in str(value).split(',') if v.strip()]


def matrix_from(value: Any, m: int, n: int) -> List[List]:
    """Rows separated by ';' and entries by ',' (or a nested JSON list); a scalar fills a 1×1 matrix"""
    if isinstance(value, (list, tuple)):
        rows = [list(row) if isinstance(row, (list, tuple)) else [row] for row in value]
        if len(rows) == 1 and len(rows[0]) == m * n and m > 1:
            rows = [rows[0][i * n:(i + 1) * n] for i in range(m)]
    else:
        rows = [[v for v in row.split(',') if v.strip()] for row in str(value).split(';') if row.strip()]
        if len(rows) == 1 and len(rows[0]) == m * n:
            rows = [rows[0][i * n:(i + 1) * n] for i in range(m)]
    if len(rows) != m or any(len(row) != n for row in rows):
        raise InvalidShape(f'expected an {m}x{n} matrix', got=value)
    return [[parse_real(v) for v in row] for row in rows]


def theta_xi(data: Dict, weights: Weights):
    """θ as an m×n matrix of parsed reals and ξ (zero when absent)"""
    if data.get('theta') is None:
        raise ConfigError('θ is required')
    theta = matrix_from(data['theta'], weights.m, weights.n)
    xi = real_list(data.get('xi')) or [parse_real(0)] * weights.m
    if len(xi) != weights.m:
        raise InvalidShape(f'ξ must have {weights.m} entries', got=len(xi))
    return theta, xi


def point_from(data: Dict, weights: Weights) -> PointSpec:
    """An explicit lattice ('lattice' text) or the point [u(θ), v(ξ)]Z^d"""
    if data.get('lattice'):
        return PointSpec.from_lattice(weights, read_lattice(data['lattice']))
    theta, xi = theta_xi(data, weights)
    return PointSpec.from_values(weights, theta, xi)


def profile_from(data: Dict, weights: Weights, grid: ProductFractal) -> EtaProfile:
    """
    Explicit η_l by default; 'etas' gives them directly and 'zeta' derives them
    from supplied ζ_l lower bounds (with optional 'slack').
    """
    if data.get('etas') is not None:
        return make_profile(weights, real_list(data['etas']), source='given')
    if data.get('zeta') == 'lower':
        zeta = zeta_lower_bounds(grid, weights)
        return eta_from_zeta(zeta, weights, slack=parse_rational(data.get('slack', 0)))
    return explicit_eta(grid, weights)


def int_value(data: Dict, key: str, default: int) -> int:
    raw = data.get(key, default)
    try:
        return int(raw)
    except (TypeError, ValueError):
        raise ConfigError(f'{key} must be an integer', got=raw)


def optional(data: Dict, key: str, parse=parse_real):
    raw = data.get(key)
    return None if raw is None or raw == '' else parse(raw)
