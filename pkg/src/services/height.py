"""
Height Service
Critical-exponent bounds, η profiles, the functions ψ and f_{ε,η̂}, and
Monte-Carlo checks of the height contraction under averaged unipotent steps
"""

import math
import logging
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from itertools import combinations, product
from typing import Dict, List, Optional, Sequence, Tuple

import mpmath
import numpy as np
import sympy

from src.config import settings
from src.models.fractal import ProductFractal
from src.models.height import (
    ContractionReport, CriticalExponentReport, EtaProfile, HeightParams, HeightValue,
    PhiContractionTerm, ZetaBounds,
)
from src.models.lattice import AffineLattice, MultiVector
from src.models.weights import FlowTime, Weights
from src.services.core import compose, flow_matrix, unipotent, weight_exponents
from src.services.errors import (
    CalibrationFailure, DimensionMismatch, OutOfRange, PremiseViolation, UnsupportedFractal,
)
from src.services.fractal import pushforward_scaled
from src.services.lattice import lambda0_affine, phi_l, pi_plus
from src.services.numeric import (
    Real, add, inverse, lift, mat_vec, mul, operator_norm, parse_rational, power, sup_norm, to_float,
    exact_argmin, exact_sign, to_mpf, to_sympy,
)

logger = logging.getLogger(__name__)

PILOT_SAMPLES = 256
PILOT_VECTORS = 12
CALIBRATION_CAP = 1e12
# relative slack for float comparisons of per-sample inequalities
FLOAT_SLACK = 1e-9
DIVERGENCE_GROWTH = 1.5


# ---------------------------------------------------------------------------
# Exact helpers
# ---------------------------------------------------------------------------

def _smallest(values: Sequence[sympy.Expr]) -> sympy.Expr:
    return values[exact_argmin(values)]


def _exponent(expr: sympy.Expr):
    """η as a power: Fraction when rational, mpf otherwise"""
    expr = sympy.sympify(expr)
    if expr.is_Rational:
        return Fraction(int(expr.p), int(expr.q))
    return to_mpf(expr)


def _float(expr) -> float:
    return float(sympy.N(expr, 30))


# ---------------------------------------------------------------------------
# η profiles
# ---------------------------------------------------------------------------

def constraint_margins(etas: Sequence[sympy.Expr], d: int) -> Dict[Tuple[int, int], sympy.Expr]:
    """2/η_i − 1/η_{i−j} − 1/η_{i+j} for 1 ≤ i ≤ d−1, 1 ≤ j ≤ min(i, d−i); 1/η_0 = 1/η_d = 0"""
    def reciprocal(k):
        return sympy.Integer(0) if k in (0, d) else 1 / etas[k - 1]

    margins = {}
    for i in range(1, d):
        for j in range(1, min(i, d - i) + 1):
            margins[(i, j)] = sympy.simplify(2 / etas[i - 1] - reciprocal(i - j) - reciprocal(i + j))
    return margins


def make_profile(weights: Weights, etas: Sequence, source: str = '') -> EtaProfile:
    d = weights.d
    if len(etas) != d - 1:
        raise DimensionMismatch('an η profile has d−1 entries', d=d, given=len(etas))
    etas = tuple(sympy.simplify(to_sympy(v)) for v in etas)
    if any(exact_sign(v) <= 0 for v in etas):
        raise PremiseViolation('η entries must be positive')
    w = weight_exponents(weights)
    eta = _smallest([to_sympy(w[l]) * etas[l - 1] for l in range(1, d)])

    alphas = []
    for i in range(1, d):
        for j in range(1, min(i, d - i) + 1):
            left = sympy.Integer(0) if i - j == 0 else 1 / etas[i - j - 1]
            right = sympy.Integer(0) if i + j == d else 1 / etas[i + j - 1]
            alphas.append(sympy.simplify(1 - etas[i - 1] / 2 * (left + right)))
    alpha = _smallest(alphas) if alphas else sympy.Integer(1)
    strict = all(exact_sign(v) > 0 for v in constraint_margins(etas, d).values())
    return EtaProfile(weights=weights, etas=etas, eta=sympy.simplify(eta), alpha=sympy.simplify(alpha),
                      strict=strict, source=source)


def eta_feasible(profile: EtaProfile, strict: bool = False) -> bool:
    """Exact check of 1/η_{i−j} + 1/η_{i+j} ≤ 2/η_i (strict inequality when asked)"""
    margins = constraint_margins(profile.etas, profile.d)
    if strict:
        return all(exact_sign(v) > 0 for v in margins.values())
    return all(exact_sign(v) >= 0 for v in margins.values())


def zeta_lower_bounds(grid: ProductFractal, weights: Weights) -> ZetaBounds:
    if not grid.is_grid:
        raise UnsupportedFractal('critical-exponent bounds are stated for m×n grids')
    m, n = weights.m, weights.n
    if grid.shape != (m, n):
        raise DimensionMismatch('grid shape does not match the weights', shape=grid.shape, m=m, n=n)
    d = weights.d

    if grid.is_full_cube():
        values = [sympy.Rational(m, l) if l <= m else sympy.Rational(n, m + n - l) for l in range(1, d)]
        return ZetaBounds(case='cube', values=tuple(values))

    if n == 1:
        s = sorted((grid.entry(i, 0).dimension for i in range(m)), key=lambda v: sympy.N(v, 60))
        values = [sympy.simplify(sum(s[:d - l], sympy.Integer(0))) for l in range(1, d)]
        return ZetaBounds(case='n=1', values=tuple(values))

    if m == 1:
        s = sorted((grid.entry(0, j).dimension for j in range(n)), key=lambda v: sympy.N(v, 60))
        values = [sympy.simplify(sum(s[:l], sympy.Integer(0))) for l in range(1, d)]
        return ZetaBounds(case='m=1', values=tuple(values))

    return ZetaBounds(case='exists-positive', values=None)


def eta_from_zeta(zeta: ZetaBounds, weights: Weights, slack=Fraction(0)) -> EtaProfile:
    """η_l = (1 − slack)·ζ_l"""
    if zeta.values is None:
        raise UnsupportedFractal('only positivity of ζ is known for this fractal; supply η explicitly',
                                 case=zeta.case)
    slack = parse_rational(slack)
    if not 0 <= slack < 1:
        raise OutOfRange('slack must lie in [0, 1)', slack=slack)
    if any(exact_sign(v) <= 0 for v in zeta.values):
        raise PremiseViolation('ζ bounds must be positive')
    scale = to_sympy(1 - slack)
    profile = make_profile(weights, [scale * v for v in zeta.values], source=f'zeta:{zeta.case}')
    if not eta_feasible(profile):
        raise PremiseViolation('ζ bounds give an infeasible η profile',
                               etas=','.join(str(v) for v in profile.etas))
    return profile


def explicit_eta(grid: ProductFractal, weights: Weights) -> EtaProfile:
    """The explicit η choices for a full cube, for n = 1 and for m = 1"""
    if not grid.is_grid or grid.shape != (weights.m, weights.n):
        raise UnsupportedFractal('explicit η needs an m×n grid matching the weights')
    m, n, d = weights.m, weights.n, weights.d
    if grid.is_full_cube():
        etas = [sympy.Rational(m, l) if l <= m else sympy.Rational(n, m + n - l) for l in range(1, d)]
        return make_profile(weights, etas, source='cube')
    smallest = _smallest([f.dimension for f in grid.factors])
    if n == 1:
        return make_profile(weights, [sympy.Rational(m, l) * smallest for l in range(1, d)], source='n=1')
    if m == 1:
        return make_profile(weights, [sympy.Rational(n, 1 + n - l) * smallest for l in range(1, d)],
                            source='m=1')
    raise UnsupportedFractal('no explicit η for general product fractals; supply a profile')


def cube_identity(weights: Weights) -> Tuple[sympy.Expr, sympy.Expr, bool]:
    """min_l η_l w_l for the cube profile against min{m·a_m, n·b_n}"""
    d, m, n = weights.d, weights.m, weights.n
    etas = [sympy.Rational(m, l) if l <= m else sympy.Rational(n, m + n - l) for l in range(1, d)]
    w = weight_exponents(weights)
    lhs = min(to_sympy(w[l]) * etas[l - 1] for l in range(1, d))
    rhs = min(to_sympy(m * weights.a[-1]), to_sympy(n * weights.b[-1]))
    return lhs, rhs, lhs == rhs


def perturbation_weights(d: int) -> Tuple[int, ...]:
    """q_i = i(d − i) for 1 ≤ i ≤ d−1"""
    return tuple(i * (d - i) for i in range(1, d))


def eta_perturbed(profile: EtaProfile, delta) -> EtaProfile:
    """η_j^(δ) = 1/(1/η_j + δ q_j); every constraint margin grows by exactly 2δj²"""
    delta = to_sympy(parse_rational(delta) if not isinstance(delta, sympy.Expr) else delta)
    if exact_sign(delta) <= 0:
        raise PremiseViolation('perturbation δ must be positive')
    q = perturbation_weights(profile.d)
    etas = [1 / (1 / eta + delta * qj) for eta, qj in zip(profile.etas, q)]
    return make_profile(profile.weights, etas, source=f'{profile.source}+perturbed')


# ---------------------------------------------------------------------------
# ψ and the height function
# ---------------------------------------------------------------------------

def psi(x: AffineLattice, budget: Optional[int] = None) -> Optional[Real]:
    """ψ = 1/λ̃₀; None stands for +∞, which happens exactly on homogeneous lattices"""
    if x.homogeneous():
        return None
    return 1 / lambda0_affine(x, budget=budget).value


def _check_epsilon(eps):
    if not (0 < to_float(eps) < 1):
        raise OutOfRange('ε must lie in (0, 1)', epsilon=eps)


def height_f(x: AffineLattice, profile: EtaProfile, eps, budget: Optional[int] = None) -> HeightValue:
    """f = ε⁻² + ε⁻¹ Σ_l φ̃_l^{η_l} + ψ^{η_1}"""
    _check_epsilon(eps)
    if x.d != profile.d:
        raise DimensionMismatch('lattice and η profile dimensions differ', lattice=x.d, profile=profile.d)
    phis = [phi_l(x, l, budget=budget) for l in range(1, profile.d)]
    certified = all(p.certified for p in phis)
    if not certified:
        logger.warning('height evaluated with an uncertified φ_l value')

    phi_sum = Fraction(0)
    for l, result in enumerate(phis, start=1):
        phi_sum = add(phi_sum, power(result.value, _exponent(profile[l])))
    value = add(1 / (eps * eps), mul(phi_sum, 1 / eps))

    psi_value = psi(x, budget=budget)
    if psi_value is None:
        return HeightValue(value=None, psi=None, phis=tuple(p.value for p in phis), certified=certified)
    value = add(value, power(psi_value, _exponent(profile[1])))
    return HeightValue(value=value, psi=psi_value, phis=tuple(p.value for p in phis), certified=certified)


def choose_epsilon(profile: EtaProfile, C, t, xi, max_k: int = 4096) -> Fraction:
    """Largest ε = 2^{−k} with (d−1)ε^{α_η}ξ(t) ≤ C t^{−η} and εξ(t) ≤ C t^{−η}"""
    if exact_sign(profile.alpha) <= 0:
        raise PremiseViolation('ε recipe needs a strictly feasible profile (α_η > 0)',
                               alpha=str(profile.alpha))
    with mpmath.workprec(settings.prec):
        target = to_mpf(C) * mpmath.power(to_mpf(t), -to_mpf(profile.eta))
        alpha, xi = to_mpf(profile.alpha), to_mpf(xi)
        if target <= 0 or xi <= 0:
            raise PremiseViolation('C and ξ(t) must be positive')

        def ok(k):
            eps = mpmath.ldexp(1, -k)
            return (profile.d - 1) * mpmath.power(eps, alpha) * xi <= target and eps * xi <= target

        first = max(mpmath.log(xi / target, 2), mpmath.log((profile.d - 1) * xi / target, 2) / alpha)
        k = max(1, int(mpmath.ceil(first)) - 1)
        while not ok(k):
            k += 1
            if k > max_k:
                raise CalibrationFailure('no admissible ε within the search range', max_k=max_k)
    logger.debug('choose_epsilon k=%d', k)
    return Fraction(1, 2 ** k)


# ---------------------------------------------------------------------------
# Batched exterior powers
# ---------------------------------------------------------------------------

def _exterior_batch(mats: np.ndarray, grade: int) -> Tuple[List[Tuple[int, ...]], np.ndarray]:
    """∧^grade of a stack of d×d matrices, lexicographic monomial basis"""
    d = mats.shape[-1]
    indices = list(combinations(range(d), grade))
    out = np.empty((mats.shape[0], len(indices), len(indices)))
    for a, rows in enumerate(indices):
        block = mats[:, list(rows), :]
        for b, cols in enumerate(indices):
            out[:, a, b] = np.linalg.det(block[:, :, list(cols)])
    return indices, out


def _unipotent_batch(thetas: np.ndarray, m: int, n: int) -> np.ndarray:
    d = m + n
    mats = np.tile(np.eye(d), (thetas.shape[0], 1, 1))
    mats[:, :m, m:] = thetas.reshape(-1, m, n)
    return mats


def _unit_vectors(grade: int, d: int, count: int, rng: np.random.Generator) -> List[Tuple[str, np.ndarray]]:
    """Monomials e_I and random sup-norm-one vectors of ∧^grade R^d"""
    indices = list(combinations(range(d), grade))
    vectors = []
    for position, index in enumerate(indices):
        v = np.zeros(len(indices))
        v[position] = 1.0
        vectors.append(('e' + ''.join(str(i + 1) for i in index), v))
    for k in range(count):
        v = rng.uniform(-1.0, 1.0, len(indices))
        v /= np.max(np.abs(v))
        vectors.append((f'random-{k}', v))
    return vectors


def _multivector(v: np.ndarray, grade: int, d: int) -> MultiVector:
    indices = MultiVector.index_sets(grade, d)
    return MultiVector.from_dict(grade, d, {index: Fraction(float(c)) for index, c in zip(indices, v)})


# ---------------------------------------------------------------------------
# Contraction sampling
# ---------------------------------------------------------------------------

def _image_norm(h, v: Sequence[Real]) -> Real:
    """‖h v‖ with h and v brought to one number kind"""
    d = len(v)
    values = lift([e for row in h for e in row] + list(v))
    return sup_norm(mat_vec([values[i * d:(i + 1) * d] for i in range(d)], values[d * d:]))


def _sample_terms(task) -> Dict:
    """Height terms of h·x for one sampled h"""
    x, h, d, v0, prec = task
    with mpmath.workprec(prec):
        y = x.act(h)
        phis = [to_float(phi_l(y, l).value) for l in range(1, d)]
        psi_value = None if x.homogeneous() else to_float(psi(y))
        image = None if v0 is None else to_float(_image_norm(h, v0))
    return {'phis': phis, 'psi': psi_value, 'image': image}


class ContractionSampler:
    """
    Draws θ from μ^(r) and evaluates the orbit points g_t u(θ) x.

    Holds the flow element, the sample block, the support-box norm bound
    ξ′(t) and the pilot calibration of Ĉ for one (profile, t, grid, r, seed).
    """

    def __init__(self, profile: EtaProfile, t, grid: ProductFractal, r: Optional[Sequence[Sequence]] = None,
                 samples: int = 10_000, seed: int = 0, prec: Optional[int] = None):
        weights = profile.weights
        if not grid.is_grid or grid.shape != (weights.m, weights.n):
            raise DimensionMismatch('the fractal grid must be m×n for the profile weights')
        if to_float(t) <= 1:
            raise PremiseViolation('base t must exceed 1')
        self.profile = profile
        self.weights = weights
        self.grid = grid
        self.t = t
        self.seed = int(seed)
        self.samples = int(samples)
        self.prec = prec or settings.prec
        m, n = weights.m, weights.n
        self.r = [[parse_rational(v) for v in row] for row in r] if r is not None \
            else [[Fraction(1)] * n for _ in range(m)]
        self.flow = flow_matrix(weights, FlowTime.for_weights(t, weights, self.prec))
        self.thetas = pushforward_scaled(grid, self.r, seed=self.seed).sample(self.samples)
        self.etas = [_float(v) for v in profile.etas]
        self.eta = _float(profile.eta)
        self.xi_prime = 2 * self._support_norm()
        self.C_O = max(self.xi_prime ** (l * eta) for l, eta in enumerate(self.etas, start=1))

    def _support_norm(self) -> float:
        """max over corners of the support box of ‖g u(θ)‖ and ‖(g u(θ))⁻¹‖"""
        m, n = self.weights.m, self.weights.n
        ranges = []
        for i in range(m):
            for j in range(n):
                hull = self.grid.entry(i, j).hull
                ranges.append((self.r[i][j] * hull.lower[0], self.r[i][j] * hull.upper[0]))
        best = 0.0
        with mpmath.workprec(self.prec):
            for corner in product(*ranges):
                theta = [list(corner[i * n:(i + 1) * n]) for i in range(m)]
                h = compose(self.flow, unipotent(theta, self.weights))
                best = max(best, to_float(operator_norm(h)), to_float(operator_norm(inverse(h))))
        return best

    def element(self, index: int):
        """g_t u(θ_index) with θ read exactly from the float sample"""
        m, n = self.weights.m, self.weights.n
        row = self.thetas[index]
        theta = [[Fraction(float(row[i * n + j])) for j in range(n)] for i in range(m)]
        return compose(self.flow, unipotent(theta, self.weights))

    def _float_elements(self, count: int) -> np.ndarray:
        m, n = self.weights.m, self.weights.n
        g = np.array([[to_float(v) for v in row] for row in self.flow])
        return g @ _unipotent_batch(self.thetas[:count], m, n)

    def calibrate(self, pilot: int = PILOT_SAMPLES) -> Tuple[float, List[Dict]]:
        """Ĉ = max over pilot unit multivectors v of t^η · mean ‖∧^l(g u(θ)) v‖^{−η_l}"""
        d = self.weights.d
        mats = self._float_elements(min(pilot, self.samples))
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([self.seed, 1])))
        scale = to_float(self.t) ** self.eta
        best, table = 0.0, []
        for grade in range(1, d):
            _, wedge = _exterior_batch(mats, grade)
            for label, v in _unit_vectors(grade, d, PILOT_VECTORS, rng):
                norms = np.max(np.abs(wedge @ v), axis=1)
                if np.any(norms == 0):
                    raise CalibrationFailure('pilot integrand is unbounded', grade=grade, vector=label)
                ratio = float(scale * np.mean(norms ** (-self.etas[grade - 1])))
                if not math.isfinite(ratio) or ratio > CALIBRATION_CAP:
                    raise CalibrationFailure('pilot ratio exceeds the calibration cap', grade=grade,
                                             vector=label, ratio=ratio)
                table.append({'grade': grade, 'vector': label, 'ratio': ratio})
                best = max(best, ratio)
        logger.info('calibrated C_hat=%.6g over %d pilot vectors', best, len(table))
        return best, table

    def evaluate(self, x: AffineLattice, v0: Optional[Sequence] = None) -> List[Dict]:
        """Height terms of g_t u(θ_i) x for every sample, in sample order"""
        tasks = [(x, self.element(i), self.profile.d, v0, self.prec) for i in range(self.samples)]
        if settings.threads > 1:
            with ProcessPoolExecutor(max_workers=settings.threads) as pool:
                return list(pool.map(_sample_terms, tasks, chunksize=32))
        return [_sample_terms(task) for task in tasks]


def _combine(terms: Dict, etas: Sequence[float], eps: float, with_psi: bool) -> float:
    value = eps ** -2 + sum(phi ** eta for phi, eta in zip(terms['phis'], etas)) / eps
    if with_psi and terms['psi'] is not None:
        value += terms['psi'] ** etas[0]
    return value


def _decomposition_holds(terms: Dict, f_value: float, etas: Sequence[float], alpha: float,
                         eps: float) -> bool:
    """φ̃_1^{η_1} ≤ εf and (φ̃_{l−j} φ̃_{l+j})^{η_l/2} ≤ ε^{1+α_η} f at one point"""
    d = len(etas) + 1
    phis = [1.0] + list(terms['phis']) + [1.0]
    limit = f_value * (1 + FLOAT_SLACK)
    if phis[1] ** etas[0] > eps * limit:
        return False
    if alpha < 0:
        return True
    for l in range(1, d):
        for j in range(1, min(l, d - l) + 1):
            if (phis[l - j] * phis[l + j]) ** (etas[l - 1] / 2) > eps ** (1 + alpha) * limit:
                return False
    return True


def _mean_stderr(values: Sequence[float]) -> Tuple[float, float]:
    data = np.asarray(values, dtype=float)
    if data.size < 2:
        return float(data.mean()), float('inf')
    return float(data.mean()), float(data.std(ddof=1) / math.sqrt(data.size))


def contraction_verify(x: AffineLattice, profile: EtaProfile, eps, t, grid: ProductFractal,
                       r: Optional[Sequence[Sequence]] = None, samples: int = 10_000, seed: int = 0,
                       prec: Optional[int] = None) -> ContractionReport:
    """
    Compare the Monte-Carlo mean of f(g_t u(θ)x), θ ~ μ^(r), with
    3Ĉ t^{−η} f(x) + b̂. Every sample is also checked against the
    log-Lipschitz window, the ψ claim and the three-term decomposition.
    """
    if samples < 100:
        raise PremiseViolation('contraction checks need at least 100 samples', samples=samples)
    _check_epsilon(eps)
    if x.d != profile.d:
        raise DimensionMismatch('lattice and η profile dimensions differ', lattice=x.d, profile=profile.d)

    sampler = ContractionSampler(profile, t, grid, r=r, samples=samples, seed=seed, prec=prec)
    eps_f, etas, alpha = to_float(eps), sampler.etas, _float(profile.alpha)
    notes = []

    try:
        C_hat, pilot = sampler.calibrate()
        calibrated = True
    except CalibrationFailure as exc:
        logger.warning('calibration failed: %s', exc.message)
        C_hat, pilot, calibrated = float('inf'), [], False
        notes.append(f'calibration failed: {exc.message}')

    contraction = C_hat * to_float(t) ** (-sampler.eta)
    b_hat = 4 * eps_f ** -2 * max(0.0, 1 - contraction) if calibrated else float('inf')
    xi_hat = sampler.xi_prime
    smallness = calibrated and ((profile.d - 1) * eps_f ** alpha * xi_hat <= contraction
                                and eps_f * xi_hat <= contraction)
    params = HeightParams(epsilon=eps, t=t, C_hat=C_hat, b_hat=b_hat, xi_hat=xi_hat, smallness=smallness)

    with_psi = not x.homogeneous()
    if not with_psi:
        notes.append('homogeneous input: only the φ terms are checked')
    with mpmath.workprec(sampler.prec):
        here = _sample_terms((x, [[Fraction(int(i == j)) for j in range(x.d)] for i in range(x.d)],
                              x.d, None, sampler.prec))
        v0 = lambda0_affine(x).witness if with_psi else None
    f_x = _combine(here, etas, eps_f, with_psi)
    psi_cap = xi_hat * here['phis'][0]

    values, lipschitz, psi_claims, decompositions = [], 0, 0, 0
    maxima = {'constant': eps_f ** -2, 'psi': 0.0}
    for result in sampler.evaluate(x, v0):
        f_y = _combine(result, etas, eps_f, with_psi)
        values.append(f_y)
        if not (f_x / sampler.C_O * (1 - FLOAT_SLACK) <= f_y <= sampler.C_O * f_x * (1 + FLOAT_SLACK)):
            lipschitz += 1
        if with_psi and result['psi'] > max(1 / result['image'], psi_cap) * (1 + FLOAT_SLACK):
            psi_claims += 1
        if not _decomposition_holds(result, f_y, etas, alpha, eps_f):
            decompositions += 1
        for l, phi in enumerate(result['phis'], start=1):
            maxima[f'phi_{l}'] = max(maxima.get(f'phi_{l}', 0.0), phi ** etas[l - 1] / eps_f)
        if with_psi:
            maxima['psi'] = max(maxima['psi'], result['psi'] ** etas[0])

    mean, stderr = _mean_stderr(values)
    bound = 3 * contraction * f_x + b_hat
    if not calibrated:
        status = 'inconclusive'
    else:
        status = 'pass' if mean + 3 * stderr <= bound else 'fail'
    if lipschitz:
        logger.error('%d samples left the log-Lipschitz window', lipschitz)
    logger.info('contraction_verify status=%s mean=%.6g stderr=%.3g bound=%.6g', status, mean, stderr, bound)

    return ContractionReport(
        status=status, profile=profile, params=params, samples=samples, seed=seed, f_x=f_x,
        mean=mean, stderr=stderr, bound=bound, psi_term=with_psi, C_O=sampler.C_O,
        max_sample=max(values), lipschitz_violations=lipschitz, psi_claim_violations=psi_claims,
        decomposition_violations=decompositions, term_maxima=maxima, pilot=pilot, notes=notes,
    )


def psi_claim_check(x: AffineLattice, g, xi_prime) -> bool:
    """ψ(g x) ≤ max{1/‖g v₀‖, ξ′ φ̃_1(x)} with v₀ the shortest affine vector of x"""
    if x.homogeneous():
        raise PremiseViolation('the ψ claim concerns non-homogeneous points')
    v0 = lambda0_affine(x).witness
    image = _image_norm(g, v0)
    lhs = to_float(psi(x.act(g)))
    rhs = max(1 / to_float(image), to_float(xi_prime) * to_float(phi_l(x, 1).value))
    return lhs <= rhs * (1 + FLOAT_SLACK)


def phi_contraction_check(x: AffineLattice, profile: EtaProfile, t, grid: ProductFractal,
                          r: Optional[Sequence[Sequence]] = None, samples: int = 1000, seed: int = 0,
                          C_hat: Optional[float] = None, prec: Optional[int] = None) -> List[PhiContractionTerm]:
    """
    Per grade l: mean of φ̃_l^{η_l}(g_t u(θ)x) against
    Ĉ t^{−η} φ̃_l^{η_l}(x) + ξ̂(t)(max_j φ̃_{l−j}(x) φ̃_{l+j}(x))^{η_l/2}.
    """
    sampler = ContractionSampler(profile, t, grid, r=r, samples=samples, seed=seed, prec=prec)
    if C_hat is None:
        C_hat, _ = sampler.calibrate()
    contraction = C_hat * to_float(t) ** (-sampler.eta)
    d = profile.d
    with mpmath.workprec(sampler.prec):
        base = [1.0] + [to_float(phi_l(x, l).value) for l in range(1, d)] + [1.0]
    results = sampler.evaluate(x)

    terms = []
    for l in range(1, d):
        eta_l = sampler.etas[l - 1]
        values = [result['phis'][l - 1] ** eta_l for result in results]
        mean, stderr = _mean_stderr(values)
        cross = max((base[l - j] * base[l + j]) ** (eta_l / 2) for j in range(1, min(l, d - l) + 1))
        bound = contraction * base[l] ** eta_l + sampler.C_O * cross
        terms.append(PhiContractionTerm(grade=l, mean=mean, stderr=stderr, bound=bound))
    return terms


# ---------------------------------------------------------------------------
# Critical exponents
# ---------------------------------------------------------------------------

def _plus_mask(grade: int, d: int, m: int) -> np.ndarray:
    return np.array([not pi_plus(MultiVector.monomial(index, d), m).is_zero()
                     for index in MultiVector.index_sets(grade, d)])


def critical_exponent_mc(grid: ProductFractal, weights: Weights, grade: int, gamma, r=None,
                         samples: int = 4096, seed: int = 0, vector: Optional[MultiVector] = None,
                         search: int = PILOT_VECTORS) -> CriticalExponentReport:
    """
    Empirical ∫ ‖π_{l+}(u(θ)v)‖^{−γ} dμ^(r)(θ) for a given or adversarially chosen
    unit v, with a divergence diagnostic over four doubling sample sizes.
    """
    gamma = to_float(gamma)
    m, n, d = weights.m, weights.n, weights.d
    if gamma <= 0:
        raise PremiseViolation('γ must be positive', gamma=gamma)
    if not 1 <= grade <= d - 1:
        raise OutOfRange('grade outside 1..d−1', grade=grade, d=d)
    if samples < 8:
        raise PremiseViolation('at least 8 samples are needed for the doubling diagnostic')
    if not grid.is_grid or grid.shape != (m, n):
        raise DimensionMismatch('the fractal grid must be m×n')

    r = r if r is not None else [[Fraction(1)] * n for _ in range(m)]
    thetas = pushforward_scaled(grid, r, seed=seed).sample(samples)
    _, wedge = _exterior_batch(_unipotent_batch(thetas, m, n), grade)
    mask = _plus_mask(grade, d, m)

    def integrand(v: np.ndarray, rows: np.ndarray) -> np.ndarray:
        norms = np.max(np.abs((rows @ v)[:, mask]), axis=1)
        with np.errstate(divide='ignore'):
            return np.where(norms > 0, norms ** -gamma, np.inf)

    if vector is not None:
        if vector.grade != grade or vector.d != d:
            raise DimensionMismatch('vector grade or dimension does not match')
        coefficients = vector.as_dict()
        v = np.array([to_float(coefficients.get(index, 0)) for index in MultiVector.index_sets(grade, d)])
        if not np.any(v):
            raise PremiseViolation('the test vector must be nonzero')
        v = v / np.max(np.abs(v))
        label, pilot_mean = 'given', None
    else:
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, 2])))
        pilot_rows = wedge[:min(samples, PILOT_SAMPLES)]
        scored = [(float(np.mean(integrand(v, pilot_rows))), label, v)
                  for label, v in _unit_vectors(grade, d, search, rng)]
        pilot_mean, label, v = max(scored, key=lambda item: item[0])

    values = integrand(v, wedge)
    sizes = [samples // 8, samples // 4, samples // 2, samples]
    running = tuple((size, float(np.mean(values[:size]))) for size in sizes)
    finite = bool(np.all(np.isfinite(values)))
    mean, stderr = _mean_stderr(values) if finite else (float('inf'), float('inf'))
    diverging = (not finite
                 or running[-1][1] > DIVERGENCE_GROWTH * running[0][1]
                 or float(np.max(values)) > 0.5 * float(np.sum(values)))
    worst = _multivector(v, grade, d).to_dict()
    worst.update({'label': label, 'pilot_mean': pilot_mean})
    logger.info('critical_exponent_mc grade=%d gamma=%g mean=%.6g diverging=%s', grade, gamma, mean, diverging)
    return CriticalExponentReport(grade=grade, gamma=gamma, samples=samples, mean=mean, stderr=stderr,
                                  running_means=running, diverging=diverging, worst_vector=worst)
