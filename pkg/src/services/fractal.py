"""
Fractal Service
Similarity IFSs, coding map, cylinders, Bernoulli samplers and covering constants
"""

import re
import math
import logging
from fractions import Fraction
from itertools import product
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
import sympy

from src.models.fractal import (
    Box, CodedPoint, Cylinder, FractalConstants, ProductFractal, SimilarityIFS, SimilarityMap,
)
from src.services.errors import InvalidFractal, InvalidWeights, OutOfRange, UnsupportedFractal
from src.services.numeric import inverse, mat_vec, parse_rational, to_float

logger = logging.getLogger(__name__)

_MAP = re.compile(r'\(([^()]*)\)')
_SIGNED = re.compile(r'([+-])(\d+)')
_FIELD = re.compile(r'(\w+)=(\S+)')

HULL_ITERATIONS = 64
SAMPLE_CHUNK = 1024
MAX_SCAN_CYLINDERS = 4096


# ---------------------------------------------------------------------------
# Construction
# ---------------------------------------------------------------------------

def _signed_permutation(text: str, dim: int) -> Tuple[Tuple[Fraction, ...], ...]:
    entries = _SIGNED.findall(text)
    if len(entries) != dim:
        raise InvalidFractal(f'orthogonal part {text!r} must name {dim} signed coordinates')
    rows = []
    for sign, index in entries:
        index = int(index)
        if not 1 <= index <= dim:
            raise InvalidFractal(f'coordinate {index} outside 1..{dim}')
        value = Fraction(1 if sign == '+' else -1)
        rows.append(tuple(value if j == index - 1 else Fraction(0) for j in range(dim)))
    if sorted(r.index(next(v for v in r if v != 0)) for r in rows) != list(range(dim)):
        raise InvalidFractal(f'{text!r} is not a permutation')
    return tuple(rows)


def _is_orthogonal(rows) -> bool:
    n = len(rows)
    return all(sum(rows[k][i] * rows[k][j] for k in range(n)) == int(i == j) for i in range(n) for j in range(n))


def hull_box(dim: int, c: Fraction, maps: Sequence[SimilarityMap]) -> Box:
    """
    Bounding box of the attractor: fixed point of B ↦ bbox(∪ φ_e(B)),
    iterated from the box spanned by the fixed points of the maps.
    """
    fixed = []
    for m in maps:
        # x = cOx + w  ⇒  (I − cO)x = w
        matrix = [[int(i == j) - c * m.orthogonal[i][j] for j in range(dim)] for i in range(dim)]
        fixed.append(mat_vec(inverse(matrix), list(m.translation)))
    box = Box.bounding(fixed)
    for _ in range(HULL_ITERATIONS):
        images = [m.image_box(c, box) for m in maps]
        nxt = Box.bounding([v for b in images for v in (b.lower, b.upper)])
        if nxt == box:
            return box
        box = nxt
    # geometric remainder of the unfinished iteration
    slack = c ** HULL_ITERATIONS * box.diameter / (1 - c)
    logger.warning('Hull iteration did not stabilise; widening by %s', slack)
    return Box(lower=tuple(v - slack for v in box.lower), upper=tuple(v + slack for v in box.upper))


def check_osc(ifs_dim: int, c: Fraction, maps: Sequence[SimilarityMap], witness: Box):
    """Open set condition on an axis-aligned box; exact for signed permutations"""
    images = [m.image_box(c, witness) for m in maps]
    exact = all(m.is_signed_permutation for m in maps)
    for image in images:
        if not witness.contains(image):
            raise InvalidFractal('image of the OSC box leaves the box', exact=exact)
    for i in range(len(images)):
        for j in range(i + 1, len(images)):
            if not images[i].open_disjoint(images[j]):
                if exact:
                    raise InvalidFractal('images of the OSC box overlap', maps=[i, j])
                raise InvalidFractal('cannot certify disjointness for rotated images', maps=[i, j])


def build_ifs(dim: int, c, maps: Sequence[Tuple[Sequence[Sequence[Fraction]], Sequence[Fraction]]],
              witness: Optional[Box] = None, name: str = '') -> SimilarityIFS:
    c = parse_rational(c)
    if not 0 < c < 1:
        raise InvalidFractal('contraction ratio must lie in (0, 1)', c=str(c))
    if not maps:
        raise InvalidFractal('empty alphabet')
    built = []
    for orthogonal, translation in maps:
        orthogonal = tuple(tuple(Fraction(v) for v in row) for row in orthogonal)
        translation = tuple(parse_rational(v) for v in translation)
        if len(orthogonal) != dim or len(translation) != dim or any(len(r) != dim for r in orthogonal):
            raise InvalidFractal('map does not match the ambient dimension', dim=dim)
        if not _is_orthogonal(orthogonal):
            raise InvalidFractal('rotation part is not orthogonal')
        built.append(SimilarityMap(orthogonal=orthogonal, translation=translation))
    p = len(built)
    if Fraction(p) * c ** dim > 1:
        raise InvalidFractal('dimension would exceed the ambient dimension', p=p, c=str(c), dim=dim)
    hull = hull_box(dim, c, built)
    witness = witness or hull
    check_osc(dim, c, built, witness)
    ifs = SimilarityIFS(dim=dim, c=c, maps=tuple(built), hull=hull, witness=witness, name=name)
    logger.debug('Built %r', ifs)
    return ifs


def parse_ifs(text: str) -> SimilarityIFS:
    """Parse 'dim=1 c=1/3 maps=(+1,0),(+1,2/3)' or a preset name"""
    text = text.strip()
    if text in PRESETS:
        return preset(text)
    head, _, tail = text.partition('maps=')
    fields = dict(_FIELD.findall(head))
    if 'c' not in fields or not tail:
        raise InvalidFractal(f'cannot parse IFS {text!r}')
    dim = int(fields.get('dim', 1))
    maps = []
    for body in _MAP.findall(tail):
        parts = [p.strip() for p in body.split(',')]
        orthogonal = _signed_permutation(parts[0], dim)
        maps.append((orthogonal, [parse_rational(v) for v in parts[1:]]))
    witness = None
    if 'box' in fields:
        lo, hi = fields['box'].split(':')
        witness = Box(lower=tuple(parse_rational(v) for v in lo.split(',')),
                      upper=tuple(parse_rational(v) for v in hi.split(',')))
    return build_ifs(dim, fields['c'], maps, witness=witness, name=fields.get('name', ''))


def _identity(dim):
    return tuple(tuple(Fraction(int(i == j)) for j in range(dim)) for i in range(dim))


def _preset_cantor():
    return build_ifs(1, Fraction(1, 3), [(_identity(1), [0]), (_identity(1), [Fraction(2, 3)])],
                     name='cantor')


def _preset_cantor5():
    return build_ifs(1, Fraction(2, 5), [(_identity(1), [0]), (_identity(1), [Fraction(3, 5)])],
                     name='cantor5')


def _preset_interval():
    return build_ifs(1, Fraction(1, 2), [(_identity(1), [0]), (_identity(1), [Fraction(1, 2)])],
                     name='interval')


def _preset_carpet():
    maps = [(_identity(2), [Fraction(i, 3), Fraction(j, 3)])
            for i in range(3) for j in range(3) if (i, j) != (1, 1)]
    return build_ifs(2, Fraction(1, 3), maps, name='carpet')


PRESETS = {
    'cantor': _preset_cantor,
    'cantor5': _preset_cantor5,
    'interval': _preset_interval,
    'carpet': _preset_carpet,
}


def preset(name: str) -> SimilarityIFS:
    if name not in PRESETS:
        raise InvalidFractal(f'unknown fractal preset {name!r}', presets=sorted(PRESETS))
    return PRESETS[name]()


def parse_fractal(text: str, m: int, n: int, layout: str = 'grid') -> ProductFractal:
    """
    'cantor' → m×n grid (or m-fold product) of that IFS; 'cantor;interval'
    lists one factor per entry/factor explicitly.
    """
    parts = [p for p in text.split(';') if p.strip()]
    factors = [parse_ifs(p) for p in parts]
    if layout == 'grid':
        if len(factors) == 1:
            return ProductFractal.grid(m, n, factors[0])
        if len(factors) != m * n or any(f.dim != 1 for f in factors):
            raise InvalidFractal('grid needs m·n one-dimensional factors')
        return ProductFractal.grid(m, n, factors)
    if len(factors) == 1 and factors[0].dim == 1:
        factors = factors * m
    if sum(f.dim for f in factors) != m:
        raise InvalidFractal('factor dimensions must add up to m', m=m)
    return ProductFractal.product(factors)


# ---------------------------------------------------------------------------
# Coding map and cylinders
# ---------------------------------------------------------------------------

def _compose(ifs: SimilarityIFS, word: Sequence[int], x: Sequence[Fraction]) -> List[Fraction]:
    point = list(x)
    for letter in reversed(word):
        if not 0 <= letter < ifs.p:
            raise OutOfRange(f'letter {letter} outside the alphabet', p=ifs.p)
        point = ifs.maps[letter].apply(ifs.c, point)
    return point


def coding_map(ifs: SimilarityIFS, word: Sequence[int]) -> CodedPoint:
    """
    φ_{b_1}∘…∘φ_{b_j}(0), within c^j·R of σ(b) for every extension b,
    where R bounds ‖y‖ over the attractor.
    """
    if ifs.p == 0:
        raise InvalidFractal('empty alphabet')
    point = _compose(ifs, word, [Fraction(0)] * ifs.dim)
    reach = max(abs(v) for corner in ifs.hull.corners() for v in corner)
    return CodedPoint(point=tuple(point), radius=ifs.c ** len(word) * reach)


def cylinder(ifs: SimilarityIFS, word: Sequence[int]) -> Cylinder:
    box = ifs.hull
    for letter in reversed(word):
        box = ifs.maps[letter].image_box(ifs.c, box)
    return Cylinder(words=(tuple(word),), box=box, depth=len(word), measure=Fraction(1, ifs.p ** len(word)))


def cylinders(fractal: Union[SimilarityIFS, ProductFractal], depth: int) -> Iterator[Cylinder]:
    """All depth-j cylinders F(j), in lexicographic order of their words"""
    if depth < 0:
        raise OutOfRange('depth must be nonnegative')
    if isinstance(fractal, SimilarityIFS):
        for word in product(range(fractal.p), repeat=depth):
            yield cylinder(fractal, word)
        return
    families = [list(cylinders(f, depth)) for f in fractal.factors]
    for combo in product(*families):
        yield Cylinder(
            words=tuple(c.words[0] for c in combo),
            box=Box(lower=tuple(v for c in combo for v in c.box.lower),
                    upper=tuple(v for c in combo for v in c.box.upper)),
            depth=depth,
            measure=math.prod((c.measure for c in combo), start=Fraction(1)),
        )


def dimension(fractal: Union[SimilarityIFS, ProductFractal]) -> sympy.Expr:
    """s = −log p / log c, added over factors"""
    return fractal.dimension


def factor_weights(fractal: ProductFractal, a: Sequence[Fraction]) -> Tuple[Fraction, ...]:
    """w_i: the common a-weight of the coordinates owned by factor i"""
    values, offset = [], 0
    for factor in fractal.factors:
        block = tuple(a[offset:offset + factor.dim])
        if len(block) != factor.dim or len(set(block)) != 1:
            raise InvalidWeights('each fractal factor must sit on a block of equal a-weights',
                                 block=','.join(str(v) for v in block))
        values.append(block[0])
        offset += factor.dim
    if offset != len(a):
        raise InvalidWeights('fractal factors must fill the m coordinates of ξ', m=len(a))
    return tuple(values)


def k_beta(ifs: SimilarityIFS, beta, alpha: Optional[Fraction] = None) -> int:
    """The depth k with c^{k+1}α < β ≤ c^k α"""
    alpha = alpha if alpha is not None else ifs.alpha
    beta = parse_rational(beta)
    if beta <= 0 or beta > alpha:
        raise OutOfRange('β must lie in (0, α]', beta=str(beta), alpha=str(alpha))
    k = 0
    while beta <= ifs.c ** (k + 1) * alpha:
        k += 1
    return k


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------

def _float_maps(ifs: SimilarityIFS):
    rotations = np.array([[[float(v) for v in row] for row in m.orthogonal] for m in ifs.maps])
    translations = np.array([[float(v) for v in m.translation] for m in ifs.maps])
    return rotations, translations


def _code_letters(ifs: SimilarityIFS, letters: np.ndarray) -> np.ndarray:
    """Vectorised coding map on rows of letters"""
    rotations, translations = _float_maps(ifs)
    c = float(ifs.c)
    points = np.zeros((letters.shape[0], ifs.dim))
    for column in range(letters.shape[1] - 1, -1, -1):
        e = letters[:, column]
        points = c * np.einsum('nij,nj->ni', rotations[e], points) + translations[e]
    return points


class FractalSampler:
    """
    Counter-based sampler for the Bernoulli measure of an IFS or grid.

    Samples are produced in fixed chunks; chunk k of factor f draws from
    Philox keyed by (seed, k, f), so sample i depends only on (seed, i).
    """

    def __init__(self, fractal: Union[SimilarityIFS, ProductFractal], seed: int = 0, depth: int = 40,
                 scale: Optional[Sequence[Fraction]] = None):
        self.factors = (fractal,) if isinstance(fractal, SimilarityIFS) else fractal.factors
        self.fractal = fractal
        self.seed = int(seed)
        self.depth = int(depth)
        self.scale = np.array([float(r) for r in scale]) if scale is not None else None

    def _chunk(self, index: int) -> np.ndarray:
        columns = []
        for f, ifs in enumerate(self.factors):
            rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([self.seed, index, f])))
            letters = rng.integers(0, ifs.p, size=(SAMPLE_CHUNK, self.depth))
            columns.append(_code_letters(ifs, letters) if self.depth else np.zeros((SAMPLE_CHUNK, ifs.dim)))
        points = np.hstack(columns)
        if self.scale is not None:
            points = points * self.scale
        return points

    def sample(self, count: int, start: int = 0) -> np.ndarray:
        if count <= 0:
            width = sum(f.dim for f in self.factors)
            return np.zeros((0, width))
        first, last = start // SAMPLE_CHUNK, (start + count - 1) // SAMPLE_CHUNK
        block = np.vstack([self._chunk(k) for k in range(first, last + 1)])
        offset = start - first * SAMPLE_CHUNK
        return block[offset:offset + count]

    def point(self, index: int) -> np.ndarray:
        return self.sample(1, start=index)[0]


def bernoulli_sample(ifs: SimilarityIFS, depth: int, rng: np.random.Generator) -> Tuple[Fraction, ...]:
    """One exact sample: i.i.d. uniform letters pushed through the coding map"""
    letters = [int(e) for e in rng.integers(0, ifs.p, size=depth)] if depth else []
    return coding_map(ifs, letters).point


def pushforward_scaled(grid: ProductFractal, r: Sequence[Sequence[Fraction]], seed: int = 0,
                       depth: int = 40) -> FractalSampler:
    """Sampler for μ^(r): entry (i, j) scaled by r_ij ∈ [c_ij, 1/c_ij]"""
    if not grid.is_grid:
        raise UnsupportedFractal('scaled pushforwards are defined on m×n grids')
    m, n = grid.shape
    flat = []
    for i in range(m):
        for j in range(n):
            value = parse_rational(r[i][j])
            c = grid.entry(i, j).c
            if not c <= value <= 1 / c:
                raise OutOfRange('scale outside [c, 1/c]', entry=[i + 1, j + 1], r=str(value))
            flat.append(value)
    return FractalSampler(grid, seed=seed, depth=depth, scale=flat)


# ---------------------------------------------------------------------------
# Covering constants
# ---------------------------------------------------------------------------

def _cylinder_arrays(ifs: SimilarityIFS, depth: int) -> Tuple[np.ndarray, np.ndarray]:
    boxes = list(cylinders(ifs, depth))
    lower = np.array([[float(v) for v in c.box.lower] for c in boxes])
    upper = np.array([[float(v) for v in c.box.upper] for c in boxes])
    return lower, upper


def _meeting(lower: np.ndarray, upper: np.ndarray, centres: np.ndarray, radius: float) -> np.ndarray:
    """How many boxes meet each closed sup-norm ball"""
    near = (lower[None, :, :] <= centres[:, None, :] + radius) & (upper[None, :, :] >= centres[:, None, :] - radius)
    return near.all(axis=2).sum(axis=1)


def measure_ball_constant(ifs: SimilarityIFS, depth: int = 10) -> Tuple[float, int, int]:
    """
    λ̂ ≥ sup μ(B(x, y)) / y^s, from depth-j cylinder counts against balls
    centred on the cylinders with radii α c^k, k < j.
    Returns (λ̂, depth used, number of centres).
    """
    s = ifs.dimension_float
    if s <= 0:
        raise InvalidFractal('measure constant needs a positive-dimensional attractor')
    depth = max(1, min(depth, int(math.log(MAX_SCAN_CYLINDERS) / math.log(ifs.p))))
    lower, upper = _cylinder_arrays(ifs, depth)
    centres = (lower + upper) / 2
    alpha, c = float(ifs.alpha), float(ifs.c)
    best = 0.0
    for k in range(depth):
        radius = alpha * c ** k
        counts = _meeting(lower, upper, centres, radius)
        best = max(best, float(counts.max()) * ifs.p ** (-depth) / radius ** s)
    logger.info('Measure-ball constant λ=%.6g at depth %d', best, depth)
    return best, depth, len(centres)


def ball_intersection_constant(ifs: SimilarityIFS, depth: int = 10) -> FractalConstants:
    """L = smallest integer > λ̂·(2α/c)^s"""
    lam, used, centres = measure_ball_constant(ifs, depth)
    s = ifs.dimension_float
    L = math.floor(lam * (2 * float(ifs.alpha) / float(ifs.c)) ** s) + 1
    notes = [f'λ estimated from depth-{used} cylinder counts on {centres} ball centres']
    return FractalConstants(measure_ball=lam, intersection=L, depth=used, centres=centres, notes=notes)


def ball_intersection_check(ifs: SimilarityIFS, betas: Sequence[Fraction], points: int = 1000) -> Dict:
    """Largest number of depth-k_β cylinders met by a ball of radius β over a grid of centres"""
    worst = {}
    lo = np.array([float(v) for v in ifs.hull.lower])
    hi = np.array([float(v) for v in ifs.hull.upper])
    per_axis = max(2, int(round(points ** (1 / ifs.dim))))
    axes = [np.linspace(l, h, per_axis) for l, h in zip(lo, hi)]
    centres = np.array(list(product(*axes)))
    for beta in betas:
        k = k_beta(ifs, beta)
        if ifs.p ** k > MAX_SCAN_CYLINDERS * 16:
            raise OutOfRange('β too small for an exhaustive scan', beta=str(beta))
        lower, upper = _cylinder_arrays(ifs, k)
        worst[str(beta)] = int(_meeting(lower, upper, centres, to_float(beta)).max())
    return worst
