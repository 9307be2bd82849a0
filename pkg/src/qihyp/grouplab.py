"""Finitely generated subgroups of PSL(2,R): balls, semilocal growth, free pairs.

Matrices are handled in batches as ``(N, 2, 2)`` float arrays. The metric on
PSL(2,R) is

    rho(g, h) = min(|G^-1 H - I|_F, |G^-1 H + I|_F)

which is exactly left-invariant and insensitive to the choice of lift.
"""

from __future__ import annotations

import itertools
import json
import math
from collections import abc
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from . import freewords
from .freewords import ResourceCeilingError, growth_floor
from .hyp2 import (
    INFINITY,
    BoundaryPoint,
    HPoint,
    IdealTriple,
    MoebiusElement,
    apply,
    boundary_apply,
    classify,
    distance,
    fixed_points,
    triple_apply,
    triple_to_point,
)

CONFIRM_TOL = 1e-9
GEOM_TOL = 1e-8
IDENTITY_COLLISION_TOL = 1e-6
PAIRING_TOL = 1e-6
DEFAULT_EPSILON0 = 0.05
MAX_BALL = 3_000_000
RATIONAL_MAX_DENOMINATOR = 64

SEMILOCAL = "SemilocalOnly"
CARRIERE = "CarriereLocal"

_I2 = np.eye(2)


class AmbiguityError(RuntimeError):
    """Two elements share a dedupe key but differ by more than the confirmation tolerance."""


class ConstructionError(ValueError):
    """A free-pair construction precondition failed."""


class IdentityCollisionError(ConstructionError):
    """A short nonempty reduced word evaluates to (nearly) the identity."""


# -- matrices ---------------------------------------------------------------

def as_array(elements: Sequence[MoebiusElement]) -> np.ndarray:
    return np.array([m.matrix() for m in elements]).reshape(-1, 2, 2)


def rho_identity(mats: np.ndarray) -> np.ndarray:
    """rho(g, e) for each matrix in a batch."""
    mats = np.asarray(mats, dtype=float)
    minus = np.sqrt(((mats - _I2) ** 2).sum(axis=(-2, -1)))
    plus = np.sqrt(((mats + _I2) ** 2).sum(axis=(-2, -1)))
    return np.minimum(minus, plus)


def _inv2(mats: np.ndarray) -> np.ndarray:
    out = np.empty_like(mats)
    out[..., 0, 0] = mats[..., 1, 1]
    out[..., 1, 1] = mats[..., 0, 0]
    out[..., 0, 1] = -mats[..., 0, 1]
    out[..., 1, 0] = -mats[..., 1, 0]
    return out


def rho(g: MoebiusElement, h: MoebiusElement) -> float:
    return float(rho_identity(g.inverse().matrix() @ h.matrix()))


def _canonical_sign(mats: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    flat = mats.reshape(-1, 4)
    big = np.abs(flat) > tol
    first = np.argmax(big, axis=1)
    sign = np.sign(flat[np.arange(len(flat)), first])
    sign[sign == 0] = 1.0
    return mats * sign[:, None, None]


class MatrixIndex:
    """Deduplicating store of PSL(2,R) elements.

    Elements are keyed by their sign-canonical entries rounded to ``quantum``;
    a key hit is confirmed by ``rho <= confirm_tol``. A key hit that fails
    confirmation raises :class:`AmbiguityError` rather than guessing.
    """

    # in units of the quantum; keys this close to a rounding boundary probe both cells
    _EDGE = 1e-3

    def __init__(self, quantum: float, confirm_tol: float = CONFIRM_TOL):
        if not quantum > 0:
            raise ValueError("quantum must be positive")
        self.quantum = quantum
        self.confirm_tol = confirm_tol
        self._keys: Dict[bytes, int] = {}
        self._mats: List[np.ndarray] = []
        self._store = np.zeros((0, 2, 2))
        self._labels: List[object] = []

    def __len__(self):
        return len(self._labels)

    @property
    def matrices(self) -> np.ndarray:
        if len(self._store) != len(self._labels):
            self._store = np.concatenate([self._store] + [m[None] for m in self._mats[len(self._store):]])
        return self._store

    def _candidate_keys(self, scaled: np.ndarray) -> List[bytes]:
        base = np.floor(scaled + 0.5)
        frac = scaled + 0.5 - base
        keys = [base.astype(np.int64).tobytes()]
        edge = np.flatnonzero((frac < self._EDGE) | (frac > 1 - self._EDGE))
        if len(edge):
            alts = []
            for k in edge:
                alts.append((k, base[k] - 1 if frac[k] < self._EDGE else base[k] + 1))
            for r in range(1, len(alts) + 1):
                for combo in itertools.combinations(alts, r):
                    alt = base.copy()
                    for k, v in combo:
                        alt[k] = v
                    keys.append(alt.astype(np.int64).tobytes())
        return keys

    def _confirm(self, idx: int, mat: np.ndarray, label) -> bool:
        dist = float(rho_identity(_inv2(self._mats[idx]) @ mat))
        if dist <= self.confirm_tol:
            return True
        raise AmbiguityError(
            f"elements {self._labels[idx]!r} and {label!r} share a dedupe key "
            f"(quantum {self.quantum}) but differ by {dist:.3e} > {self.confirm_tol}"
        )

    def _find(self, mat: np.ndarray, label) -> Optional[int]:
        for m in (mat, -mat):
            for key in self._candidate_keys(m.reshape(4) / self.quantum):
                idx = self._keys.get(key)
                if idx is not None and self._confirm(idx, mat, label):
                    return idx
        return None

    def lookup(self, mat: np.ndarray) -> Optional[int]:
        return self._find(np.asarray(mat, dtype=float), None)

    def add_batch(self, mats: np.ndarray, labels: Sequence = None) -> Tuple[np.ndarray, np.ndarray]:
        """Insert a batch; returns (index of each element, mask of new insertions)."""
        mats = _canonical_sign(np.asarray(mats, dtype=float).reshape(-1, 2, 2))
        idx = np.empty(len(mats), dtype=np.int64)
        new = np.zeros(len(mats), dtype=bool)
        scaled = mats.reshape(-1, 4) / self.quantum
        base = np.floor(scaled + 0.5)
        frac = scaled + 0.5 - base
        near_edge = ((frac < self._EDGE) | (frac > 1 - self._EDGE)).any(axis=1)
        # near-zero leading entries make the sign choice fragile; probe both lifts then
        fragile = (np.abs(mats.reshape(-1, 4)) <= 1e-6).any(axis=1)
        keys = base.astype(np.int64)
        for k in range(len(mats)):
            label = labels[k] if labels is not None else len(self._labels)
            if near_edge[k] or fragile[k]:
                hit = self._find(mats[k], label)
            else:
                hit = self._keys.get(keys[k].tobytes())
                if hit is not None:
                    self._confirm(hit, mats[k], label)
            if hit is None:
                hit = len(self._labels)
                self._keys[keys[k].tobytes()] = hit
                self._mats.append(mats[k])
                self._labels.append(label)
                new[k] = True
            idx[k] = hit
        return idx, new


# -- group specs ------------------------------------------------------------

@dataclass(frozen=True)
class GroupSpec:
    """Labelled generators; inverse-closed after construction via :meth:`create`."""

    generators: Tuple[Tuple[str, MoebiusElement], ...]
    inverse_closed: bool = True

    def __post_init__(self):
        labels = [lab for lab, _ in self.generators]
        if len(set(labels)) != len(labels):
            raise ValueError(f"generator labels must be unique, got {labels}")

    @classmethod
    def create(cls, generators, inverse_closed: bool = False) -> "GroupSpec":
        """Build a spec, adding ``label^-1`` for each generator whose inverse is missing.

        ``inverse_closed=True`` asserts the input already contains inverses;
        this is checked rather than trusted.
        """
        gens = [(str(lab), m if isinstance(m, MoebiusElement) else MoebiusElement.from_matrix(m))
                for lab, m in generators]
        out = list(gens)
        for lab, m in gens:
            inv = m.inverse()
            if not any(inv.is_close(other, CONFIRM_TOL) for _, other in out):
                if inverse_closed:
                    raise ValueError(f"inverse of {lab} is missing from an inverse-closed spec")
                out.append((f"{lab}^-1", inv))
        return cls(tuple(out), True)

    @classmethod
    def from_json(cls, obj: dict) -> "GroupSpec":
        unknown = set(obj) - {"generators", "inverseClosed"}
        if unknown:
            raise ValueError(f"unknown group file keys: {sorted(unknown)}")
        gens = []
        for g in obj["generators"]:
            extra = set(g) - {"label", "matrix"}
            if extra:
                raise ValueError(f"unknown generator keys: {sorted(extra)}")
            gens.append((g["label"], g["matrix"]))
        return cls.create(gens, bool(obj.get("inverseClosed", False)))

    @classmethod
    def load(cls, path) -> "GroupSpec":
        return cls.from_json(json.loads(Path(path).read_text()))

    def to_json(self) -> dict:
        return {
            "generators": [{"label": lab, "matrix": m.matrix().tolist()} for lab, m in self.generators],
            "inverseClosed": True,
        }

    @property
    def labels(self) -> List[str]:
        return [lab for lab, _ in self.generators]

    def matrices(self) -> np.ndarray:
        return as_array([m for _, m in self.generators])

    def evaluate(self, witness: Sequence[str]) -> MoebiusElement:
        table = dict(self.generators)
        out = MoebiusElement.identity()
        for lab in witness:
            out = out @ table[lab]
        return out


@dataclass(frozen=True)
class MetricConfig:
    epsilon: float
    variant: str = SEMILOCAL
    dedupe_quantum: Optional[float] = None

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.variant not in (SEMILOCAL, CARRIERE):
            raise ValueError(f"variant must be {SEMILOCAL} or {CARRIERE}, got {self.variant!r}")
        q = self.dedupe_quantum
        if q is None:
            object.__setattr__(self, "dedupe_quantum", min(1e-6, self.epsilon / 10))
        elif not 0 < q <= self.epsilon / 10:
            raise ValueError(f"dedupe_quantum must lie in (0, epsilon/10], got {q}")


@dataclass(frozen=True)
class BallEntry:
    element: MoebiusElement
    word_length: int
    witness: Tuple[str, ...]


class Ball(abc.Sequence):
    """Breadth-first ball in the word metric, in discovery order."""

    def __init__(self, spec: GroupSpec, radius: int, index: MatrixIndex,
                 lengths: np.ndarray, parents: np.ndarray, gens: np.ndarray):
        self.spec = spec
        self.radius = radius
        self.index = index
        self.lengths = lengths
        self.parents = parents
        self.gens = gens

    @property
    def matrices(self) -> np.ndarray:
        return self.index.matrices

    def __len__(self):
        return len(self.lengths)

    def witness(self, k: int) -> Tuple[str, ...]:
        labels = self.spec.labels
        out = []
        while self.parents[k] >= 0:
            out.append(labels[self.gens[k]])
            k = self.parents[k]
        return tuple(reversed(out))

    def __getitem__(self, k):
        if isinstance(k, slice):
            return [self[j] for j in range(*k.indices(len(self)))]
        if k < 0:
            k += len(self)
        if not 0 <= k < len(self):
            raise IndexError(k)
        return BallEntry(MoebiusElement.from_matrix(self.matrices[k]), int(self.lengths[k]), self.witness(k))

    def __iter__(self) -> Iterator[BallEntry]:
        for k in range(len(self)):
            yield self[k]

    def size(self, n: int) -> int:
        return int(np.count_nonzero(self.lengths <= n))


def ball_enumerate(spec: GroupSpec, n: int, cfg: MetricConfig, max_size: int = MAX_BALL,
                   truncate: bool = False) -> Ball:
    """Distinct elements of word length <= n, each with a minimal witness.

    Past ``max_size`` elements this raises, or with ``truncate=True`` stops
    at the last radius whose ball is sure to fit; ``Ball.radius`` then
    records how far the enumeration got.
    """
    if n < 0:
        raise ValueError(f"radius must be nonnegative, got {n}")
    index = MatrixIndex(cfg.dedupe_quantum)
    index.add_batch(_I2[None], labels=[()])
    lengths, parents, gens = [0], [-1], [-1]
    gmats = spec.matrices()
    frontier = np.array([0])
    for step in range(1, n + 1):
        if len(frontier) == 0:
            break
        if truncate and len(lengths) + len(frontier) * len(gmats) > max_size:
            n = step - 1
            break
        if len(lengths) + len(frontier) * len(gmats) > max_size * 2:
            raise ResourceCeilingError(f"ball of radius {step} may exceed {max_size} elements")
        prods = (index.matrices[frontier][:, None] @ gmats[None]).reshape(-1, 2, 2)
        par = np.repeat(frontier, len(gmats))
        gen = np.tile(np.arange(len(gmats)), len(frontier))
        labels = [(int(p), int(g)) for p, g in zip(par, gen)]
        _, new = index.add_batch(prods, labels)
        start = len(lengths)
        lengths.extend([step] * int(new.sum()))
        parents.extend(par[new].tolist())
        gens.extend(gen[new].tolist())
        frontier = np.arange(start, len(lengths))
        if len(lengths) > max_size:
            raise ResourceCeilingError(f"ball of radius {step} has more than {max_size} elements")
    return Ball(spec, n, index, np.array(lengths), np.array(parents), np.array(gens))


# -- growth -------------------------------------------------------------------

@dataclass(frozen=True)
class GrowthRow:
    n: int
    ball: Optional[int]
    semilocal: int
    local: Optional[int] = None
    exact: bool = True  # False: semilocal is a certified lower bound


@dataclass
class GrowthTable:
    rows: List[GrowthRow]
    epsilon: float

    def column(self, name: str) -> List:
        return [getattr(r, name) for r in self.rows]


def _local_distances(ball: Ball, in_nbhd: np.ndarray) -> np.ndarray:
    """Steps needed to reach each element along prefixes that stay in the neighbourhood."""
    dist = np.full(len(ball), -1)
    dist[0] = 0
    frontier = [0]
    gmats = ball.spec.matrices()
    step = 0
    while frontier and step < ball.radius:
        step += 1
        nxt = []
        prods = (ball.matrices[frontier][:, None] @ gmats[None]).reshape(-1, 2, 2)
        for m in prods:
            k = ball.index.lookup(m)
            if k is not None and in_nbhd[k] and dist[k] < 0:
                dist[k] = step
                nxt.append(k)
        frontier = nxt
    return dist


def semilocal_growth(spec: GroupSpec, n_max: int, cfg: MetricConfig, max_size: int = MAX_BALL,
                     truncate: bool = False) -> GrowthTable:
    """Rows n = 0 .. n_max; with ``truncate`` only up to the radius that fits."""
    ball = ball_enumerate(spec, n_max, cfg, max_size, truncate)
    n_max = ball.radius
    in_nbhd = rho_identity(ball.matrices) <= cfg.epsilon
    local = _local_distances(ball, in_nbhd) if cfg.variant == CARRIERE else None
    rows = []
    for n in range(n_max + 1):
        within = ball.lengths <= n
        rows.append(GrowthRow(
            n,
            int(within.sum()),
            int((within & in_nbhd).sum()),
            None if local is None else int(((local >= 0) & (local <= n)).sum()),
        ))
    return GrowthTable(rows, cfg.epsilon)


# -- elementarity -------------------------------------------------------------

@dataclass(frozen=True)
class ElementaryReport:
    common_fixed_interior: bool
    common_boundary_fixed: bool
    invariant_axis: bool

    @property
    def verdict(self) -> str:
        if self.common_fixed_interior or self.common_boundary_fixed or self.invariant_axis:
            return "Elementary"
        return "NonElementary"


def _same_boundary(p, q, tol=GEOM_TOL) -> bool:
    if p.is_infinite or q.is_infinite:
        return p.is_infinite and q.is_infinite
    return abs(p.value - q.value) <= tol * max(1.0, abs(p.value))


def _preserves_pair(m: MoebiusElement, pair, tol=GEOM_TOL) -> bool:
    images = [boundary_apply(m, p) for p in pair]
    return all(any(_same_boundary(img, p, tol) for p in pair) for img in images) and not _same_boundary(
        images[0], images[1], tol
    )


def classify_elementary(spec: GroupSpec, tol: float = GEOM_TOL) -> ElementaryReport:
    elems = [m for _, m in spec.generators if classify(m).tag != "Identity"]
    if not elems:
        return ElementaryReport(True, False, False)
    kinds = [classify(m).tag for m in elems]
    fixed = [fixed_points(m) for m in elems]

    interior = all(k == "Elliptic" for k in kinds)
    if interior:
        z0 = fixed[0][0]
        interior = all(distance(f[0], z0) <= tol for f in fixed)

    boundary = False
    if not any(k == "Elliptic" for k in kinds):
        for p in fixed[0]:
            if all(any(_same_boundary(p, q, tol) for q in f) for f in fixed):
                boundary = True
                break

    candidates = []
    for k, f in zip(kinds, fixed):
        if k == "Hyperbolic":
            candidates.append(f)
            break
    if not candidates:
        # only elliptics of order 2 can preserve a geodesic without translating along it;
        # try the geodesic through the first two distinct elliptic centres
        centres = [f[0] for k, f in zip(kinds, fixed) if k == "Elliptic"]
        distinct = []
        for c in centres:
            if all(abs(c.x - d.x) > tol or abs(c.y - d.y) > tol for d in distinct):
                distinct.append(c)
        if len(distinct) >= 2:
            candidates.append(_geodesic_through(distinct[0], distinct[1]))
        elif len(distinct) == 1:
            c = distinct[0]
            candidates.append((BoundaryPoint(c.x), BoundaryPoint(math.inf)))
    axis = any(all(_preserves_pair(m, pair, tol) for m in elems) for pair in candidates)
    return ElementaryReport(interior, boundary, axis)


def _geodesic_through(p: HPoint, q: HPoint):
    if abs(p.x - q.x) <= GEOM_TOL * max(1.0, abs(p.x)):
        return (BoundaryPoint(p.x), INFINITY)
    # centre c on the real axis with |p - c| = |q - c|
    c = (q.x**2 + q.y**2 - p.x**2 - p.y**2) / (2.0 * (q.x - p.x))
    radius = math.hypot(p.x - c, p.y)
    return (BoundaryPoint(c - radius), BoundaryPoint(c + radius))


# -- elliptics of infinite order -------------------------------------------

def rational_distance(x: float, max_denominator: int = RATIONAL_MAX_DENOMINATOR) -> float:
    """Distance from x to the nearest p/q with 1 <= q <= max_denominator."""
    return min(abs(x - round(x * q) / q) for q in range(1, max_denominator + 1))


@dataclass(frozen=True)
class EllipticFinding:
    element: MoebiusElement
    entry: BallEntry
    angle: float
    rational_distance: float
    heuristic: bool = True  # irrationality is checked only against small denominators


def find_infinite_order_elliptic(spec: GroupSpec, depth: int, angle_tol: float = 1e-6,
                                 cfg: Optional[MetricConfig] = None) -> Optional[EllipticFinding]:
    cfg = cfg or MetricConfig(epsilon=DEFAULT_EPSILON0)
    ball = ball_enumerate(spec, depth, cfg)
    traces = np.abs(ball.matrices[:, 0, 0] + ball.matrices[:, 1, 1])
    for k in np.flatnonzero(traces < 2.0 - 1e-10):
        m = MoebiusElement.from_matrix(ball.matrices[k])
        cls = classify(m)
        if cls.tag != "Elliptic":
            continue
        dist = rational_distance(cls.rotation_angle / math.pi)
        if dist > angle_tol:
            return EllipticFinding(m, ball[int(k)], cls.rotation_angle, dist)
    return None


def find_hyperbolic(spec: GroupSpec, depth: int, avoid: Optional[HPoint] = None,
                    cfg: Optional[MetricConfig] = None) -> Optional[BallEntry]:
    """First hyperbolic element in the ball that moves ``avoid`` (if given)."""
    cfg = cfg or MetricConfig(epsilon=DEFAULT_EPSILON0)
    ball = ball_enumerate(spec, depth, cfg)
    for entry in ball:
        if classify(entry.element).tag != "Hyperbolic":
            continue
        if avoid is not None:
            if distance(apply(entry.element, avoid), avoid) <= GEOM_TOL:
                continue
        return entry
    return None


# -- Zassenhaus neighbourhood ---------------------------------------------------

def sample_neighbourhood(epsilon0: float, count: int, rng: np.random.Generator) -> np.ndarray:
    """Rejection-sample SL(2,R) matrices with rho(., e) <= epsilon0.

    Uniform in the (a, b, c) chart with d = (1 + b c) / a.
    """
    out = []
    have = 0
    while have < count:
        n = max(2 * (count - have), 64)
        a = 1.0 + rng.uniform(-epsilon0, epsilon0, n)
        b = rng.uniform(-epsilon0, epsilon0, n)
        c = rng.uniform(-epsilon0, epsilon0, n)
        ok = a > 0
        a, b, c = a[ok], b[ok], c[ok]
        d = (1.0 + b * c) / a
        mats = np.stack((np.stack((a, b), -1), np.stack((c, d), -1)), -2)
        mats = mats[rho_identity(mats) <= epsilon0]
        out.append(mats)
        have += len(mats)
    return np.concatenate(out)[:count]


def commutators(f: np.ndarray, g: np.ndarray) -> np.ndarray:
    return f @ g @ _inv2(f) @ _inv2(g)


@dataclass
class ZassenhausReport:
    passed: bool
    epsilon0: float
    samples: int
    max_displacement: float
    worst_index: int
    seed: int

    def __bool__(self):
        return self.passed


def zassenhaus_check(epsilon0: float = DEFAULT_EPSILON0, sample_count: int = 1000, seed: int = 0) -> ZassenhausReport:
    """Sample pairs in N_eps0 and check their commutators stay in N_eps0."""
    if not epsilon0 > 0:
        raise ValueError("epsilon0 must be positive")
    rng = np.random.default_rng(seed)
    f = sample_neighbourhood(epsilon0, sample_count, rng)
    g = sample_neighbourhood(epsilon0, sample_count, rng)
    disp = rho_identity(commutators(f, g))
    worst = int(np.argmax(disp))
    return ZassenhausReport(bool(disp.max() <= epsilon0), epsilon0, sample_count, float(disp[worst]), worst, seed)


# -- free pairs -----------------------------------------------------------------

def _elliptic_power(center: HPoint, angle: float, n: np.ndarray) -> np.ndarray:
    """Matrices of rotation about ``center`` by n * angle, computed in closed form."""
    phi = (np.asarray(n, dtype=float) * angle) % (4.0 * math.pi) / 2.0
    h, k = np.cos(phi), np.sin(phi)
    rot = np.stack((np.stack((h, k), -1), np.stack((-k, h), -1)), -2)
    sy = math.sqrt(center.y)
    move = np.array([[sy, center.x / sy], [0.0, 1.0 / sy]])
    return move @ rot @ _inv2(move[None])[0]


def eigenvector_pairings(x: MoebiusElement, y: MoebiusElement) -> np.ndarray:
    """|w*(v)| for unit eigenvectors v of x and unit left eigenvectors w* of y."""
    _, vx = np.linalg.eig(x.matrix())
    _, vy = np.linalg.eig(y.matrix())
    left = np.linalg.inv(vy)
    left = left / np.linalg.norm(left, axis=1, keepdims=True)
    vx = vx / np.linalg.norm(vx, axis=0, keepdims=True)
    return np.abs(left @ vx).ravel()


def reduced_words(max_length: int) -> Iterator[Tuple[int, ...]]:
    """All nonempty reduced words in a, b of length <= max_length (breadth first)."""
    frontier = [()]
    for _ in range(max_length):
        nxt = []
        for w in frontier:
            for x in (1, 2, -1, -2):
                if not w or w[-1] != -x:
                    nxt.append(w + (x,))
        yield from nxt
        frontier = nxt


def _min_word_displacement(a: np.ndarray, b: np.ndarray, max_length: int):
    """Smallest rho(w(a, b), e) over nonempty reduced words, and the word attaining it."""
    letters = {1: a, 2: b, -1: _inv2(a[None])[0], -2: _inv2(b[None])[0]}
    best = (math.inf, None)
    frontier_words = [()]
    frontier = np.array([_I2])
    for _ in range(max_length):
        words, mats = [], []
        for x, mx in letters.items():
            keep = [k for k, w in enumerate(frontier_words) if not w or w[-1] != -x]
            if not keep:
                continue
            words.extend(frontier_words[k] + (x,) for k in keep)
            mats.append(frontier[keep] @ mx)
        frontier = np.concatenate(mats)
        frontier_words = words
        disp = rho_identity(frontier)
        k = int(np.argmin(disp))
        if disp[k] < best[0]:
            best = (float(disp[k]), frontier_words[k])
    return best


@dataclass
class FreePairCertificate:
    a: MoebiusElement
    b: MoebiusElement
    epsilon0: float
    max_checked_length: int
    eigenvector_pairing_ok: bool
    alpha: MoebiusElement
    beta: MoebiusElement
    m: int
    k: int
    l: int
    min_pairing: float
    min_word_displacement: float
    heuristic_infinite_order: bool = True

    @property
    def weak(self) -> bool:
        return self.max_checked_length == 0

    def to_json(self) -> dict:
        return {
            "a": self.a.matrix().tolist(),
            "b": self.b.matrix().tolist(),
            "epsilon0": self.epsilon0,
            "maxCheckedLength": self.max_checked_length,
            "eigenvectorPairingOK": self.eigenvector_pairing_ok,
            "alpha": self.alpha.matrix().tolist(),
            "beta": self.beta.matrix().tolist(),
            "m": self.m,
            "k": self.k,
            "l": self.l,
            "rho_a": rho(MoebiusElement.identity(), self.a),
            "rho_b": rho(MoebiusElement.identity(), self.b),
            "minPairing": self.min_pairing,
            "minWordDisplacement": None if math.isinf(self.min_word_displacement) else self.min_word_displacement,
            "weak": self.weak,
            "heuristicInfiniteOrder": self.heuristic_infinite_order,
        }


def _first_small_power(center: HPoint, angle: float, m: int, epsilon0: float, budget: int) -> Optional[int]:
    """Least k with rho(rotation^(km), e) in [0.8 eps0, eps0].

    Falls back to the window [eps0/2, eps0] and then to any k with
    rho <= eps0. Powers near the top of the window keep iterated commutators
    of the pair far enough apart to be told apart at 1e-9.
    """
    ks = np.arange(1, budget + 1)
    disp = rho_identity(_elliptic_power(center, angle, ks * m))
    for lo in (0.8 * epsilon0, 0.5 * epsilon0, 0.0):
        hits = np.flatnonzero((disp <= epsilon0) & (disp >= lo))
        if len(hits):
            return int(ks[hits[0]])
    return None


def build_free_pair(elliptic: MoebiusElement, hyperbolic: MoebiusElement, epsilon0: float = DEFAULT_EPSILON0,
                    max_checked_length: int = 8, angle_tol: float = 1e-6, max_m: int = 16,
                    power_budget: int = 200_000) -> FreePairCertificate:
    """Small free pair a = alpha^(km), b = beta^(lm) with beta = h alpha h^-1.

    The exponent m is searched upward; for each m, k and l are the first
    exponents putting the powers just inside N_eps0 (see
    :func:`_first_small_power`), and the pair is
    accepted once no nonempty reduced word of length <= max_checked_length
    lands within 1e-6 of the identity.
    """
    cls = classify(elliptic)
    if cls.tag != "Elliptic":
        raise ConstructionError(f"first element must be elliptic, got {cls.tag}")
    if rational_distance(cls.rotation_angle / math.pi) <= angle_tol:
        raise ConstructionError(f"rotation angle {cls.rotation_angle} is close to a rational multiple of pi")
    beta = hyperbolic @ elliptic @ hyperbolic.inverse()
    pairings = eigenvector_pairings(elliptic, beta)
    min_pairing = float(pairings.min())
    if min_pairing <= PAIRING_TOL:
        raise ConstructionError(
            f"eigenvector pairing degenerate (min |w*(v)| = {min_pairing:.2e}); "
            "the conjugate shares a fixed point with the elliptic"
        )
    if classify(hyperbolic).tag != "Hyperbolic":
        raise ConstructionError(f"conjugating element must be hyperbolic, got {classify(hyperbolic).tag}")
    angle = cls.rotation_angle
    c_alpha = fixed_points(elliptic)[0]
    c_beta = apply(hyperbolic, c_alpha)
    last_collision = None
    for m in range(1, max_m + 1):
        k = _first_small_power(c_alpha, angle, m, epsilon0, power_budget)
        l = _first_small_power(c_beta, angle, m, epsilon0, power_budget)
        if k is None or l is None:
            raise ResourceCeilingError(f"no power within {epsilon0} of the identity below {power_budget} (m={m})")
        a = _elliptic_power(c_alpha, angle, np.array([k * m]))[0]
        b = _elliptic_power(c_beta, angle, np.array([l * m]))[0]
        disp, word = _min_word_displacement(a, b, max_checked_length) if max_checked_length else (math.inf, None)
        if disp <= IDENTITY_COLLISION_TOL:
            last_collision = (m, word, disp)
            continue
        return FreePairCertificate(
            MoebiusElement.from_matrix(a), MoebiusElement.from_matrix(b), epsilon0, max_checked_length,
            True, elliptic, beta, m, k, l, min_pairing, disp,
        )
    m, word, disp = last_collision
    raise IdentityCollisionError(
        f"word {freewords.FreeWord(word)} is within {disp:.2e} of the identity (last m tried: {m})"
    )


# -- commutator tower -------------------------------------------------------------

@dataclass(frozen=True)
class TowerRow:
    i: int
    word_length: int
    words: int
    images_in_n: int
    floor: int

    @property
    def shortfall(self) -> bool:
        return self.images_in_n < self.floor


@dataclass
class TowerTable:
    rows: List[TowerRow]
    epsilon0: float

    @property
    def violations(self) -> List[str]:
        return [
            f"level {r.i}: {r.images_in_n} distinct images in N_eps0 < {r.floor}; "
            "the pair may not be free or eps0 is too small"
            for r in self.rows if r.shortfall
        ]


def _inv2_offset(D: np.ndarray) -> np.ndarray:
    out = np.empty_like(D)
    out[..., 0, 0] = D[..., 1, 1]
    out[..., 1, 1] = D[..., 0, 0]
    out[..., 0, 1] = -D[..., 0, 1]
    out[..., 1, 0] = -D[..., 1, 0]
    return out


def _offset_mul(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    return X + Y + X @ Y


def tower_offsets(a: np.ndarray, b: np.ndarray, i_max: int, allow_large: bool = False) -> List[np.ndarray]:
    """Offsets M - I of the images of W_0 .. W_i_max at (a, b), in enumeration order.

    Built recursively as commutators of the previous level. Working with
    offsets keeps deep commutators, which sit very close to the identity,
    accurate to a relative rather than absolute precision.
    """
    if i_max > 2 and not allow_large:
        raise ResourceCeilingError("tower levels above 2 need allow_large=True")
    A, B = np.asarray(a, dtype=float) - _I2, np.asarray(b, dtype=float) - _I2
    images = [np.array([A, B, _inv2_offset(A), _inv2_offset(B)])]
    prev = freewords.gen_comm_level(0).words
    for i in range(1, i_max + 1):
        xs, ys = [], []
        for jx, x in enumerate(prev):
            for jy, y in enumerate(prev):
                if x != y and x != y.inverse():
                    xs.append(jx)
                    ys.append(jy)
        X, Y = images[-1][xs], images[-1][ys]
        images.append(_offset_mul(_offset_mul(X, Y), _offset_mul(_inv2_offset(X), _inv2_offset(Y))))
        prev = freewords.gen_comm_level(i, allow_large).words
    return images


def count_distinct_offsets(D: np.ndarray, tol: float = CONFIRM_TOL) -> int:
    """Clusters of offsets under the relation "within ``tol``", closed transitively.

    Unlike :class:`MatrixIndex` this never raises: near-coincident images of
    distinct words simply merge, and the lower count is what gets reported.
    """
    if len(D) == 0:
        return 0
    pts = np.asarray(D, dtype=float).reshape(len(D), 4)
    pairs = cKDTree(pts).query_pairs(tol, output_type="ndarray")
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(len(pts), len(pts)))
    return int(connected_components(graph, directed=False)[0])


def commutator_tower_growth(cert: FreePairCertificate, i_max: int = 2, allow_large: bool = False,
                            confirm_tol: float = CONFIRM_TOL) -> TowerTable:
    """Count distinct images of W_i in N_eps0; a shortfall is a reported finding.

    Images of distinct words can land within ``confirm_tol`` of each other;
    they are then counted once. Level 3 images sit within ~1e-10 of the
    identity for eps0 = 0.05, so resolving them needs a much smaller
    ``confirm_tol``.
    """
    offsets = tower_offsets(cert.a.matrix(), cert.b.matrix(), i_max, allow_large)
    rows = []
    for i, D in enumerate(offsets):
        inside = D[np.sqrt((D ** 2).sum(axis=(1, 2))) <= cert.epsilon0]
        rows.append(TowerRow(i, 4**i, len(D), count_distinct_offsets(inside, confirm_tol), 2 ** (2**i)))
    return TowerTable(rows, cert.epsilon0)


# -- discreteness verdict -------------------------------------------------------------

@dataclass
class Verdict:
    kind: str  # "DiscreteLikely" | "NonDiscreteLikely" | "Inconclusive"
    table: GrowthTable
    A: Optional[float] = None
    B: Optional[float] = None
    floor_hits: List[int] = field(default_factory=list)
    heuristic: bool = True


def _affine_majorant(ns: np.ndarray, counts: np.ndarray):
    nbar, cbar = ns.mean(), counts.mean()
    var = ((ns - nbar) ** 2).sum()
    A = float(((ns - nbar) * (counts - cbar)).sum() / var) if var > 0 else 0.0
    B = float(cbar - A * nbar)
    resid = counts - (A * ns + B)
    return A, B + float(max(resid.max(), 0.0)), float(np.abs(resid).max())


def _tower_lower_bound(spec: GroupSpec, n: int, epsilon: float, generators: Tuple[str, str]) -> int:
    table = dict(spec.generators)
    a, b = (table[g].matrix() for g in generators)
    levels = 0
    while 4 ** (levels + 1) <= n and levels < 2:
        levels += 1
    D = np.concatenate([np.zeros((1, 2, 2))] + tower_offsets(a, b, levels))
    return count_distinct_offsets(D[rho_identity(D + _I2) <= epsilon])


def discreteness_verdict(spec: GroupSpec, n_max: int, cfg: MetricConfig, sample_ns: Optional[Sequence[int]] = None,
                         max_size: int = 200_000, tower_generators: Optional[Tuple[str, str]] = None,
                         residual_tol: float = 0.5) -> Verdict:
    """Heuristic call between linear semilocal growth and the 2^(sqrt(n)/4) floor.

    Rows whose ball fits under ``max_size`` are exact. Larger n fall back to a
    lower bound: distinct elements in N_eps among the identity and the images
    of W_j (word length 4^j <= n) at two generators, which can only establish
    fast growth, never rule it out.
    """
    ns = sorted(set(sample_ns)) if sample_ns is not None else list(range(n_max + 1))
    table = semilocal_growth(spec, max(ns), cfg, max_size, truncate=True)
    exact_max = len(table.rows) - 1
    if tower_generators is None:
        base = [lab for lab in spec.labels if not lab.endswith("^-1")]
        tower_generators = tuple(base[:2]) if len(base) >= 2 else None
    rows = []
    for n in ns:
        if n <= exact_max:
            rows.append(table.rows[n])
        elif tower_generators is not None:
            lower = _tower_lower_bound(spec, n, cfg.epsilon, tower_generators)
            rows.append(GrowthRow(n, None, max(lower, table.rows[exact_max].semilocal), exact=False))
    growth = GrowthTable(rows, cfg.epsilon)
    counts = np.array([r.semilocal for r in rows], dtype=float)
    nvals = np.array([r.n for r in rows], dtype=float)
    floors = np.array([growth_floor(n) for n in nvals])
    hits = [int(n) for n, c, f in zip(nvals, counts, floors) if c >= f]
    if rows and all(r.exact for r in rows):
        A, B, resid = _affine_majorant(nvals, counts)
        if resid <= residual_tol and np.all(counts <= floors):
            return Verdict("DiscreteLikely", growth, A, B, hits)
    if len(hits) >= 2:
        return Verdict("NonDiscreteLikely", growth, floor_hits=hits)
    return Verdict("Inconclusive", growth, floor_hits=hits)


# -- orbit map of triples ---------------------------------------------------------------

def triple_orbit_map(spec: GroupSpec, base_triple: IdealTriple, entries) -> List[Tuple[int, HPoint]]:
    """Point of a . base_triple for each enumerated element a."""
    return [(e.word_length, triple_to_point(triple_apply(e.element, base_triple))) for e in entries]
