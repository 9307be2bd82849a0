"""Disk packing bounds in Euclidean and hyperbolic disks, with greedy oracles.

Conventions: small disks of radius r lie inside the ambient disk of radius R
(so centers are within R - r of the ambient center) and the gap between any
two small disks is at least 2s (so centers are at least 2(r + s) apart).

The cylinder argument that consumes the hyperbolic estimate uses spacing s/2,
i.e. cosh(2(r + s/2)) in the denominator. :func:`hyp_packing_bound` takes s as
given; pass s/2 to reproduce that usage.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Sequence, Union

import numpy as np
from scipy.spatial import cKDTree

from .hyp2 import HPoint

EUCLIDEAN = "euclidean"
HYPERBOLIC = "hyperbolic"
SPACES = (EUCLIDEAN, HYPERBOLIC)

N_REJECT = 100_000
# relative inflation of the conflict radius; borderline candidates are rejected
SEPARATION_SLACK = 1e-9
MIN_BATCH = 256
MAX_SURVIVORS = 512


@dataclass(frozen=True)
class PackingConfig:
    R: float
    r: float
    s: float = 0.0
    space: str = EUCLIDEAN

    def __post_init__(self):
        if self.space not in SPACES:
            raise ValueError(f"space must be one of {SPACES}, got {self.space!r}")
        if not self.r > 0 or not self.R > 0 or self.s < 0:
            raise ValueError(f"need R > 0, r > 0, s >= 0; got R={self.R}, r={self.r}, s={self.s}")

    @property
    def center_radius(self) -> float:
        return self.R - self.r

    @property
    def separation(self) -> float:
        return 2.0 * (self.r + self.s)


@dataclass
class PackingResult:
    config: PackingConfig
    count: int
    centers: List[Union[HPoint, tuple]]
    maximal: bool
    reject_samples: int
    # raw coordinates: planar (x, y) or Poincare disk coordinates about the ambient center
    coords: np.ndarray = field(repr=False, default=None)


def euclid_packing_bound(R: float, r: float, s: float) -> float:
    return ((R + s) / (r + s)) ** 2


def hyp_packing_bound(R: float, r: float, s: float) -> float:
    return (math.exp(R) - 2.0) / (2.0 * (math.cosh(2.0 * (r + s)) - 1.0))


def packing_bound(config: PackingConfig) -> float:
    f = euclid_packing_bound if config.space == EUCLIDEAN else hyp_packing_bound
    return f(config.R, config.r, config.s)


def _sample(config: PackingConfig, rng: np.random.Generator, n: int) -> np.ndarray:
    """n points uniform (w.r.t. area in the relevant metric) in the center region."""
    u, theta = rng.random(n), rng.random(n) * (2.0 * math.pi)
    rc = config.center_radius
    if config.space == EUCLIDEAN:
        rad = rc * np.sqrt(u)
    else:
        # inverse CDF of area(rho) ~ cosh(rho) - 1, then disk-model radius tanh(rho/2)
        rho = np.arccosh(1.0 + u * (math.cosh(rc) - 1.0))
        rad = np.tanh(rho / 2.0)
    return np.column_stack((rad * np.cos(theta), rad * np.sin(theta)))


def _conflict_disks(config: PackingConfig, pts: np.ndarray):
    """Euclidean (center, radius) of the open conflict region around each point.

    In the Poincare disk a hyperbolic ball is a Euclidean disk, so the query
    below is exact rather than a superset.
    """
    D = config.separation * (1.0 + SEPARATION_SLACK)
    if config.space == EUCLIDEAN:
        return pts, np.full(len(pts), D)
    a = np.hypot(pts[:, 0], pts[:, 1])
    rho = 2.0 * np.arctanh(np.minimum(a, 1.0 - 1e-16))
    t_lo = np.tanh((rho - D) / 2.0)
    t_hi = np.tanh((rho + D) / 2.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        unit = np.where(a[:, None] > 0, pts / a[:, None], np.array([1.0, 0.0]))
    return unit * ((t_lo + t_hi) / 2.0)[:, None], (t_hi - t_lo) / 2.0


def _admissible(config: PackingConfig, tree, cand: np.ndarray) -> np.ndarray:
    if tree is None:
        return np.ones(len(cand), dtype=bool)
    centers, radii = _conflict_disks(config, cand)
    return tree.query_ball_point(centers, radii, return_length=True) == 0


def _greedy_within(config: PackingConfig, cand: np.ndarray) -> np.ndarray:
    """Greedy in order over mutually unchecked candidates; returns kept indices."""
    if len(cand) <= 1:
        return np.arange(len(cand))
    tree = cKDTree(cand)
    centers, radii = _conflict_disks(config, cand)
    neighbours = tree.query_ball_point(centers, radii)
    taken = np.zeros(len(cand), dtype=bool)
    for i, nb in enumerate(neighbours):
        if not any(taken[j] for j in nb if j < i):
            taken[i] = True
    return np.flatnonzero(taken)


def _to_hpoint(w: np.ndarray) -> HPoint:
    # Poincare disk -> upper half plane sending 0 to i
    z = complex(w[0], w[1])
    return HPoint.from_complex(1j * (1 + z) / (1 - z))


def greedy_pack(config: PackingConfig, seed: int, reject_samples: int = N_REJECT,
                batch: int = 20_000) -> PackingResult:
    """Random sequential greedy packing, run until certified maximal.

    Candidates are drawn uniformly and accepted when they clear every accepted
    center. The run stops once ``reject_samples`` consecutive fresh samples
    are all inadmissible. Deterministic for a fixed ``(config, seed)``.
    """
    if config.R <= config.r:
        return PackingResult(config, 0, [], True, 0, np.zeros((0, 2)))
    rng = np.random.default_rng(seed)
    accepted = np.zeros((0, 2))
    tree = None
    failures = 0
    n = MIN_BATCH
    while failures < reject_samples:
        if failures:
            n = min(batch, reject_samples - failures)
        cand = _sample(config, rng, n)
        ok = np.flatnonzero(_admissible(config, tree, cand))
        if len(ok) == 0:
            failures += n
            continue
        failures = 0
        # unexamined survivors beyond the cap are dropped; they are fresh samples
        ok = ok[:MAX_SURVIVORS]
        kept = cand[ok[_greedy_within(config, cand[ok])]]
        accepted = np.vstack((accepted, kept))
        tree = cKDTree(accepted)
        if len(ok) < MAX_SURVIVORS:
            n = min(2 * n, batch)
    if config.space == EUCLIDEAN:
        centers = [(float(x), float(y)) for x, y in accepted]
    else:
        centers = [_to_hpoint(w) for w in accepted]
    return PackingResult(config, len(accepted), centers, True, reject_samples, accepted)


@dataclass(frozen=True)
class CompareRow:
    R: float
    euclid_count: int
    euclid_bound: float
    hyp_count: int
    hyp_bound: float

    @property
    def ratio(self) -> float:
        return self.hyp_count / self.euclid_count if self.euclid_count else math.inf


def pack_compare(Rs: Sequence[float], r: float, s: float, seed: int,
                 reject_samples: int = N_REJECT) -> List[CompareRow]:
    rows = []
    for R in Rs:
        e = greedy_pack(PackingConfig(R, r, s, EUCLIDEAN), seed, reject_samples)
        h = greedy_pack(PackingConfig(R, r, s, HYPERBOLIC), seed, reject_samples)
        rows.append(CompareRow(R, e.count, euclid_packing_bound(R, r, s), h.count, hyp_packing_bound(R, r, s)))
    return rows
