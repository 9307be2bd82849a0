"""Product metric on H^2 x R and the quasi-isometry constant calculus.

Two printed formulas have unbalanced parentheses. The readings used here are

    l >= ln((D/lam - eps) / (a (2 kappa + 2 delta + 1)) - 1) - lam (2 eps + 1) + 1
    D' = lam a (2 kappa + 2 delta + 1) (exp(lam (2 eps + 1)) + 1) + eps

which are the ones obtained by inverting the cosh bound with cosh x ~ e^x / 2.
The alternates (``ln`` applied before subtracting 1, or ``+ eps`` inside the
product for D') are not implemented.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Dict, Hashable, Iterable, List, Mapping, Optional, Sequence, Tuple

from .hyp2 import HPoint, distance

QI_TOL = 1e-9


@dataclass(frozen=True)
class ProductPoint:
    base: HPoint
    height: float

    @classmethod
    def of(cls, x: float, y: float, height: float) -> "ProductPoint":
        return cls(HPoint(x, y), height)


def horizontal_distance(p: ProductPoint, q: ProductPoint) -> float:
    return distance(p.base, q.base)


def vertical_distance(p: ProductPoint, q: ProductPoint) -> float:
    return abs(p.height - q.height)


def product_distance(p: ProductPoint, q: ProductPoint) -> float:
    return math.hypot(horizontal_distance(p, q), vertical_distance(p, q))


@dataclass(frozen=True)
class QIParams:
    """Constants for a quasi-isometry / quasiaction.

    ``kappa`` defaults to ``lam * delta + epsilon``. ``a`` is the otherwise
    unspecified multiplier in c = a S and defaults to 1.
    """

    lam: float = 1.0
    epsilon: float = 0.0
    delta: float = 0.0
    kappa: Optional[float] = None
    a: float = 1.0

    def __post_init__(self):
        if self.lam < 1:
            raise ValueError(f"lambda must be >= 1, got {self.lam}")
        if self.epsilon < 0 or self.delta < 0:
            raise ValueError("epsilon and delta must be nonnegative")
        if not self.a > 0:
            raise ValueError(f"a must be positive, got {self.a}")
        if self.kappa is None:
            object.__setattr__(self, "kappa", quasiaction_kappa(self.lam, self.epsilon, self.delta))
        elif self.kappa < 0:
            raise ValueError(f"kappa must be nonnegative, got {self.kappa}")


def quasiaction_kappa(lam: float, epsilon: float, delta: float) -> float:
    return lam * delta + epsilon


def S_constant(lam: float, epsilon: float, r: float) -> float:
    if r < 0:
        raise ValueError(f"r must be nonnegative, got {r}")
    return 2.0 * (math.cosh(2.0 * r + lam * (1.0 + 2.0 * epsilon)) - 1.0)


def mainprop_constant(params: QIParams, r: float) -> float:
    """c = a S(lam, eps, r)."""
    return params.a * S_constant(params.lam, params.epsilon, r)


def mainprop_bound(c: float, h0: float) -> float:
    if not c > 0 or h0 < 0:
        raise ValueError(f"need c > 0 and h0 >= 0, got c={c}, h0={h0}")
    return c * h0 + c


def R_of_L(L: float, lam: float, epsilon: float, h0: float) -> float:
    return (L / lam - 3.0 * epsilon - h0) / (2.0 * lam)


def L_of_R(R: float, lam: float, epsilon: float, h0: float) -> float:
    return 2.0 * lam**2 * R + 3.0 * lam * epsilon + lam * h0


def separation_constant(lam: float, epsilon: float) -> float:
    """s = lam (1 + 2 eps), the spacing of the packed cylinders."""
    return lam * (1.0 + 2.0 * epsilon)


@dataclass(frozen=True)
class VacuousBound:
    """Marker for a lower bound whose logarithm argument is not positive."""

    log_argument: float

    def __bool__(self):
        return False


def horizontal_lower_bound(D: float, params: QIParams):
    """Lower bound on the horizontal distance between images of points D apart.

    Returns a float, or a :class:`VacuousBound` when the bound says nothing.
    """
    if not D > 0:
        raise ValueError(f"D must be positive, got {D}")
    lam, eps = params.lam, params.epsilon
    arg = (D / lam - eps) / (params.a * (2.0 * params.kappa + 2.0 * params.delta + 1.0)) - 1.0
    if arg <= 0:
        return VacuousBound(arg)
    return math.log(arg) - lam * (2.0 * eps + 1.0) + 1.0


def projected_separation(params: QIParams) -> float:
    """D': points this far apart have projected images at least 1 apart."""
    lam, eps = params.lam, params.epsilon
    return (
        lam * params.a * (2.0 * params.kappa + 2.0 * params.delta + 1.0)
        * (math.exp(lam * (2.0 * eps + 1.0)) + 1.0)
        + eps
    )


def projected_qi_params(params: QIParams) -> Tuple[float, float]:
    """(lambda', epsilon') for the horizontal projection of a quasi-isometry."""
    return max(params.lam, projected_separation(params)), max(params.epsilon, 1.0)


class SampledMap:
    """A finite list of (source, image) pairs; callable on its sources."""

    def __init__(self, pairs: Iterable[Tuple[ProductPoint, ProductPoint]]):
        self.pairs = list(pairs)
        if not self.pairs:
            raise ValueError("sampled map needs at least one pair")
        self._lookup = {}
        for src, img in self.pairs:
            if src in self._lookup:
                raise ValueError(f"duplicate source {src}")
            self._lookup[src] = img

    @classmethod
    def from_function(cls, f: Callable[[ProductPoint], ProductPoint], sources: Iterable[ProductPoint]):
        return cls((p, f(p)) for p in sources)

    @property
    def sources(self) -> List[ProductPoint]:
        return [p for p, _ in self.pairs]

    def __call__(self, p: ProductPoint) -> ProductPoint:
        try:
            return self._lookup[p]
        except KeyError:
            raise KeyError(f"{p} is not a sample source of this map") from None

    def __len__(self):
        return len(self.pairs)


@dataclass
class QIReport:
    passed: bool
    samples: int
    pairs_checked: int
    # (i, j, excess): worst violating source pair, by excess then lexicographic index
    worst: Optional[Tuple[int, int, float]] = None

    def __bool__(self):
        return self.passed


def verify_qi(sampled: SampledMap, lam: float, epsilon: float, tol: float = QI_TOL) -> QIReport:
    """Check (1/lam) d - eps <= d' <= lam d + eps over all sampled source pairs.

    Almost-surjectivity cannot be decided from samples and is not checked.
    """
    pairs = sampled.pairs
    if len(pairs) < 2:
        raise ValueError("need at least two sample pairs")
    worst = None
    checked = 0
    for i in range(len(pairs)):
        for j in range(i + 1, len(pairs)):
            d = product_distance(pairs[i][0], pairs[j][0])
            dimg = product_distance(pairs[i][1], pairs[j][1])
            excess = max(d / lam - epsilon - dimg, dimg - lam * d - epsilon)
            checked += 1
            if excess > tol and (worst is None or excess > worst[2]):
                worst = (i, j, excess)
    return QIReport(worst is None, len(pairs), checked, worst)


class IncompleteFamilyError(KeyError):
    """A composite map needed by the quasiaction check is missing."""


@dataclass
class QuasiactionReport:
    passed: bool
    kappa: float
    checks: int
    max_defect: float
    # (u, u', source index, defect) of the largest defect above kappa
    worst: Optional[Tuple[Hashable, Hashable, int, float]] = None

    def __bool__(self):
        return self.passed


def _concat(u, v):
    return tuple(u) + tuple(v)


def verify_quasiaction(
    maps: Mapping[Hashable, Callable[[ProductPoint], ProductPoint]],
    sources: Sequence[ProductPoint],
    kappa: float,
    products: Optional[Iterable[Tuple[Hashable, Hashable]]] = None,
    compose: Callable[[Hashable, Hashable], Hashable] = _concat,
    tol: float = QI_TOL,
) -> QuasiactionReport:
    """Check d(phi_u phi_u'(x), phi_uu'(x)) <= kappa on common sample sources.

    ``maps`` are indexed by group words (tuples of labels by default, composed
    by concatenation). Each map must be evaluable on the images of the
    others, so callables are expected; a :class:`SampledMap` only works when
    its samples cover those images. ``products`` lists the (u, u') pairs to
    check; by default every pair whose composite is present in ``maps``.
    """
    if products is None:
        products = [(u, v) for u in maps for v in maps if compose(u, v) in maps]
        if not products:
            raise IncompleteFamilyError("no pair (u, u') has its composite in the family")
    worst = None
    max_defect = 0.0
    checks = 0
    for u, v in products:
        uv = compose(u, v)
        for key in (u, v, uv):
            if key not in maps:
                raise IncompleteFamilyError(f"family has no map for {key!r}")
        fu, fv, fuv = maps[u], maps[v], maps[uv]
        for k, x in enumerate(sources):
            defect = product_distance(fu(fv(x)), fuv(x))
            checks += 1
            max_defect = max(max_defect, defect)
            if defect > kappa + tol and (worst is None or defect > worst[3]):
                worst = (u, v, k, defect)
    return QuasiactionReport(worst is None, kappa, checks, max_defect, worst)


def constants_report(params: QIParams, r: float, h0: float, L: float, D: float) -> Dict[str, object]:
    """Every evaluator at one parameter point, for reporting."""
    c = mainprop_constant(params, r)
    hlb = horizontal_lower_bound(D, params)
    lam_p, eps_p = projected_qi_params(params)
    R = R_of_L(L, params.lam, params.epsilon, h0)
    return {
        "lambda": params.lam,
        "epsilon": params.epsilon,
        "delta": params.delta,
        "a": params.a,
        "r": r,
        "h0": h0,
        "L": L,
        "D": D,
        "kappa": params.kappa,
        "kappa_derived": quasiaction_kappa(params.lam, params.epsilon, params.delta),
        "S": S_constant(params.lam, params.epsilon, r),
        "c": c,
        "mainprop_bound": mainprop_bound(c, h0),
        "s": separation_constant(params.lam, params.epsilon),
        "R_of_L": R,
        "L_of_R_of_L": L_of_R(R, params.lam, params.epsilon, h0),
        "horizontal_lower_bound": None if isinstance(hlb, VacuousBound) else hlb,
        "horizontal_lower_bound_vacuous": isinstance(hlb, VacuousBound),
        "D_prime": projected_separation(params),
        "lambda_prime": lam_p,
        "epsilon_prime": eps_p,
    }
