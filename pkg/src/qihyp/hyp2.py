"""Upper half-plane geometry: points, distances, Moebius isometries, ideal triples."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np

ALGEBRAIC_TOL = 1e-10
GEOMETRIC_TOL = 1e-8


class DegenerateSampleError(ValueError):
    """A sampled boundary map is not strictly increasing where it was probed."""


@dataclass(frozen=True)
class HPoint:
    x: float
    y: float

    def __post_init__(self):
        if not (self.y > 0) or not math.isfinite(self.y) or not math.isfinite(self.x):
            raise ValueError(f"HPoint needs finite x and y > 0, got ({self.x}, {self.y})")

    @classmethod
    def from_complex(cls, z: complex) -> "HPoint":
        return cls(float(z.real), float(z.imag))

    def as_complex(self) -> complex:
        return complex(self.x, self.y)


@dataclass(frozen=True)
class BoundaryPoint:
    """A point of R u {inf}; ``value`` is ``math.inf`` for the point at infinity."""

    value: float

    def __post_init__(self):
        v = float(self.value)
        if math.isnan(v):
            raise ValueError("boundary point cannot be NaN")
        # -inf and +inf are the same point of the circle
        object.__setattr__(self, "value", math.inf if math.isinf(v) else v)

    @property
    def is_infinite(self) -> bool:
        return math.isinf(self.value)

    def __repr__(self):
        return "BoundaryPoint(inf)" if self.is_infinite else f"BoundaryPoint({self.value!r})"


INFINITY = BoundaryPoint(math.inf)


def _as_boundary(b) -> BoundaryPoint:
    return b if isinstance(b, BoundaryPoint) else BoundaryPoint(b)


@dataclass(frozen=True)
class IdealTriple:
    p1: BoundaryPoint
    p2: BoundaryPoint
    p3: BoundaryPoint

    def __post_init__(self):
        pts = [_as_boundary(p) for p in (self.p1, self.p2, self.p3)]
        for name, p in zip(("p1", "p2", "p3"), pts):
            object.__setattr__(self, name, p)
        vals = [p.value for p in pts]
        if len(set(vals)) != 3:
            raise ValueError(f"ideal triple needs three distinct points, got {vals}")

    def points(self) -> Tuple[BoundaryPoint, BoundaryPoint, BoundaryPoint]:
        return (self.p1, self.p2, self.p3)


@dataclass(frozen=True)
class IsomClass:
    tag: str  # "Identity" | "Elliptic" | "Parabolic" | "Hyperbolic"
    rotation_angle: Optional[float] = None
    translation_length: Optional[float] = None


class MoebiusElement:
    """An element of PSL(2,R) stored as its canonical unit-determinant lift.

    Construction rescales to determinant one and then fixes the sign so the
    first entry (in the order a, b, c, d) that is not zero is positive.
    """

    __slots__ = ("a", "b", "c", "d")

    def __init__(self, a, b, c, d):
        a, b, c, d = float(a), float(b), float(c), float(d)
        det = a * d - b * c
        if not det > 0:
            raise ValueError(f"Moebius element needs positive determinant, got {det}")
        if abs(det - 1.0) > 1e-15:
            s = math.sqrt(det)
            a, b, c, d = a / s, b / s, c / s, d / s
        for v in (a, b, c, d):
            if v != 0.0:
                if v < 0:
                    a, b, c, d = -a, -b, -c, -d
                break
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "d", d)

    def __setattr__(self, name, value):
        raise AttributeError("MoebiusElement is immutable")

    @classmethod
    def from_matrix(cls, m) -> "MoebiusElement":
        m = np.asarray(m, dtype=float)
        return cls(m[0, 0], m[0, 1], m[1, 0], m[1, 1])

    @classmethod
    def identity(cls) -> "MoebiusElement":
        return cls(1.0, 0.0, 0.0, 1.0)

    @classmethod
    def rotation(cls, center: HPoint, angle: float) -> "MoebiusElement":
        """Counterclockwise rotation by ``angle`` radians about ``center``."""
        h = math.cos(angle / 2.0)
        k = math.sin(angle / 2.0)
        rot = cls(h, k, -k, h)  # rotation about i
        move = cls(math.sqrt(center.y), center.x / math.sqrt(center.y), 0.0, 1.0 / math.sqrt(center.y))
        return move @ rot @ move.inverse()

    @classmethod
    def translation(cls, length: float) -> "MoebiusElement":
        """Hyperbolic translation along the imaginary axis, i -> e^length i."""
        return cls(math.exp(length / 2.0), 0.0, 0.0, math.exp(-length / 2.0))

    def matrix(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]])

    def inverse(self) -> "MoebiusElement":
        return MoebiusElement(self.d, -self.b, -self.c, self.a)

    def __matmul__(self, other: "MoebiusElement") -> "MoebiusElement":
        return MoebiusElement(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        )

    def __pow__(self, n: int) -> "MoebiusElement":
        m = np.linalg.matrix_power(self.matrix(), abs(int(n)))
        out = MoebiusElement.from_matrix(m)
        return out if n >= 0 else out.inverse()

    @property
    def trace(self) -> float:
        return self.a + self.d

    def is_close(self, other: "MoebiusElement", tol: float = 1e-9) -> bool:
        m, n = self.matrix(), other.matrix()
        return min(np.abs(m - n).max(), np.abs(m + n).max()) <= tol

    def __eq__(self, other):
        if not isinstance(other, MoebiusElement):
            return NotImplemented
        return self.is_close(other, ALGEBRAIC_TOL)

    def __hash__(self):
        return hash(tuple(round(v, 8) for v in (self.a, self.b, self.c, self.d)))

    def __repr__(self):
        return f"MoebiusElement([[{self.a!r}, {self.b!r}], [{self.c!r}, {self.d!r}]])"


def distance(p: HPoint, q: HPoint) -> float:
    # 2 asinh form of cosh d = 1 + |p-q|^2 / (2 y1 y2); stable for nearby points
    chord = math.hypot(p.x - q.x, p.y - q.y)
    return 2.0 * math.asinh(chord / (2.0 * math.sqrt(p.y * q.y)))


def disk_area(R: float) -> float:
    if R < 0:
        raise ValueError(f"radius must be nonnegative, got {R}")
    return 2.0 * math.pi * (math.cosh(R) - 1.0)


def apply(m: MoebiusElement, p: HPoint) -> HPoint:
    z = p.as_complex()
    return HPoint.from_complex((m.a * z + m.b) / (m.c * z + m.d))


def classify(m: MoebiusElement, tol: float = ALGEBRAIC_TOL) -> IsomClass:
    tr = m.trace
    abs_tr = abs(tr)
    if abs(abs_tr - 2.0) <= tol:
        off = max(abs(m.b), abs(m.c), abs(abs(m.a) - 1.0), abs(abs(m.d) - 1.0))
        if off <= tol:
            return IsomClass("Identity")
        return IsomClass("Parabolic")
    if abs_tr < 2.0:
        half = math.acos(abs_tr / 2.0)
        # sign of c on the trace >= 0 lift fixes the sense of rotation
        c = m.c if tr >= 0 else -m.c
        angle = 2.0 * half if c < 0 else 2.0 * math.pi - 2.0 * half
        return IsomClass("Elliptic", rotation_angle=angle)
    return IsomClass("Hyperbolic", translation_length=2.0 * math.acosh(abs_tr / 2.0))


def fixed_points(m: MoebiusElement):
    """Fixed points of ``m``: an HPoint for elliptics, BoundaryPoints otherwise.

    Returns an empty tuple for the identity.
    """
    cls = classify(m)
    if cls.tag == "Identity":
        return ()
    a, b, c, d = m.a, m.b, m.c, m.d
    if abs(c) <= ALGEBRAIC_TOL * max(1.0, abs(a), abs(d)):
        # fixes infinity; the other root of (a - d) z + b = 0 if any
        if cls.tag == "Parabolic" or abs(a - d) <= ALGEBRAIC_TOL:
            return (INFINITY,)
        return (INFINITY, BoundaryPoint(b / (d - a)))
    # c z^2 + (d - a) z - b = 0
    disc = (d - a) ** 2 + 4.0 * b * c
    if cls.tag == "Elliptic":
        z = (a - d + 1j * math.sqrt(-disc)) / (2.0 * c)
        if z.imag < 0:
            z = z.conjugate()
        return (HPoint.from_complex(z),)
    if cls.tag == "Parabolic":
        return (BoundaryPoint((a - d) / (2.0 * c)),)
    s = math.sqrt(disc)
    return (BoundaryPoint((a - d - s) / (2.0 * c)), BoundaryPoint((a - d + s) / (2.0 * c)))


def boundary_apply(m: MoebiusElement, b) -> BoundaryPoint:
    b = _as_boundary(b)
    if b.is_infinite:
        return INFINITY if m.c == 0.0 else BoundaryPoint(m.a / m.c)
    den = m.c * b.value + m.d
    if den == 0.0:
        return INFINITY
    return BoundaryPoint((m.a * b.value + m.b) / den)


def triple_apply(m: MoebiusElement, t: IdealTriple) -> IdealTriple:
    return IdealTriple(*(boundary_apply(m, p) for p in t.points()))


def _normalizer(p1: BoundaryPoint, p2: BoundaryPoint) -> MoebiusElement:
    """An orientation-preserving element sending p1 to 0 and p2 to infinity."""
    if p2.is_infinite:
        return MoebiusElement(1.0, -p1.value, 0.0, 1.0)
    if p1.is_infinite:
        return MoebiusElement(0.0, -1.0, 1.0, -p2.value)
    s = 1.0 if p1.value > p2.value else -1.0
    return MoebiusElement(s, -s * p1.value, 1.0, -p2.value)


def triple_to_point(t: IdealTriple) -> HPoint:
    """Foot of the perpendicular dropped from p3 onto the geodesic (p1, p2)."""
    norm = _normalizer(t.p1, t.p2)
    s = boundary_apply(norm, t.p3).value
    # geodesic is now the imaginary axis; the perpendicular through s meets it at i|s|
    return apply(norm.inverse(), HPoint(0.0, abs(s)))


SampledReal = Union[Callable[[float], float], Tuple[Sequence[float], Sequence[float]]]


def quasisymmetry_ratio(f: SampledReal, x: float, t: float) -> float:
    """(f(x+t) - f(x)) / (f(x) - f(x-t)).

    ``f`` is either a callable or a pair ``(xs, fs)`` of samples, which is
    linearly interpolated and must cover ``[x - t, x + t]``.
    """
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")
    if callable(f):
        left, mid, right = f(x - t), f(x), f(x + t)
    else:
        xs, fs = (np.asarray(v, dtype=float) for v in f)
        if np.any(np.diff(xs) <= 0):
            raise ValueError("sample abscissae must be strictly increasing")
        if x - t < xs[0] or x + t > xs[-1]:
            raise ValueError(f"[{x - t}, {x + t}] leaves the sampled domain [{xs[0]}, {xs[-1]}]")
        left, mid, right = np.interp([x - t, x, x + t], xs, fs)
    num = right - mid
    den = mid - left
    if den <= 0 or num <= 0:
        raise DegenerateSampleError(f"map is not strictly increasing around x={x}, t={t}")
    return float(num / den)
