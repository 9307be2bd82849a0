"""Reference implementations written independently of the package."""

import math

import numpy as np
from scipy.integrate import quad

from qihyp.hyp2 import HPoint


def geodesic_length(p: HPoint, q: HPoint) -> float:
    """Integrate |dz|/y along the geodesic joining p and q."""
    if abs(p.x - q.x) < 1e-12:
        lo, hi = sorted((p.y, q.y))
        return quad(lambda y: 1.0 / y, lo, hi, epsabs=1e-12, epsrel=1e-12)[0]
    # semicircle centred on the real axis
    c = (q.x**2 + q.y**2 - p.x**2 - p.y**2) / (2.0 * (q.x - p.x))
    t1, t2 = sorted((math.atan2(p.y, p.x - c), math.atan2(q.y, q.x - c)))
    # z = c + r e^{it} gives |dz| / y = dt / sin t
    return quad(lambda t: 1.0 / math.sin(t), t1, t2, epsabs=1e-12, epsrel=1e-12)[0]


def free_ball_sizes(n_max):
    """Reduced words over a, b, A, B of length <= n, counted by brute enumeration."""
    sizes, level, total = [], [()], 1
    sizes.append(total)
    for _ in range(n_max):
        level = [w + (x,) for w in level for x in (1, 2, -1, -2) if not w or w[-1] != -x]
        total += len(level)
        sizes.append(total)
    return sizes


# independently coded forms of every evaluator (exp instead of cosh, expanded products)

def ref_kappa(lam, eps, delta):
    return eps + delta * lam


def ref_S(lam, eps, r):
    x = 2 * r + lam + 2 * lam * eps
    return np.exp(x) + np.exp(-x) - 2


def ref_R(L, lam, eps, h0):
    return L / (2 * lam**2) - (3 * eps + h0) / (2 * lam)


def ref_L(R, lam, eps, h0):
    return lam * (2 * lam * R + 3 * eps + h0)


def ref_lower(D, lam, eps, delta, kappa, a):
    num = D - lam * eps
    den = lam * a * (2 * (kappa + delta) + 1)
    return np.log(num / den - 1) + 1 - lam - 2 * lam * eps


def ref_Dprime(lam, eps, delta, kappa, a):
    k = 2 * kappa + 2 * delta + 1
    return a * k * lam * np.exp(lam * (1 + 2 * eps)) + a * k * lam + eps


def ref_euclid_bound(R, r, s):
    return (R * R + 2 * R * s + s * s) / (r * r + 2 * r * s + s * s)


def ref_hyp_bound(R, r, s):
    x = 2 * (r + s)
    return (np.exp(R) - 2) / (np.exp(x) + np.exp(-x) - 2)
