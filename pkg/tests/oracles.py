"""Independent reference values.

Nothing here imports the package: every value is computed from first
principles (angle quadrature, digit recursions, elementary geometry) so the
tests compare two unrelated computations.
"""
import math

import numpy as np
from scipy import integrate


def planar_cone_fraction(alpha, phi=0.0, psi=0.0):
    """Angular measure / 2 pi of directions u = (cos b, sin b) with
    dist(u, V) < alpha and <u, theta> < alpha, where V is the line at angle
    ``phi`` and theta the unit vector at angle ``psi``.

    Integrates the indicator over breakpoints so quad sees smooth pieces.
    """
    a = math.asin(alpha)
    b = math.acos(alpha)
    cuts = {0.0, 2 * math.pi}
    for c in (phi - a, phi + a, phi + math.pi - a, phi + math.pi + a, psi - b, psi + b):
        cuts.add(c % (2 * math.pi))
    cuts = sorted(cuts)

    def inside(beta):
        dist_v = abs(math.sin(beta - phi))
        along = math.cos(beta - psi)
        return 1.0 if (dist_v < alpha and along < alpha) else 0.0

    total = 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        if hi > lo:
            val, _ = integrate.quad(inside, lo, hi, limit=200)
            total += val
    return total / (2 * math.pi)


# frozen: planar_cone_fraction(0.5) evaluated once and pinned
CONE_CONSTANT_2_1_HALF = 1.0 / 6.0


def cantor_cdf(x, ratio, depth=60):
    """CDF of the natural measure on the two-map Cantor set of ``[0, 1]`` with
    maps ``y -> ratio y`` and ``y -> 1 - ratio + ratio y``."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    scale = np.ones_like(x)
    y = x.copy()
    weight = 1.0
    for _ in range(depth):
        weight *= 0.5
        right = y >= 1 - ratio
        gap = (y > ratio) & ~right
        out += np.where(right | gap, weight, 0.0) * scale
        # inside the gap the CDF is flat at the left half's total
        y = np.where(right, (y - (1 - ratio)) / ratio, np.where(gap, 0.0, y / ratio))
        scale = np.where(gap, 0.0, scale)
    out = np.where(x >= 1, 1.0, np.where(x <= 0, 0.0, out))
    return out


def cantor_interval_mass(a, b, ratio):
    return cantor_cdf(b, ratio) - cantor_cdf(a, ratio)


def segment_ball_fraction(x, r):
    """Normalized length of ``[x - r, x + r] & [-1, 1]``."""
    lo = np.maximum(x - r, -1.0)
    hi = np.minimum(x + r, 1.0)
    return np.maximum(hi - lo, 0.0) / 2.0


def disk_lens_fraction(dist, r):
    """Area of ``B(p, r) & B(0, 1)`` over ``pi`` for ``|p| = dist``."""
    dist = float(dist)
    if dist + r <= 1:
        return r * r
    if dist >= 1 + r:
        return 0.0
    if dist + 1 <= r:
        return 1.0
    a1 = r * r * math.acos((dist * dist + r * r - 1) / (2 * dist * r))
    a2 = math.acos((dist * dist + 1 - r * r) / (2 * dist))
    a3 = 0.5 * math.sqrt((-dist + r + 1) * (dist + r - 1) * (dist - r + 1) * (dist + r + 1))
    return (a1 + a2 - a3) / math.pi


def similarity_dimension_two_maps(ratio):
    return math.log(2) / -math.log(ratio)
