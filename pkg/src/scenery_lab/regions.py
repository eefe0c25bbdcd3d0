"""Region classifiers for axis-aligned cells.

A classifier answers, for a batch of closed boxes ``[lo, hi]``, whether each
box lies in the interior of the region (``INSIDE``), misses the closure of
the region (``OUTSIDE``), or neither (``STRADDLE``).  Because ``INSIDE``
means "inside the open region" and ``OUTSIDE`` means "disjoint from the
closed region", a single descent brackets the masses of both the open and
the closed version of every region.

Every region also supports ``mapped(center, scale)``, the image under
``y -> center + scale * y``; scenery views use it to pull queries back to
the base measure.
"""
from __future__ import annotations

import math

import numpy as np

OUTSIDE = 0
INSIDE = 1
STRADDLE = 2

# Angular slack added to bounding-cone tests to absorb rounding in atan2.
_ANGLE_PAD = 1e-12


def _as_point(x, d=None):
    p = np.atleast_1d(np.asarray(x, dtype=float))
    if d is not None and p.shape != (d,):
        raise ValueError(f"expected a point of dimension {d}, got shape {p.shape}")
    return p


def box_min_dist(p, lo, hi):
    """Euclidean distance from ``p`` to each box (0 if ``p`` is inside)."""
    gap = np.maximum(np.maximum(lo - p, p - hi), 0.0)
    return np.sqrt(np.einsum("ij,ij->i", gap, gap))


def box_max_dist(p, lo, hi):
    far = np.maximum(np.abs(p - lo), np.abs(hi - p))
    return np.sqrt(np.einsum("ij,ij->i", far, far))


def _combine(inside, outside):
    out = np.full(inside.shape, STRADDLE, dtype=np.int8)
    out[inside] = INSIDE
    out[outside] = OUTSIDE
    return out


class Region:
    """Base class; subclasses implement ``classify`` and ``mapped``."""

    closed = True

    def classify(self, lo, hi):
        raise NotImplementedError

    def mapped(self, center, scale):
        raise NotImplementedError

    def contains(self, points):
        raise NotImplementedError

    def __and__(self, other):
        return Intersection(self, other)


class Everything(Region):
    def classify(self, lo, hi):
        return np.full(len(lo), INSIDE, dtype=np.int8)

    def mapped(self, center, scale):
        return self

    def contains(self, points):
        return np.ones(len(np.atleast_2d(points)), dtype=bool)

    def __repr__(self):
        return "Everything()"


class Ball(Region):
    """Euclidean ball; ``closed`` only affects ``contains``."""

    def __init__(self, center, radius, closed=True):
        self.center = _as_point(center)
        self.radius = float(radius)
        self.closed = closed

    def classify(self, lo, hi):
        inside = box_max_dist(self.center, lo, hi) < self.radius
        outside = box_min_dist(self.center, lo, hi) > self.radius
        return _combine(inside, outside)

    def mapped(self, center, scale):
        return Ball(_as_point(center) + scale * self.center, scale * self.radius, self.closed)

    def contains(self, points):
        dist = np.linalg.norm(np.atleast_2d(points) - self.center, axis=1)
        return dist <= self.radius if self.closed else dist < self.radius

    def __repr__(self):
        return f"Ball({self.center.tolist()}, {self.radius!r}, closed={self.closed})"


class Annulus(Region):
    """Closed annulus ``B(x, r_out)`` minus the open ball ``B(x, r_in)``."""

    def __init__(self, center, r_in, r_out):
        self.center = _as_point(center)
        self.r_in = float(r_in)
        self.r_out = float(r_out)

    def classify(self, lo, hi):
        dmin = box_min_dist(self.center, lo, hi)
        dmax = box_max_dist(self.center, lo, hi)
        inside = (dmin > self.r_in) & (dmax < self.r_out)
        outside = (dmax < self.r_in) | (dmin > self.r_out)
        return _combine(inside, outside)

    def mapped(self, center, scale):
        return Annulus(_as_point(center) + scale * self.center, scale * self.r_in, scale * self.r_out)

    def contains(self, points):
        dist = np.linalg.norm(np.atleast_2d(points) - self.center, axis=1)
        return (dist >= self.r_in) & (dist <= self.r_out)


class Box(Region):
    def __init__(self, lo, hi, closed=True):
        self.lo = _as_point(lo)
        self.hi = _as_point(hi)
        self.closed = closed

    def classify(self, lo, hi):
        inside = np.all((lo > self.lo) & (hi < self.hi), axis=1)
        outside = np.any((hi < self.lo) | (lo > self.hi), axis=1)
        return _combine(inside, outside)

    def mapped(self, center, scale):
        c = _as_point(center)
        return Box(c + scale * self.lo, c + scale * self.hi, self.closed)

    def contains(self, points):
        p = np.atleast_2d(points)
        if self.closed:
            return np.all((p >= self.lo) & (p <= self.hi), axis=1)
        return np.all((p > self.lo) & (p < self.hi), axis=1)


class HalfSpace(Region):
    """``{y : normal . y <= offset}`` (or ``<`` when open)."""

    def __init__(self, normal, offset, closed=True):
        self.normal = _as_point(normal)
        self.offset = float(offset)
        self.closed = closed

    def classify(self, lo, hi):
        n = self.normal
        smin = np.minimum(lo * n, hi * n).sum(axis=1)
        smax = np.maximum(lo * n, hi * n).sum(axis=1)
        return _combine(smax < self.offset, smin > self.offset)

    def mapped(self, center, scale):
        c = _as_point(center)
        return HalfSpace(self.normal, scale * self.offset + float(self.normal @ c), self.closed)

    def contains(self, points):
        s = np.atleast_2d(points) @ self.normal
        return s <= self.offset if self.closed else s < self.offset


class Intersection(Region):
    def __init__(self, *parts):
        flat = []
        for p in parts:
            if isinstance(p, Intersection):
                flat.extend(p.parts)
            elif not isinstance(p, Everything):
                flat.append(p)
        self.parts = tuple(flat)

    def classify(self, lo, hi):
        if not self.parts:
            return np.full(len(lo), INSIDE, dtype=np.int8)
        inside = np.ones(len(lo), dtype=bool)
        outside = np.zeros(len(lo), dtype=bool)
        for part in self.parts:
            c = part.classify(lo, hi)
            inside &= c == INSIDE
            outside |= c == OUTSIDE
        return _combine(inside, outside)

    def mapped(self, center, scale):
        return Intersection(*(p.mapped(center, scale) for p in self.parts))

    def contains(self, points):
        mask = np.ones(len(np.atleast_2d(points)), dtype=bool)
        for part in self.parts:
            mask &= part.contains(points)
        return mask


def orthonormal_rows(basis, d):
    """Validate and return an orthonormal row basis (shape ``(m, d)``)."""
    b = np.atleast_2d(np.asarray(basis, dtype=float))
    if b.shape[1] != d:
        raise ValueError(f"basis vectors must have dimension {d}")
    gram = b @ b.T
    if not np.allclose(gram, np.eye(len(b)), atol=1e-12, rtol=0):
        raise ValueError("basis is not orthonormal to 1e-12")
    return b


def angle_to_subspace(v, basis):
    """Angle in ``[0, pi/2]`` between each row of ``v`` and span(basis)."""
    proj = v @ basis.T
    along = np.sqrt(np.einsum("ij,ij->i", proj, proj))
    perp_vec = v - proj @ basis
    perp = np.sqrt(np.einsum("ij,ij->i", perp_vec, perp_vec))
    return np.arctan2(perp, along)


def angle_to_direction(v, theta):
    dot = v @ theta
    perp_vec = v - np.outer(dot, theta)
    perp = np.sqrt(np.einsum("ij,ij->i", perp_vec, perp_vec))
    return np.arctan2(perp, dot)


def bounding_directions(apex, lo, hi):
    """Center offsets and angular radii of boxes as seen from ``apex``.

    Every point of a box lies within angle ``gamma`` of ``offset``; ``gamma``
    is ``pi`` when the bounding sphere of the box reaches the apex.
    """
    center = 0.5 * (lo + hi)
    half = 0.5 * np.sqrt(np.einsum("ij,ij->i", hi - lo, hi - lo))
    offset = center - apex
    dist = np.sqrt(np.einsum("ij,ij->i", offset, offset))
    ok = dist > half
    gamma = np.full(len(lo), math.pi)
    gamma[ok] = np.arcsin(half[ok] / dist[ok]) + _ANGLE_PAD
    return offset, dist, gamma


class ConeRegion(Region):
    """The set ``X(x, r, V, alpha) \\ H(x, theta, alpha)``.

    ``X`` is the open cone of points ``y`` in the open ball ``B(x, r)`` with
    ``dist(y - x, V) < alpha |y - x|``; ``H`` is the closed cone
    ``(y - x) . theta >= alpha |y - x|``.  Boxes are tested through their
    bounding spheres, which is sound but slightly conservative.
    """

    def __init__(self, apex, radius, v_basis, theta, alpha):
        self.apex = _as_point(apex)
        d = len(self.apex)
        self.radius = float(radius)
        self.v_basis = orthonormal_rows(v_basis, d)
        self.theta = _as_point(theta, d)
        if abs(np.linalg.norm(self.theta) - 1.0) > 1e-12:
            raise ValueError("theta must be a unit vector")
        self.alpha = float(alpha)
        self.half_x = math.asin(min(1.0, self.alpha))
        self.half_h = math.acos(min(1.0, self.alpha))

    def classify(self, lo, hi):
        offset, _, gamma = bounding_directions(self.apex, lo, hi)
        bv = angle_to_subspace(offset, self.v_basis)
        bt = angle_to_direction(offset, self.theta)
        dmin = box_min_dist(self.apex, lo, hi)
        dmax = box_max_dist(self.apex, lo, hi)
        valid = gamma < math.pi
        inside = valid & (dmax < self.radius) & (bv + gamma < self.half_x) & (bt - gamma > self.half_h)
        outside = (dmin > self.radius) | (valid & ((bv - gamma > self.half_x) | (bt + gamma < self.half_h)))
        return _combine(inside, outside)

    def mapped(self, center, scale):
        return ConeRegion(_as_point(center) + scale * self.apex, scale * self.radius,
                          self.v_basis, self.theta, self.alpha)

    def contains(self, points):
        w = np.atleast_2d(points) - self.apex
        n = np.linalg.norm(w, axis=1)
        proj = w @ self.v_basis.T
        dist_v = np.linalg.norm(w - proj @ self.v_basis, axis=1)
        in_x = (n < self.radius) & (dist_v < self.alpha * n)
        in_h = w @ self.theta >= self.alpha * n
        return in_x & ~in_h
