"""Finite-resolution measures with guaranteed-enclosure mass queries.

Every measure exposes a *cell tree*: a batch of closed boxes per level, each
carrying a mass interval ``[mlo, mhi]`` that encloses the mass the measure
puts in (the part of its support owned by) that box.  Region masses are
computed by one generic descent: boxes inside the region count towards both
bounds, straddling boxes are refined, and at the depth limit they count
towards the upper bound only.

Concrete trees:

* :class:`MoranMeasure` -- level-dependent homothetic subdivisions.  Covers
  self-similar (IFS) measures, dyadic grid measures, products and splices.
  Cell masses are exact products of weights.
* :class:`EuclideanBallMeasure` -- normalized Lebesgue measure of the unit
  ball, or of a coordinate plane section of it.
* :class:`PointMass`, :class:`Mixture`.
* :class:`AffineView` -- ``A -> mu((c + s A) & W) / mu(W)``.  Translations,
  magnifications (scenery views) and normalized restrictions are all views.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (AmbiguousMass, DepthExceeded, InvalidParams, InvalidRadius,
                     UnsupportedKind, ZeroMass)
from .regions import (INSIDE, OUTSIDE, STRADDLE, Ball, Everything, Intersection,
                      Region, box_max_dist, box_min_dist)

DEFAULT_RESOLUTION_BITS = 40
DEFAULT_VIEW_DEPTH = 10


def exact_sum(values) -> float:
    """Order-independent sum (exactly rounded), so results never depend on
    the traversal order or on how work was split."""
    return math.fsum(np.asarray(values, dtype=float).ravel())


@dataclass(frozen=True)
class MassInterval:
    """Guaranteed enclosure ``low <= mass <= high`` at a refinement depth."""

    low: float
    high: float
    depth_used: int = 0

    def __post_init__(self):
        if not self.low <= self.high:
            raise ValueError(f"empty enclosure [{self.low}, {self.high}]")

    @property
    def mid(self) -> float:
        return 0.5 * (self.low + self.high)

    @property
    def width(self) -> float:
        return self.high - self.low

    def contains(self, value, tol=0.0) -> bool:
        return self.low - tol <= value <= self.high + tol

    def overlaps(self, other: "MassInterval", tol=0.0) -> bool:
        return self.low <= other.high + tol and other.low <= self.high + tol

    def is_within(self, other: "MassInterval", tol=1e-15) -> bool:
        return other.low - tol <= self.low and self.high <= other.high + tol

    @staticmethod
    def ratio(num: "MassInterval", den: "MassInterval") -> "MassInterval":
        if den.high <= 0.0:
            raise ZeroMass("denominator enclosure is identically zero")
        low = num.low / den.high
        high = 1.0 if den.low <= 0.0 else min(1.0, num.high / den.low)
        return MassInterval(min(low, high), high, min(num.depth_used, den.depth_used))

    def __iter__(self):
        yield self.low
        yield self.high


class Cells:
    """A batch of boxes at one tree level.

    ``payload`` holds measure-specific per-cell state; it must be ``None``, an
    array indexed along axis 0, or an object with a ``take(mask)`` method.
    """

    __slots__ = ("lo", "hi", "mlo", "mhi", "level", "payload")

    def __init__(self, lo, hi, mlo, mhi, level, payload=None):
        self.lo = lo
        self.hi = hi
        self.mlo = mlo
        self.mhi = mhi
        self.level = level
        self.payload = payload

    def __len__(self):
        return len(self.mlo)

    def take(self, mask) -> "Cells":
        p = self.payload
        if p is not None:
            p = p[mask] if isinstance(p, np.ndarray) else p.take(mask)
        return Cells(self.lo[mask], self.hi[mask], self.mlo[mask], self.mhi[mask], self.level, p)

    @staticmethod
    def empty(d, level):
        z = np.zeros((0, d))
        return Cells(z, z.copy(), np.zeros(0), np.zeros(0), level)


class Measure:
    """Common interface and the generic descent."""

    kind = "abstract"
    ambient_dim: int
    max_depth: int

    # -- tree interface ---------------------------------------------------
    def root_cells(self) -> Cells:
        raise NotImplementedError

    def refine(self, cells: Cells) -> Cells:
        raise NotImplementedError

    def level_size(self, level: int) -> float:
        """Upper bound on the side length of any cell at ``level``."""
        raise NotImplementedError

    def contains_in_support(self, point) -> bool:
        raise NotImplementedError

    def _sample_from(self, cells: Cells, n: int, rng) -> np.ndarray:
        raise NotImplementedError

    def to_spec(self) -> dict:
        raise UnsupportedKind(f"{self.kind} measures have no JSON spec")

    # -- derived ----------------------------------------------------------
    @property
    def resolution_floor(self) -> float:
        return self.level_size(self.max_depth)

    def level_for_scale(self, scale: float) -> int:
        """Smallest level whose cells are no larger than ``scale`` (capped)."""
        for level in range(self.max_depth + 1):
            if self.level_size(level) <= scale:
                return level
        return self.max_depth

    def check_depth(self, depth):
        if depth is None:
            return self.max_depth
        depth = int(depth)
        if depth < 0 or depth > self.max_depth:
            raise DepthExceeded(f"depth {depth} outside [0, {self.max_depth}]")
        return depth

    def region_mass(self, region: Region, depth=None) -> MassInterval:
        depth = self.check_depth(depth)
        lows, highs, extra = [], [], []
        cells = self.root_cells()
        while len(cells):
            cls = region.classify(cells.lo, cells.hi)
            inside = cls == INSIDE
            lows.append(cells.mlo[inside])
            highs.append(cells.mhi[inside])
            straddle = cls == STRADDLE
            if cells.level >= depth:
                extra.append(cells.mhi[straddle])
                break
            if not straddle.any():
                break
            cells = self.refine(cells.take(straddle))
        low = exact_sum(np.concatenate(lows)) if lows else 0.0
        high = exact_sum(np.concatenate(highs + extra)) if highs or extra else 0.0
        high = min(high, 1.0)
        return MassInterval(min(low, high), high, depth)

    def ball_mass(self, x, r, depth=None) -> MassInterval:
        """Enclosure of both ``mu(B(x, r))`` and ``mu(closed B(x, r))``."""
        r = float(r)
        if not r > 0:
            raise InvalidRadius(f"radius must be positive, got {r}")
        if r < self.resolution_floor:
            raise DepthExceeded(f"radius {r:g} below resolution floor {self.resolution_floor:g}")
        x = np.asarray(x, dtype=float).reshape(self.ambient_dim)
        return self.region_mass(Ball(x, r), depth)

    def total_mass(self, depth=0) -> MassInterval:
        return self.region_mass(Everything(), depth)

    def iter_levels(self, depth):
        """Yield the full cell batch at every level ``0..depth``."""
        cells = self.root_cells()
        yield cells
        while cells.level < depth and len(cells):
            cells = self.refine(cells)
            yield cells

    def sample(self, n: int, rng) -> np.ndarray:
        return self._sample_from(self.root_cells(), n, rng)


# ---------------------------------------------------------------------------
# Moran trees
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Stencil:
    """One subdivision step: child boxes relative to the parent box.

    ``offsets`` and ``ratios`` have shape ``(m, d)`` in units of the parent
    side lengths; ``weights`` (shape ``(m,)``) are the child mass fractions.
    Zero-weight children are dropped on construction.
    """

    offsets: np.ndarray
    ratios: np.ndarray
    weights: np.ndarray

    @staticmethod
    def build(offsets, ratios, weights) -> "Stencil":
        off = np.atleast_2d(np.asarray(offsets, dtype=float))
        rat = np.atleast_2d(np.asarray(ratios, dtype=float))
        w = np.asarray(weights, dtype=float).ravel()
        if rat.shape[0] == 1 and off.shape[0] > 1:
            rat = np.repeat(rat, off.shape[0], axis=0)
        if rat.shape[1] == 1 and off.shape[1] > 1:
            rat = np.repeat(rat, off.shape[1], axis=1)
        if not (off.shape == rat.shape and len(w) == len(off)):
            raise InvalidParams("stencil offsets, ratios and weights disagree in shape")
        if np.any(w < 0) or abs(math.fsum(w) - 1.0) > 1e-12:
            raise InvalidParams(f"stencil weights must be nonnegative and sum to 1, got {w.tolist()}")
        if np.any(rat <= 0) or np.any(rat >= 1):
            raise InvalidParams("child ratios must lie in (0, 1)")
        if np.any(off < -1e-15) or np.any(off + rat > 1 + 1e-15):
            raise InvalidParams("child boxes must lie inside the parent box")
        keep = w > 0
        return Stencil(off[keep], rat[keep], w[keep])

    @property
    def dim(self):
        return self.offsets.shape[1]

    def separation_margin(self) -> float:
        """Smallest gap between two child boxes (negative when they overlap)."""
        m = len(self.weights)
        if m < 2:
            return math.inf
        margin = math.inf
        hi = self.offsets + self.ratios
        for i in range(m):
            for j in range(i + 1, m):
                gap = np.maximum(self.offsets[j] - hi[i], self.offsets[i] - hi[j])
                margin = min(margin, float(gap.max()))
        return margin

    def product(self, other: "Stencil") -> "Stencil":
        m1, m2 = len(self.weights), len(other.weights)
        off = np.hstack([np.repeat(self.offsets, m2, axis=0), np.tile(other.offsets, (m1, 1))])
        rat = np.hstack([np.repeat(self.ratios, m2, axis=0), np.tile(other.ratios, (m1, 1))])
        w = np.outer(self.weights, other.weights).ravel()
        return Stencil(off, rat, w)


class MoranMeasure(Measure):
    """Measure on a box defined by a per-level sequence of stencils.

    ``labels[l]`` selects the stencil applied when splitting level-``l``
    cells into level-``l+1`` cells, so ``max_depth == len(labels)``.
    """

    def __init__(self, rules: Sequence[Stencil], labels, root_lo=None, root_size=1.0,
                 kind="grid", spec=None):
        self.rules = tuple(rules)
        if not self.rules:
            raise InvalidParams("at least one stencil is required")
        d = self.rules[0].dim
        if any(r.dim != d for r in self.rules):
            raise InvalidParams("stencils disagree on ambient dimension")
        self.labels = np.asarray(labels, dtype=np.int64)
        if self.labels.ndim != 1 or np.any(self.labels < 0) or np.any(self.labels >= len(self.rules)):
            raise InvalidParams("labels must index the rule list")
        self.ambient_dim = d
        self.max_depth = len(self.labels)
        self.root_lo = np.zeros(d) if root_lo is None else np.asarray(root_lo, dtype=float).reshape(d)
        self.root_size = np.broadcast_to(np.asarray(root_size, dtype=float), (d,)).copy()
        self.kind = kind
        self._spec = spec
        shrink = np.array([r.ratios.max() for r in self.rules])
        self._sizes = float(self.root_size.max()) * np.concatenate([[1.0], np.cumprod(shrink[self.labels])])

    def level_size(self, level):
        return float(self._sizes[min(level, self.max_depth)])

    def level_for_scale(self, scale):
        idx = int(np.searchsorted(-self._sizes, -scale, side="left"))
        return min(idx, self.max_depth)

    def root_cells(self):
        lo = self.root_lo[None, :].copy()
        size = self.root_size[None, :].copy()
        one = np.ones(1)
        return Cells(lo, lo + size, one, one, 0, size)

    def refine(self, cells):
        st = self.rules[self.labels[cells.level]]
        size = cells.payload
        m = len(st.weights)
        lo = (cells.lo[:, None, :] + size[:, None, :] * st.offsets[None]).reshape(-1, self.ambient_dim)
        csize = (size[:, None, :] * st.ratios[None]).reshape(-1, self.ambient_dim)
        mass = (cells.mlo[:, None] * st.weights[None]).reshape(-1)
        assert mass.shape[0] == len(cells) * m
        return Cells(lo, lo + csize, mass, mass, cells.level + 1, csize)

    def contains_in_support(self, point):
        p = np.asarray(point, dtype=float).reshape(self.ambient_dim)
        cells = self.root_cells()
        while True:
            mask = np.all((cells.lo <= p) & (p <= cells.hi), axis=1) & (cells.mhi > 0)
            if not mask.any():
                return False
            if cells.level >= self.max_depth:
                return True
            cells = self.refine(cells.take(mask))

    def _sample_from(self, cells, n, rng):
        d = self.ambient_dim
        if n == 0:
            return np.zeros((0, d))
        p = cells.mhi / cells.mhi.sum()
        pick = rng.choice(len(p), size=n, p=p)
        lo = cells.lo[pick].copy()
        size = cells.payload[pick].copy()
        for level in range(cells.level, self.max_depth):
            st = self.rules[self.labels[level]]
            child = rng.choice(len(st.weights), size=n, p=st.weights)
            lo += size * st.offsets[child]
            size *= st.ratios[child]
        return lo + size * rng.random((n, d))

    def to_spec(self):
        if self._spec is None:
            raise UnsupportedKind("this Moran measure was built without a spec")
        return dict(self._spec)

    def __repr__(self):
        return f"MoranMeasure(kind={self.kind!r}, d={self.ambient_dim}, max_depth={self.max_depth})"


# ---------------------------------------------------------------------------
# Analytic measures
# ---------------------------------------------------------------------------

class EuclideanBallMeasure(Measure):
    """Normalized k-dimensional Lebesgue measure on ``B(0,1) & span(axes)``.

    With ``axes == range(d)`` this is the normalized Lebesgue measure of the
    unit ball; otherwise it is normalized ``H^k`` on a coordinate plane.  The
    tree is the dyadic refinement of ``[-1, 1]^k`` embedded in R^d; cells
    straddling the unit sphere carry the interval ``[0, vol(cell)/vol(B)]``.
    """

    def __init__(self, ambient_dim, axes=None, max_depth=DEFAULT_RESOLUTION_BITS + 1):
        self.ambient_dim = int(ambient_dim)
        self.axes = tuple(range(self.ambient_dim)) if axes is None else tuple(sorted(int(a) for a in axes))
        if not self.axes or len(set(self.axes)) != len(self.axes) or \
                min(self.axes) < 0 or max(self.axes) >= self.ambient_dim:
            raise InvalidParams(f"bad axes {axes} for dimension {ambient_dim}")
        self.k = len(self.axes)
        self.max_depth = int(max_depth)
        self.kind = "lebesgue_ball" if self.k == self.ambient_dim else "plane"
        self._unit_volume = math.pi ** (self.k / 2) / math.gamma(self.k / 2 + 1)
        self._children = np.array(np.meshgrid(*([[0.0, 1.0]] * self.k), indexing="ij")).reshape(self.k, -1).T

    def level_size(self, level):
        return 2.0 ** (1 - level)

    def level_for_scale(self, scale):
        if scale <= 0:
            return self.max_depth
        return int(min(self.max_depth, max(0, math.ceil(1 - math.log2(scale) - 1e-12))))

    def _embed(self, lo_k, hi_k):
        n = len(lo_k)
        lo = np.zeros((n, self.ambient_dim))
        hi = np.zeros((n, self.ambient_dim))
        lo[:, self.axes] = lo_k
        hi[:, self.axes] = hi_k
        return lo, hi

    def _make(self, lo_k, side, level):
        zero = np.zeros(self.k)
        hi_k = lo_k + side
        dmin = box_min_dist(zero, lo_k, hi_k)
        keep = dmin <= 1.0
        lo_k, hi_k = lo_k[keep], hi_k[keep]
        dmax = box_max_dist(zero, lo_k, hi_k)
        mass = np.full(len(lo_k), side ** self.k / self._unit_volume)
        mlo = np.where(dmax <= 1.0, mass, 0.0)
        lo, hi = self._embed(lo_k, hi_k)
        return Cells(lo, hi, mlo, mass, level, lo_k)

    def root_cells(self):
        return self._make(-np.ones((1, self.k)), 2.0, 0)

    def refine(self, cells):
        side = 2.0 ** (-cells.level)
        lo_k = (cells.payload[:, None, :] + side * self._children[None]).reshape(-1, self.k)
        return self._make(lo_k, side, cells.level + 1)

    def ball_mass(self, x, r, depth=None):
        """Closed form when the ball meets the plane inside the unit ball,
        cell descent otherwise."""
        r = float(r)
        if not r > 0:
            raise InvalidRadius(f"radius must be positive, got {r}")
        if r < self.resolution_floor:
            raise DepthExceeded(f"radius {r:g} below resolution floor {self.resolution_floor:g}")
        depth = self.check_depth(depth)
        x = np.asarray(x, dtype=float).reshape(self.ambient_dim)
        off = float(np.linalg.norm(np.delete(x, self.axes)))
        if off >= r:
            return MassInterval(0.0, 0.0, depth)
        rho = math.sqrt(r * r - off * off)
        if float(np.linalg.norm(x[list(self.axes)])) + rho <= 1.0:
            m = rho ** self.k
            # widen by two ulps for the rounding in rho ** k
            lo = float(np.nextafter(np.nextafter(m, 0.0), 0.0))
            hi = min(1.0, float(np.nextafter(np.nextafter(m, 2.0), 2.0)))
            return MassInterval(lo, hi, depth)
        return self.region_mass(Ball(x, r), depth)

    def contains_in_support(self, point):
        p = np.asarray(point, dtype=float).reshape(self.ambient_dim)
        off = np.delete(p, self.axes)
        return bool(np.all(off == 0.0) and np.linalg.norm(p[list(self.axes)]) <= 1.0)

    def _sample_from(self, cells, n, rng):
        out = np.zeros((0, self.k))
        p = cells.mhi / cells.mhi.sum()
        side = 2.0 ** (1 - cells.level)
        while len(out) < n:
            m = max(16, 2 * (n - len(out)))
            pick = rng.choice(len(p), size=m, p=p)
            pts = cells.payload[pick] + side * rng.random((m, self.k))
            pts = pts[np.einsum("ij,ij->i", pts, pts) <= 1.0]
            out = np.vstack([out, pts])
        lo, _ = self._embed(out[:n], out[:n])
        return lo

    def to_spec(self):
        if self.kind == "lebesgue_ball":
            return {"type": "lebesgue_ball", "dim": self.ambient_dim}
        return {"type": "plane", "dim": self.ambient_dim, "axes": list(self.axes)}

    def __repr__(self):
        return f"EuclideanBallMeasure(d={self.ambient_dim}, axes={self.axes})"


class PointMass(Measure):
    kind = "point_mass"

    def __init__(self, ambient_dim, at=None, max_depth=DEFAULT_RESOLUTION_BITS):
        self.ambient_dim = int(ambient_dim)
        self.at = np.zeros(self.ambient_dim) if at is None else np.asarray(at, dtype=float).reshape(self.ambient_dim)
        self.max_depth = int(max_depth)

    def level_size(self, level):
        return 0.0

    def level_for_scale(self, scale):
        return 0

    def root_cells(self):
        p = self.at[None, :].copy()
        one = np.ones(1)
        return Cells(p, p.copy(), one, one, 0)

    def refine(self, cells):
        return Cells(cells.lo, cells.hi, cells.mlo, cells.mhi, cells.level + 1)

    def contains_in_support(self, point):
        return bool(np.all(np.asarray(point, dtype=float).reshape(self.ambient_dim) == self.at))

    def _sample_from(self, cells, n, rng):
        return np.repeat(self.at[None, :], n, axis=0)

    def to_spec(self):
        return {"type": "point_mass", "dim": self.ambient_dim, "at": self.at.tolist()}

    def __repr__(self):
        return f"PointMass({self.at.tolist()})"


class _MixturePayload:
    def __init__(self, parts):
        self.parts = parts

    def take(self, mask):
        out, start = [], 0
        for part in self.parts:
            n = len(part)
            out.append(part.take(mask[start:start + n]))
            start += n
        return _MixturePayload(out)


def _stack(parts, level, d):
    if not parts:
        return Cells.empty(d, level)
    return Cells(np.vstack([p.lo for p in parts]), np.vstack([p.hi for p in parts]),
                 np.concatenate([p.mlo for p in parts]), np.concatenate([p.mhi for p in parts]),
                 level, _MixturePayload(parts))


class Mixture(Measure):
    """Convex combination of measures on the same ambient space."""

    kind = "mixture"

    def __init__(self, components, weights):
        components = tuple(components)
        w = np.asarray(weights, dtype=float)
        if len(w) != len(components) or np.any(w < 0) or abs(math.fsum(w) - 1) > 1e-12:
            raise InvalidParams("mixture weights must be nonnegative, one per component, summing to 1")
        self.components = tuple(c for c, wi in zip(components, w) if wi > 0)
        w = w[w > 0]
        dims = {c.ambient_dim for c in self.components}
        if len(dims) != 1:
            raise InvalidParams("mixture components disagree on ambient dimension")
        self.weights = w
        self.ambient_dim = dims.pop()
        self.max_depth = min(c.max_depth for c in self.components)

    def level_size(self, level):
        return max(c.level_size(level) for c in self.components)

    def _scaled(self, comp_cells):
        parts = []
        for w, c in zip(self.weights, comp_cells):
            parts.append(Cells(c.lo, c.hi, w * c.mlo, w * c.mhi, c.level, c.payload))
        return parts

    def root_cells(self):
        return _stack(self._scaled([c.root_cells() for c in self.components]), 0, self.ambient_dim)

    def refine(self, cells):
        parts = []
        for w, comp, part in zip(self.weights, self.components, cells.payload.parts):
            if len(part) == 0:
                parts.append(Cells.empty(self.ambient_dim, cells.level + 1))
                continue
            raw = Cells(part.lo, part.hi, part.mlo / w, part.mhi / w, part.level, part.payload)
            child = comp.refine(raw)
            parts.append(Cells(child.lo, child.hi, w * child.mlo, w * child.mhi, child.level, child.payload))
        return _stack(parts, cells.level + 1, self.ambient_dim)

    def contains_in_support(self, point):
        return any(w > 0 and c.contains_in_support(point) for w, c in zip(self.weights, self.components))

    def _sample_from(self, cells, n, rng):
        totals = np.array([p.mhi.sum() for p in cells.payload.parts])
        counts = rng.multinomial(n, totals / totals.sum())
        chunks = []
        for w, comp, part, k in zip(self.weights, self.components, cells.payload.parts, counts):
            if k:
                raw = Cells(part.lo, part.hi, part.mlo / w, part.mhi / w, part.level, part.payload)
                chunks.append(comp._sample_from(raw, int(k), rng))
        pts = np.vstack(chunks)
        return pts[rng.permutation(n)]

    def to_spec(self):
        return {"type": "mixture", "weights": self.weights.tolist(),
                "components": [c.to_spec() for c in self.components]}


# ---------------------------------------------------------------------------
# Affine views: translation, magnification, restriction
# ---------------------------------------------------------------------------

class _ViewPayload:
    def __init__(self, base_cells, window_cls):
        self.base_cells = base_cells
        self.window_cls = window_cls

    def take(self, mask):
        return _ViewPayload(self.base_cells.take(mask), self.window_cls[mask])


def _prune_windows(windows):
    """Drop balls that contain a concentric smaller ball from the list."""
    out = []
    for i, w in enumerate(windows):
        redundant = False
        if isinstance(w, Ball):
            for j, o in enumerate(windows):
                if j != i and isinstance(o, Ball) and np.array_equal(o.center, w.center) and \
                        (o.radius < w.radius or (o.radius == w.radius and j > i)):
                    redundant = True
                    break
        if not redundant:
            out.append(w)
    return out


class AffineView(Measure):
    """``nu(A) = mu((center + s A) & W) / mu(W)`` with ``s = exp(-log_scale)``.

    ``windows`` are regions in base coordinates whose intersection is ``W``.
    The scale is stored through its logarithm so that composing
    magnifications adds times exactly (``t + t'`` is commutative in floating
    point, products of exponentials are not).
    """

    kind = "view"

    def __init__(self, base: Measure, center, log_scale=0.0, windows=(), view_depth=DEFAULT_VIEW_DEPTH,
                 normalizer_depth=None):
        if isinstance(base, AffineView):
            raise TypeError("compose views with AffineView.derive")
        self.base = base
        self.ambient_dim = base.ambient_dim
        self.center = np.asarray(center, dtype=float).reshape(self.ambient_dim)
        self.log_scale = float(log_scale)
        self.scale = math.exp(-self.log_scale)
        self.windows = tuple(_prune_windows(list(windows)))
        self.window = Intersection(*self.windows)
        self.view_depth = int(view_depth)
        self.level_offset = base.level_for_scale(self.scale)
        self.max_depth = base.max_depth - self.level_offset
        if self.windows:
            nd = normalizer_depth
            if nd is None:
                nd = min(base.max_depth, self.level_offset + self.view_depth)
            self.normalizer = base.region_mass(self.window, nd)
        else:
            self.normalizer = MassInterval(1.0, 1.0, base.max_depth)
        if self.normalizer.high <= 0.0:
            raise ZeroMass("window carries no mass")

    # composition -------------------------------------------------------
    @staticmethod
    def derive(mu: Measure, shift=None, dt=0.0, magnify=False, restrict_to=None,
               view_depth=DEFAULT_VIEW_DEPTH, normalizer_depth=None) -> "AffineView":
        """Translate by ``shift``, then (optionally) magnify by ``dt`` and/or
        restrict to ``restrict_to`` (given in the new coordinates)."""
        if isinstance(mu, AffineView):
            base, c, tau, windows = mu.base, mu.center, mu.log_scale, list(mu.windows)
            s = mu.scale
        else:
            base, c, tau, windows, s = mu, np.zeros(mu.ambient_dim), 0.0, [], 1.0
        if shift is not None:
            c = c + s * np.asarray(shift, dtype=float).reshape(mu.ambient_dim)
        if magnify:
            tau = tau + dt
            windows.append(Ball(c, math.exp(-tau)))
        if restrict_to is not None:
            windows.append(restrict_to.mapped(c, math.exp(-tau)))
        return AffineView(base, c, tau, windows, view_depth, normalizer_depth)

    # tree ----------------------------------------------------------------
    def level_size(self, level):
        return self.base.level_size(self.level_offset + level) / self.scale

    def level_for_scale(self, scale):
        lvl = self.base.level_for_scale(scale * self.scale) - self.level_offset
        return int(min(max(lvl, 0), self.max_depth))

    def _wrap(self, base_cells, level):
        cls = self.window.classify(base_cells.lo, base_cells.hi)
        keep = cls != OUTSIDE
        bc = base_cells.take(keep)
        cls = cls[keep]
        n = self.normalizer
        lo = (bc.lo - self.center) / self.scale
        hi = (bc.hi - self.center) / self.scale
        mhi = bc.mhi / n.low if n.low > 0 else np.where(bc.mhi > 0, 1.0, 0.0)
        mhi = np.minimum(mhi, 1.0)
        mlo = np.where(cls == INSIDE, bc.mlo / n.high, 0.0)
        return Cells(lo, hi, mlo, mhi, level, _ViewPayload(bc, cls))

    def root_cells(self):
        cells = self.base.root_cells()
        while cells.level < self.level_offset and len(cells):
            cls = self.window.classify(cells.lo, cells.hi)
            cells = self.base.refine(cells.take(cls != OUTSIDE))
        return self._wrap(cells, 0)

    def refine(self, cells):
        child = self.base.refine(cells.payload.base_cells)
        return self._wrap(child, cells.level + 1)

    def contains_in_support(self, point):
        p = np.asarray(point, dtype=float).reshape(self.ambient_dim)
        q = self.center + self.scale * p
        return bool(self.window.contains(q[None, :])[0]) and self.base.contains_in_support(q)

    def _sample_from(self, cells, n, rng):
        bc = cells.payload.base_cells
        out = np.zeros((0, self.ambient_dim))
        tries = 0
        while len(out) < n:
            m = max(64, 2 * (n - len(out)))
            pts = self.base._sample_from(bc, m, rng)
            pts = pts[self.window.contains(pts)] if self.windows else pts
            out = np.vstack([out, (pts - self.center) / self.scale])
            tries += 1
            if tries > 200 and len(out) == 0:
                raise ZeroMass("window too light for rejection sampling")
        return out[:n]

    def __repr__(self):
        return (f"AffineView(base={self.base!r}, center={self.center.tolist()}, "
                f"log_scale={self.log_scale!r}, windows={len(self.windows)})")


# ---------------------------------------------------------------------------
# Module-level operations
# ---------------------------------------------------------------------------

def ball_mass(mu: Measure, x, r, depth=None) -> MassInterval:
    return mu.ball_mass(x, r, depth)


def translate(mu: Measure, x) -> Measure:
    """``T_x mu(A) = mu(A + x)``."""
    return AffineView.derive(mu, shift=x)


def restrict(mu: Measure, region: Region, depth=None) -> Measure:
    """Normalized restriction ``mu(A)^{-1} mu|_A`` resolved at ``depth``."""
    depth = mu.check_depth(depth)
    enclosure = mu.region_mass(region, depth)
    if enclosure.high <= 0.0:
        raise ZeroMass("region carries no mass")
    if enclosure.low <= 0.0:
        raise AmbiguousMass(f"mass of region only known to lie in [0, {enclosure.high:g}]; refine depth")
    if isinstance(mu, AffineView):
        nd = mu.level_offset + depth
    else:
        nd = depth
    return AffineView.derive(mu, restrict_to=region, normalizer_depth=min(nd, _base_of(mu).max_depth))


def _base_of(mu):
    return mu.base if isinstance(mu, AffineView) else mu


def support_sample(mu: Measure, n: int, seed: int) -> np.ndarray:
    """``n`` points distributed according to ``mu`` (deterministic in seed)."""
    if n < 1:
        raise InvalidParams("n must be at least 1")
    rng = np.random.default_rng(seed)
    return mu.sample(int(n), rng)
