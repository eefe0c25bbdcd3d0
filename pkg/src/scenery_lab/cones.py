"""Conical densities.

Cone regions ``X(x, r, V, alpha) \\ H(x, theta, alpha)``, the constant
``eps(d, k, alpha)``, minima of cone-mass ratios over direction nets, scale
fractions along magnification orbits and the pairwise rectifiability check.

Two evaluation routes are provided for the net minimum.  The generic route
classifies every collected cell against every (V, theta) pair.  In the plane
the product net of two angles is handled by an angular sweep: cells are
binned by the arc of directions they subtend and cumulative tables give the
mass certainly inside (or possibly meeting) any arc, so one view costs a few
gathers per net pair.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
from scipy.spatial import cKDTree

from .errors import DepthExceeded, InvalidParams, ZeroMass
from .measure import Cells, MassInterval, Measure
from .regions import (INSIDE, OUTSIDE, Ball, ConeRegion, bounding_directions,
                      orthonormal_rows)
from .scenery import DEFAULT_DT, ScaleScan, time_grid

DEFAULT_REL_DEPTH = 6
DEFAULT_GAMMA_MAX = math.radians(3.0)
TWO_PI = 2.0 * math.pi
_HIGH_CANDIDATES = 64


# ---------------------------------------------------------------------------
# specs and nets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConeSpec:
    """``(V, theta, alpha)`` with ``V`` a ``(d-k)``-plane given by orthonormal rows."""

    k: int
    v_basis: np.ndarray
    theta: np.ndarray
    alpha: float

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float).ravel()
        d = len(theta)
        if not 1 <= self.k <= d - 1:
            raise InvalidParams(f"k must lie in [1, {d - 1}]")
        if not 0 < self.alpha <= 1:
            raise InvalidParams("alpha must lie in (0, 1]")
        if abs(np.linalg.norm(theta) - 1.0) > 1e-12:
            raise InvalidParams("theta must be a unit vector to 1e-12")
        try:
            basis = orthonormal_rows(self.v_basis, d)
        except ValueError as exc:
            raise InvalidParams(str(exc)) from None
        if len(basis) != d - self.k:
            raise InvalidParams(f"V must have dimension d-k = {d - self.k}")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "v_basis", basis)

    @property
    def ambient_dim(self):
        return len(self.theta)

    @staticmethod
    def planar(phi: float, psi: float, alpha: float) -> "ConeSpec":
        """Plane cone with V the line at angle ``phi`` and theta at angle ``psi``."""
        return ConeSpec(1, [[math.cos(phi), math.sin(phi)]], [math.cos(psi), math.sin(psi)], alpha)

    def region(self, x, r) -> ConeRegion:
        return ConeRegion(x, r, self.v_basis, self.theta, self.alpha)


def fibonacci_sphere(n: int, hemisphere=False) -> np.ndarray:
    """``n`` nearly uniform unit vectors in R^3 (upper hemisphere if asked)."""
    i = np.arange(n) + 0.5
    z = 1 - i / n if hemisphere else 1 - 2 * i / n
    phi = i * math.pi * (3 - math.sqrt(5))
    rho = np.sqrt(1 - z * z)
    return np.column_stack([rho * np.cos(phi), rho * np.sin(phi), z])


def _complement_basis(n):
    """Orthonormal basis (2 x 3) of the plane normal to ``n``."""
    a = np.array([1.0, 0, 0]) if abs(n[0]) < 0.9 else np.array([0, 1.0, 0])
    u = np.cross(n, a)
    u /= np.linalg.norm(u)
    w = np.cross(n, u)
    return np.vstack([u, w / np.linalg.norm(w)])


@dataclass
class DirectionNet:
    """Finite set of (V, theta) pairs standing in for ``G(d, d-k) x S^{d-1}``.

    ``v_list`` has shape ``(n_v, d-k, d)`` and ``theta_list`` ``(n_t, d)``;
    ``pairs`` (shape ``(n, 2)``) indexes them, or is ``None`` for the full
    product.  ``eta`` is the covering radius of the parameter net in radians.
    Planar product nets remember their angles in ``phi``/``psi``.
    """

    ambient_dim: int
    k: int
    v_list: np.ndarray
    theta_list: np.ndarray
    eta: float
    pairs: Optional[np.ndarray] = None
    phi: Optional[np.ndarray] = None
    psi: Optional[np.ndarray] = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __len__(self):
        if self.pairs is None:
            return len(self.v_list) * len(self.theta_list)
        return len(self.pairs)

    def pair_indices(self):
        if self.pairs is not None:
            return self.pairs
        iv, it = np.meshgrid(np.arange(len(self.v_list)), np.arange(len(self.theta_list)), indexing="ij")
        return np.column_stack([iv.ravel(), it.ravel()])

    @property
    def is_planar_product(self):
        return self.phi is not None and self.pairs is None

    def spec(self, index: int, alpha: float) -> ConeSpec:
        iv, it = self.pair_indices()[index]
        return ConeSpec(self.k, self.v_list[iv], self.theta_list[it], alpha)

    @staticmethod
    def planar(n_v: int = 360, n_theta: int = 720) -> "DirectionNet":
        """Lines at angles ``pi i / n_v`` times directions at ``2 pi j / n_theta``."""
        phi = np.arange(n_v) * (math.pi / n_v)
        psi = np.arange(n_theta) * (TWO_PI / n_theta)
        v = np.stack([np.column_stack([np.cos(phi), np.sin(phi)])], axis=1)
        t = np.column_stack([np.cos(psi), np.sin(psi)])
        eta = max(math.pi / n_v, TWO_PI / n_theta)
        return DirectionNet(2, 1, v, t, eta, None, phi, psi)

    @staticmethod
    def planar_attained(n_v: int = 360) -> "DirectionNet":
        """Only pairs with theta in V (theta = +-v)."""
        net = DirectionNet.planar(n_v, 2 * n_v)
        pairs = np.array([(i, j) for i in range(n_v) for j in (i, i + n_v)])
        return DirectionNet(2, 1, net.v_list, net.theta_list, net.eta, pairs)

    @staticmethod
    def spherical(k: int, n_v: int = 100, n_theta: int = 100) -> "DirectionNet":
        """Fibonacci-point net in R^3 (at most 10^4 pairs by default)."""
        if k not in (1, 2):
            raise InvalidParams("in R^3, k is 1 or 2")
        dirs = fibonacci_sphere(n_v, hemisphere=True)
        if k == 2:
            v = dirs[:, None, :]
        else:
            v = np.stack([_complement_basis(n) for n in dirs])
        t = fibonacci_sphere(n_theta)
        eta = max(_covering_radius(dirs, True), _covering_radius(t, False))
        return DirectionNet(3, k, v, t, eta)

    @staticmethod
    def spherical_attained(k: int, n_v: int = 100, n_in: int = 24) -> "DirectionNet":
        """Pairs with theta in V for the spherical net."""
        net = DirectionNet.spherical(k, n_v, 4)
        thetas, pairs = [], []
        ang = np.arange(n_in) * (TWO_PI / n_in)
        for i, basis in enumerate(net.v_list):
            if len(basis) == 1:
                cand = np.vstack([basis[0], -basis[0]])
            else:
                cand = np.outer(np.cos(ang), basis[0]) + np.outer(np.sin(ang), basis[1])
            for c in cand:
                pairs.append((i, len(thetas)))
                thetas.append(c / np.linalg.norm(c))
        return DirectionNet(3, k, net.v_list, np.array(thetas), net.eta, np.array(pairs))

    @staticmethod
    def default(d: int, k: int) -> "DirectionNet":
        if d == 2 and k == 1:
            return DirectionNet.planar()
        if d == 3:
            return DirectionNet.spherical(k)
        raise InvalidParams(f"no default direction net for d={d}, k={k}")


def _covering_radius(points, antipodal, n_probe=20000, seed=0):
    """Empirical covering radius of a point set on S^2 (probe-based)."""
    rng = np.random.default_rng(seed)
    probe = rng.normal(size=(n_probe, 3))
    probe /= np.linalg.norm(probe, axis=1)[:, None]
    dots = probe @ points.T
    if antipodal:
        dots = np.abs(dots)
    return float(np.arccos(np.clip(dots.max(axis=1), -1, 1)).max())


# ---------------------------------------------------------------------------
# the constant eps(d, k, alpha)
# ---------------------------------------------------------------------------

def canonical_cone(d: int, k: int, alpha: float) -> ConeSpec:
    """``V`` spanned by the first ``d-k`` axes and ``theta = e_1`` (so theta in V)."""
    v = np.eye(d)[: d - k]
    return ConeSpec(k, v, np.eye(d)[0], alpha)


def cone_volume_fraction(spec: ConeSpec, n_samples: int, seed: int, chunk: int = 1 << 18):
    """Monte Carlo ``L^d(X(0,1,V,alpha) \\ H(0,theta,alpha)) / L^d(B(0,1))``.

    Membership only depends on the direction, so uniform directions suffice.
    Returns ``(estimate, standard_error)``.
    """
    if n_samples < 1:
        raise InvalidParams("n_samples must be >= 1")
    rng = np.random.default_rng(seed)
    d = spec.ambient_dim
    hits = 0
    left = int(n_samples)
    while left > 0:
        m = min(chunk, left)
        u = rng.normal(size=(m, d))
        u /= np.linalg.norm(u, axis=1)[:, None]
        proj = u @ spec.v_basis.T
        dist_v = np.sqrt(np.maximum(0.0, 1.0 - np.einsum("ij,ij->i", proj, proj)))
        hits += int(np.count_nonzero((dist_v < spec.alpha) & (u @ spec.theta < spec.alpha)))
        left -= m
    p = hits / n_samples
    return p, math.sqrt(max(p * (1 - p), 0.0) / n_samples)


def cone_constant(d: int, k: int, alpha: float, n_samples: int = 10**6, seed: int = 0):
    """Estimate ``eps(d, k, alpha)`` at the minimizing configuration theta in V."""
    if d < 2 or not 1 <= k <= d - 1:
        raise InvalidParams("need d >= 2 and 1 <= k <= d-1")
    if not 0 < alpha <= 1:
        raise InvalidParams("alpha must lie in (0, 1]")
    return cone_volume_fraction(canonical_cone(d, k, alpha), n_samples, seed)


def planar_cone_constant(alpha: float) -> float:
    """Closed form of ``eps(2, 1, alpha)``."""
    a, b = math.asin(alpha), math.acos(alpha)
    return a / math.pi if a <= b else (4 * a - 2 * b) / TWO_PI


# ---------------------------------------------------------------------------
# cell collection around an apex
# ---------------------------------------------------------------------------

class ConeCells(NamedTuple):
    offset: np.ndarray   # cell center minus apex
    gamma: np.ndarray    # angular radius (pi when the cell may contain the apex)
    mlo: np.ndarray      # 0 unless the cell is inside the open ball
    mhi: np.ndarray
    ball: MassInterval


def _descend_to(mu: Measure, cells: Cells, ball: Ball, level: int) -> Cells:
    while cells.level < level and len(cells):
        keep = ball.classify(cells.lo, cells.hi) != OUTSIDE
        cells = mu.refine(cells.take(keep & (cells.mhi > 0)))
    return cells


class BallFrontier:
    """Cells meeting ``B(x, R)`` at a coarse level, reused as ``r`` shrinks."""

    def __init__(self, mu: Measure, x):
        self.mu = mu
        self.x = np.asarray(x, dtype=float).reshape(mu.ambient_dim)
        self._cells = None
        self._radius = math.inf

    def cells(self, r: float, level: int) -> Cells:
        ball = Ball(self.x, r)
        if self._cells is not None and r <= self._radius and self._cells.level <= level:
            start = self._cells
        else:
            start = self.mu.root_cells()
        cells = _descend_to(self.mu, start, ball, level)
        keep = ball.classify(cells.lo, cells.hi) != OUTSIDE
        cells = cells.take(keep & (cells.mhi > 0))
        self._cells, self._radius = cells, r
        return cells


def collect_cone_cells(mu: Measure, x, r: float, depth=None, gamma_max=DEFAULT_GAMMA_MAX,
                       frontier: Optional[BallFrontier] = None) -> ConeCells:
    """Cells of ``mu`` in ``B(x, r)`` refined until they subtend at most
    ``gamma_max`` from ``x`` (or ``depth`` is reached)."""
    x = np.asarray(x, dtype=float).reshape(mu.ambient_dim)
    r = float(r)
    if not r > 0:
        raise InvalidParams("radius must be positive")
    base_level = mu.level_for_scale(r)
    cap = min(mu.max_depth, base_level + DEFAULT_REL_DEPTH) if depth is None else mu.check_depth(depth)
    cap = max(cap, base_level)
    frontier = frontier or BallFrontier(mu, x)
    cells = frontier.cells(r, base_level)
    ball = Ball(x, r)
    out_off, out_gam, out_lo, out_hi = [], [], [], []
    while len(cells):
        cls = ball.classify(cells.lo, cells.hi)
        keep = (cls != OUTSIDE) & (cells.mhi > 0)
        cells, cls = cells.take(keep), cls[keep]
        off, _, gam = bounding_directions(x, cells.lo, cells.hi)
        done = (gam <= gamma_max) & (cls == INSIDE)
        if cells.level >= cap:
            done[:] = True
        out_off.append(off[done])
        out_gam.append(gam[done])
        out_lo.append(np.where(cls[done] == INSIDE, cells.mlo[done], 0.0))
        out_hi.append(cells.mhi[done])
        if done.all():
            break
        cells = mu.refine(cells.take(~done))
    d = mu.ambient_dim
    off = np.concatenate(out_off) if out_off else np.zeros((0, d))
    gam = np.concatenate(out_gam) if out_gam else np.zeros(0)
    mlo = np.concatenate(out_lo) if out_lo else np.zeros(0)
    mhi = np.concatenate(out_hi) if out_hi else np.zeros(0)
    blo, bhi = math.fsum(mlo), min(1.0, math.fsum(mhi))
    if bhi <= 0:
        raise ZeroMass(f"no mass in B({x.tolist()}, {r:g})")
    return ConeCells(off, gam, mlo, mhi, MassInterval(min(blo, bhi), bhi, cap))


def _ratio(cone_lo, cone_hi, ball: MassInterval):
    lo = cone_lo / ball.high
    hi = 1.0 if ball.low <= 0 else min(1.0, cone_hi / ball.low)
    return min(lo, hi), hi


# ---------------------------------------------------------------------------
# single cone
# ---------------------------------------------------------------------------

def cone_mass_ratio(mu: Measure, x, r: float, cone: ConeSpec, depth=None) -> MassInterval:
    """Enclosure of ``mu(X \\ H) / mu(closed B(x, r))`` by region descent."""
    x = np.asarray(x, dtype=float).reshape(mu.ambient_dim)
    if cone.ambient_dim != mu.ambient_dim:
        raise InvalidParams("cone and measure dimensions differ")
    if depth is None:
        depth = min(mu.max_depth, mu.level_for_scale(r) + 12)
    ball = mu.ball_mass(x, r, depth)
    if ball.high <= 0:
        raise ZeroMass(f"no mass in B({x.tolist()}, {r:g})")
    part = mu.region_mass(cone.region(x, r), depth)
    lo, hi = _ratio(part.low, part.high, ball)
    return MassInterval(lo, hi, depth)


# ---------------------------------------------------------------------------
# net minimum
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConeMinimum(MassInterval):
    """Net minimum of cone-mass ratios: ``low`` is the least lower bound over
    the net, ``high`` the upper bound at the minimizing pair."""

    witness: Optional[ConeSpec] = None


def _generic_bounds(cc: ConeCells, net: DirectionNet, alpha: float, chunk=256):
    a, b = math.asin(min(alpha, 1.0)), math.acos(min(alpha, 1.0))
    apex = cc.gamma >= math.pi / 2
    apex_mass = math.fsum(cc.mhi[apex])
    off, gam = cc.offset[~apex], cc.gamma[~apex]
    mlo, mhi = cc.mlo[~apex], cc.mhi[~apex]
    norm = np.linalg.norm(off, axis=1)
    u = off / norm[:, None]
    pairs = net.pair_indices()
    lows = np.empty(len(pairs))
    highs = np.empty(len(pairs))
    # angle of each unit offset to each V in the net
    along = np.einsum("cd,vmd->cvm", u, net.v_list)
    along = np.sqrt(np.einsum("cvm,cvm->cv", along, along)).clip(0, 1)
    bv_all = np.arctan2(np.sqrt(np.maximum(0, 1 - along ** 2)), along)
    bt_all = np.arccos(np.clip(u @ net.theta_list.T, -1, 1))
    for s in range(0, len(pairs), chunk):
        p = pairs[s:s + chunk]
        bv = bv_all[:, p[:, 0]]
        bt = bt_all[:, p[:, 1]]
        g = gam[:, None]
        inside = (bv + g < a) & (bt - g > b)
        outside = (bv - g >= a) | (bt + g <= b)
        lows[s:s + chunk] = mlo @ inside
        highs[s:s + chunk] = mhi @ ~outside + apex_mass
    return lows, highs


class _PlanarSweep:
    """Gather indices for every (phi, psi) pair of a planar product net."""

    def __init__(self, net: DirectionNet, alpha: float, bins_per_step: int = 4):
        step = min(math.pi / len(net.phi), TWO_PI / len(net.psi))
        self.binw = step / bins_per_step
        self.m = int(round(TWO_PI / self.binw))
        self.offset = 2 * self.m             # table index of angle 0
        self.size = 6 * self.m + 2           # covers angles in [-2 pi, 4 pi]
        a, b = math.asin(min(alpha, 1.0)), math.acos(min(alpha, 1.0))
        phi, psi = np.meshgrid(net.phi, net.psi, indexing="ij")
        phi, psi = phi.ravel(), psi.ravel()
        lo_a, lo_b, hi_a, hi_b = [], [], [], []
        for start in (phi - a, phi + math.pi - a):
            for p0, p1 in self._pieces(start, 2 * a, psi - b, 2 * b):
                empty = p1 <= p0
                la = np.ceil(p0 / self.binw).astype(np.int64) + self.offset
                lb = np.floor(p1 / self.binw).astype(np.int64) + self.offset
                lempty = empty | (lb <= la)
                ha = np.floor(p0 / self.binw).astype(np.int64) + self.offset
                hb = np.ceil(p1 / self.binw).astype(np.int64) + self.offset
                # sentinel slot (last index) holds zero in every table
                z = self.size - 1
                lo_a.append(np.where(lempty, z, la))
                lo_b.append(np.where(lempty, z, lb))
                hi_a.append(np.where(empty, z, ha))
                hi_b.append(np.where(empty, z, hb))
        self.lo_a, self.lo_b = np.array(lo_a), np.array(lo_b)
        self.hi_a, self.hi_b = np.array(hi_a), np.array(hi_b)
        self.phi, self.psi = phi, psi
        self.reduced = self._reduced_pairs(net, a, b)

    @staticmethod
    def _reduced_pairs(net, a, b):
        """Pairs that realize the net minimum of the lower bounds, or None.

        When ``asin(alpha) <= acos(alpha)`` the closed arc H never meets both
        X-arcs, and it swallows a whole X-arc when theta lies along V.  Every
        pair's bound is then at least the smaller of the two whole-arc bounds,
        which the pairs with theta = +-v attain.  Pairs with theta at right
        angles to V are added to cover rounding of ``a + b = pi/2``.
        """
        n_v, n_t = len(net.phi), len(net.psi)
        if a > b or n_t != 2 * n_v or n_v % 2:
            return None
        i = np.arange(n_v)
        cols = [i, i + n_v, (i + n_v // 2) % n_t, (i - n_v // 2) % n_t]
        return np.sort(np.concatenate([i * n_t + c for c in cols]))

    @staticmethod
    def _pieces(start, length, h_start, h_length):
        """Open arcs of ``(start, start+length)`` left after removing the
        closed arc ``[h_start, h_start+h_length]``."""
        delta = np.mod(h_start - start, TWO_PI)
        p1 = (start + np.maximum(0.0, delta + h_length - TWO_PI), start + np.minimum(length, delta))
        p2 = (start + delta + h_length, start + np.full_like(delta, length))
        return p1, p2

    def tables(self, cc: ConeCells, gamma_max=DEFAULT_GAMMA_MAX):
        apex = cc.gamma >= math.pi / 2
        beta = np.mod(np.arctan2(cc.offset[~apex, 1], cc.offset[~apex, 0]), TWO_PI)
        gam = cc.gamma[~apex]
        s = np.floor((beta - gam) / self.binw).astype(np.int64)
        e = np.ceil((beta + gam) / self.binw).astype(np.int64)
        # wide cells would only be subtracted from arcs they span
        mlo = np.where(gam <= gamma_max, cc.mlo[~apex], 0.0)
        mhi = cc.mhi[~apex]
        n = self.size
        s_all = np.concatenate([s - self.m, s, s + self.m]) + self.offset
        e_all = np.concatenate([e - self.m, e, e + self.m]) + self.offset
        s_all = np.clip(s_all, 0, n - 2)
        e_all = np.clip(e_all, 0, n - 2)
        wlo = np.tile(mlo, 3)
        whi = np.tile(mhi, 3)
        # end_le[j] = mass with e <= j ; start_lt[j] = mass with s < j
        end_lo = np.cumsum(np.bincount(e_all, wlo, n))
        start_lo = np.concatenate([[0.0], np.cumsum(np.bincount(s_all, wlo, n))[:-1]])
        end_hi = np.cumsum(np.bincount(e_all, whi, n))
        start_hi = np.concatenate([[0.0], np.cumsum(np.bincount(s_all, whi, n))[:-1]])
        for t in (end_lo, start_lo, end_hi, start_hi):
            t[-1] = 0.0
        return end_lo, start_lo, end_hi, start_hi, math.fsum(cc.mhi[apex])

    def lows(self, tabs, idx=slice(None)):
        end_lo, start_lo = tabs[0], tabs[1]
        # clip per arc: an arc's bound is its inside mass minus the mass of
        # cells spanning it, which is negative on arcs narrower than a cell
        total = 0.0
        for i in range(len(self.lo_a)):
            total = total + np.maximum(end_lo[self.lo_b[i, idx]] - start_lo[self.lo_a[i, idx]], 0.0)
        return total

    def highs(self, tabs, idx=slice(None)):
        end_hi, start_hi, apex_mass = tabs[2], tabs[3], tabs[4]
        total = apex_mass
        for i in range(len(self.hi_a)):
            total = total + start_hi[self.hi_b[i, idx]] - end_hi[self.hi_a[i, idx]]
        return total


def _sweep_for(net: DirectionNet, alpha: float) -> _PlanarSweep:
    key = ("sweep", float(alpha))
    if key not in net._cache:
        net._cache[key] = _PlanarSweep(net, alpha)
    return net._cache[key]


def _net_minimum(cc: ConeCells, alpha: float, net: DirectionNet, method="auto",
                 gamma_max=DEFAULT_GAMMA_MAX) -> ConeMinimum:
    if method == "auto":
        method = "sweep" if net.is_planar_product else "generic"
    if method in ("sweep", "sweep-full"):
        sw = _sweep_for(net, alpha)
        tabs = sw.tables(cc, gamma_max)
        idx = sw.reduced if method == "sweep" and sw.reduced is not None else np.arange(len(sw.phi))
        lows = sw.lows(tabs, idx)
        # exact highs only at the pairs with the smallest lows
        floor = lows.min()
        cand = np.flatnonzero(lows <= floor)
        if len(cand) < _HIGH_CANDIDATES:
            cand = np.argsort(lows, kind="stable")[:_HIGH_CANDIDATES]
        highs = np.full(len(lows), np.inf)
        highs[cand] = sw.highs(tabs, idx[cand])
    else:
        lows, highs = _generic_bounds(cc, net, alpha)
    # the true minimum lies between the least low and any pair's high;
    # ties on the low side go to the pair with the smaller high
    best = np.flatnonzero(lows <= lows.min())
    i = int(best[np.argmin(highs[best])])
    if method != "generic":
        i = int(idx[i])
        witness = ConeSpec.planar(float(sw.phi[i]), float(sw.psi[i]), alpha)
    else:
        witness = net.spec(i, alpha)
    lo, hi = _ratio(max(float(lows.min()), 0.0), float(highs.min()), cc.ball)
    return ConeMinimum(lo, hi, cc.ball.depth_used, witness)


def min_cone_mass_ratio(mu: Measure, x, r: float, alpha: float, k: int,
                        net: Optional[DirectionNet] = None, depth=None,
                        gamma_max=DEFAULT_GAMMA_MAX, method="auto") -> ConeMinimum:
    """Minimum over ``net`` of the cone-mass ratio enclosures.

    ``low`` is the minimum of the lower bounds (conservative); ``high`` is the
    upper bound at the minimizing pair, recorded in ``witness``.
    """
    d = mu.ambient_dim
    net = DirectionNet.default(d, k) if net is None else net
    if net.ambient_dim != d or net.k != k:
        raise InvalidParams("direction net does not match (d, k)")
    cc = collect_cone_cells(mu, x, r, depth, gamma_max)
    return _net_minimum(cc, alpha, net, method, gamma_max)


def cone_scan(mu: Measure, x, T: float, alpha: float, k: int, eps: float = 0.0,
              net: Optional[DirectionNet] = None, dt: float = DEFAULT_DT, rel_depth=DEFAULT_REL_DEPTH,
              gamma_max=DEFAULT_GAMMA_MAX, x_id: int = 0, method="auto") -> ScaleScan:
    """Net-minimum cone ratio along ``r_j = e^{-t_j}``; hits where ``low > eps``."""
    x = np.asarray(x, dtype=float).reshape(mu.ambient_dim)
    net = DirectionNet.default(mu.ambient_dim, k) if net is None else net
    times = time_grid(T, dt)
    frontier = BallFrontier(mu, x)
    lows, highs = [], []
    truncated = None
    for t in times:
        r = math.exp(-t)
        base = mu.level_for_scale(r)
        depth = min(mu.max_depth, base + rel_depth)
        if base + rel_depth > mu.max_depth and r < mu.resolution_floor:
            raise DepthExceeded(f"scale {r:g} below resolution floor")
        try:
            cc = collect_cone_cells(mu, x, r, depth, gamma_max, frontier)
        except ZeroMass:
            truncated = float(t)
            break
        m = _net_minimum(cc, alpha, net, method, gamma_max)
        lows.append(m.low)
        highs.append(m.high)
    lows = np.array(lows)
    scan = ScaleScan(float(T), float(dt), times[:len(lows)], lows, np.array(highs),
                     lows > eps, x_id, truncated)
    scan.extra.update({"alpha": alpha, "k": k, "epsilon_threshold": eps})
    return scan


def fraction_above(scan: ScaleScan, eps: float) -> float:
    """Hit fraction of ``scan`` re-thresholded at ``eps``."""
    return int(np.count_nonzero(scan.f_low > eps)) / scan.n_steps


def cone_scale_fraction(mu: Measure, x, T: float, alpha: float, k: int, eps: float,
                        net: Optional[DirectionNet] = None, dt: float = DEFAULT_DT, **kw) -> float:
    """Fraction of grid times whose net-minimum ratio is certainly above ``eps``."""
    return cone_scan(mu, x, T, alpha, k, eps, net, dt, **kw).hit_fraction


# ---------------------------------------------------------------------------
# rectifiability
# ---------------------------------------------------------------------------

class RectifiabilityResult(NamedTuple):
    holds: bool
    witness: Optional[tuple]


def _pair_differences(points, r):
    tree = cKDTree(points)
    pairs = tree.query_pairs(r, output_type="ndarray")
    if len(pairs):
        diff = points[pairs[:, 1]] - points[pairs[:, 0]]
        keep = np.linalg.norm(diff, axis=1) < r
        pairs = pairs[keep]
        pairs = pairs[np.lexsort((pairs[:, 1], pairs[:, 0]))]
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    both = np.vstack([pairs, pairs[:, ::-1]])
    return both, points[both[:, 1]] - points[both[:, 0]]


def rectifiability_criterion(E, v_basis, theta, alpha: float, r: float) -> RectifiabilityResult:
    """True iff no two points ``x, y`` of ``E`` have ``y`` in
    ``X(x, r, V, alpha) \\ H(x, theta, alpha)``; otherwise a witness ``(x, y)``."""
    pts = np.atleast_2d(np.asarray(E, dtype=float))
    if len(pts) > 10**5:
        raise InvalidParams("at most 10^5 points")
    d = pts.shape[1]
    basis = orthonormal_rows(v_basis, d)
    theta = np.asarray(theta, dtype=float).reshape(d)
    idx, w = _pair_differences(pts, r)
    n = np.linalg.norm(w, axis=1)
    proj = w @ basis.T
    dist_v = np.linalg.norm(w - proj @ basis, axis=1)
    bad = (n > 0) & (dist_v < alpha * n) & (w @ theta < alpha * n)
    if not bad.any():
        return RectifiabilityResult(True, None)
    i = int(np.flatnonzero(bad)[0])
    return RectifiabilityResult(False, (pts[idx[i, 0]].copy(), pts[idx[i, 1]].copy()))


class NetRectifiability(NamedTuple):
    n_pass: int          # net pairs for which the criterion holds
    n_pairs: int
    witnesses: np.ndarray  # (n_pairs, 2) point indices, -1 where it holds

    @property
    def fails_everywhere(self):
        return self.n_pass == 0


def rectifiability_net_scan(E, alpha: float, r: float, net: Optional[DirectionNet] = None) -> NetRectifiability:
    """Run :func:`rectifiability_criterion` for every pair of a planar net.

    Pair directions are sorted once; each (V, theta) then needs a binary
    search per arc of ``X \\ H``.
    """
    pts = np.atleast_2d(np.asarray(E, dtype=float))
    if pts.shape[1] != 2:
        raise InvalidParams("net scan is planar; use rectifiability_criterion per pair in R^3")
    net = DirectionNet.planar() if net is None else net
    idx, w = _pair_differences(pts, r)
    ang = np.mod(np.arctan2(w[:, 1], w[:, 0]), TWO_PI)
    order = np.argsort(ang, kind="stable")
    ang, idx = ang[order], idx[order]
    ext = np.concatenate([ang - TWO_PI, ang, ang + TWO_PI])
    ext_idx = np.concatenate([idx, idx, idx])
    a, b = math.asin(min(alpha, 1.0)), math.acos(min(alpha, 1.0))
    phi, psi = np.meshgrid(net.phi, net.psi, indexing="ij")
    phi, psi = phi.ravel(), psi.ravel()
    wit = np.full(len(phi), -1, dtype=np.int64)
    for start in (phi - a, phi + math.pi - a):
        for p0, p1 in _PlanarSweep._pieces(start, 2 * a, psi - b, 2 * b):
            lo = np.searchsorted(ext, p0, side="right")
            hi = np.searchsorted(ext, p1, side="left")
            found = (hi > lo) & (wit < 0)
            wit[found] = lo[found]
    witnesses = np.full((len(phi), 2), -1, dtype=np.int64)
    ok = wit >= 0
    witnesses[ok] = ext_idx[wit[ok]]
    return NetRectifiability(int(np.count_nonzero(~ok)), len(phi), witnesses)


# ---------------------------------------------------------------------------
# doubling
# ---------------------------------------------------------------------------

def doubling_scan(mu: Measure, x, scales, rel_depth: int = 12) -> float:
    """Largest midpoint ratio ``mu(B(x, 2r)) / mu(B(x, r))`` over ``scales``."""
    x = np.asarray(x, dtype=float).reshape(mu.ambient_dim)
    worst = 0.0
    for r in scales:
        depth = min(mu.max_depth, mu.level_for_scale(r) + rel_depth)
        small = mu.ball_mass(x, r, depth)
        if small.high <= 0:
            raise ZeroMass(f"no mass in B({x.tolist()}, {r:g})")
        big = mu.ball_mass(x, 2 * r, depth)
        worst = max(worst, big.mid / small.mid if small.mid > 0 else math.inf)
    return worst
