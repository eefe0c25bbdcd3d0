"""Pore detection: classical, mean and annular porosity of measures.

A pore at ``(x, r)`` is a ball ``B(y, rho)`` whose mass is at most
``eps * mu(closed B(x, r))``.  Cells of the measure are collected once per
query; for every candidate center the largest admissible ``rho`` follows
from the cells sorted by a lower bound on their distance to ``y`` (a cell
counts as soon as it may meet the open hole), so the returned radius is
always sound.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

from .errors import InvalidParams, ZeroMass
from .measure import Measure
from .regions import INSIDE, OUTSIDE, Ball
from .scenery import DEFAULT_DT, ScaleScan, time_grid

DEFAULT_GRID_RES = 32
DEFAULT_REL_DEPTH = {1: 10, 2: 6, 3: 4}
_REFINE_ROUNDS = 3
_REFINE_KEEP = 8


@dataclass(frozen=True)
class PoreWitness:
    """Best pore found at ``(x, r)``; ``alpha_hat = 0`` means none."""

    x: np.ndarray
    center: np.ndarray
    alpha_hat: float
    eps: float
    r: float
    hole_mass_high: float
    annular_rho: Optional[float] = None

    @property
    def hole_radius(self) -> float:
        if self.annular_rho is None:
            return self.alpha_hat * self.r
        return self.alpha_hat * self.annular_rho * float(np.linalg.norm(self.center - self.x))


@dataclass(frozen=True)
class AnnularSpec:
    """Annular porosity parameter ``rho`` in (0, 1] and ``c = 1 / (1 + rho)``."""

    rho: float

    def __post_init__(self):
        if not 0 < self.rho <= 1:
            raise InvalidParams("annular rho must lie in (0, 1]")

    @property
    def c(self) -> float:
        return 1.0 / (1.0 + self.rho)


class _CellCloud:
    """Positive-mass cells near ``x`` with a KD-tree over their centers."""

    def __init__(self, mu: Measure, x, reach: float, level: int):
        ball = Ball(x, reach)
        cells = mu.root_cells()
        while True:
            keep = (ball.classify(cells.lo, cells.hi) != OUTSIDE) & (cells.mhi > 0)
            cells = cells.take(keep)
            if cells.level >= level or not len(cells):
                break
            cells = mu.refine(cells)
        self.lo, self.hi, self.mass = cells.lo, cells.hi, cells.mhi
        self.centers = 0.5 * (cells.lo + cells.hi)
        half = 0.5 * np.linalg.norm(cells.hi - cells.lo, axis=1)
        self.h_max = float(half.max()) if len(half) else 0.0
        self.tree = cKDTree(self.centers) if len(cells) else None
        self.level = cells.level

    def hole_radius(self, y: np.ndarray, budget: float) -> tuple:
        """Largest sound ``rho`` with at most ``budget`` mass possibly in
        ``B(y, rho)``, and that mass, for every row of ``y``."""
        n = len(self.mass)
        m = len(y)
        rho = np.full(m, np.inf)
        used = np.zeros(m)
        if n == 0:
            return rho, used
        todo = np.arange(m)
        k = min(n, 8)
        while len(todo):
            dist, idx = self.tree.query(y[todo], k=k)
            dist, idx = np.atleast_2d(dist).reshape(len(todo), -1), np.atleast_2d(idx).reshape(len(todo), -1)
            lower = np.maximum(dist - self.h_max, 0.0)
            cum = np.cumsum(self.mass[idx], axis=1)
            over = cum > budget
            hit = over.any(axis=1)
            first = np.argmax(over, axis=1)
            rows = todo[hit]
            rho[rows] = lower[hit, first[hit]]
            prev = np.where(first[hit] > 0, cum[hit, np.maximum(first[hit] - 1, 0)], 0.0)
            used[rows] = prev
            if k >= n:
                used[todo[~hit]] = cum[~hit, -1]
                break
            todo = todo[~hit]
            k = min(n, 4 * k)
        return rho, used


def _grid_offsets(d: int, spacing: float, half_width: float) -> np.ndarray:
    n = int(math.floor(half_width / spacing + 1e-9))
    ticks = np.arange(-n, n + 1) * spacing
    mesh = np.meshgrid(*([ticks] * d), indexing="ij")
    return np.column_stack([m.ravel() for m in mesh])


def _rel_depth(mu, depth):
    if depth is not None:
        return int(depth)
    return DEFAULT_REL_DEPTH.get(mu.ambient_dim, 4)


def _search(mu, x, r, eps, grid_res, depth, score, admissible, reach):
    """Grid search with local refinement maximizing ``score(y, rho)``."""
    if grid_res < 8:
        raise InvalidParams("grid_res must be >= 8")
    if eps < 0:
        raise InvalidParams("eps must be nonnegative")
    x = np.asarray(x, dtype=float).reshape(mu.ambient_dim)
    level = min(mu.max_depth, mu.level_for_scale(r) + _rel_depth(mu, depth))
    ball = mu.region_mass(Ball(x, r), level)
    if ball.high <= 0:
        raise ZeroMass(f"no mass in B({x.tolist()}, {r:g})")
    cloud = _CellCloud(mu, x, reach, level)
    budget = eps * ball.low
    spacing = r / grid_res
    ys = x + _grid_offsets(mu.ambient_dim, spacing, r)
    best = (0.0, x.copy(), 0.0)
    for _ in range(_REFINE_ROUNDS + 1):
        ys = ys[admissible(ys)]
        if len(ys):
            rho, used = cloud.hole_radius(ys, budget)
            s = score(ys, rho)
            order = np.argsort(-s, kind="stable")
            if s[order[0]] > best[0]:
                best = (float(s[order[0]]), ys[order[0]].copy(), float(used[order[0]]))
            tops = ys[order[:_REFINE_KEEP]]
        else:
            tops = np.zeros((0, mu.ambient_dim))
        spacing /= 4
        local = _grid_offsets(mu.ambient_dim, spacing, 4 * spacing)
        ys = (tops[:, None, :] + local[None]).reshape(-1, mu.ambient_dim)
    return best, x


def pore_search(mu: Measure, x, r: float, eps: float = 0.0, grid_res: int = DEFAULT_GRID_RES,
                depth: Optional[int] = None) -> PoreWitness:
    """Largest relative hole ``alpha_hat`` with ``B(y, alpha_hat r)`` inside
    ``closed B(x, r)`` and mass at most ``eps * mu(closed B(x, r))``.

    ``depth`` counts levels below the level of ``r`` (default per dimension).
    """
    r = float(r)
    if not r > 0:
        raise InvalidParams("radius must be positive")

    def admissible(ys):
        return np.linalg.norm(ys - x0, axis=1) <= r

    def score(ys, rho):
        room = r - np.linalg.norm(ys - x0, axis=1)
        return np.minimum(np.minimum(rho, room) / r, 0.5)

    x0 = np.asarray(x, dtype=float).reshape(mu.ambient_dim)
    (a, y, used), x0 = _search(mu, x0, r, eps, grid_res, depth, score, admissible, r)
    return PoreWitness(x0, y, a, float(eps), r, used)


def annular_pore_search(mu: Measure, x, r: float, spec: AnnularSpec, eps: float = 0.0,
                        grid_res: int = DEFAULT_GRID_RES, depth: Optional[int] = None) -> PoreWitness:
    """Largest ``alpha_hat`` with a hole ``B(y, alpha_hat rho |x - y|)`` of mass
    at most ``eps * mu(closed B(x, r))`` and ``|x - y|`` in ``[c r, r]``."""
    r = float(r)
    if not r > 0:
        raise InvalidParams("radius must be positive")
    x0 = np.asarray(x, dtype=float).reshape(mu.ambient_dim)
    lo_r = spec.c * r

    def admissible(ys):
        dist = np.linalg.norm(ys - x0, axis=1)
        return (dist >= lo_r) & (dist <= r)

    def score(ys, rho):
        dist = np.linalg.norm(ys - x0, axis=1)
        return np.minimum(rho / (spec.rho * dist), 1.0)

    (a, y, used), x0 = _search(mu, x0, r, eps, grid_res, depth, score, admissible, 2 * r)
    if a == 0.0:
        # a zero witness still has to sit in the annulus
        y = x0.copy()
        y[0] += r
    return PoreWitness(x0, y, a, float(eps), r, used, spec.rho)


def porosity_scan(mu: Measure, x, T: float, alpha: float, eps: float, dt: float = DEFAULT_DT,
                  grid_res: int = DEFAULT_GRID_RES, depth: Optional[int] = None,
                  annular: Optional[AnnularSpec] = None, x_id: int = 0) -> ScaleScan:
    """``alpha_hat`` at ``r_j = e^{-t_j}``; a time counts when ``alpha_hat >= alpha``."""
    x = np.asarray(x, dtype=float).reshape(mu.ambient_dim)
    times = time_grid(T, dt)
    vals, centers, masses = [], [], []
    truncated = None
    for t in times:
        r = math.exp(-t)
        try:
            if annular is None:
                w = pore_search(mu, x, r, eps, grid_res, depth)
            else:
                w = annular_pore_search(mu, x, r, annular, eps, grid_res, depth)
        except ZeroMass:
            truncated = float(t)
            break
        vals.append(w.alpha_hat)
        centers.append(w.center)
        masses.append(w.hole_mass_high)
    vals = np.array(vals)
    scan = ScaleScan(float(T), float(dt), times[:len(vals)], vals, vals.copy(), vals >= alpha, x_id, truncated)
    scan.extra.update({"alpha": alpha, "epsilon": eps, "centers": centers, "hole_mass_high": masses,
                       "rho": None if annular is None else annular.rho})
    return scan


def porosity_scale_fraction(mu: Measure, x, T: float, alpha: float, eps: float,
                            dt: float = DEFAULT_DT, grid_res: int = DEFAULT_GRID_RES, **kw) -> float:
    """Fraction of grid times with a pore of relative radius at least ``alpha``."""
    return porosity_scan(mu, x, T, alpha, eps, dt, grid_res, **kw).hit_fraction


def porosity_rows(scan: ScaleScan):
    """CSV rows ``(x_id, t, alpha_hat, y, hole_mass_high)``."""
    for t, a, y, m in zip(scan.times, scan.f_low, scan.extra["centers"], scan.extra["hole_mass_high"]):
        yield (scan.x_id, float(t), float(a), " ".join(repr(float(v)) for v in y), float(m))
