"""Dimension estimators: local dimensions, Hausdorff/packing surrogates,
the dimension of the scenery distribution along an orbit, the integral
functional ``F``, density (Ahlfors) scans and box counting."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .errors import DepthExceeded, InvalidParams, PrecisionLoss, ZeroMass
from .measure import MassInterval, Measure, support_sample
from .parallel import pmap
from .scenery import DEFAULT_DT, _check_scale, time_grid

DEFAULT_R_MIN = 2.0 ** -28
DEFAULT_R_MAX = 2.0 ** -4
DEFAULT_N_SCALES = 24
REL_DEPTH = {1: 12, 2: 10, 3: 6}
REGULAR_SLOPE_TOL = 0.1


@dataclass(frozen=True)
class DimensionEstimate:
    """A dimension value with its fit residual and scale range.

    ``method`` is one of ``regression``, ``quantile``, ``scenery_average``,
    ``closed_form`` or ``box_count``.
    """

    value: float
    residual: float
    r_min: float
    r_max: float
    method: str
    extra: dict = field(default_factory=dict, compare=False)

    def to_dict(self):
        out = {"value": self.value, "residual": self.residual, "r_min": self.r_min,
               "r_max": self.r_max, "method": self.method}
        out.update({k: v for k, v in self.extra.items() if isinstance(v, (int, float, str, bool))})
        return out


class LocalDimension(NamedTuple):
    central: DimensionEstimate
    lower: DimensionEstimate
    upper: DimensionEstimate


class DimensionSpectrum(NamedTuple):
    hausdorff_lower: DimensionEstimate
    hausdorff_upper: DimensionEstimate
    packing_lower: DimensionEstimate
    packing_upper: DimensionEstimate


class DensityScan(NamedTuple):
    inf_ratio: float
    sup_ratio: float
    regular: bool
    slope: float
    scales: np.ndarray
    ratios: np.ndarray
    max_width: float  # largest enclosure width of a ratio


def _rel_depth(mu: Measure, rel_depth):
    return REL_DEPTH.get(mu.ambient_dim, 6) if rel_depth is None else int(rel_depth)


def _ball(mu: Measure, x, r, rel_depth) -> MassInterval:
    depth = min(mu.max_depth, mu.level_for_scale(r) + rel_depth)
    return mu.ball_mass(x, r, depth)


def _fit(logr, logm):
    """Least-squares slope and RMS residual of ``logm`` against ``logr``."""
    A = np.column_stack([logr, np.ones_like(logr)])
    coef, *_ = np.linalg.lstsq(A, logm, rcond=None)
    res = logm - A @ coef
    return float(coef[0]), float(np.sqrt(np.mean(res ** 2)))


def log_scales(r_min, r_max, n_scales):
    if not 0 < r_min < r_max:
        raise InvalidParams("need 0 < r_min < r_max")
    if n_scales < 8:
        raise InvalidParams("n_scales must be >= 8")
    return np.exp(np.linspace(math.log(r_max), math.log(r_min), int(n_scales)))


def ball_masses(mu: Measure, x, scales, rel_depth=None):
    """Ball-mass enclosures at every scale (as ``(low, high)`` arrays)."""
    x = np.asarray(x, dtype=float).reshape(mu.ambient_dim)
    rd = _rel_depth(mu, rel_depth)
    if min(scales) < mu.resolution_floor:
        raise DepthExceeded(f"r_min {min(scales):g} below resolution floor {mu.resolution_floor:g}")
    vals = [_ball(mu, x, r, rd) for r in scales]
    return np.array([v.low for v in vals]), np.array([v.high for v in vals])


def local_dimension(mu: Measure, x, r_min: float = DEFAULT_R_MIN, r_max: float = DEFAULT_R_MAX,
                    n_scales: int = DEFAULT_N_SCALES, window: Optional[int] = None,
                    rel_depth: Optional[int] = None) -> LocalDimension:
    """Log-log regression of ``mu(B(x, r))`` against ``r``.

    The central value is the slope over the whole range; ``lower`` and
    ``upper`` are the smallest and largest slopes over sliding windows of
    ``window`` consecutive scales (default: five sixths of the scales).
    """
    scales = log_scales(r_min, r_max, n_scales)
    lo, hi = ball_masses(mu, x, scales, rel_depth)
    if np.any(hi <= 0):
        raise ZeroMass(f"no mass near {np.ravel(x).tolist()} at r = {scales[hi <= 0][0]:g}")
    if np.any(lo <= 0):
        raise PrecisionLoss("ball-mass enclosure reaches 0; increase rel_depth")
    width = np.log(hi) - np.log(lo)
    logr = np.log(scales)
    logm = np.log(0.5 * (lo + hi))
    span = abs(logm[-1] - logm[0])
    if span > 0 and float(np.max(width)) > 0.5 * span:
        raise PrecisionLoss("enclosure widths dominate the log-mass range")
    slope, res = _fit(logr, logm)
    w = max(4, round(5 * len(scales) / 6)) if window is None else int(window)
    if not 2 <= w <= len(scales):
        raise InvalidParams("window must lie in [2, n_scales]")
    # the full-range fit is one of the candidates so lower <= central <= upper
    fits = [(_fit(logr[i:i + w], logm[i:i + w]), i, i + w) for i in range(len(scales) - w + 1)]
    fits.append(((slope, res), 0, len(scales)))
    (s_lo, r_lo), a_lo, b_lo = min(fits, key=lambda f: f[0][0])
    (s_hi, r_hi), a_hi, b_hi = max(fits, key=lambda f: f[0][0])
    info = {"max_log_width": float(np.max(width))}
    return LocalDimension(
        DimensionEstimate(slope, res, float(r_min), float(r_max), "regression", info),
        DimensionEstimate(s_lo, r_lo, float(scales[b_lo - 1]), float(scales[a_lo]), "regression"),
        DimensionEstimate(s_hi, r_hi, float(scales[b_hi - 1]), float(scales[a_hi]), "regression"),
    )


def dimension_spectrum(mu: Measure, n_points: int = 100, seed: int = 0,
                       r_min: float = DEFAULT_R_MIN, r_max: float = DEFAULT_R_MAX,
                       n_scales: int = DEFAULT_N_SCALES, quantiles=(0.01, 0.99),
                       rel_depth: Optional[int] = None) -> DimensionSpectrum:
    """Quantile surrogates of the essential inf/sup of local dimensions over
    ``mu``-sampled points.

    Hausdorff variants use the lower local-dimension estimates, packing
    variants the upper ones.
    """
    if n_points < 100:
        raise InvalidParams("n_points must be >= 100")
    q_lo, q_hi = quantiles
    if not 0 <= q_lo < q_hi <= 1:
        raise InvalidParams("quantiles must satisfy 0 <= lo < hi <= 1")
    pts = support_sample(mu, n_points, seed)
    ests = pmap(lambda p: local_dimension(mu, p, r_min, r_max, n_scales, rel_depth=rel_depth), list(pts))
    lower = np.array([e.lower.value for e in ests])
    upper = np.array([e.upper.value for e in ests])
    res = float(max(max(e.lower.residual, e.upper.residual) for e in ests))

    def q(arr, level):
        return DimensionEstimate(float(np.quantile(arr, level)), res, float(r_min), float(r_max), "quantile",
                                 {"quantile": level, "n_points": n_points})

    return DimensionSpectrum(q(lower, q_lo), q(lower, q_hi), q(upper, q_lo), q(upper, q_hi))


def _log_ratio_bounds(num: MassInterval, den: MassInterval, r: float):
    """Enclosure of ``log(num / den) / log r`` (``r < 1``)."""
    ratio = MassInterval.ratio(num, den)
    if ratio.high <= 0:
        raise ZeroMass("ball carries no mass")
    lr = math.log(r)
    hi = math.log(ratio.low) / lr if ratio.low > 0 else math.inf
    lo = math.log(min(ratio.high, 1.0)) / lr
    return lo, hi


def fd_dimension(mu: Measure, x, T: float, r: float = 0.5, dt: float = DEFAULT_DT,
                 rel_depth: Optional[int] = None, r_check: Optional[float] = None) -> DimensionEstimate:
    """Cesaro average over ``t_j = j dt < T`` of ``log nu(B(0, r)) / log r``
    with ``nu = mu_{x, t_j}``.

    Evaluated directly on ``mu`` as ``mu(B(x, r e^-t)) / mu(B(x, e^-t))``.
    ``residual`` is the mean half-width of the per-time enclosures.  With
    ``r_check`` the average is repeated at that radius and the difference is
    stored as ``extra['r_sensitivity']``.
    """
    if not 0 < r < 1:
        raise InvalidParams("r must lie in (0, 1)")
    x = np.asarray(x, dtype=float).reshape(mu.ambient_dim)
    times = time_grid(T, dt)
    if len(times) == 0:
        raise InvalidParams("T / dt rounds to zero steps")
    _check_scale(mu, float(times[-1]) - math.log(r))
    rd = _rel_depth(mu, rel_depth)
    lows, highs = [], []
    for t in times:
        s = math.exp(-t)
        outer = _ball(mu, x, s, rd)
        if outer.high <= 0:
            raise ZeroMass(f"no mass in B({x.tolist()}, {s:g})")
        inner = _ball(mu, x, r * s, rd)
        lo, hi = _log_ratio_bounds(inner, outer, r)
        lows.append(lo)
        highs.append(hi)
    lows, highs = np.array(lows), np.array(highs)
    if not np.all(np.isfinite(highs)):
        raise PrecisionLoss("inner ball-mass enclosure reaches 0; increase rel_depth")
    n = len(times)
    value = math.fsum(0.5 * (lows + highs)) / n
    extra = {"n_steps": n, "T": float(T), "dt": float(dt), "r": float(r),
             "value_low": math.fsum(lows) / n, "value_high": math.fsum(highs) / n}
    if r_check is not None:
        other = fd_dimension(mu, x, T, r_check, dt, rel_depth)
        extra["r_sensitivity"] = abs(other.value - value)
    return DimensionEstimate(value, math.fsum(0.5 * (highs - lows)) / n,
                             float(r * math.exp(-times[-1])), float(r), "scenery_average", extra)


def dim_functional_F(nu: Measure, n_quad: int = 256, rel_depth: Optional[int] = None,
                     return_error: bool = False):
    """``F(nu) = int_0^1 log nu(B(0, r)) / log r dr`` by the midpoint rule.

    Midpoint nodes avoid both endpoints; the integrand tends to 0 at ``r = 1``
    for measures carried by the unit ball and stays bounded by the local
    dimension near ``r = 0``.  The error estimate compares ``n_quad`` with
    ``n_quad / 2`` nodes.
    """
    if n_quad < 4 or n_quad % 2:
        raise InvalidParams("n_quad must be an even integer >= 4")
    origin = np.zeros(nu.ambient_dim)
    if not nu.contains_in_support(origin):
        raise ZeroMass("0 is not in the support")
    rd = _rel_depth(nu, rel_depth)

    def integrand(r):
        m = _ball(nu, origin, r, rd)
        if m.high <= 0:
            raise ZeroMass(f"no mass in B(0, {r:g})")
        if m.low <= 0:
            raise PrecisionLoss(f"ball-mass enclosure at r={r:g} reaches 0")
        return math.log(min(m.mid, 1.0)) / math.log(r)

    def rule(n):
        nodes = (np.arange(n) + 0.5) / n
        return math.fsum(integrand(float(r)) for r in nodes) / n

    fine = rule(n_quad)
    if not return_error:
        return fine
    return fine, abs(fine - rule(n_quad // 2))


def density_scan(mu: Measure, x, k: float, scales: Sequence[float], rel_depth: Optional[int] = None) -> DensityScan:
    """``mu(closed B(x, r)) / r^k`` over ``scales`` (midpoints).

    ``regular`` is the empirical Ahlfors flag: at least 30 scales, a
    positive finite range, and a log-log slope of the ratio within
    ``REGULAR_SLOPE_TOL`` of zero.
    """
    scales = np.sort(np.asarray(scales, dtype=float))[::-1]
    lo, hi = ball_masses(mu, x, scales, rel_depth)
    if np.any(hi <= 0):
        raise ZeroMass(f"no mass near {np.ravel(x).tolist()}")
    ratios = 0.5 * (lo + hi) / scales ** k
    positive = ratios > 0
    slope = math.nan
    if positive.sum() >= 2:
        slope, _ = _fit(np.log(scales[positive]), np.log(ratios[positive]))
    regular = bool(len(scales) >= 30 and positive.all() and abs(slope) <= REGULAR_SLOPE_TOL)
    width = float(np.max((hi - lo) / scales ** k))
    return DensityScan(float(ratios.min()), float(ratios.max()), regular, float(slope), scales, ratios, width)


def box_dimension(source, depth_range=None, cell_bits=None) -> DimensionEstimate:
    """Slope of ``log N`` against ``-log(cell size)``.

    ``source`` is a :class:`Measure` (``N`` = positive-mass cells at each
    level of ``depth_range = (first, last)``) or an ``(n, d)`` point array
    (``N`` = occupied dyadic boxes of side ``2^-j`` for ``j`` in
    ``cell_bits = (first, last)``).
    """
    if isinstance(source, Measure):
        first, last = (1, min(12, source.max_depth)) if depth_range is None else map(int, depth_range)
        if not 0 <= first < last <= source.max_depth:
            raise InvalidParams(f"depth range must lie in [0, {source.max_depth}]")
        counts, sizes = [], []
        for cells in source.iter_levels(last):
            if cells.level >= first:
                counts.append(int(np.count_nonzero(cells.mhi > 0)))
                sizes.append(source.level_size(cells.level))
    else:
        pts = np.asarray(source, dtype=float)
        if pts.ndim != 2 or len(pts) == 0:
            raise InvalidParams("point sets must be nonempty (n, d) arrays")
        first, last = (1, 10) if cell_bits is None else map(int, cell_bits)
        if not 0 <= first < last <= 52:
            raise InvalidParams("cell_bits must satisfy 0 <= first < last <= 52")
        counts, sizes = [], []
        for j in range(first, last + 1):
            boxes = np.floor(pts * 2.0 ** j).astype(np.int64)
            counts.append(len(np.unique(boxes, axis=0)))
            sizes.append(2.0 ** -j)
    logs = -np.log(np.array(sizes))
    slope, res = _fit(logs, np.log(np.array(counts, dtype=float)))
    return DimensionEstimate(slope, res, float(min(sizes)), float(max(sizes)), "box_count",
                             {"counts": ",".join(map(str, counts))})
