"""Scenery flow: translated and magnified views of a measure, and Cesaro
statistics of observables along a magnification orbit."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DepthExceeded, InvalidParams, OriginNotInSupport, PrecisionLoss, ZeroMass
from .measure import DEFAULT_VIEW_DEPTH, AffineView, MassInterval, Measure

DEFAULT_DT = math.log(2) / 8
MAX_STEPS = 10**6


def _base(mu):
    return mu.base if isinstance(mu, AffineView) else mu


def _check_scale(mu: Measure, t: float):
    if t < 0:
        raise InvalidParams(f"time must be nonnegative, got {t}")
    base = _base(mu)
    total = t + (mu.log_scale if isinstance(mu, AffineView) else 0.0)
    if math.exp(-total) < base.resolution_floor:
        raise DepthExceeded(f"scale e^-{total:.4g} below resolution floor {base.resolution_floor:g}")


def magnify(mu: Measure, t: float, view_depth=DEFAULT_VIEW_DEPTH, check_support=True) -> AffineView:
    """``S_t mu``: restrict to ``B(0, e^-t)``, blow up by ``e^t`` and renormalize."""
    _check_scale(mu, t)
    if check_support and not mu.contains_in_support(np.zeros(mu.ambient_dim)):
        raise OriginNotInSupport("0 is not in the support at max_depth")
    return AffineView.derive(mu, dt=float(t), magnify=True, view_depth=view_depth)


def scenery_at(mu: Measure, x, t: float, view_depth=DEFAULT_VIEW_DEPTH, check_support=True) -> AffineView:
    """``mu_{x,t} = S_t(T_x mu)``."""
    x = np.asarray(x, dtype=float).reshape(mu.ambient_dim)
    _check_scale(mu, t)
    if check_support and not mu.contains_in_support(x):
        raise OriginNotInSupport(f"{x.tolist()} is not in the support at max_depth")
    return AffineView.derive(mu, shift=x, dt=float(t), magnify=True, view_depth=view_depth)


def view_cells(nu: Measure, level: int):
    """All cells of ``nu`` at ``level`` (for cell-wise comparisons)."""
    for cells in nu.iter_levels(level):
        pass
    return cells


# ---------------------------------------------------------------------------
# observables
# ---------------------------------------------------------------------------

def ball_observable(r=0.5, depth=DEFAULT_VIEW_DEPTH):
    """``nu -> nu(B(0, r))`` as an enclosure."""
    def f(nu):
        return nu.ball_mass(np.zeros(nu.ambient_dim), r, min(depth, nu.max_depth))
    f.__name__ = f"ball_mass_r{r:g}"
    return f


def above(f, eps):
    """Predicate firing only when the enclosure of ``f`` is certainly above ``eps``."""
    def pred(nu):
        return f(nu).low > eps
    return pred


def always(nu):
    return True


@dataclass
class ScaleScan:
    """Per-time record along one orbit.

    ``hit_fraction`` and ``cesaro_mean`` are left Riemann sums over
    ``t_j = j dt``, ``j < J = round(T / dt)``.  Steps lost to truncation count
    as non-hits and contribute nothing to the mean.
    """

    T: float
    dt: float
    times: np.ndarray
    f_low: np.ndarray
    f_high: np.ndarray
    hits: np.ndarray
    x_id: int = 0
    truncated_at: Optional[float] = None
    extra: dict = field(default_factory=dict)

    @property
    def f_mid(self):
        return 0.5 * (self.f_low + self.f_high)

    @property
    def n_steps(self):
        return int(round(self.T / self.dt))

    @property
    def cesaro_mean(self) -> float:
        if self.n_steps == 0:
            return float("nan")
        return math.fsum(self.f_mid) / self.n_steps

    @property
    def hit_fraction(self) -> float:
        if self.n_steps == 0:
            return float("nan")
        return int(np.count_nonzero(self.hits)) / self.n_steps

    def rows(self):
        for t, lo, mid, hi, h in zip(self.times, self.f_low, self.f_mid, self.f_high, self.hits):
            yield (self.x_id, float(t), float(lo), float(mid), float(hi), int(bool(h)))

    def to_csv(self, header=True) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if header:
            w.writerow(["x_id", "t", "f_low", "f_mid", "f_high", "pred_hit"])
        for row in self.rows():
            w.writerow([row[0], repr(row[1]), repr(row[2]), repr(row[3]), repr(row[4]), row[5]])
        return buf.getvalue()


def time_grid(T, dt):
    if dt <= 0 or T < 0:
        raise InvalidParams("need T >= 0 and dt > 0")
    n = int(round(T / dt))
    if n > MAX_STEPS:
        raise InvalidParams(f"T/dt = {n} exceeds {MAX_STEPS}")
    return np.arange(n) * dt


def _as_interval(v) -> MassInterval:
    if isinstance(v, MassInterval):
        return v
    v = float(v)
    return MassInterval(v, v, 0)


def scenery_statistics(mu: Measure, x, T: float, dt: float = DEFAULT_DT,
                       f: Callable = None, pred: Callable = None, x_id: int = 0,
                       precision_tol: Optional[float] = None,
                       view_depth=DEFAULT_VIEW_DEPTH) -> ScaleScan:
    """Run ``f`` and ``pred`` on ``mu_{x, t_j}`` for every grid time.

    ``f`` maps a view to a :class:`MassInterval` (or float); ``pred`` maps a
    view to a bool.  When ``precision_tol`` is set, an enclosure of ``f``
    wider than it raises :class:`PrecisionLoss`.
    """
    f = ball_observable() if f is None else f
    times = time_grid(T, dt)
    if len(times):
        _check_scale(mu, float(times[-1]))
    x = np.asarray(x, dtype=float).reshape(mu.ambient_dim)
    if not mu.contains_in_support(x):
        raise OriginNotInSupport(f"{x.tolist()} is not in the support at max_depth")
    lows, highs, hits = [], [], []
    truncated = None
    for t in times:
        try:
            nu = scenery_at(mu, x, float(t), view_depth=view_depth, check_support=False)
        except ZeroMass:
            truncated = float(t)
            break
        val = _as_interval(f(nu))
        if precision_tol is not None and val.width > precision_tol:
            raise PrecisionLoss(f"enclosure width {val.width:.3g} at t={t:.4g} exceeds {precision_tol}")
        lows.append(val.low)
        highs.append(val.high)
        hits.append(bool(pred(nu)) if pred is not None else False)
    n = len(lows)
    return ScaleScan(float(T), float(dt), times[:n], np.array(lows), np.array(highs),
                     np.array(hits, dtype=bool), x_id, truncated)


def scans_to_csv(scans) -> str:
    parts = [s.to_csv(header=(i == 0)) for i, s in enumerate(scans)]
    return "".join(parts) if parts else "x_id,t,f_low,f_mid,f_high,pred_hit\n"
