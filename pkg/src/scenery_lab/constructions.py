"""Standard and extremal measures.

Self-similar sets, products and scale-spliced measures are all Moran trees
(:class:`~scenery_lab.measure.MoranMeasure`); Lebesgue, plane and point
measures are the analytic kinds.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import InvalidParams, UnsupportedKind
from .measure import (DEFAULT_RESOLUTION_BITS, EuclideanBallMeasure, Measure, MoranMeasure,
                      PointMass, Stencil)

# ---------------------------------------------------------------------------
# IFS
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IfsSpec:
    """Homothetic IFS on the unit cube ``[0, 1]^d``.

    ``maps`` is a sequence of ``(ratio, offset)`` pairs: ``y -> offset + ratio*y``.
    """

    ambient_dim: int
    maps: tuple
    weights: tuple

    def __post_init__(self):
        d = self.ambient_dim
        if d < 1:
            raise InvalidParams("ambient dimension must be >= 1")
        if len(self.maps) != len(self.weights) or not self.maps:
            raise InvalidParams("need one weight per map")
        for ratio, offset in self.maps:
            if not 0 < ratio < 1:
                raise InvalidParams(f"ratio {ratio} outside (0, 1)")
            if len(offset) != d:
                raise InvalidParams(f"offset {offset} is not {d}-dimensional")
        w = np.asarray(self.weights, dtype=float)
        if np.any(w < 0) or abs(math.fsum(w) - 1.0) > 1e-12:
            raise InvalidParams(f"weights must be nonnegative and sum to 1, got {list(self.weights)}")
        if self.separation_margin() < 0:
            raise InvalidParams("IFS images overlap (strong separation fails)")

    def stencil(self) -> Stencil:
        d = self.ambient_dim
        off = np.array([o for _, o in self.maps], dtype=float).reshape(-1, d)
        rat = np.array([[r] * d for r, _ in self.maps], dtype=float)
        return Stencil.build(off, rat, self.weights)

    def separation_margin(self) -> float:
        d = self.ambient_dim
        off = np.array([o for _, o in self.maps], dtype=float).reshape(-1, d)
        rat = np.array([[r] * d for r, _ in self.maps], dtype=float)
        if np.any(off < -1e-15) or np.any(off + rat > 1 + 1e-15):
            raise InvalidParams("IFS images must stay inside the unit cube")
        return Stencil(off, rat, np.asarray(self.weights, dtype=float)).separation_margin()

    def similarity_dimension(self) -> float:
        """Root ``s`` of ``sum r_i^s = 1`` (bisection)."""
        ratios = np.array([r for r, _ in self.maps])
        lo, hi = 0.0, float(self.ambient_dim)
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if np.sum(ratios ** mid) > 1:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    def to_spec(self):
        return {"type": "ifs", "dim": self.ambient_dim,
                "maps": [{"ratio": r, "offset": list(o)} for r, o in self.maps],
                "weights": list(self.weights)}


def depth_for_resolution(shrink_factors, resolution_bits=DEFAULT_RESOLUTION_BITS) -> int:
    """Number of leading levels whose cumulative size stays >= 2**-bits."""
    total = 0.0
    budget = resolution_bits * math.log(2) + 1e-9
    for n, f in enumerate(shrink_factors):
        total += -math.log(f)
        if total > budget:
            return n
    return len(shrink_factors)


def ifs_measure(spec: IfsSpec, max_depth=None, resolution_bits=DEFAULT_RESOLUTION_BITS) -> MoranMeasure:
    st = spec.stencil()
    if max_depth is None:
        rmax = max(r for r, _ in spec.maps)
        max_depth = int(math.floor(resolution_bits * math.log(2) / -math.log(rmax) + 1e-9))
    s = spec.to_spec()
    s["depth"] = int(max_depth)
    return MoranMeasure([st], np.zeros(int(max_depth), dtype=int), kind="ifs", spec=s)


def _check_alpha(alpha):
    if not 0 < alpha < 0.5:
        raise InvalidParams(f"alpha must lie in (0, 1/2), got {alpha}")


def salli_ratio(alpha: float) -> float:
    _check_alpha(alpha)
    return (1 - 2 * alpha) / (2 - 2 * alpha)


def salli_dimension(alpha: float) -> float:
    """Largest Hausdorff dimension of an ``alpha``-porous subset of the line."""
    _check_alpha(alpha)
    return math.log(2) / (math.log(2 - 2 * alpha) - math.log(1 - 2 * alpha))


def cantor_ifs(ratio: float, dim: int = 1) -> IfsSpec:
    """Two-map Cantor IFS (per axis) with the given contraction ratio."""
    corners = np.array(np.meshgrid(*([[0.0, 1.0 - ratio]] * dim), indexing="ij")).reshape(dim, -1).T
    n = len(corners)
    return IfsSpec(dim, tuple((ratio, tuple(c)) for c in corners), tuple([1.0 / n] * n))


def cantor_salli(alpha: float, max_depth=None) -> MoranMeasure:
    """Natural measure on the ``(1-2a)/(2-2a)``-Cantor set of ``[0, 1]``."""
    m = ifs_measure(cantor_ifs(salli_ratio(alpha)), max_depth)
    m._spec["cantor_alpha"] = alpha
    return m


def quarter_cantor(max_depth=None) -> MoranMeasure:
    """Cantor measure with two maps of ratio 1/4 (dimension 1/2)."""
    return ifs_measure(cantor_ifs(0.25), max_depth)


# ---------------------------------------------------------------------------
# analytic kinds
# ---------------------------------------------------------------------------

def lebesgue_ball(d: int) -> Measure:
    if d < 1:
        raise InvalidParams("dimension must be >= 1")
    return EuclideanBallMeasure(d)


def point_mass(d: int, at=None) -> Measure:
    if d < 1:
        raise InvalidParams("dimension must be >= 1")
    return PointMass(d, at)


def plane(d: int, axes: Sequence[int]) -> Measure:
    """Normalized ``H^k`` on the coordinate plane spanned by ``axes``, cut to the unit ball."""
    k = len(axes)
    if not 1 <= k < d:
        raise InvalidParams(f"plane needs 1 <= k < d, got k={k}, d={d}")
    return EuclideanBallMeasure(d, axes)


def standard_measure(kind: str, d: int, axes=None, at=None) -> Measure:
    if kind == "lebesgue_ball":
        return lebesgue_ball(d)
    if kind == "point_mass":
        return point_mass(d, at)
    if kind == "plane":
        if axes is None:
            raise InvalidParams("plane needs axes")
        return plane(d, axes)
    raise InvalidParams(f"unknown standard measure {kind!r}")


# ---------------------------------------------------------------------------
# grid rules and products
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SubdivisionRule:
    """A scale-invariant stencil: how a cell's mass is split among children."""

    name: str
    ambient_dim: int
    params: dict = field(default_factory=dict, compare=False)
    stencil: Stencil = field(default=None, compare=False, repr=False)

    @property
    def log_step(self) -> float:
        """Log of the per-level magnification (time spent per level)."""
        return -math.log(float(self.stencil.ratios.max()))

    @property
    def dimension(self) -> float:
        w = self.stencil.weights
        return float(-(w * np.log(w)).sum() / self.log_step)

    def to_spec(self):
        return {"kind": self.name, **self.params}


def uniform_rule(d: int) -> SubdivisionRule:
    corners = np.array(np.meshgrid(*([[0.0, 0.5]] * d), indexing="ij")).reshape(d, -1).T
    n = len(corners)
    return SubdivisionRule("uniform", d, {}, Stencil.build(corners, [[0.5] * d], np.full(n, 1.0 / n)))


def plane_rule(d: int, axes: Sequence[int]) -> SubdivisionRule:
    """Mass only to children touching the coordinate plane through the cell's
    lower corner spanned by ``axes``."""
    axes = sorted(int(a) for a in axes)
    if not axes or not 1 <= len(axes) < d or min(axes) < 0 or max(axes) >= d:
        raise InvalidParams(f"plane rule needs 1 <= k < d axes in range, got {axes}")
    corners = np.array(np.meshgrid(*([[0.0, 0.5]] * d), indexing="ij")).reshape(d, -1).T
    off_axes = [a for a in range(d) if a not in axes]
    on = np.all(corners[:, off_axes] == 0.0, axis=1)
    w = on / on.sum()
    return SubdivisionRule("plane", d, {"axes": axes}, Stencil.build(corners, [[0.5] * d], w))


def cantor_rule(d: int, alpha: float) -> SubdivisionRule:
    ifs = cantor_ifs(salli_ratio(alpha), d)
    return SubdivisionRule("cantor", d, {"alpha": alpha}, ifs.stencil())


def rule_from_spec(spec: dict, d: int) -> SubdivisionRule:
    kind = spec.get("kind")
    if kind == "uniform":
        return uniform_rule(d)
    if kind == "plane":
        return plane_rule(d, spec["axes"])
    if kind == "cantor":
        return cantor_rule(d, float(spec["alpha"]))
    raise InvalidParams(f"unknown subdivision rule {kind!r}")


def grid_measure(rule: SubdivisionRule, max_depth=None,
                 resolution_bits=DEFAULT_RESOLUTION_BITS) -> MoranMeasure:
    if max_depth is None:
        max_depth = depth_for_resolution([math.exp(-rule.log_step)] * 4 * resolution_bits, resolution_bits)
    spec = {"type": "grid", "dim": rule.ambient_dim, "rule": rule.to_spec(), "depth": int(max_depth)}
    return MoranMeasure([rule.stencil], np.zeros(int(max_depth), dtype=int), kind="grid", spec=spec)


def product_measure(mu1: Measure, mu2: Measure) -> MoranMeasure:
    """Level-wise product of two Moran trees (cylinders multiply)."""
    if not (isinstance(mu1, MoranMeasure) and isinstance(mu2, MoranMeasure)):
        raise UnsupportedKind("product needs two ifs/grid/product/splice measures")
    depth = min(mu1.max_depth, mu2.max_depth)
    pairs = {}
    labels = np.empty(depth, dtype=int)
    rules = []
    for lvl in range(depth):
        key = (int(mu1.labels[lvl]), int(mu2.labels[lvl]))
        if key not in pairs:
            pairs[key] = len(rules)
            rules.append(mu1.rules[key[0]].product(mu2.rules[key[1]]))
        labels[lvl] = pairs[key]
    spec = None
    if mu1._spec is not None and mu2._spec is not None:
        spec = {"type": "product", "factors": [mu1.to_spec(), mu2.to_spec()]}
    return MoranMeasure(rules, labels, np.concatenate([mu1.root_lo, mu2.root_lo]),
                        np.concatenate([mu1.root_size, mu2.root_size]), kind="product", spec=spec)


# ---------------------------------------------------------------------------
# splicing
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpliceSchedule:
    """Deterministic A/B labelling of levels with B-frequency ``target_frequency``.

    Levels come in blocks (lengths 1, 2, 3, ... for ``"linear"``, or a
    constant ``L`` for ``("constant", L)``); each whole block gets the label
    that keeps the running weighted B-fraction closest to the target, ties
    going to B.  ``weights`` give the time each label's level occupies (for
    rules with different ratios); ``None`` means equal weights.
    """

    target_frequency: float
    block_growth: object = "linear"
    depth: int = DEFAULT_RESOLUTION_BITS
    weights: tuple = None

    def __post_init__(self):
        if not 0.0 <= self.target_frequency <= 1.0:
            raise InvalidParams("target frequency must lie in [0, 1]")
        if self.depth < 0:
            raise InvalidParams("depth must be >= 0")
        self.block_lengths(1)

    def block_lengths(self, depth=None):
        depth = self.depth if depth is None else depth
        g = self.block_growth
        if g == "linear":
            step = lambda i: i + 1  # noqa: E731
        elif isinstance(g, (tuple, list)) and len(g) == 2 and g[0] == "constant" and int(g[1]) >= 1:
            step = lambda i: int(g[1])  # noqa: E731
        else:
            raise InvalidParams(f"block_growth must be 'linear' or ('constant', L), got {g!r}")
        out, total, i = [], 0, 0
        while total < depth:
            n = min(step(i), depth - total)
            out.append(n)
            total += n
            i += 1
        return out

    @property
    def labels(self) -> np.ndarray:
        """0 for A, 1 for B, one entry per level."""
        wa, wb = (1.0, 1.0) if self.weights is None else map(float, self.weights)
        q = self.target_frequency
        labels = []
        time_a = time_b = 0.0
        for n in self.block_lengths():
            as_a = abs(time_b / (time_a + time_b + n * wa) - q)
            as_b = abs((time_b + n * wb) / (time_a + time_b + n * wb) - q)
            if as_b <= as_a:
                labels.extend([1] * n)
                time_b += n * wb
            else:
                labels.extend([0] * n)
                time_a += n * wa
        return np.array(labels, dtype=int)

    def block_length_at(self, level: int) -> int:
        """Length of the block containing ``level`` (1-based)."""
        total = 0
        for n in self.block_lengths():
            total += n
            if level <= total:
                return n
        return 0


def splice(rule_a: SubdivisionRule, rule_b: SubdivisionRule, schedule: SpliceSchedule) -> MoranMeasure:
    """Moran measure using ``rule_a`` on A-levels and ``rule_b`` on B-levels.

    When the schedule carries no weights the two rules' per-level log steps
    are used, so the target frequency is a fraction of *scales* (time along
    the scenery flow) rather than of levels.
    """
    if rule_a.ambient_dim != rule_b.ambient_dim:
        raise InvalidParams("splice rules must share the ambient dimension")
    if schedule.weights is None:
        schedule = replace(schedule, weights=(rule_a.log_step, rule_b.log_step))
    labels = schedule.labels
    spec = {"type": "splice", "dim": rule_a.ambient_dim, "rule_a": rule_a.to_spec(),
            "rule_b": rule_b.to_spec(), "q": schedule.target_frequency,
            "block_growth": schedule.block_growth if isinstance(schedule.block_growth, str)
            else {"constant": int(schedule.block_growth[1])},
            "depth": schedule.depth}
    m = MoranMeasure([rule_a.stencil, rule_b.stencil], labels, kind="splice", spec=spec)
    m.schedule = schedule
    return m


def splice_resolution_depth(rule_a, rule_b, q, block_growth="linear",
                            resolution_bits=DEFAULT_RESOLUTION_BITS) -> int:
    """Schedule depth whose finest cells are still >= 2**-resolution_bits."""
    probe = SpliceSchedule(q, block_growth, 8 * resolution_bits, (rule_a.log_step, rule_b.log_step))
    steps = [math.exp(-(rule_b.log_step if lab else rule_a.log_step)) for lab in probe.labels]
    return depth_for_resolution(steps, resolution_bits)


def extremal_conical(d: int, k: int, s: float, block_growth="linear",
                     resolution_bits=DEFAULT_RESOLUTION_BITS) -> MoranMeasure:
    """Spliced measure of dimension ``s`` mixing Lebesgue-like (A) and
    plane-like (B) scales, Lebesgue a fraction ``(s-k)/(d-k)`` of the time."""
    if not (1 <= k < d and k < s < d):
        raise InvalidParams("need 1 <= k < d and k < s < d")
    q = (d - s) / (d - k)
    a, b = uniform_rule(d), plane_rule(d, range(k))
    depth = splice_resolution_depth(a, b, q, block_growth, resolution_bits)
    return splice(a, b, SpliceSchedule(q, block_growth, depth))


def extremal_mean_porous(alpha: float, p: float, d: int = 1, block_growth="linear",
                         resolution_bits=DEFAULT_RESOLUTION_BITS) -> MoranMeasure:
    """Spliced measure that is Cantor-like (``alpha``-porous) a fraction ``p``
    of the time and Lebesgue-like otherwise."""
    a, b = uniform_rule(d), cantor_rule(d, alpha)
    depth = splice_resolution_depth(a, b, p, block_growth, resolution_bits)
    return splice(a, b, SpliceSchedule(p, block_growth, depth))
