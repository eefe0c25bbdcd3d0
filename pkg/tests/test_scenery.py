import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from scenery_lab.constructions import cantor_salli, extremal_conical, grid_measure, lebesgue_ball, uniform_rule
from scenery_lab.errors import DepthExceeded, InvalidParams, OriginNotInSupport, PrecisionLoss
from scenery_lab.measure import support_sample, translate
from scenery_lab.scenery import (DEFAULT_DT, above, always, ball_observable, magnify, scans_to_csv,
                                 scenery_at, scenery_statistics, time_grid, view_cells)

CANTOR = cantor_salli(0.25)
GRID = grid_measure(uniform_rule(2), 30)
X_GRID = support_sample(GRID, 1, 11)[0]


def _same_cells(a, b):
    return (np.array_equal(a.lo, b.lo) and np.array_equal(a.hi, b.hi)
            and np.array_equal(a.mlo, b.mlo) and np.array_equal(a.mhi, b.mhi))


@given(st.floats(0.0, 6.0), st.floats(0.0, 6.0))
def test_flow_semigroup_cell_exact(t, t2):
    direct = scenery_at(GRID, X_GRID, t + t2)
    composed = magnify(scenery_at(GRID, X_GRID, t2), t)
    assert direct.log_scale == composed.log_scale
    assert _same_cells(view_cells(direct, 3), view_cells(composed, 3))


def test_magnify_requires_origin_in_support():
    with pytest.raises(OriginNotInSupport):
        magnify(translate(CANTOR, [0.5]), 1.0)
    with pytest.raises(OriginNotInSupport):
        scenery_at(CANTOR, [0.5], 1.0)


def test_scale_below_floor_raises():
    with pytest.raises(DepthExceeded):
        scenery_at(CANTOR, [0.0], 40.0)


def test_cantor_periodicity_small_depth():
    v = scenery_at(CANTOR, [0.0], math.log(3))
    for level in range(6):
        a, b = view_cells(v, level), view_cells(CANTOR, level)
        pos = a.mhi > 0
        assert pos.sum() == len(b)
        assert np.allclose(a.lo[pos], b.lo, atol=1e-15)
        assert np.all(a.mlo[pos] <= b.mlo + 1e-15) and np.all(b.mlo <= a.mhi[pos] + 1e-15)


def test_time_grid_and_limits():
    assert len(time_grid(1.0, 0.25)) == 4
    with pytest.raises(InvalidParams):
        time_grid(1.0, 0.0)
    with pytest.raises(InvalidParams):
        time_grid(1e7, 1e-2)


def test_statistics_on_lebesgue_are_constant():
    scan = scenery_statistics(lebesgue_ball(2), [0.0, 0.0], 4.0, f=ball_observable(0.5))
    assert all(lo <= 0.25 <= hi for lo, hi in zip(scan.f_low, scan.f_high))
    assert np.allclose(scan.f_mid, 0.25, atol=1e-3)
    assert scan.cesaro_mean == pytest.approx(0.25, abs=1e-3)
    assert scan.hit_fraction == 0.0


def test_statistics_hit_fraction_left_riemann():
    scan = scenery_statistics(lebesgue_ball(1), [0.0], 2.0, dt=0.5, pred=always)
    assert scan.n_steps == 4 and scan.hit_fraction == 1.0
    assert scan.times.tolist() == [0.0, 0.5, 1.0, 1.5]


def test_above_is_one_sided():
    f = ball_observable(0.5, depth=2)
    nu = scenery_at(lebesgue_ball(2), [0.3, 0.1], 0.5)
    enc = f(nu)
    assert above(f, enc.low - 1e-9)(nu)
    assert not above(f, enc.low)(nu)


def test_cantor_orbit_is_periodic():
    T = 4 * math.log(3)
    scan = scenery_statistics(CANTOR, [0.0], T, dt=math.log(3) / 8)
    period = 8
    assert np.allclose(scan.f_mid[:period], scan.f_mid[period:2 * period], atol=1e-3)


def test_precision_tolerance():
    with pytest.raises(PrecisionLoss):
        scenery_statistics(lebesgue_ball(2), [0.5, 0.5], 1.0,
                           f=ball_observable(0.9, depth=1), precision_tol=1e-6)


def test_csv_shape():
    s1 = scenery_statistics(lebesgue_ball(1), [0.0], 0.5)
    out = scans_to_csv([s1, s1])
    lines = out.strip().splitlines()
    assert lines[0] == "x_id,t,f_low,f_mid,f_high,pred_hit"
    assert len(lines) == 1 + 2 * s1.n_steps


def test_splice_view_is_uniform_or_line():
    m = extremal_conical(2, 1, 1.5)
    x = support_sample(m, 1, 0)[0]
    scan = scenery_statistics(m, x, 10 * DEFAULT_DT)
    assert np.all(scan.f_low <= scan.f_high)
