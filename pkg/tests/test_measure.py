import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from scenery_lab.constructions import (cantor_salli, grid_measure, lebesgue_ball, plane, point_mass,
                                       product_measure, quarter_cantor, uniform_rule)
from scenery_lab.errors import AmbiguousMass, DepthExceeded, InvalidRadius, ZeroMass
from scenery_lab.measure import (AffineView, MassInterval, Mixture, MoranMeasure, ball_mass, restrict,
                                 support_sample, translate)
from scenery_lab.regions import Ball, Box

CANTOR = cantor_salli(0.25)


def test_mass_interval_rejects_empty():
    with pytest.raises(ValueError):
        MassInterval(0.5, 0.4)


def test_mass_interval_ratio_caps_at_one():
    r = MassInterval.ratio(MassInterval(0.2, 0.5), MassInterval(0.4, 0.5))
    assert r.low == pytest.approx(0.4) and r.high == 1.0


def test_total_mass_is_one():
    for mu in (CANTOR, grid_measure(uniform_rule(2), 8), lebesgue_ball(2), point_mass(3)):
        m = mu.total_mass(0)
        assert m.low <= 1.0 <= m.high


@given(st.floats(0.0, 1.0), st.floats(1e-6, 0.6))
def test_cantor_ball_enclosure_contains_exact(x, r):
    exact = float(oracles.cantor_interval_mass(x - r, x + r, 1 / 3))
    enc = CANTOR.ball_mass([x], r, min(CANTOR.max_depth, CANTOR.level_for_scale(r) + 8))
    assert enc.low - 1e-12 <= exact <= enc.high + 1e-12


@given(st.floats(-1.2, 1.2), st.floats(1e-4, 1.5))
def test_segment_ball_mass_contains_exact(x, r):
    mu = lebesgue_ball(1)
    enc = mu.ball_mass([x], r, mu.level_for_scale(r) + 6)
    assert enc.contains(float(oracles.segment_ball_fraction(x, r)), 1e-12)


@given(st.floats(0.0, 1.3), st.floats(0.05, 1.0))
def test_disk_ball_mass_contains_exact(dist, r):
    mu = lebesgue_ball(2)
    enc = mu.ball_mass([dist, 0.0], r, mu.level_for_scale(r) + 5)
    assert enc.contains(oracles.disk_lens_fraction(dist, r), 1e-12)


def test_lebesgue_fast_path_is_exact_power():
    for d in (1, 2, 3):
        enc = lebesgue_ball(d).ball_mass(np.zeros(d), 0.25)
        assert enc.contains(0.25 ** d) and enc.width < 1e-15


def test_plane_fast_path_uses_section_radius():
    mu = plane(3, [0, 1])
    enc = mu.ball_mass([0.1, 0.0, 0.3], 0.5)
    assert enc.contains(0.5 ** 2 - 0.3 ** 2, 1e-15)
    assert mu.ball_mass([0.0, 0.0, 0.6], 0.5).high == 0.0


def test_point_mass_ball():
    mu = point_mass(2, [0.1, 0.2])
    assert tuple(mu.ball_mass([0.1, 0.25], 0.1)) == (1.0, 1.0)
    assert mu.ball_mass([0.5, 0.5], 0.1).high == 0.0


def test_invalid_radius_and_depth():
    with pytest.raises(InvalidRadius):
        CANTOR.ball_mass([0.0], 0.0)
    with pytest.raises(DepthExceeded):
        CANTOR.ball_mass([0.0], CANTOR.resolution_floor / 10)
    with pytest.raises(DepthExceeded):
        CANTOR.ball_mass([0.0], 0.1, CANTOR.max_depth + 1)


@given(st.floats(0.0, 1.0), st.floats(1e-3, 0.5), st.integers(1, 12))
def test_enclosures_nest_under_refinement(x, r, depth):
    coarse = CANTOR.ball_mass([x], r, depth)
    fine = CANTOR.ball_mass([x], r, depth + 3)
    assert fine.is_within(coarse)


def test_moran_children_conserve_mass():
    mu = product_measure(quarter_cantor(), quarter_cantor())
    for cells in mu.iter_levels(4):
        if cells.level == 4:
            break
        child = mu.refine(cells)
        m = len(child) // len(cells)
        sums = child.mlo.reshape(len(cells), m).sum(axis=1)
        assert np.allclose(sums, cells.mlo, rtol=0, atol=1e-15)


def test_sampling_is_deterministic_and_on_support():
    a = support_sample(CANTOR, 50, 3)
    b = support_sample(CANTOR, 50, 3)
    assert np.array_equal(a, b)
    assert all(CANTOR.contains_in_support(p) for p in a[:10])


def test_sampling_matches_mass():
    pts = support_sample(CANTOR, 20000, 0)
    frac = np.mean(pts[:, 0] <= 1 / 3)
    assert abs(frac - 0.5) < 0.02


def test_mixture_masses_add():
    u = grid_measure(uniform_rule(1))
    shifted = MoranMeasure(u.rules, u.labels, root_lo=[2.0], kind="grid")
    mix = Mixture([CANTOR, shifted], [0.5, 0.5])
    enc = mix.region_mass(Box([2.0], [2.5]), 10)
    assert enc.contains(0.25, 1e-12)
    assert mix.contains_in_support([2.2]) and not mix.contains_in_support([1.5])


def test_translate_and_restrict():
    mu = lebesgue_ball(1)
    t = translate(mu, [0.5])
    enc = t.region_mass(Box([-0.5], [0.0]), 12)
    assert enc.contains(0.25, 1e-12)
    half = restrict(mu, Box([0.0], [1.0]), 12)
    assert half.region_mass(Box([0.0], [0.5]), 12).contains(0.5, 1e-9)


def test_restrict_to_empty_region_raises():
    with pytest.raises(ZeroMass):
        restrict(CANTOR, Box([0.4], [0.6]), 10)


def test_restrict_ambiguous_raises():
    with pytest.raises(AmbiguousMass):
        restrict(lebesgue_ball(1), Ball([0.0], 1e-3), 2)


def test_view_normalization():
    v = AffineView.derive(CANTOR, dt=math.log(3), magnify=True)
    assert v.total_mass(5).contains(1.0, 1e-12)


def test_module_ball_mass_alias():
    assert ball_mass(CANTOR, [0.0], 0.5, 10) == CANTOR.ball_mass([0.0], 0.5, 10)
