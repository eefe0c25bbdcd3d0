import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from scenery_lab.constructions import cantor_salli, lebesgue_ball, plane, point_mass, product_measure
from scenery_lab.errors import InvalidParams, ZeroMass
from scenery_lab.measure import support_sample
from scenery_lab.porosity import (AnnularSpec, annular_pore_search, pore_search, porosity_rows,
                                  porosity_scale_fraction, porosity_scan)

CANTOR = cantor_salli(0.25)


@given(st.integers(0, 10_000), st.floats(2.0, 20.0))
def test_pore_is_sound_on_cantor(seed, t):
    x = support_sample(CANTOR, 1, seed)[0]
    r = math.exp(-t)
    w = pore_search(CANTOR, x, r, eps=0.0)
    rad = w.hole_radius
    assert np.linalg.norm(w.center - x) + rad <= r * (1 + 1e-12)
    if rad > 0:
        # the open hole is empty for the exact measure
        lo, hi = w.center[0] - rad, w.center[0] + rad
        # shrink by a few ulps of the coordinates (the oracle amplifies rounding)
        inner = oracles.cantor_interval_mass(lo + 1e-15, hi - 1e-15, 1 / 3)
        assert inner <= 1e-12


def test_cantor_pores_are_large():
    pts = support_sample(CANTOR, 10, 0)
    for i, x in enumerate(pts):
        assert pore_search(CANTOR, x, 3.0 ** -(i + 2), eps=1e-6).alpha_hat >= 0.23


def test_lebesgue_has_no_pores():
    for d in (1, 2):
        w = pore_search(lebesgue_ball(d), np.full(d, 0.1), 0.05, eps=1e-6)
        assert w.alpha_hat == 0.0


def test_line_is_half_porous_classically():
    w = pore_search(plane(2, [0]), [0.1, 0.0], 0.1, eps=0.0)
    assert w.alpha_hat == pytest.approx(0.5, abs=0.01)


def test_alpha_hat_capped():
    w = pore_search(point_mass(1), [0.0], 0.5)
    assert w.alpha_hat == 0.5


def test_eps_monotone():
    x = support_sample(CANTOR, 1, 7)[0]
    a0 = pore_search(CANTOR, x, 0.01, eps=0.0).alpha_hat
    a1 = pore_search(CANTOR, x, 0.01, eps=0.3).alpha_hat
    assert a1 >= a0


def test_zero_mass_ball():
    with pytest.raises(ZeroMass):
        pore_search(CANTOR, [0.5], 0.01)


def test_bad_params():
    with pytest.raises(InvalidParams):
        pore_search(CANTOR, [0.0], 0.1, grid_res=4)
    with pytest.raises(InvalidParams):
        pore_search(CANTOR, [0.0], 0.1, eps=-1)
    with pytest.raises(InvalidParams):
        AnnularSpec(0.0)


def test_annular_line_and_lebesgue():
    spec = AnnularSpec(1.0)
    w = annular_pore_search(plane(2, [0]), [0.1, 0.0], 0.1, spec, eps=0.0)
    dist = np.linalg.norm(w.center - w.x)
    assert w.alpha_hat >= 0.95
    assert spec.c * 0.1 <= dist <= 0.1 + 1e-15
    assert annular_pore_search(lebesgue_ball(2), [0.0, 0.0], 0.1, spec).alpha_hat == 0.0


def test_annular_product_cantor_positive():
    mu = product_measure(CANTOR, CANTOR)
    spec = AnnularSpec(0.5)
    pts = support_sample(mu, 5, 1)
    for i, x in enumerate(pts):
        w = annular_pore_search(mu, x, 3.0 ** -(i + 2), spec, eps=0.0)
        assert w.alpha_hat > 0
        dist = np.linalg.norm(w.center - x)
        assert spec.c * w.r - 1e-15 <= dist <= w.r + 1e-15


def test_scan_and_rows():
    scan = porosity_scan(CANTOR, [0.0], 2.0, 0.2, 1e-6)
    rows = list(porosity_rows(scan))
    assert len(rows) == scan.n_steps
    assert scan.hit_fraction == 1.0
    assert porosity_scale_fraction(lebesgue_ball(1), [0.0], 1.0, 0.1, 1e-6) == 0.0
