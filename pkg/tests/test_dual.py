import math

import numpy as np
import pytest

from fluxsat.core import Grid, ModelSpec, Profile
from fluxsat.dual import (BlowUp, DisconnectedSupport, DualProfile, DualScale, InteriorVacuum, boundary_flux,
                          dual_evolve, from_dual, singular_set, to_dual)
from fluxsat.solver import CflViolation

RHE = ModelSpec.rhe()
G = Grid.on_interval(-1.0, 2.0, 0.001)


def _profile(fn, grid=G):
    return Profile.from_function(grid, fn)


def _box(a, b, h=1.0):
    return lambda x: np.where((x >= a) & (x <= b), h, 0.0)


def test_unit_block():
    d = to_dual(RHE, _profile(_box(0, 1)), 100)
    assert d.M == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(d.v, 1.0, rtol=1e-9)
    assert d.a_left == pytest.approx(0.0, abs=1e-12)


def test_taller_block():
    d = to_dual(RHE, _profile(_box(0, 0.5, 2.0)), 100)
    assert d.M == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(d.v, 0.5, rtol=1e-9)


def test_interior_hole_and_split():
    g = Grid(0.0, 0.1, 20)
    u = np.ones(20)
    u[[0, 19]] = 0
    u[10] = 0
    with pytest.raises(InteriorVacuum):
        to_dual(RHE, Profile(g, u))
    u[9:12] = 0
    with pytest.raises(DisconnectedSupport):
        to_dual(RHE, Profile(g, u))


def test_from_dual_blocks():
    p = from_dual(DualProfile(RHE, 1.0, np.ones(50), 0.0), Grid(-0.5, 0.01, 200))
    expect = np.where((p.x > 0) & (p.x < 1), 1.0, 0.0)
    np.testing.assert_allclose(p.u, expect, atol=1e-9)
    p = from_dual(DualProfile(RHE, 1.0, np.full(50, 0.5), 0.0), Grid(-0.5, 0.01, 200))
    np.testing.assert_allclose(p.u, np.where((p.x > 0) & (p.x < 0.5), 2.0, 0.0), atol=1e-9)


def test_round_trip_smooth():
    p = _profile(lambda x: np.where((x >= 0) & (x <= 1), 1.0 + 0.5 * np.sin(np.pi * x), 0.0))
    back = from_dual(to_dual(RHE, p, 500), G)
    assert np.sum(np.abs(back.u - p.u)) * G.dx <= 5e-3 * p.mass


def test_dual_invariants():
    p = _profile(lambda x: np.where((x >= 0) & (x <= 1), 0.5 + x, 0.0))
    d = to_dual(RHE, p, 400)
    pos = p.u[p.u > 0]
    assert d.v.min() >= 1 / pos.max() - 1e-9 and d.v.max() <= 1 / pos.min() + 1e-9
    assert d.length == pytest.approx(1.0, abs=1e-12)
    assert np.all(np.diff(d.phi()) > 0)


def test_scale_factors():
    s = DualScale.for_spec(ModelSpec.flpme(2, nu=0.5, c=2.0))
    assert s.time_factor == pytest.approx(1.0 / 4.0)
    assert s.eta_factor == pytest.approx(0.5)


def test_flat_start_grows_support_at_regularised_rate():
    eps = 1e-4
    d = DualProfile(RHE, 1.0, np.ones(200), 0.0)
    fin, tr = dual_evolve(d, 0.01, eps, record_every=0.002)
    rate = (fin.length - d.length) / 0.01
    assert rate == pytest.approx(2 * boundary_flux(eps), rel=1e-9)
    assert np.all(np.abs(fin.v[80:120] - 1) < 0.01)
    assert fin.v[0] > 1.05 and fin.v[-1] > 1.05
    assert len(tr) == 6 and fin.a_left == pytest.approx(-boundary_flux(eps) * 0.01)


def test_positive_rhe_data_do_not_blow_up():
    p = _profile(lambda x: np.where((x >= 0) & (x <= 1), 1.0 + 0.5 * np.cos(np.pi * x), 0.0))
    fin, _ = dual_evolve(to_dual(RHE, p, 200), 1.0)
    assert fin.t == 1.0


def test_flpme_block_reaches_contact():
    spec = ModelSpec.flpme(4)
    with pytest.raises(BlowUp) as exc:
        dual_evolve(to_dual(spec, _profile(_box(0, 1)), 200), 2.0, record_every=0.05)
    assert 0.1 < exc.value.t_star < 1.0
    assert exc.value.side in ("left", "right")
    assert exc.value.trajectory[0].t == 0.0


def test_argument_checks():
    d = DualProfile(RHE, 1.0, np.ones(10), 0.0)
    with pytest.raises(ValueError):
        dual_evolve(d, 1.0, eps=0.1)
    with pytest.raises(ValueError):
        dual_evolve(d, 0.0)
    with pytest.raises(CflViolation):
        dual_evolve(d, 1.0, cfl=1.5)
    with pytest.raises(ValueError):
        DualProfile(RHE, 1.0, np.array([1.0, 0.0, 1.0]), 0.0)


def test_singular_set_smooth_profile_is_empty():
    eta = (np.arange(500) + 0.5) / 500
    assert singular_set(DualProfile(RHE, 1.0, 1 + 0.3 * np.sin(3 * eta), 0.0), 100.0) == ()


def test_singular_set_locates_interior_jump():
    p = _profile(lambda x: np.where((x >= 0) & (x < 0.4), 1.0, np.where((x >= 0.4) & (x <= 1), 0.25, 0.0)))
    d = to_dual(RHE, p, 500)
    s = singular_set(d)
    assert len(s) == 1
    assert s[0] == pytest.approx(0.4, abs=d.deta)


def test_singular_set_shrinks():
    p = _profile(lambda x: np.where((x >= 0) & (x < 0.5), 1.0, np.where((x >= 0.5) & (x <= 1), 0.1, 0.0)))
    d = to_dual(RHE, p, 500)
    _, tr = dual_evolve(d, 0.6, 1e-6, record_every=0.1)
    sizes = [len(s.singular) for s in tr]
    assert sizes[0] == 1
    assert all(b <= a for a, b in zip(sizes, sizes[1:]))
    for s in tr:
        for eta in s.singular:
            assert any(abs(eta - e0) <= d.deta for e0 in tr[0].singular)
