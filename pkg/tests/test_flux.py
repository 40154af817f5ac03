import math

import numpy as np
import pytest

from fluxsat.core import Grid, ModelSpec, NegativeDensity, Profile, VacuumDensity
from fluxsat.flux import cost_k, cost_k_star, flux_a, flux_b, flux_h, lagrangian, stable_dt


def test_rhe_flux_by_hand(rhe):
    assert flux_a(rhe, 3.0, 4.0) == pytest.approx(2.4)


def test_flux_vanishes_without_gradient(rhe):
    assert flux_a(rhe, 1.0, 0.0) == 0.0
    assert flux_a(ModelSpec.flpme(3), 1.0, 0.0) == 0.0


def test_flpme_flux_by_hand():
    assert flux_a(ModelSpec.flpme(1), 2.0, math.sqrt(3.0)) == pytest.approx(math.sqrt(3.0), rel=1e-14)


def test_rhe_flux_zero_at_vacuum(rhe):
    assert flux_a(rhe, 0.0, 5.0) == 0.0
    assert flux_a(rhe, 1e-13, 5.0) == 0.0


def test_negative_density_rejected(rhe):
    with pytest.raises(NegativeDensity):
        flux_a(rhe, -1.0, 1.0)


def test_velocity(rhe):
    assert flux_b(rhe, 3.0, 4.0) == pytest.approx(0.8)
    assert flux_b(rhe, 1.0, 1e300) == pytest.approx(1.0)
    assert flux_b(ModelSpec.flpme(2), 5.0, 0.0) == 0.0
    with pytest.raises(VacuumDensity):
        flux_b(rhe, 0.0, 1.0)


def test_lagrangian_derivative_is_flux():
    rng = np.random.default_rng(0)
    for spec in (ModelSpec.rhe(0.7, 1.3), ModelSpec.flpme(2, 1.1, 0.8)):
        z = rng.uniform(0.1, 10, 100)
        xi = rng.uniform(-10, 10, 100)
        h = 1e-5 * np.maximum(1.0, np.abs(xi))
        fd = (lagrangian(spec, z, xi + h) - lagrangian(spec, z, xi - h)) / (2 * h)
        a = flux_a(spec, z, xi)
        assert np.all(np.abs(fd - a) <= 1e-6 * np.maximum(np.abs(a), 1e-3))


def test_dissipation_non_negative(rhe):
    xi = np.linspace(-5, 5, 41)
    assert np.all(flux_h(rhe, 2.0, xi) >= 0)


def test_costs():
    assert cost_k(0.0) == 0.0
    assert cost_k(0.5) == pytest.approx(1 - math.sqrt(0.75))
    assert cost_k(1.5) == math.inf
    assert cost_k_star(0.0) == 0.0
    # Fenchel-Young: k(z) + k*(xi) >= z*xi with equality at xi = k'(z)
    z = 0.6
    xi = z / math.sqrt(1 - z * z)
    assert cost_k(z) + cost_k_star(xi) == pytest.approx(z * xi, rel=1e-12)


def _flat(dx, n, value):
    return Profile(Grid(0.0, dx, n), np.full(n, value))


def test_stable_dt_examples(rhe):
    assert stable_dt(rhe, _flat(0.01, 10, 1.0), 0.4) == pytest.approx(2e-5)
    assert stable_dt(ModelSpec.flpme(1), _flat(0.1, 10, 0.0), 0.4) == pytest.approx(0.04)
    assert stable_dt(ModelSpec.rhe(0.001, 2.0), _flat(0.02, 10, 1.0), 0.5) == pytest.approx(0.005)


def test_stable_dt_rejects_bad_cfl(rhe):
    with pytest.raises(ValueError):
        stable_dt(rhe, _flat(0.1, 5, 1.0), 1.0)
