"""Randomized property checks; the whole module runs in a few seconds."""
import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from fluxsat.analytic import check_vinequality, quartic_witness, traveling_wave_residual
from fluxsat.core import Grid, ModelSpec, Profile
from fluxsat.flux import flux_a
from fluxsat.jko import Entropy, JkoProblem
from fluxsat.solver import SolverOptions, evolve

PROP = settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])

specs = st.one_of(
    st.builds(ModelSpec.rhe, st.floats(0.1, 5.0), st.floats(0.1, 5.0)),
    st.builds(ModelSpec.flpme, st.floats(1.0, 6.0), st.floats(0.1, 5.0), st.floats(0.1, 5.0)),
)


@pytest.mark.parametrize("spec", [ModelSpec.rhe(), ModelSpec.rhe(2.0, 0.5), ModelSpec.flpme(1.0),
                                  ModelSpec.flpme(4.0, 0.3, 3.0)])
def test_flux_saturation_on_ten_thousand_inputs(spec):
    rng = np.random.default_rng(11)
    z = np.exp(rng.uniform(-12, 4, 10_000))
    xi = rng.standard_cauchy(10_000) * np.exp(rng.uniform(-5, 8, 10_000))
    a = flux_a(spec, z, xi)
    assert np.all(np.isfinite(a))
    assert np.all(np.abs(a) <= spec.c * z * (1 + 1e-12))


@PROP
@given(specs, st.floats(0.0, 1e3), st.floats(-1e4, 1e4), st.floats(0.0, 1e4))
def test_flux_odd_and_monotone_in_gradient(spec, z, xi, step):
    assert flux_a(spec, z, -xi) == -flux_a(spec, z, xi)
    assert flux_a(spec, z, xi + step) >= flux_a(spec, z, xi)
    assert abs(flux_a(spec, z, xi)) <= spec.c * z * (1 + 1e-12)


def _random_datum(rng, grid, lo=0.3, hi=0.7):
    """Nonnegative data supported in the middle of the grid, with jumps and flat parts."""
    u = np.zeros(grid.n)
    i0, i1 = int(lo * grid.n), int(hi * grid.n)
    knots = rng.uniform(0, 1, 8) * rng.integers(0, 2, 8)
    u[i0:i1] = np.repeat(knots, -(-(i1 - i0) // 8))[: i1 - i0]
    u[i0:i1] += rng.uniform(0, 0.3, i1 - i0)
    return u


@pytest.mark.parametrize("spec", [ModelSpec.rhe(), ModelSpec.flpme(2.0)])
def test_mass_conservation_on_random_data(spec):
    rng = np.random.default_rng(5)
    g = Grid(0.0, 0.01, 200)
    for _ in range(5):
        p0 = Profile(g, _random_datum(rng, g))
        tr = evolve(spec, p0, 0.1, SolverOptions(record_every=0.05))
        assert np.max(np.abs(tr.masses - p0.mass)) <= 1e-12 * p0.mass


def test_comparison_ordering_for_random_pairs():
    rng = np.random.default_rng(7)
    g = Grid(0.0, 0.01, 200)
    worst = 0.0
    for k in range(20):
        spec = ModelSpec.rhe() if k % 2 else ModelSpec.flpme(1.0 + k % 3)
        lower = _random_datum(rng, g, 0.35, 0.65)
        upper = lower + _random_datum(rng, g, 0.3, 0.7)
        tu = evolve(spec, Profile(g, lower), 0.1, SolverOptions(record_every=0.025))
        tv = evolve(spec, Profile(g, upper), 0.1, SolverOptions(record_every=0.025))
        for pu, pv in zip(tu, tv):
            worst = max(worst, float(np.max(pu.u - pv.u)))
    assert worst <= 10 * g.dx


def _problem(rng, entropy, n=40):
    P = np.cumsum(rng.uniform(0.01, 0.05, n))
    m = 1.0 if entropy is Entropy.BOLTZMANN else float(rng.uniform(0.5, 4.0))
    return JkoProblem(P, float(rng.uniform(0.5, 2.0)), 0.01, float(rng.uniform(0.5, 2.0)), entropy,
                      float(rng.uniform(0.2, 2.0)), m)


def _feasible_point(rng, prob):
    while True:
        Q = prob.P + rng.uniform(-0.9, 0.9, prob.n) * prob.c * prob.h
        if prob.feasible(Q):
            return Q


@PROP
@given(st.integers(0, 2**32 - 1), st.sampled_from(list(Entropy)))
def test_jko_objective_midpoint_convexity(seed, entropy):
    rng = np.random.default_rng(seed)
    prob = _problem(rng, entropy)
    A, B = _feasible_point(rng, prob), _feasible_point(rng, prob)
    fa, fb, fm = prob.value(A), prob.value(B), prob.value(0.5 * (A + B))
    assert fm <= 0.5 * (fa + fb) + 1e-12 * max(1.0, abs(fa), abs(fb))


@PROP
@given(st.integers(0, 2**32 - 1), st.sampled_from(list(Entropy)))
def test_jko_gradient_matches_finite_differences(seed, entropy):
    rng = np.random.default_rng(seed)
    prob = _problem(rng, entropy)
    # nodes kept apart so the finite-difference stencil resolves the entropy term
    gap = float(np.min(np.diff(prob.P)))
    Q = prob.P + rng.uniform(-0.25, 0.25, prob.n) * min(gap, 0.9 * prob.c * prob.h)
    g = prob.gradient(Q)
    h = 1e-6
    fd = np.empty(prob.n)
    for j in range(prob.n):
        e = np.zeros(prob.n)
        e[j] = h

        def d(k):  # exact objective change, free of cancellation
            return prob.change(Q, Q + k * e)

        # fourth-order central difference
        fd[j] = (8 * (d(1) - d(-1)) - (d(2) - d(-2))) / (12 * h)
    assert np.all(np.abs(fd - g) <= 1e-6 * np.maximum(1.0, np.abs(g)))


@PROP
@given(st.floats(1.0, 6.0), st.floats(0.1, 3.0), st.floats(0.2, 3.0), st.floats(-0.95, 0.95),
       st.floats(-2.0, 2.0))
def test_traveling_wave_residual(m, nu, c, frac, xi0):
    spec = ModelSpec.flpme(m, nu, c)
    sigma = frac * c
    x = np.linspace(xi0 - 3.0, xi0 + 3.0, 1000)
    res = traveling_wave_residual(spec, sigma, xi0, x, t=0.3)
    assert np.max(np.abs(res)) <= 1e-10


@PROP
@given(st.floats(0.01, 100.0), st.floats(-3.0, 3.0), st.floats(0.1, 4.0))
def test_vinequality_holds_for_quartic_witness(k_tilde, a, width):
    b = a + width
    assert check_vinequality(quartic_witness(k_tilde, a, b), 2 * k_tilde * width**2, (a, b))
