"""Closed-form solutions, barriers and explicit bounds.

Every barrier is returned as a vectorised callable ``(t, x) -> u``. The
radial families accept a centre ``x0`` (default 0) so they can be placed on
data that is not symmetric about the origin.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional

import numpy as np
from scipy.optimize import minimize_scalar

from .core import FluxSatError, ModelSpec


class SigmaOutOfRange(FluxSatError, ValueError):
    pass


class TimeBeyondBlowup(FluxSatError, ValueError):
    pass


class BarrierFamily(str, enum.Enum):
    TRAVELING_WAVE = "TravelingWave"
    WAITING_SUPER = "WaitingSuper"
    WAITING_SUB = "WaitingSub"
    RHE_EXPANDING_SUB = "RheExpandingSub"
    RHE_TWO_BUMP_SUB = "RheTwoBumpSub"
    VERTICAL_SUPER = "VerticalSuper"


class Side(str, enum.Enum):
    SUB = "sub"
    SUPER = "super"


_SIDES = {
    BarrierFamily.TRAVELING_WAVE: Side.SUB,  # an exact solution; usable on either side
    BarrierFamily.WAITING_SUPER: Side.SUPER,
    BarrierFamily.WAITING_SUB: Side.SUB,
    BarrierFamily.RHE_EXPANDING_SUB: Side.SUB,
    BarrierFamily.RHE_TWO_BUMP_SUB: Side.SUB,
    BarrierFamily.VERTICAL_SUPER: Side.SUPER,
}

_REQUIRED = {
    BarrierFamily.TRAVELING_WAVE: ("sigma", "xi0"),
    BarrierFamily.WAITING_SUPER: ("k_tilde",),
    BarrierFamily.WAITING_SUB: ("k_tilde",),
    BarrierFamily.RHE_EXPANDING_SUB: ("alpha0", "R0"),
    BarrierFamily.RHE_TWO_BUMP_SUB: ("alpha0", "l", "kappa"),
    BarrierFamily.VERTICAL_SUPER: ("A0", "alpha", "R0"),
}


@dataclass(frozen=True)
class BarrierSpec:
    """One sub- or super-solution family with its parameters.

    Waiting barriers take ``k_tilde`` and either ``delta`` (support
    ``[-delta, delta]``) or ``a``/``b``; ``k`` defaults to
    ``2 k_tilde (b-a)^2``. Expanding and two-bump barriers take ``beta1``,
    ``beta2`` (default 0) and ``gamma0`` (expanding only, default 0).
    """

    family: BarrierFamily
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "family", BarrierFamily(self.family))
        object.__setattr__(self, "params", dict(self.params))
        missing = [k for k in _REQUIRED[self.family] if k not in self.params]
        if missing:
            raise ValueError(f"{self.family.value} needs parameters {missing}")
        p = self.params
        fam = self.family
        if fam in (BarrierFamily.WAITING_SUPER, BarrierFamily.WAITING_SUB):
            a, b = waiting_interval(p)
            if not b > a:
                raise ValueError("waiting barrier needs b > a")
            if not p["k_tilde"] > 0:
                raise ValueError("k_tilde must be positive")
            if "k" in p and not p["k"] > 0:
                raise ValueError("k must be positive")
        if fam in (BarrierFamily.RHE_EXPANDING_SUB, BarrierFamily.VERTICAL_SUPER) and not p["R0"] > 0:
            raise ValueError("R0 must be positive")
        if fam is BarrierFamily.RHE_TWO_BUMP_SUB and not 0 < p["kappa"] < p["l"]:
            raise ValueError("two-bump barrier needs 0 < kappa < l")
        if fam is BarrierFamily.VERTICAL_SUPER and not p["alpha"] > 0:
            raise ValueError("alpha must be positive")

    @property
    def side(self) -> Side:
        return _SIDES[self.family]

    def with_params(self, **kw) -> "BarrierSpec":
        return BarrierSpec(self.family, {**self.params, **kw})


def waiting_interval(params: Mapping[str, float]) -> tuple[float, float]:
    if "delta" in params:
        return -float(params["delta"]), float(params["delta"])
    return float(params.get("a", -1.0)), float(params.get("b", 1.0))


def quartic_witness(k_tilde: float, a: float, b: float) -> Callable[[np.ndarray], np.ndarray]:
    """``k_tilde (x-a)^2 (b-x)^2`` on ``[a, b]``, zero outside."""

    def v(x):
        x = np.asarray(x, dtype=float)
        inside = (x > a) & (x < b)
        return np.where(inside, k_tilde * (x - a) ** 2 * (b - x) ** 2, 0.0)

    return v


def _check_sigma(spec: ModelSpec, sigma: float):
    if spec.is_rhe:
        raise ValueError("traveling waves exist only for the flux-limited porous-medium model")
    if not abs(sigma) < spec.c:
        raise SigmaOutOfRange(f"|sigma| must be below c={spec.c}, got {sigma}")


def traveling_wave(spec: ModelSpec, sigma: float, xi0: float) -> Callable:
    """Exact wave ``(sigma (xi0 - xi) / (nu sqrt(1 - sigma^2/c^2)))^(1/m)``, ``xi = x - sigma t``."""
    _check_sigma(spec, sigma)
    denom = spec.nu * math.sqrt(1.0 - (sigma / spec.c) ** 2)
    inv_m = 1.0 / spec.m

    def u(t, x):
        s = sigma * (xi0 - (np.asarray(x, dtype=float) - sigma * np.asarray(t, dtype=float)))
        return np.where(s > 0, np.maximum(s, 0.0) / denom, 0.0) ** inv_m

    return u


def traveling_wave_residual(spec: ModelSpec, sigma: float, xi0: float, x, t: float = 0.0):
    """``nu u (u^m)' / sqrt(1 + (nu/c)^2 (u^m)'^2) + sigma u`` with exact derivatives.

    Vanishes wherever the wave is positive.
    """
    u = traveling_wave(spec, sigma, xi0)(t, x)
    slope = -sigma / (spec.nu * math.sqrt(1.0 - (sigma / spec.c) ** 2))
    flux = spec.nu * u * slope / math.sqrt(1.0 + (spec.nu / spec.c * slope) ** 2)
    return flux + sigma * u


def _extinction_objective(spec: ModelSpec, alpha: float, b: float, d: float):
    c, nu, m = spec.c, spec.nu, spec.m
    lead = alpha**m * nu

    def g(sigma):
        return (lead * math.sqrt(max(1.0 - (sigma / c) ** 2, 0.0)) / sigma + b - d) / (c - sigma)

    return g


def jump_extinction_bound(spec: ModelSpec, alpha: float, b: float, d: float) -> float:
    """Upper bound on the lifetime of a jump front starting at ``d``.

    Minimises ``(alpha^m nu sqrt(1-(sigma/c)^2)/sigma + b - d) / (c - sigma)``
    over ``0 < sigma < c`` for data bounded by ``alpha`` and supported left of
    ``b``: a coarse scan brackets the minimum, bounded Brent refines it.
    """
    if spec.is_rhe:
        raise ValueError("the extinction bound applies to the flux-limited porous-medium model")
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    if d > b:
        raise ValueError("need d <= b")
    return _minimise_extinction(_extinction_objective(spec, alpha, b, d), spec.c)[1]


def extinction_minimiser(spec: ModelSpec, alpha: float, b: float, d: float) -> float:
    """The ``sigma`` attaining :func:`jump_extinction_bound`."""
    return _minimise_extinction(_extinction_objective(spec, alpha, b, d), spec.c)[0]


def _minimise_extinction(g, c):
    grid = c * np.linspace(1e-6, 1 - 1e-9, 2001)
    vals = np.array([g(s) for s in grid])
    i = int(np.argmin(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    res = minimize_scalar(g, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12 * c})
    if res.fun < vals[i]:
        return float(res.x), float(res.fun)
    return float(grid[i]), float(vals[i])


def waiting_time_bound(m: float, k_tilde: float, a: float, b: float, nu: float = 1.0) -> float:
    """Time ``1 / (2 (2+m) nu k_tilde (b-a)^2)`` during which the support cannot grow."""
    if not b > a:
        raise ValueError("need b > a")
    if not k_tilde > 0:
        raise ValueError("k_tilde must be positive")
    return 1.0 / (2.0 * (2.0 + m) * nu * k_tilde * (b - a) ** 2)


def fit_k_tilde(u0: Callable, a: float, b: float, n_samples: int = 20001) -> float:
    """Smallest ``k_tilde`` with ``u0(x) <= k_tilde (x-a)^2 (b-x)^2`` at sampled points of ``(a, b)``.

    Returns ``inf`` if ``u0`` does not vanish quadratically at the ends.
    """
    if not b > a:
        raise ValueError("need b > a")
    x = np.linspace(a, b, n_samples + 2)[1:-1]
    w = (x - a) ** 2 * (b - x) ** 2
    return float(np.max(np.asarray(u0(x), dtype=float) / w))


def supnorm_bound(M: float, eps: float, c: float, t: float) -> float:
    """``M / (2 (eps + c t))``: sup of an even log-concave solution outside the inner cone."""
    if not (M > 0 and eps > 0 and c > 0 and t >= 0):
        raise ValueError("M, eps, c must be positive and t non-negative")
    return M / (2.0 * (eps + c * t))


def check_vinequality(v: Callable, k: float, domain: tuple[float, float], n_samples: int = 1000) -> bool:
    """Whether ``v'(x)^2 / v(x) <= 2k`` (up to ``1e-8``) at ``n_samples`` interior points.

    ``v'`` comes from a fourth-order central difference; points where ``v``
    vanishes only need ``v' = 0`` there.
    """
    a, b = domain
    x = np.linspace(a, b, n_samples + 2)[1:-1]
    h = 1e-4 * (b - a)
    d1 = (v(x - 2 * h) - 8 * v(x - h) + 8 * v(x + h) - v(x + 2 * h)) / (12 * h)
    vx = np.asarray(v(x), dtype=float)
    ok_zero = (vx > 0) | (np.abs(d1) <= 1e-8)
    ratio = np.where(vx > 0, d1**2 / np.where(vx > 0, vx, 1.0), 0.0)
    return bool(np.all(ok_zero) and np.all(ratio <= 2 * k + 1e-8))


def blowup_time(bs: BarrierSpec, spec: ModelSpec) -> float:
    """End of the validity interval of a waiting super-solution."""
    a, b = waiting_interval(bs.params)
    k = bs.params.get("k", 2.0 * bs.params["k_tilde"] * (b - a) ** 2)
    return 1.0 / ((2.0 + spec.m) * spec.nu * k)


def make_barrier(bs: BarrierSpec, spec: ModelSpec, v: Optional[Callable] = None) -> Callable:
    """Callable ``(t, x)`` evaluating the barrier described by ``bs``.

    ``v`` replaces the quartic witness for the waiting families; it must
    satisfy ``v'' <= k`` and vanish with its derivative at the ends.
    """
    p = bs.params
    fam = bs.family
    c, nu = spec.c, spec.nu

    if fam is BarrierFamily.TRAVELING_WAVE:
        return traveling_wave(spec, p["sigma"], p["xi0"])

    if fam in (BarrierFamily.WAITING_SUPER, BarrierFamily.WAITING_SUB):
        if spec.is_rhe:
            raise ValueError("waiting barriers are built for the flux-limited porous-medium model")
        a, b = waiting_interval(p)
        k = p.get("k", 2.0 * p["k_tilde"] * (b - a) ** 2)
        vf = v if v is not None else quartic_witness(p["k_tilde"], a, b)
        rate = (2.0 + spec.m) * nu * k
        inv_m = 1.0 / spec.m
        if fam is BarrierFamily.WAITING_SUPER:
            t_blow = 1.0 / rate

            def ws(t, x):
                t = np.asarray(t, dtype=float)
                if np.any(t >= t_blow):
                    raise TimeBeyondBlowup(f"waiting super-solution only exists for t < {t_blow:.6g}")
                return (np.asarray(vf(x), dtype=float) / (1.0 - rate * t)) ** inv_m

            return ws

        def wsub(t, x):
            return (np.asarray(vf(x), dtype=float) / (rate * np.asarray(t, dtype=float) + 1.0)) ** inv_m

        return wsub

    x0 = p.get("x0", 0.0)
    beta1, beta2 = p.get("beta1", 0.0), p.get("beta2", 0.0)

    if fam is BarrierFamily.RHE_EXPANDING_SUB:
        alpha0, gamma0, R0 = p["alpha0"], p.get("gamma0", 0.0), p["R0"]

        def expanding(t, x):
            t = np.asarray(t, dtype=float)
            r = R0 + c * t
            y = np.asarray(x, dtype=float) - x0
            inside = np.abs(y) < r
            cap = np.sqrt(np.maximum(r * r - y * y, 0.0))
            amp = np.exp(-beta1 * t - beta2 * t * t)
            return np.where(inside, amp * (alpha0 * c / nu * cap + gamma0), 0.0)

        return expanding

    if fam is BarrierFamily.RHE_TWO_BUMP_SUB:
        alpha0, l, kappa = p["alpha0"], p["l"], p["kappa"]

        def two_bump(t, x):
            t = np.asarray(t, dtype=float)
            r = kappa + c * t
            y = np.asarray(x, dtype=float) - x0
            left = (y > -l - r) & (y <= np.minimum(0.0, -l + r))
            right = (y > np.maximum(0.0, l - r)) & (y < l + r)
            cap_l = np.sqrt(np.maximum(r * r - (y + l) ** 2, 0.0))
            cap_r = np.sqrt(np.maximum(r * r - (y - l) ** 2, 0.0))
            theta = np.where(left, cap_l, 0.0) + np.where(right, cap_r, 0.0)
            return np.exp(-beta1 * t - beta2 * t * t) * alpha0 * c / nu * theta

        return two_bump

    if fam is BarrierFamily.VERTICAL_SUPER:
        A0, alpha, R0 = p["A0"], p["alpha"], p["R0"]
        growth = p.get("A_growth", 0.0)
        if growth < 0:
            raise ValueError("A(t) must be non-decreasing")

        def vertical(t, x):
            t = np.asarray(t, dtype=float)
            r = R0 + c * t
            y = np.asarray(x, dtype=float) - x0
            return A0 * np.exp(growth * t) * np.maximum(r * r - y * y, 0.0) ** alpha

        return vertical

    raise ValueError(f"unknown family {fam}")


def barrier_residual(fn: Callable, spec: ModelSpec, t: float, x: np.ndarray, h: float, dt: Optional[float] = None):
    """``u_t - (a(u, xi))_x`` for ``u = fn`` by centred differences of width ``h``.

    The flux uses face densities averaged from the neighbours and ``xi`` the
    face difference of ``u`` (RHE) or ``u^m`` (FLPME).
    """
    from .flux import flux_a

    x = np.asarray(x, dtype=float)
    dt = h * h if dt is None else dt
    ut = (fn(t + dt, x) - fn(max(t - dt, 0.0), x)) / (t + dt - max(t - dt, 0.0))
    xs = np.concatenate([x - h, x, x + h])
    u = fn(t, xs).reshape(3, -1)
    w = u if spec.is_rhe else u**spec.m
    f_right = flux_a(spec, 0.5 * (u[1] + u[2]), (w[2] - w[1]) / h)
    f_left = flux_a(spec, 0.5 * (u[0] + u[1]), (w[1] - w[0]) / h)
    return ut - (f_right - f_left) / h


def tune_betas(bs: BarrierSpec, spec: ModelSpec, t_max: float, *, ratio: float = 1.0,
               n_t: int = 21, n_x: int = 201, margin: float = 0.05, h: float = 1e-4,
               hi: float = 1e3, tol: float = 1e-6) -> BarrierSpec:
    """Smallest ``beta1 = s``, ``beta2 = ratio * s`` keeping the residual non-positive.

    The residual of the sub-solution is sampled on ``n_t x n_x`` points
    inside each cap, keeping a relative ``margin`` away from its edge, and
    ``s`` is found by bisection.
    """
    if bs.family not in (BarrierFamily.RHE_EXPANDING_SUB, BarrierFamily.RHE_TWO_BUMP_SUB):
        raise ValueError("only the expanding and two-bump sub-solutions carry betas")
    if not spec.is_rhe:
        raise ValueError("these sub-solutions are built for the relativistic heat equation")
    p = bs.params
    x0 = p.get("x0", 0.0)
    ts = np.linspace(0.0, t_max, n_t)

    def samples(t):
        if bs.family is BarrierFamily.RHE_EXPANDING_SUB:
            r = p["R0"] + spec.c * t
            return x0 + np.linspace(-1, 1, n_x) * r * (1 - margin)
        r = p["kappa"] + spec.c * t
        pts = np.linspace(-1, 1, n_x) * r * (1 - margin)
        xs = np.concatenate([-p["l"] + pts, p["l"] + pts])
        # the caps meet at the centre once they overlap; keep clear of that kink too
        return x0 + xs[np.abs(xs) > margin * r]

    def ok(s):
        fn = make_barrier(bs.with_params(beta1=s, beta2=ratio * s), spec)
        return all(np.all(barrier_residual(fn, spec, t, samples(t), h) <= 0.0) for t in ts)

    if ok(0.0):
        return bs.with_params(beta1=0.0, beta2=0.0)
    if not ok(hi):
        raise ValueError(f"no beta below {hi} makes the residual non-positive")
    lo_s, hi_s = 0.0, hi
    while hi_s - lo_s > tol * max(1.0, hi_s):
        mid = 0.5 * (lo_s + hi_s)
        lo_s, hi_s = (lo_s, mid) if ok(mid) else (mid, hi_s)
    return bs.with_params(beta1=hi_s, beta2=ratio * hi_s)
