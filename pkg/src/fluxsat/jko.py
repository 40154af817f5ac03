"""Minimizing-movement (JKO) steps with the relativistic transport cost.

In one dimension the optimal coupling between two densities of equal mass
is the monotone one, so a density is represented by its quantile function
``Q`` on nodes ``s_0 = 0 < s_1 < ... < s_{n+1} = 1``; between nodes the
density is constant, ``rho = M ds / dQ``. One step solves

    min_Q  h M sum_j w_j k((Q_j - P_j)/h)  +  W M ds sum_j F~(dQ_j/ds)

where ``P`` is the previous quantile function, ``w`` are trapezoid weights
and ``F~(q) = F(M/q) q / M`` is the entropy per unit mass. Both terms are
convex; ``k'`` blows up on the light cone ``|Q - P| = c h`` and ``F~`` blows
up as ``dQ -> 0``, so damped Newton iterations that stay strictly feasible
converge without explicit constraints. The Hessian is tridiagonal.

The entropy weight ``W`` is ``nu`` for Boltzmann (limit: the relativistic
heat equation) and ``nu m / (m+1)`` for Tsallis ``r^(m+1)/m`` (limit: the
flux-limited porous-medium equation).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import solveh_banded

from .core import U_FLOOR, FluxSatError, ModelSpec, Profile
from .flux import cost_k
from .solver import BoundaryTouched, Trajectory

_CONE_SLACK = 1e-12
_DECREMENT_FLOOR = 1e-18


class ZeroMass(FluxSatError, ValueError):
    pass


class GridMismatch(FluxSatError, ValueError):
    pass


class OptimizerDiverged(FluxSatError, RuntimeError):
    pass


class Entropy(str, enum.Enum):
    BOLTZMANN = "Boltzmann"
    TSALLIS = "Tsallis"


@dataclass(frozen=True)
class JkoConfig:
    h: float = 0.01
    entropy: Entropy = Entropy.BOLTZMANN
    m: float = 1.0
    n_q: int = 256
    max_inner_iters: int = 200
    grad_tol: float = 1e-9

    def __post_init__(self):
        object.__setattr__(self, "entropy", Entropy(self.entropy))
        if not self.h > 0:
            raise ValueError("h must be positive")
        if self.entropy is Entropy.TSALLIS and not self.m > 0:
            raise ValueError("Tsallis exponent m must be positive")
        if int(self.n_q) != self.n_q or self.n_q < 16:
            raise ValueError("n_q must be an integer >= 16")
        if self.max_inner_iters < 1 or not self.grad_tol > 0:
            raise ValueError("optimizer controls must be positive")

    def weight(self, spec: ModelSpec) -> float:
        if self.entropy is Entropy.BOLTZMANN:
            return spec.nu
        return spec.nu * self.m / (self.m + 1.0)


@dataclass(frozen=True)
class QuantileFn:
    """Quantiles ``Q`` at ``s = j/(n_q+1)``, plus the support ends and the mass."""

    s: np.ndarray
    Q: np.ndarray
    M: float = 1.0
    left: Optional[float] = None
    right: Optional[float] = None

    def __post_init__(self):
        s = np.array(self.s, dtype=float)
        Q = np.array(self.Q, dtype=float)
        if s.shape != Q.shape or s.ndim != 1:
            raise ValueError("s and Q must be 1D arrays of equal length")
        if np.any(np.diff(Q) <= 0):
            raise ValueError("quantiles must be strictly increasing")
        for a in (s, Q):
            a.setflags(write=False)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "Q", Q)

    @property
    def n_q(self) -> int:
        return self.s.size

    def nodes(self) -> np.ndarray:
        """``Q`` including the support ends at ``s = 0`` and ``s = 1``."""
        return np.concatenate(([self.left], self.Q, [self.right]))

    @classmethod
    def from_nodes(cls, nodes: np.ndarray, M: float) -> "QuantileFn":
        n_q = nodes.size - 2
        return cls(s_grid(n_q), nodes[1:-1], M, float(nodes[0]), float(nodes[-1]))


def s_grid(n_q: int) -> np.ndarray:
    return np.arange(1, n_q + 1) / (n_q + 1.0)


def quantiles(p: Profile, n_q: int = 256) -> QuantileFn:
    """Invert the piecewise-linear CDF of ``p`` at ``s_j = j/(n_q+1)``."""
    M = p.mass
    if not M > 0:
        raise ZeroMass("profile carries no mass")
    pos = np.flatnonzero(p.u > U_FLOOR)
    lo, hi = int(pos[0]), int(pos[-1])
    edges = p.grid.edges[lo:hi + 2]
    cdf = np.concatenate(([0.0], np.cumsum(p.u[lo:hi + 1]) * p.grid.dx))
    cdf *= M / cdf[-1]
    s = s_grid(n_q)
    return QuantileFn(s, np.interp(s * M, cdf, edges), M, float(edges[0]), float(edges[-1]))


def to_profile(qf: QuantileFn, grid, t: float = 0.0) -> Profile:
    """Cell averages on ``grid`` of the piecewise-constant density described by ``qf``."""
    nodes = qf.nodes()
    if nodes[0] < grid.x0 or nodes[-1] > grid.x1:
        raise BoundaryTouched(t)
    s = np.concatenate(([0.0], qf.s, [1.0]))
    mass = np.interp(grid.edges, nodes, s * qf.M)
    return Profile(grid, np.maximum(np.diff(mass), 0.0) / grid.dx, t)


def transport_cost(Q0: QuantileFn, Q1: QuantileFn, h: float, c: float = 1.0) -> float:
    """Mean over ``s`` of ``k((Q0 - Q1)/h)``; ``inf`` outside the light cone."""
    if Q0.s.shape != Q1.s.shape or not np.allclose(Q0.s, Q1.s, rtol=0, atol=1e-14):
        raise GridMismatch("quantile functions live on different s grids")
    if not h > 0:
        raise ValueError("h must be positive")
    return float(np.mean(cost_k((Q0.Q - Q1.Q) / h, c)))


class JkoProblem:
    """The convex objective of one step as a function of the node vector."""

    def __init__(self, prev_nodes: np.ndarray, M: float, h: float, c: float,
                 entropy: Entropy, weight: float, m: float = 1.0):
        self.P = np.asarray(prev_nodes, dtype=float)
        self.n = self.P.size
        self.M, self.h, self.c = M, h, c
        self.entropy, self.W, self.m = entropy, weight, m
        self.ds = 1.0 / (self.n - 1)
        w = np.full(self.n, self.ds)
        w[0] = w[-1] = 0.5 * self.ds
        self.w = w

    def feasible(self, Q: np.ndarray) -> bool:
        return bool(np.all(np.abs(Q - self.P) < self.c * self.h - _CONE_SLACK) and np.all(np.diff(Q) > 0))

    def _phi(self, q):
        M = self.M
        if self.entropy is Entropy.BOLTZMANN:
            return np.log(M / q) - 1.0, -1.0 / q, 1.0 / q**2
        m = self.m
        r = (M / q) ** m
        return r / m, -r / q, (m + 1.0) * r / q**2

    def entropy_value(self, Q: np.ndarray) -> float:
        q = np.diff(Q) / self.ds
        return float(self.W * self.M * self.ds * np.sum(self._phi(q)[0]))

    def _z(self, Q):
        return (Q - self.P) / self.h

    def value(self, Q: np.ndarray) -> float:
        if not np.all(np.diff(Q) > 0):
            return math.inf
        tr = self.h * self.M * np.sum(self.w * cost_k(self._z(Q), self.c))
        return float(tr) + self.entropy_value(Q)

    def change(self, Q: np.ndarray, Qn: np.ndarray) -> float:
        """``value(Qn) - value(Q)`` summed term by term without cancellation."""
        c2 = self.c**2
        z, zn = self._z(Q), self._z(Qn)
        dk = (zn**2 - z**2) / (np.sqrt(1.0 - z**2 / c2) + np.sqrt(1.0 - zn**2 / c2))
        q, qn = np.diff(Q), np.diff(Qn)
        if self.entropy is Entropy.BOLTZMANN:
            dphi = np.log(q / qn)
        else:
            m = self.m
            dphi = (self.M * self.ds) ** m / m * (qn**-m - q**-m)
        return float(self.h * self.M * np.sum(self.w * dk) + self.W * self.M * self.ds * np.sum(dphi))

    def gradient(self, Q: np.ndarray) -> np.ndarray:
        z = self._z(Q)
        c = self.c
        g = self.M * self.w * z / np.sqrt(1.0 - (z / c) ** 2)
        _, d1, _ = self._phi(np.diff(Q) / self.ds)
        e = self.W * self.M * d1
        g[:-1] -= e
        g[1:] += e
        return g

    def hessian_banded(self, Q: np.ndarray) -> np.ndarray:
        """Upper banded form (2 x n) for :func:`scipy.linalg.solveh_banded`."""
        z = self._z(Q)
        diag = self.M * self.w / self.h * (1.0 - (z / self.c) ** 2) ** -1.5
        _, _, d2 = self._phi(np.diff(Q) / self.ds)
        e = self.W * self.M * d2 / self.ds
        diag = diag.copy()
        diag[:-1] += e
        diag[1:] += e
        ab = np.zeros((2, self.n))
        ab[1] = diag
        ab[0, 1:] = -e
        return ab


def isotonic_projection(y: np.ndarray, w: Optional[np.ndarray] = None) -> np.ndarray:
    """Weighted least-squares non-decreasing fit by pool-adjacent-violators."""
    y = np.asarray(y, dtype=float)
    w = np.ones_like(y) if w is None else np.asarray(w, dtype=float)
    vals, wts, sizes = [], [], []
    for yi, wi in zip(y, w):
        vals.append(yi)
        wts.append(wi)
        sizes.append(1)
        while len(vals) > 1 and vals[-2] > vals[-1]:
            wt = wts[-2] + wts[-1]
            v = (wts[-2] * vals[-2] + wts[-1] * vals[-1]) / wt
            sz = sizes[-2] + sizes[-1]
            del vals[-1], wts[-1], sizes[-1]
            vals[-1], wts[-1], sizes[-1] = v, wt, sz
    return np.repeat(vals, sizes)


def project_feasible(y: np.ndarray, prev: np.ndarray, radius: float) -> np.ndarray:
    """Closest non-decreasing vector within ``radius`` of ``prev`` componentwise.

    With a monotone box (``prev`` is increasing) clipping the isotonic fit is
    the exact projection.
    """
    return np.clip(isotonic_projection(y), prev - radius, prev + radius)


@dataclass
class StepInfo:
    iterations: int
    objective: float
    entropy: float
    transport: float
    grad_norm: float
    max_displacement: float


def minimise_step(problem: JkoProblem, max_iters: int = 200, grad_tol: float = 1e-9,
                  start: Optional[np.ndarray] = None) -> tuple[np.ndarray, StepInfo]:
    """Damped Newton on the step objective, staying strictly inside its domain.

    Converged when ``max |gradient| / (M ds)`` falls below ``grad_tol`` or the
    Newton decrement ``-g.d`` is below ``1e-18 M``. The
    sufficient-decrease test uses :meth:`JkoProblem.change`, which stays
    accurate when the objective itself no longer resolves the decrease.
    """
    Q = problem.P.copy() if start is None else np.array(start, dtype=float)
    if not problem.feasible(Q):
        raise ValueError("starting point is not strictly feasible")
    scale = problem.M * problem.ds
    gnorm = math.inf
    for it in range(1, max_iters + 1):
        g = problem.gradient(Q)
        gnorm = float(np.max(np.abs(g))) / scale
        if gnorm < grad_tol:
            break
        d = -solveh_banded(problem.hessian_banded(Q), g)
        slope = float(g @ d)
        if not slope < 0:
            d, slope = -g, -float(g @ g)
        elif -slope < _DECREMENT_FLOOR * problem.M:
            # Newton decrement at round-off level: nothing left to gain
            break
        step = 1.0
        while True:
            Qn = Q + step * d
            if problem.feasible(Qn) and problem.change(Q, Qn) <= 1e-4 * step * slope:
                break
            step *= 0.5
            if step < 1e-20:
                raise OptimizerDiverged(f"line search failed with scaled gradient {gnorm:.3e}")
        Q = Qn
    else:
        g = problem.gradient(Q)
        gnorm = float(np.max(np.abs(g))) / scale
        if gnorm >= grad_tol:
            raise OptimizerDiverged(f"scaled gradient {gnorm:.3e} after {max_iters} iterations")
        it = max_iters
    f = problem.value(Q)
    ent = problem.entropy_value(Q)
    info = StepInfo(it, f, ent, f - ent, gnorm, float(np.max(np.abs(Q - problem.P))))
    return Q, info


def _problem(prev: QuantileFn, cfg: JkoConfig, spec: ModelSpec) -> JkoProblem:
    if cfg.entropy is Entropy.TSALLIS and not spec.is_rhe and cfg.m != spec.m:
        raise ValueError("Tsallis exponent must match the model exponent")
    return JkoProblem(prev.nodes(), prev.M, cfg.h, spec.c, cfg.entropy, cfg.weight(spec), cfg.m)


def entropy(qf: QuantileFn, cfg: JkoConfig, spec: ModelSpec) -> float:
    """Weighted entropy of the density described by ``qf``."""
    return _problem(qf, cfg, spec).entropy_value(qf.nodes())


def jko_step_quantiles(prev: QuantileFn, cfg: JkoConfig, spec: ModelSpec) -> tuple[QuantileFn, StepInfo]:
    Q, info = minimise_step(_problem(prev, cfg, spec), cfg.max_inner_iters, cfg.grad_tol)
    return QuantileFn.from_nodes(Q, prev.M), info


def jko_step(p: Profile, cfg: JkoConfig, spec: ModelSpec) -> Profile:
    """One minimizing-movement step of length ``cfg.h`` starting from ``p``."""
    qf, _ = jko_step_quantiles(quantiles(p, cfg.n_q), cfg, spec)
    return to_profile(qf, p.grid, p.t + cfg.h)


@dataclass
class JkoRun:
    trajectory: Trajectory
    quantiles: list[QuantileFn]
    entropies: list[float]
    steps: list[StepInfo]


def jko_run(p0: Profile, cfg: JkoConfig, n_steps: int, spec: ModelSpec) -> JkoRun:
    """Iterate :func:`jko_step` on the quantile representation, keeping diagnostics."""
    if n_steps < 0:
        raise ValueError("n_steps must be non-negative")
    qf = quantiles(p0, cfg.n_q)
    qs, ents, infos = [qf], [entropy(qf, cfg, spec)], []
    snaps = [p0]
    for n in range(1, n_steps + 1):
        qf, info = jko_step_quantiles(qf, cfg, spec)
        qs.append(qf)
        ents.append(info.entropy)
        infos.append(info)
        snaps.append(to_profile(qf, p0.grid, p0.t + n * cfg.h))
    return JkoRun(Trajectory(spec, snaps), qs, ents, infos)


def jko_evolve(p0: Profile, cfg: JkoConfig, n_steps: int, spec: ModelSpec) -> Trajectory:
    """Snapshots ``t_n = t_0 + n h`` for ``n = 0 .. n_steps``."""
    return jko_run(p0, cfg, n_steps, spec).trajectory
