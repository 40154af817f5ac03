"""Explicit conservative finite-volume solver for the primal equations.

The update is ``u_i += dt/dx (F_{i+1/2} - F_{i-1/2})`` with
``F = a(z_face, xi_face)``, ``xi_face`` the one-cell difference of ``u``
(RHE) or ``u^m`` (FLPME), and ``z_face`` the donor-cell density: the cell
mass is leaving, reconstructed to the face with a slope limiter.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import _kernels
from .core import U_FLOOR, FluxSatError, Grid, ModelSpec, Profile, validate
from .flux import diffusivity_bound

#: cells at either end of the grid that must stay empty
BUFFER_CELLS = 2
# steps between recomputations of the FLPME time step
_DT_REFRESH = 2000


class CflViolation(FluxSatError, ValueError):
    pass


class BoundaryTouched(FluxSatError, RuntimeError):
    def __init__(self, t: float, trajectory: "Trajectory | None" = None):
        self.t = t
        self.trajectory = trajectory
        super().__init__(f"support reached the grid buffer at t={t:.6g}")


@dataclass(frozen=True)
class SolverOptions:
    cfl: float = 0.4
    limiter: str = "superbee"
    epsilon_visc: float = 0.0
    record_every: Optional[float] = None
    # Dirichlet data for the leftmost cells: t -> values of cells 0..k-1
    left_boundary: Optional[Callable[[float], np.ndarray]] = field(default=None, compare=False)

    def __post_init__(self):
        if not 0 < self.cfl < 1:
            raise ValueError(f"cfl must lie in (0, 1), got {self.cfl}")
        if self.limiter not in _kernels.LIMITERS:
            raise ValueError(f"unknown limiter {self.limiter!r}; choose from {sorted(_kernels.LIMITERS)}")
        if self.epsilon_visc < 0:
            raise ValueError("epsilon_visc must be non-negative")
        if self.record_every is not None and not self.record_every > 0:
            raise ValueError("record_every must be positive")


@dataclass
class Trajectory:
    spec: ModelSpec
    snapshots: list[Profile]

    def __post_init__(self):
        ts = [p.t for p in self.snapshots]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("snapshot times must be strictly increasing")
        if self.snapshots and any(p.grid != self.snapshots[0].grid for p in self.snapshots):
            raise ValueError("all snapshots must share one grid")

    def __len__(self):
        return len(self.snapshots)

    def __getitem__(self, i) -> Profile:
        return self.snapshots[i]

    def __iter__(self):
        return iter(self.snapshots)

    @property
    def grid(self) -> Grid:
        return self.snapshots[0].grid

    @property
    def times(self) -> np.ndarray:
        return np.array([p.t for p in self.snapshots])

    @property
    def masses(self) -> np.ndarray:
        return np.array([p.mass for p in self.snapshots])

    @property
    def final(self) -> Profile:
        return self.snapshots[-1]

    def at(self, t: float) -> Profile:
        """Snapshot whose time is closest to ``t``."""
        i = int(np.argmin(np.abs(self.times - t)))
        return self.snapshots[i]


def max_dt(spec: ModelSpec, p: Profile, opts: SolverOptions) -> float:
    dx = p.grid.dx
    d = diffusivity_bound(spec, float(p.u.max())) + opts.epsilon_visc
    diff = dx * dx / (2.0 * d) if d > 0 else math.inf
    return opts.cfl * min(dx / spec.c, diff)


_NO_CELLS = np.zeros(0)
# steps per linear-in-time piece of the Dirichlet data
_BC_CHUNK = 256


def _advance(spec: ModelSpec, u: np.ndarray, dx: float, dt: float, nsteps: int,
             opts: SolverOptions, vals: np.ndarray = _NO_CELLS,
             rate: np.ndarray = _NO_CELLS) -> tuple[int, int]:
    return _kernels.primal_advance(
        u, dx, dt, nsteps, spec.is_rhe, float(spec.m), spec.nu, spec.c,
        _kernels.LIMITERS[opts.limiter], opts.epsilon_visc, U_FLOOR, vals, rate, BUFFER_CELLS)


def _bc_values(bc, t: float) -> np.ndarray:
    return np.atleast_1d(np.asarray(bc(t), dtype=float))


def step(spec: ModelSpec, p: Profile, dt: float, opts: SolverOptions = SolverOptions()) -> Profile:
    """One forward-Euler step; the input profile is not modified."""
    validate(spec, p)
    if not dt > 0:
        raise CflViolation(f"dt must be positive, got {dt}")
    bound = max_dt(spec, p, opts)
    if dt > bound * (1 + 1e-12):
        raise CflViolation(f"dt={dt:.3e} exceeds the stable bound {bound:.3e}")
    u = np.array(p.u)
    if opts.left_boundary is not None:
        v0 = _bc_values(opts.left_boundary, p.t)
        rate = (_bc_values(opts.left_boundary, p.t + dt) - v0) / dt
        done, status = _advance(spec, u, p.grid.dx, dt, 1, opts, v0, rate)
    else:
        done, status = _advance(spec, u, p.grid.dx, dt, 1, opts)
    if status:
        raise BoundaryTouched(p.t)
    return Profile(p.grid, u, p.t + dt)


def _record_times(t0: float, t_end: float, every: Optional[float]) -> list[float]:
    if every is None:
        return [t_end]
    k0 = math.floor(t0 / every + 1e-9) + 1
    times = []
    k = k0
    while k * every < t_end - 1e-9 * max(1.0, abs(t_end)):
        times.append(k * every)
        k += 1
    times.append(t_end)
    return times


def evolve(spec: ModelSpec, p0: Profile, t_end: float, opts: SolverOptions = SolverOptions()) -> Trajectory:
    """Integrate to ``t_end``, recording ``p0``, every ``record_every`` and ``t_end``.

    Raises :class:`BoundaryTouched` (carrying the partial trajectory) if the
    support reaches the two-cell buffer at either end of the grid.
    """
    validate(spec, p0)
    if not t_end > p0.t:
        raise ValueError(f"t_end={t_end} must exceed the initial time {p0.t}")
    grid = p0.grid
    u = np.array(p0.u)
    t = p0.t
    snaps = [p0]
    bc = opts.left_boundary
    for t_rec in _record_times(p0.t, t_end, opts.record_every):
        while t < t_rec:
            dt_max = max_dt(spec, Profile(grid, u, t), opts)
            n_total = max(1, math.ceil((t_rec - t) / dt_max * (1 - 1e-12)))
            dt = (t_rec - t) / n_total
            nsteps = min(n_total, _DT_REFRESH) if not spec.is_rhe else n_total
            if bc is None:
                done, status = _advance(spec, u, grid.dx, dt, nsteps, opts)
            else:
                # Dirichlet data is interpolated linearly in time over short chunks
                nsteps = min(nsteps, _BC_CHUNK)
                v0 = _bc_values(bc, t)
                rate = (_bc_values(bc, t + nsteps * dt) - v0) / (nsteps * dt)
                done, status = _advance(spec, u, grid.dx, dt, nsteps, opts, v0, rate)
            t = t_rec if done == n_total else t + done * dt
            if status:
                raise BoundaryTouched(t, Trajectory(spec, snaps))
        if bc is not None:
            vals = _bc_values(bc, t_rec)
            u[: vals.size] = vals
        snaps.append(Profile(grid, u, t_rec))
        t = t_rec
    return Trajectory(spec, snaps)
