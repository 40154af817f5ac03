"""Inverse-distribution-function (dual) route.

A profile ``u`` with connected support ``[a, b]`` and mass ``M`` is described
by ``phi(eta)``, the point left of which ``u`` holds mass ``eta``, and by
``v = phi_eta = 1/u(phi)`` on the mass interval ``(0, M)``. Both models turn
into

    v_t = ( nu' v_eta / sqrt(v^(4+2m) + (nu'/c)^2 v_eta^2) )_eta

with ``nu' = nu`` (RHE, ``m = 0``) or ``nu*m`` (FLPME) and boundary flux
``-c`` at ``eta = 0`` and ``+c`` at ``eta = M``. Rescaling time by
``nu'/c^2`` and mass by ``nu'/c`` removes every constant; the solver works in
those units and adds ``eps * v_eta_eta`` with boundary flux
``1 - eps^(1/3)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import _kernels
from .core import U_FLOOR, FluxSatError, Grid, ModelSpec, Profile, validate
from .solver import CflViolation


class DisconnectedSupport(FluxSatError, ValueError):
    """The support has several components separated by a vacuum gap."""


class InteriorVacuum(DisconnectedSupport):
    """A cell inside the support hull holds (numerically) no mass."""


class BlowUp(FluxSatError, RuntimeError):
    """The dual solution left the range where it represents a jump front.

    ``t_star`` is the physical time of the event, ``side`` is ``"left"``,
    ``"right"`` or ``"max"`` (``max v`` above the cap) and ``trajectory``
    holds the snapshots recorded before it.
    """

    def __init__(self, t_star: float, side: str, trajectory: list["DualProfile"], final: "DualProfile"):
        self.t_star = t_star
        self.side = side
        self.trajectory = trajectory
        self.final = final
        super().__init__(f"dual blow-up ({side}) at t={t_star:.6g}")


@dataclass(frozen=True)
class DualScale:
    """Physical time = ``time_factor * t_bar``; physical mass = ``eta_factor * eta_bar``."""

    time_factor: float
    eta_factor: float

    @classmethod
    def for_spec(cls, spec: ModelSpec) -> "DualScale":
        nup = spec.dual_nu
        return cls(nup / spec.c**2, nup / spec.c)


@dataclass(frozen=True)
class DualProfile:
    """Mass-cell averages of ``v`` on ``n`` uniform cells of ``(0, M)``."""

    spec: ModelSpec
    M: float
    v: np.ndarray = field(repr=False)
    a_left: float
    t: float = 0.0
    singular: tuple = ()
    scale: DualScale = None

    def __post_init__(self):
        v = np.array(self.v, dtype=float, copy=True)
        v.setflags(write=False)
        if v.ndim != 1 or v.size < 3:
            raise ValueError("need at least 3 mass cells")
        if not self.M > 0:
            raise ValueError(f"mass must be positive, got {self.M}")
        if not np.all(v > 0) or not np.all(np.isfinite(v)):
            raise ValueError("v must be finite and positive")
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "singular", tuple(float(s) for s in self.singular))
        if self.scale is None:
            object.__setattr__(self, "scale", DualScale.for_spec(self.spec))

    @property
    def n(self) -> int:
        return self.v.size

    @property
    def deta(self) -> float:
        return self.M / self.n

    @property
    def eta(self) -> np.ndarray:
        """Mass-cell centres."""
        return (np.arange(self.n) + 0.5) * self.deta

    @property
    def length(self) -> float:
        """Support length ``b - a`` implied by ``v``."""
        return float(self.v.sum() * self.deta)

    @property
    def b_right(self) -> float:
        return self.a_left + self.length

    def phi(self) -> np.ndarray:
        """Positions ``phi`` at the ``n + 1`` mass-cell edges."""
        return self.a_left + np.concatenate(([0.0], np.cumsum(self.v) * self.deta))


def _support_cells(u: np.ndarray) -> tuple[int, int]:
    pos = np.flatnonzero(u > U_FLOOR)
    if pos.size == 0:
        raise DisconnectedSupport("profile has no support")
    lo, hi = int(pos[0]), int(pos[-1])
    gaps = np.flatnonzero(u[lo:hi + 1] <= U_FLOOR)
    if gaps.size:
        # a single empty cell reads as a hole in one component, longer runs as a split
        runs = np.split(gaps, np.flatnonzero(np.diff(gaps) > 1) + 1)
        if max(r.size for r in runs) >= 2 and np.all(u[lo + gaps] == 0):
            raise DisconnectedSupport(f"support splits at cell {lo + int(gaps[0])}")
        raise InteriorVacuum(f"vacuum inside the support at cell {lo + int(gaps[0])}")
    return lo, hi


def to_dual(spec: ModelSpec, p: Profile, n_mass: int = 500) -> DualProfile:
    """Dual profile of ``p`` on ``n_mass`` mass cells.

    ``phi`` is the exact inverse of the piecewise-linear CDF of the cell
    averages, and each ``v_j`` is the width of the ``j``-th mass slice
    divided by its mass, so ``sum(v) * deta`` is exactly the support length.
    """
    validate(spec, p)
    if n_mass < 3:
        raise ValueError("need at least 3 mass cells")
    lo, hi = _support_cells(p.u)
    edges = p.grid.edges[lo:hi + 2]
    cdf = np.concatenate(([0.0], np.cumsum(p.u[lo:hi + 1]) * p.grid.dx))
    M = float(cdf[-1])
    eta_edges = np.linspace(0.0, M, n_mass + 1)
    phi = np.interp(eta_edges, cdf, edges)
    phi[0], phi[-1] = edges[0], edges[-1]
    v = np.diff(phi) / (M / n_mass)
    return DualProfile(spec, M, v, float(edges[0]), p.t)


def from_dual(d: DualProfile, grid: Optional[Grid] = None) -> Profile:
    """Cell averages on ``grid`` of the density ``1/v`` laid out by ``phi``.

    Without a grid, one spanning the support with ``d.n`` cells is used.
    """
    phi = d.phi()
    if grid is None:
        grid = Grid(phi[0], (phi[-1] - phi[0]) / d.n, d.n)
    cdf = np.linspace(0.0, d.M, d.n + 1)
    mass = np.interp(grid.edges, phi, cdf, left=0.0, right=d.M)
    return Profile(grid, np.maximum(np.diff(mass), 0.0) / grid.dx, d.t)


def boundary_flux(eps: float) -> float:
    """Regularised boundary flux ``1 - eps^(1/3)`` in normalised units."""
    return 1.0 - eps ** (1.0 / 3.0)


def default_slope_threshold(d: DualProfile) -> float:
    return 50.0 / math.sqrt(d.deta)


def singular_set(d: DualProfile, slope_threshold: Optional[float] = None) -> tuple[float, ...]:
    """Mass coordinates where ``v`` is steeper than ``slope_threshold``.

    Faces with ``|dv/deta| > slope_threshold`` are grouped into runs of
    neighbours; each run is one singular point, located at the slope-weighted
    mean of its face coordinates. Runs reaching the first or last interior
    face are the boundary layers that carry the interface flux and are left
    out.
    """
    thr = default_slope_threshold(d) if slope_threshold is None else slope_threshold
    slope = np.abs(np.diff(d.v)) / d.deta
    faces = np.flatnonzero(slope > thr)
    if faces.size == 0:
        return ()
    runs = np.split(faces, np.flatnonzero(np.diff(faces) > 1) + 1)
    out = []
    for r in runs:
        if r[0] == 0 or r[-1] == slope.size - 1:
            continue
        w = slope[r]
        out.append(float(np.sum(w * (r + 1) * d.deta) / np.sum(w)))
    return tuple(out)


def dual_dt(d: DualProfile, eps: float, cfl: float = 0.4) -> float:
    """Stable step in normalised time for the current profile.

    The saturated flux has slope ``v^(4+2m) / (v^(4+2m) + g^2)^(3/2)`` in
    ``g = v_eta``, at most ``v^-(2+m)``, so the diffusive bound uses
    ``min(v)^-(2+m) + eps``.
    """
    if not 0 < cfl < 1:
        raise CflViolation(f"cfl must lie in (0, 1), got {cfl}")
    de = d.deta / d.scale.eta_factor
    diff = float(d.v.min()) ** -(2.0 + d.spec.dual_exponent) + eps
    return cfl * min(de, de * de / (2.0 * diff))


def _record_times(t0, t_end, every):
    if every is None:
        return [t_end]
    out = []
    k = math.floor(t0 / every + 1e-9) + 1
    while k * every < t_end - 1e-9 * max(1.0, abs(t_end)):
        out.append(k * every)
        k += 1
    return out + [t_end]


def dual_evolve(d: DualProfile, t_end: float, eps: float = 1e-4, *,
                record_every: Optional[float] = None, cfl: float = 0.4,
                cap: float = 1e6, contact_share: float = 0.5,
                slope_threshold: Optional[float] = None):
    """Evolve ``d`` to physical time ``t_end``.

    Returns ``(final, trajectory)`` where the trajectory lists ``d``, the
    snapshots every ``record_every`` and the final state. Raises
    :class:`BlowUp` when ``max v`` exceeds ``cap``, or when the saturated
    part of the flux next to a boundary drops below ``contact_share`` of the
    imposed value after having reached it: the front can no longer be fed
    through a finite boundary value of ``v``, which is the discrete form of
    ``u`` vanishing at the interface. That test is skipped for RHE, whose
    interface density never reaches zero.
    """
    if not 0 < eps <= 1e-2:
        raise ValueError(f"eps must lie in (0, 1e-2], got {eps}")
    if not t_end > d.t:
        raise ValueError(f"t_end={t_end} must exceed the current time {d.t}")
    if not 0 < cfl < 1:
        raise CflViolation(f"cfl must lie in (0, 1), got {cfl}")
    sc = d.scale
    q = boundary_flux(eps)
    speed = d.spec.c * q
    m = float(d.spec.dual_exponent)
    de = d.deta / sc.eta_factor
    v = np.array(d.v)
    a0, t0 = d.a_left, d.t
    share = contact_share if m > 0 else -math.inf
    armed = np.zeros(2, dtype=np.int64)
    t = t0

    def snap(tt):
        s = DualProfile(d.spec, d.M, v, a0 - speed * (tt - t0), tt, (), sc)
        return replace(s, singular=singular_set(s, slope_threshold))

    traj = [snap(t0)]
    for t_rec in _record_times(t0, t_end, record_every):
        while t < t_rec:
            dt = dual_dt(replace(d, v=v), eps, cfl) * sc.time_factor
            n_total = max(1, math.ceil((t_rec - t) / dt * (1 - 1e-12)))
            dt = (t_rec - t) / n_total
            nsteps = min(n_total, 20000)
            done, status = _kernels.dual_advance(
                v, de, dt / sc.time_factor, nsteps, m, eps, q, cap, share, armed)
            t = t_rec if (done == n_total and status == 0) else t + done * dt
            if status:
                side = {1: "max", 2: "left", 3: "right"}[status]
                raise BlowUp(t, side, traj, snap(t))
        traj.append(snap(t_rec))
        t = t_rec
    return traj[-1], traj
