"""Measurements on profiles and trajectories: support, jumps, fronts, barriers."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np

from .core import U_FLOOR, FluxSatError, Profile
from .solver import Trajectory


class EmptySupport(FluxSatError, ValueError):
    pass


class TooFewSnapshots(FluxSatError, ValueError):
    pass


def mass(p: Profile) -> float:
    return float(np.sum(p.u) * p.grid.dx)


@dataclass(frozen=True)
class Jump:
    x: float  # midpoint of the faces spanned by the detecting stencil
    size: float  # signed difference u_right - u_left across the stencil
    index: int  # left cell of the stencil


@dataclass(frozen=True)
class SupportInfo:
    left: float
    right: float
    lo: int
    hi: int
    jumps: tuple[Jump, ...]


def _support_cells(p: Profile) -> tuple[int, int]:
    pos = np.flatnonzero(p.u > U_FLOOR)
    if pos.size == 0:
        raise EmptySupport("profile has no cell above the vacuum floor")
    return int(pos[0]), int(pos[-1])


def support_and_jumps(p: Profile, jump_threshold: float = 0.25, stencil: int = 1) -> SupportInfo:
    """Support ends and the jumps of ``p``.

    A jump is a run of neighbouring stencil positions ``i`` with
    ``|u[i+stencil] - u[i]| > jump_threshold * max(u)``; each run counts once,
    at its largest difference. Differences against the empty cells just
    outside the support count, so a sharp interface is a jump.
    """
    lo, hi = _support_cells(p)
    u = np.concatenate(([0.0] * stencil, p.u, [0.0] * stencil))
    d = u[stencil:] - u[:-stencil]
    big = np.flatnonzero(np.abs(d) > jump_threshold * float(p.u.max()))
    jumps = []
    if big.size:
        for run in np.split(big, np.flatnonzero(np.diff(big) > 1) + 1):
            k = int(run[np.argmax(np.abs(d[run]))])
            i = k - stencil  # index of the stencil's left cell in the unpadded array
            # midpoint of the faces inside the stencil (cells i .. i+stencil)
            x = p.grid.x0 + (i + 1 + 0.5 * (stencil - 1)) * p.grid.dx
            jumps.append(Jump(float(x), float(d[k]), i))
    e = p.grid.edges
    return SupportInfo(float(e[lo]), float(e[hi + 1]), lo, hi, tuple(jumps))


def interface_positions(p: Profile, level: Optional[float] = None) -> tuple[float, float]:
    """Sub-cell support ends where the cumulative mass from each side reaches ``level``.

    ``level`` is a mass and defaults to ``U_FLOOR * max(mass, 1)``.
    """
    lo, hi = _support_cells(p)
    M = mass(p)
    level = U_FLOOR * max(M, 1.0) if level is None else level
    cdf = np.concatenate(([0.0], np.cumsum(p.u) * p.grid.dx))
    e = p.grid.edges
    left = float(np.interp(level, cdf, e))
    rev = M - cdf[::-1]
    right = float(np.interp(level, rev, e[::-1]))
    return left, right


def mass_left_of(p: Profile, x: float) -> float:
    """Mass of ``p`` in ``(-inf, x)`` with the density constant inside cells."""
    cdf = np.concatenate(([0.0], np.cumsum(p.u) * p.grid.dx))
    return float(np.interp(x, p.grid.edges, cdf))


@dataclass
class FrontReport:
    times: list
    left_pos: list
    right_pos: list
    jump_sizes: dict  # time -> signed sizes of all detected jumps
    left_jump: list  # whether a jump sits at the left interface
    right_jump: list
    speed_times: list  # centres of the fitting windows
    left_speed: list  # outward speeds (positive when the support grows)
    right_speed: list
    left_rh: list  # |speed - c| where a jump persisted over the window, else None
    right_rh: list
    c: float = 1.0

    def to_json(self) -> str:
        d = asdict(self)
        d["jump_sizes"] = {f"{t:.12g}": v for t, v in self.jump_sizes.items()}
        return json.dumps(d, indent=1)

    def max_rh_residual(self) -> float:
        vals = [r for r in self.left_rh + self.right_rh if r is not None]
        return max(vals) if vals else math.nan


def _lsq_slope(t: np.ndarray, x: np.ndarray) -> float:
    tc = t - t.mean()
    return float(np.sum(tc * (x - x.mean())) / np.sum(tc * tc))


def front_speed(tr: Trajectory, window: int = 10, *, jump_threshold: float = 0.25,
                stencil: int = 3, near_cells: int = 6, level: Optional[float] = None) -> FrontReport:
    """Interface positions, jumps and least-squares front speeds over sliding windows.

    A side carries an interface jump when a detected jump lies within
    ``near_cells`` cells of that end of the support. The default stencil of 3
    cells sees a jump even after the limiter has spread it over a few cells.
    """
    if window < 1 or len(tr) < window + 1:
        raise TooFewSnapshots(f"need at least {window + 1} snapshots, got {len(tr)}")
    times = tr.times
    lefts, rights, ljump, rjump, sizes = [], [], [], [], {}
    for p in tr:
        info = support_and_jumps(p, jump_threshold, stencil)
        lpos, rpos = interface_positions(p, level)
        lefts.append(lpos)
        rights.append(rpos)
        near = near_cells * p.grid.dx
        ljump.append(any(abs(j.x - info.left) <= near for j in info.jumps))
        rjump.append(any(abs(j.x - info.right) <= near for j in info.jumps))
        sizes[float(p.t)] = [j.size for j in info.jumps]
    c = tr.spec.c
    L, R = np.array(lefts), np.array(rights)
    st, ls, rs, lrh, rrh = [], [], [], [], []
    for k in range(len(tr) - window):
        sl = slice(k, k + window + 1)
        ts = times[sl]
        st.append(float(ts.mean()))
        vl = -_lsq_slope(ts, L[sl])
        vr = _lsq_slope(ts, R[sl])
        ls.append(vl)
        rs.append(vr)
        lrh.append(abs(vl - c) if all(ljump[sl]) else None)
        rrh.append(abs(vr - c) if all(rjump[sl]) else None)
    return FrontReport([float(t) for t in times], lefts, rights, sizes, ljump, rjump,
                       st, ls, rs, lrh, rrh, c)


def interface_jumps(p: Profile, jump_threshold: float = 0.25, stencil: int = 3,
                    near_cells: int = 6) -> tuple[Optional[Jump], Optional[Jump]]:
    """The jumps sitting at the left and right interface of ``p`` (``None`` where absent)."""
    info = support_and_jumps(p, jump_threshold, stencil)
    near = near_cells * p.grid.dx
    left = [j for j in info.jumps if abs(j.x - info.left) <= near]
    right = [j for j in info.jumps if abs(j.x - info.right) <= near]
    return (left[0] if left else None), (right[-1] if right else None)


def jump_extinction_time(tr: Trajectory, jump_threshold: float = 0.25, stencil: int = 3,
                         near_cells: int = 6, cells_tol: int = 3) -> float:
    """Time by which every jump has disappeared; ``inf`` if one survives the run.

    An interface jump is gone once that end of the support falls behind the
    light cone (see :func:`cone_lag_times`): a front carrying a jump moves at
    exactly ``c``, while a degenerate front with a vertical tangent still
    looks steep on the grid. Interior jumps are those detected farther than
    ``near_cells`` from both support ends.
    """
    t_left, t_right = cone_lag_times(tr, cells_tol)
    t_int = 0.0
    for p in reversed(tr.snapshots):
        info = support_and_jumps(p, jump_threshold, stencil)
        near = near_cells * p.grid.dx
        if any(abs(j.x - info.left) > near and abs(j.x - info.right) > near for j in info.jumps):
            break
        t_int = float(p.t)
    else:
        t_int = float(tr[0].t)
    if t_int > tr[-1].t:
        t_int = math.inf
    return max(t_left, t_right, t_int)


@dataclass
class ComparisonReport:
    max_below_lower: float  # max (lower - u)_+
    max_above_upper: float  # max (u - upper)_+
    worst_time_lower: Optional[float]
    worst_time_upper: Optional[float]
    tol: float
    passed: bool = field(init=False)

    def __post_init__(self):
        self.passed = self.max_below_lower <= self.tol and self.max_above_upper <= self.tol


def check_comparison(lower: Optional[Callable], tr: Trajectory, upper: Optional[Callable],
                     tol: float) -> ComparisonReport:
    """Largest violation of ``lower <= u <= upper`` over all snapshots, at cell centres.

    ``None`` stands for the trivial barrier (0 below, +inf above).
    """
    lo_v, up_v, lo_t, up_t = 0.0, 0.0, None, None
    for p in tr:
        x = p.x
        if lower is not None:
            v = float(np.max(np.asarray(lower(p.t, x)) - p.u, initial=0.0))
            if v > lo_v:
                lo_v, lo_t = v, p.t
        if upper is not None:
            v = float(np.max(p.u - np.asarray(upper(p.t, x)), initial=0.0))
            if v > up_v:
                up_v, up_t = v, p.t
    return ComparisonReport(lo_v, up_v, lo_t, up_t, tol)


def support_cells_series(tr: Trajectory) -> np.ndarray:
    """``(n_snapshots, 2)`` array of first/last cell above the vacuum floor."""
    return np.array([_support_cells(p) for p in tr])


def measure_waiting_time(tr: Trajectory, cells_tol: int = 2) -> float:
    """First snapshot time at which a support end has moved by more than ``cells_tol`` cells.

    Returns ``inf`` if that never happens within the trajectory.
    """
    lo0, hi0 = _support_cells(tr[0])
    if lo0 == 0 or hi0 == tr.grid.n - 1:
        raise ValueError("initial support must lie strictly inside the grid")
    for p in tr.snapshots[1:]:
        lo, hi = _support_cells(p)
        if lo0 - lo > cells_tol or hi - hi0 > cells_tol:
            return float(p.t)
    return math.inf


def cone_lag_times(tr: Trajectory, cells_tol: int = 3) -> tuple[float, float]:
    """First snapshot times at which the left and right support ends fall behind the light cone.

    While an interface carries a jump it moves at exactly ``c``; the end
    lags ``a - c t`` (or ``b + c t``) by more than ``cells_tol`` cells only
    once the interface value has dropped to zero. ``inf`` marks a side that
    never lags.
    """
    p0 = tr[0]
    lo0, hi0 = _support_cells(p0)
    e = tr.grid.edges
    a0, b0 = e[lo0], e[hi0 + 1]
    c, tol = tr.spec.c, cells_tol * tr.grid.dx
    t_l = t_r = math.inf
    for p in tr.snapshots[1:]:
        lo, hi = _support_cells(p)
        dt = p.t - p0.t
        if math.isinf(t_l) and e[lo] - (a0 - c * dt) > tol:
            t_l = float(p.t)
        if math.isinf(t_r) and (b0 + c * dt) - e[hi + 1] > tol:
            t_r = float(p.t)
    return t_l, t_r


def contact_time(tr: Trajectory, cells_tol: int = 3) -> tuple[float, str]:
    """Earliest light-cone lag of either interface as ``(time, side)``; ``(inf, "")`` if none."""
    t_l, t_r = cone_lag_times(tr, cells_tol)
    if math.isinf(min(t_l, t_r)):
        return math.inf, ""
    return (t_l, "left") if t_l <= t_r else (t_r, "right")


def sup_outside_cone(p: Profile, centre: float, eps: float, c: float, t0: float = 0.0) -> float:
    """Max of ``u`` over cells lying entirely in ``|x - centre| >= eps + c (t - t0)``."""
    r = eps + c * (p.t - t0)
    e = p.grid.edges
    outside = (e[:-1] - centre >= r) | (e[1:] - centre <= -r)
    return float(np.max(p.u[outside], initial=0.0))


def l1_distance(p: Profile, q: Profile) -> float:
    if p.grid != q.grid:
        raise ValueError("profiles live on different grids")
    return float(np.sum(np.abs(p.u - q.u)) * p.grid.dx)
