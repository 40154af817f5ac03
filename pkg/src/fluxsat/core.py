"""Domain types shared by every route: model constants, grids, profiles.

Everything here is an immutable value. Arrays held by :class:`Profile` are
flagged read-only so that a profile handed to one solver cannot be mutated
behind another one's back.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

#: Densities at or below this value are treated as exact vacuum.
U_FLOOR = 1e-12


class FluxSatError(Exception):
    """Base class for all errors raised by this package."""


class NegativeDensity(FluxSatError, ValueError):
    def __init__(self, index: int, value: float | None = None):
        self.index = index
        self.value = value
        super().__init__(f"negative density at cell {index}" + ("" if value is None else f" ({value!r})"))


class BadExponent(FluxSatError, ValueError):
    pass


class NonPositiveConstant(FluxSatError, ValueError):
    pass


class VacuumDensity(FluxSatError, ValueError):
    pass


class EmptyProfile(FluxSatError, ValueError):
    pass


class Model(str, enum.Enum):
    RHE = "RHE"
    FLPME = "FLPME"


@dataclass(frozen=True)
class ModelSpec:
    """Which equation is solved and with which constants.

    ``m`` is the porous-medium exponent; it is 0 for the relativistic heat
    equation and at least 1 for the flux-limited porous-medium equation.
    """

    kind: Model
    m: float = 0.0
    nu: float = 1.0
    c: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", Model(self.kind))
        _check_spec(self)

    @classmethod
    def rhe(cls, nu: float = 1.0, c: float = 1.0) -> "ModelSpec":
        return cls(Model.RHE, 0.0, nu, c)

    @classmethod
    def flpme(cls, m: float, nu: float = 1.0, c: float = 1.0) -> "ModelSpec":
        return cls(Model.FLPME, m, nu, c)

    @property
    def is_rhe(self) -> bool:
        return self.kind is Model.RHE

    @property
    def dual_exponent(self) -> float:
        """Exponent ``m`` entering the dual flux (0 for RHE)."""
        return 0.0 if self.is_rhe else float(self.m)

    @property
    def dual_nu(self) -> float:
        """Effective diffusivity of the dual equation: nu for RHE, nu*m for FLPME."""
        return self.nu if self.is_rhe else self.nu * self.m


def _check_spec(spec: ModelSpec) -> None:
    if spec.kind is Model.RHE and spec.m != 0:
        raise BadExponent(f"RHE requires m=0, got m={spec.m}")
    if spec.kind is Model.FLPME and not spec.m >= 1:
        raise BadExponent(f"FLPME requires m>=1, got m={spec.m}")
    if not (spec.nu > 0 and math.isfinite(spec.nu)):
        raise NonPositiveConstant(f"nu must be positive, got {spec.nu}")
    if not (spec.c > 0 and math.isfinite(spec.c)):
        raise NonPositiveConstant(f"c must be positive, got {spec.c}")


@dataclass(frozen=True)
class Grid:
    """Uniform cell-centred grid; cell ``i`` covers ``[x0 + i*dx, x0 + (i+1)*dx]``."""

    x0: float
    dx: float
    n: int

    def __post_init__(self):
        if not self.dx > 0:
            raise ValueError(f"dx must be positive, got {self.dx}")
        if int(self.n) != self.n or self.n < 3:
            raise ValueError(f"need at least 3 cells, got n={self.n}")
        object.__setattr__(self, "n", int(self.n))

    @classmethod
    def on_interval(cls, a: float, b: float, dx: float) -> "Grid":
        n = int(round((b - a) / dx))
        return cls(a, (b - a) / n, n)

    @property
    def x1(self) -> float:
        return self.x0 + self.n * self.dx

    @property
    def centers(self) -> np.ndarray:
        return self.x0 + (np.arange(self.n) + 0.5) * self.dx

    @property
    def edges(self) -> np.ndarray:
        return self.x0 + np.arange(self.n + 1) * self.dx

    def index_of(self, x: float) -> int:
        return int(np.clip(np.floor((x - self.x0) / self.dx), 0, self.n - 1))


def _frozen_array(a) -> np.ndarray:
    arr = np.array(a, dtype=float, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Profile:
    """Cell averages ``u`` on ``grid`` at time ``t``.

    Construction does not check the sign of ``u``; call :func:`validate`.
    """

    grid: Grid
    u: np.ndarray = field(repr=False)
    t: float = 0.0

    def __post_init__(self):
        u = _frozen_array(self.u)
        if u.shape != (self.grid.n,):
            raise ValueError(f"expected {self.grid.n} cell values, got shape {u.shape}")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "t", float(self.t))

    @classmethod
    def from_function(cls, grid: Grid, fn, t: float = 0.0, quad: int = 8) -> "Profile":
        """Cell averages of ``fn`` by ``quad``-point Gauss-Legendre quadrature per cell."""
        nodes, weights = np.polynomial.legendre.leggauss(quad)
        xl = grid.edges[:-1, None]
        xs = xl + 0.5 * grid.dx * (nodes[None, :] + 1.0)
        vals = np.asarray(fn(xs), dtype=float)
        return cls(grid, 0.5 * (vals * weights).sum(axis=1), t)

    @property
    def x(self) -> np.ndarray:
        return self.grid.centers

    @property
    def mass(self) -> float:
        return float(self.u.sum() * self.grid.dx)

    def with_values(self, u, t: float | None = None) -> "Profile":
        return replace(self, u=u, t=self.t if t is None else t)


def validate(spec: ModelSpec, p: Profile) -> None:
    """Raise if ``spec`` or ``p`` violates an invariant; return ``None`` otherwise."""
    _check_spec(spec)
    u = p.u
    if not np.all(np.isfinite(u)):
        bad = int(np.flatnonzero(~np.isfinite(u))[0])
        raise NegativeDensity(bad, float(u[bad]))
    neg = np.flatnonzero(u < 0)
    if neg.size:
        raise NegativeDensity(int(neg[0]), float(u[neg[0]]))
    if p.t < 0:
        raise ValueError(f"negative time {p.t}")


def rescale(spec: ModelSpec, K: float, L: float, T: float) -> ModelSpec:
    """Constants of the equation solved by ``K * u(T t, L x)``.

    Uses ``nu' = nu T / (K^m L^2)`` and ``(nu'/c')^2 = nu^2 / (c^2 L^2 K^(2m))``,
    which together give ``c' = c T / L``.
    """
    if not (K > 0 and L > 0 and T > 0):
        raise NonPositiveConstant("K, L and T must be positive")
    m = spec.m
    nu = spec.nu * T / (K**m * L**2)
    c = nu * spec.c * L * K**m / spec.nu
    return replace(spec, nu=nu, c=c)
