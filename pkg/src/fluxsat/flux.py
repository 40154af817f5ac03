"""Saturated fluxes, their Lagrangians and the relativistic transport costs.

Gradients are passed through the model's surrogate variable ``xi``: ``u_x``
for RHE and ``(u^m)_x`` for FLPME. All functions broadcast over numpy arrays.
"""
from __future__ import annotations

import numpy as np

from .core import U_FLOOR, EmptyProfile, ModelSpec, NegativeDensity, Profile, VacuumDensity


def _check_z(z):
    z = np.asarray(z, dtype=float)
    if np.any(z < 0):
        idx = int(np.argmax(np.ravel(z) < 0))
        raise NegativeDensity(idx, float(np.ravel(z)[idx]))
    return z


def flux_a(spec: ModelSpec, z, xi):
    """Flux ``a(z, xi)``; always bounded by ``c*z`` in absolute value."""
    z = _check_z(z)
    xi = np.asarray(xi, dtype=float)
    r = spec.nu / spec.c
    if spec.is_rhe:
        safe = np.where(z > U_FLOOR, z, 1.0)
        out = np.where(z > U_FLOOR, spec.nu * safe * xi / np.sqrt(safe**2 + (r * xi) ** 2), 0.0)
    else:
        out = spec.nu * z * xi / np.sqrt(1.0 + (r * xi) ** 2)
    return out[()] if out.ndim == 0 else out


def flux_b(spec: ModelSpec, z, xi):
    """Velocity ``b = a / z``; bounded by ``c``."""
    z = _check_z(z)
    if np.any(z <= U_FLOOR):
        raise VacuumDensity("flux_b is undefined at vacuum")
    xi = np.asarray(xi, dtype=float)
    r = spec.nu / spec.c
    if spec.is_rhe:
        # nu*xi/sqrt(z^2 + r^2 xi^2), written to stay finite as xi -> inf
        out = spec.nu * np.sign(xi) / np.sqrt((z / np.where(xi == 0, 1.0, xi)) ** 2 + r**2)
        out = np.where(xi == 0, 0.0, out)
    else:
        out = spec.nu * xi / np.sqrt(1.0 + (r * xi) ** 2)
    return out[()] if np.ndim(out) == 0 else out


def lagrangian(spec: ModelSpec, z, xi):
    """Convex potential ``f`` with ``df/dxi = flux_a``.

    RHE: ``(c^2/nu) z sqrt(z^2 + (nu/c)^2 xi^2)``; FLPME (in the ``(u^m)_x``
    variable): ``(c^2/nu) z sqrt(1 + (nu/c)^2 xi^2)``.
    """
    z = _check_z(z)
    xi = np.asarray(xi, dtype=float)
    r = spec.nu / spec.c
    base = z**2 if spec.is_rhe else 1.0
    return spec.c**2 / spec.nu * z * np.sqrt(base + (r * xi) ** 2)


def flux_h(spec: ModelSpec, z, xi):
    """Dissipation density ``h = a * xi`` (non-negative)."""
    return flux_a(spec, z, xi) * np.asarray(xi, dtype=float)


def cost_k(z, c: float = 1.0):
    """Relativistic transport cost; ``+inf`` outside the light cone ``|z| > c``."""
    z = np.abs(np.asarray(z, dtype=float))
    inside = z <= c
    zz = np.where(inside, z, 0.0)
    out = np.where(inside, c**2 * (1.0 - np.sqrt(np.maximum(1.0 - (zz / c) ** 2, 0.0))), np.inf)
    return out[()] if out.ndim == 0 else out


def cost_k_star(xi, c: float = 1.0):
    """Legendre dual of :func:`cost_k`: ``c^2 (sqrt(1 + xi^2/c^2) - 1)``."""
    xi = np.asarray(xi, dtype=float)
    return c**2 * (np.sqrt(1.0 + (xi / c) ** 2) - 1.0)


def diffusivity_bound(spec: ModelSpec, u_max: float) -> float:
    """Upper bound on ``d flux / d u_x`` for densities up to ``u_max``."""
    if spec.is_rhe:
        return spec.nu
    return spec.nu * spec.m * u_max**spec.m


def stable_dt(spec: ModelSpec, p: Profile, cfl: float = 0.4) -> float:
    """Explicit step bound ``cfl * min(dx/c, dx^2 / (2 D_max))``."""
    if not 0 < cfl < 1:
        raise ValueError(f"cfl must lie in (0, 1), got {cfl}")
    if p.u.size == 0:
        raise EmptyProfile("profile has no cells")
    dx = p.grid.dx
    d_max = diffusivity_bound(spec, float(np.max(p.u)))
    diff = dx * dx / (2.0 * d_max) if d_max > 0 else np.inf
    return cfl * min(dx / spec.c, diff)
