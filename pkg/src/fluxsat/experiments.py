"""Run a configured experiment end to end and write its artifacts."""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import io
from .analytic import fit_k_tilde, jump_extinction_bound, supnorm_bound, traveling_wave, waiting_time_bound
from .config import ConfigError, ExperimentConfig
from .core import Profile
from .diagnostics import (contact_time, front_speed, interface_jumps, jump_extinction_time, l1_distance,
                          measure_waiting_time, sup_outside_cone)
from .dual import BlowUp, dual_evolve, from_dual, to_dual
from .jko import jko_run
from .plotting import render, write_plot_script
from .solver import SolverOptions, Trajectory, evolve

# cells of exact-wave Dirichlet data fed in at the left end for traveling-wave runs
_INFLOW_CELLS = 2


@dataclass
class Check:
    name: str
    bound: Optional[float]
    measured: Optional[float]
    holds: bool
    note: str = ""

    def __post_init__(self):
        self.holds = bool(self.holds)

    def as_dict(self) -> dict:
        return {"name": self.name, "bound": _num(self.bound), "measured": _num(self.measured),
                "holds": self.holds, "note": self.note}


def _num(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else ("inf" if x > 0 else "-inf" if x < 0 else "nan")


@dataclass
class ExperimentResult:
    out_dir: Path
    trajectories: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)
    l1_table: dict = field(default_factory=dict)
    dual_blowup: Optional[float] = None

    @property
    def ok(self) -> bool:
        return all(c.holds for c in self.checks)


def output_dir(cfg: ExperimentConfig) -> Path:
    root = os.environ.get("FLUXSAT_OUT")
    return (Path(root) if root else cfg.output_dir) / cfg.name


# ---------------------------------------------------------------- bounds


def analytic_bounds(cfg: ExperimentConfig) -> dict:
    """Closed-form bounds that apply to ``cfg``, keyed by name."""
    spec, datum, out = cfg.spec, cfg.datum, {}
    supp = datum.support()
    fn = datum.function(spec)
    if not spec.is_rhe and supp is not None:
        a, b = supp
        if datum.kind in ("quartic", "triangle_squared"):
            scale = 1.0 if datum.mass is None else datum.mass / Profile.from_function(cfg.grid, fn).mass
            k = scale * fit_k_tilde(fn, a, b)
            out["k_tilde"] = k
            out["waiting_time"] = waiting_time_bound(spec.m, k, a, b, spec.nu)
        if datum.kind == "block":
            alpha = float(cfg.initial_profile().u.max())
            d = cfg.diagnostics.extinction_d if cfg.diagnostics.extinction_d is not None else b
            out["jump_extinction"] = jump_extinction_bound(spec, alpha, b, d)
    if spec.is_rhe and cfg.diagnostics.supnorm_eps is not None:
        M = cfg.initial_profile().mass
        out["supnorm_at_t_end"] = supnorm_bound(M, cfg.diagnostics.supnorm_eps, spec.c, cfg.t_end)
    return out


# ---------------------------------------------------------------- routes


def _solver_options(cfg: ExperimentConfig) -> SolverOptions:
    if cfg.datum.kind != "traveling_wave":
        return cfg.solver
    w = traveling_wave(cfg.spec, cfg.datum.params["sigma"], cfg.datum.params["xi0"])
    xs = cfg.grid.centers[:_INFLOW_CELLS]
    return SolverOptions(cfg.solver.cfl, cfg.solver.limiter, cfg.solver.epsilon_visc,
                         cfg.record_every, lambda t: w(t, xs))


def run_primal(cfg: ExperimentConfig, p0: Profile) -> Trajectory:
    return evolve(cfg.spec, p0, cfg.t_end, _solver_options(cfg))


def run_dual(cfg: ExperimentConfig, p0: Profile) -> tuple[list, Trajectory, Optional[float]]:
    """Dual snapshots, their physical profiles on ``cfg.grid`` and the blow-up time if any."""
    if cfg.datum.kind == "traveling_wave":
        raise ConfigError("the dual route needs compactly supported data without inflow")
    ds = cfg.dual
    d0 = to_dual(cfg.spec, p0, ds.n_mass)
    t_star = None
    try:
        _, snaps = dual_evolve(d0, cfg.t_end, ds.eps, record_every=cfg.record_every,
                               contact_share=ds.contact_share, slope_threshold=ds.slope_threshold)
    except BlowUp as exc:
        t_star = exc.t_star
        snaps = list(exc.trajectory)
        if exc.final.t > snaps[-1].t:
            snaps.append(exc.final)
    profiles = [from_dual(s, cfg.grid) for s in snaps]
    return snaps, Trajectory(cfg.spec, profiles), t_star


def run_jko(cfg: ExperimentConfig, p0: Profile):
    jc = cfg.jko_config()
    n_steps = max(1, int(round(cfg.t_end / jc.h)))
    run = jko_run(p0, jc, n_steps, cfg.spec)
    every = cfg.record_every or cfg.t_end
    stride = max(1, int(round(every / jc.h)))
    keep = sorted(set(range(0, n_steps + 1, stride)) | {n_steps})
    tr = Trajectory(cfg.spec, [run.trajectory[k] for k in keep])
    return run, tr, keep


# ---------------------------------------------------------------- checks


def _primal_checks(cfg: ExperimentConfig, tr: Trajectory, bounds: dict, out: Path) -> list[Check]:
    spec, diag, checks = cfg.spec, cfg.diagnostics, []
    if cfg.datum.kind != "traveling_wave":
        M = tr.masses
        drift = float(np.max(np.abs(M - M[0])) / M[0])
        checks.append(Check("primal_mass_drift", 1e-12, drift, drift <= 1e-12))
    if cfg.datum.kind == "traveling_wave":
        w = traveling_wave(spec, cfg.datum.params["sigma"], cfg.datum.params["xi0"])
        fin = tr.final
        exact = Profile.from_function(fin.grid, lambda x: w(fin.t, x))
        err = float(np.sum(np.abs(fin.u - exact.u)) / np.sum(exact.u))
        checks.append(Check("traveling_wave_rel_l1", 0.02, err, err <= 0.02,
                            "relative L1 error against the exact translated wave"))
    if diag.front_window > 0 and len(tr) > diag.front_window and cfg.datum.kind != "traveling_wave":
        rep = front_speed(tr, diag.front_window, jump_threshold=diag.jump_threshold)
        (out / "front_report.json").write_text(rep.to_json() + "\n")
        res = rep.max_rh_residual()
        if math.isfinite(res):
            checks.append(Check("front_speed_residual", 0.05 * spec.c, res, res <= 0.05 * spec.c,
                                "|speed - c| while an interface jump persists"))
    if "waiting_time" in bounds:
        t_w = measure_waiting_time(tr, diag.waiting_cells)
        checks.append(Check("waiting_time", bounds["waiting_time"], t_w, t_w > bounds["waiting_time"],
                            "first snapshot with support growth must come after the bound"))
    if not spec.is_rhe and cfg.datum.kind == "triangle" and len(tr) > 1:
        t_w = measure_waiting_time(tr, diag.waiting_cells)
        checks.append(Check("no_waiting_time", float(tr[1].t), t_w, t_w <= tr[1].t,
                            "support must grow by the first recorded snapshot"))
    if "jump_extinction" in bounds:
        t_x = jump_extinction_time(tr, diag.jump_threshold)
        checks.append(Check("jump_extinction", bounds["jump_extinction"], t_x,
                            t_x <= bounds["jump_extinction"]))
    if spec.is_rhe and cfg.datum.kind == "block":
        sizes = []
        for p in tr:
            lj, rj = interface_jumps(p, diag.jump_threshold)
            sizes.append(min(abs(lj.size) if lj else 0.0, abs(rj.size) if rj else 0.0))
        floor = 0.1 * sizes[0]
        checks.append(Check("interface_jump_persists", floor, min(sizes), min(sizes) >= floor,
                            "smallest interface jump over all snapshots"))
    if spec.is_rhe and diag.supnorm_eps is not None:
        supp = cfg.datum.support()
        centre = 0.5 * (supp[0] + supp[1]) if supp else 0.0
        M0 = tr[0].mass
        worst = max(sup_outside_cone(p, centre, diag.supnorm_eps, spec.c, tr[0].t)
                    - supnorm_bound(M0, diag.supnorm_eps, spec.c, p.t - tr[0].t) for p in tr)
        checks.append(Check("supnorm_outside_cone", 0.0, worst, worst <= 0.0,
                            "largest excess of sup outside the cone over its bound"))
    return checks


# ---------------------------------------------------------------- driver


def run_experiment(cfg: ExperimentConfig, *, plot: bool = True) -> ExperimentResult:
    """Run every route requested by ``cfg`` and write its artifacts to :func:`output_dir`."""
    out = output_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    res = ExperimentResult(out)
    p0 = cfg.initial_profile()
    routes = ["primal", "dual", "jko"] if cfg.route == "all" else [cfg.route]
    bounds = analytic_bounds(cfg)
    mass_rows = []

    if "primal" in routes:
        tr = run_primal(cfg, p0)
        res.trajectories["primal"] = tr
        io.write_trajectory(out / "primal", tr)
        res.checks += _primal_checks(cfg, tr, bounds, out)

    if "dual" in routes:
        snaps, tr, t_star = run_dual(cfg, p0)
        res.trajectories["dual"] = tr
        res.dual_blowup = t_star
        io.write_trajectory(out / "dual", tr)
        for k, s in enumerate(snaps):
            io.write_dual(out / "dual" / "mass_coordinates" / f"dual_{k:04d}.csv", s)
        if "primal" in routes and not cfg.spec.is_rhe:
            t_c, _ = contact_time(res.trajectories["primal"])
            if t_star is not None and math.isfinite(t_c):
                rel = abs(t_star - t_c) / t_c
                res.checks.append(Check("contact_time_agreement", cfg.diagnostics.contact_tolerance, rel,
                                        rel <= cfg.diagnostics.contact_tolerance,
                                        f"dual blow-up {t_star:.6g}, primal contact {t_c:.6g}"))

    if "jko" in routes:
        run, tr, keep = run_jko(cfg, p0)
        res.trajectories["jko"] = tr
        io.write_trajectory(out / "jko", tr)
        for k in keep:
            io.write_quantiles(out / "jko" / "quantiles" / f"q_{k:04d}.csv", run.quantiles[k])
        ents = np.array(run.entropies)
        rise = float(np.max(np.diff(ents), initial=0.0))
        res.checks.append(Check("jko_entropy_rise", 0.0, rise, rise <= 1e-12 * max(1.0, abs(ents[0]))))
        h = cfg.jko_config().h
        disp = max((s.max_displacement for s in run.steps), default=0.0)
        res.checks.append(Check("jko_max_displacement", cfg.spec.c * h, disp,
                                disp <= cfg.spec.c * h * (1 + 1e-12)))

    for route, tr in res.trajectories.items():
        mass_rows += [(route, float(p.t), p.mass) for p in tr]
    io.write_series(out / "mass.csv", ("route", "t", "mass"), mass_rows)

    if len(res.trajectories) > 1:
        names = list(res.trajectories)  # route order: primal, dual, jko
        rows = []
        for i, a in enumerate(names):
            for b in names[i + 1:]:
                # latest time recorded by both routes
                ta, tb = res.trajectories[a].times, res.trajectories[b].times
                common = [t for t in ta if np.min(np.abs(tb - t)) <= 1e-9 * max(1.0, abs(t))]
                t = max(common)
                dist = l1_distance(res.trajectories[a].at(t), res.trajectories[b].at(t))
                res.l1_table[f"{a}-{b}"] = dist
                rows.append((a, b, float(t), dist))
        io.write_series(out / "l1_table.csv", ("route_a", "route_b", "t", "l1"), rows)

    io.dump_json(out / "summary.json", {
        "name": cfg.name,
        "model": {"equation": cfg.spec.kind.value, "m": cfg.spec.m, "nu": cfg.spec.nu, "c": cfg.spec.c},
        "routes": routes,
        "bounds": {k: _num(v) for k, v in bounds.items()},
        "checks": [c.as_dict() for c in res.checks],
        "l1_final": {k: _num(v) for k, v in res.l1_table.items()},
        "dual_blowup_time": _num(res.dual_blowup),
        "all_hold": res.ok,
    })
    if plot:
        script = write_plot_script(out, list(res.trajectories), cfg.name)
        render(script)
    return res
