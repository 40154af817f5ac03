"""Experiment configuration files and the initial-data catalog.

Configs are ``key = value`` lines grouped under ``[section]`` headers::

    [experiment]
    name = fig1
    route = primal
    t_end = 0.5
    record_every = 0.1

    [model]
    equation = flpme
    m = 4

    [datum]
    kind = block
    a = 0
    b = 1

    [grid]
    x0 = -1
    dx = 0.002
    n = 1500
"""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .core import FluxSatError, Grid, ModelSpec, Profile
from .jko import Entropy, JkoConfig
from .solver import SolverOptions


class ConfigError(FluxSatError, ValueError):
    pass


ROUTES = ("primal", "dual", "jko", "all")

#: kind -> default parameters; heights and widths are not fixed by any reference figure
DATUM_DEFAULTS: dict[str, dict[str, float]] = {
    "block": {"a": 0.0, "b": 1.0, "height": 1.0},
    "triangle": {"a": 0.0, "b": 1.0, "height": 1.0},
    "triangle_squared": {"a": 0.0, "b": 1.0, "height": 1.0},
    "cos_squared": {"a": 0.0, "b": math.pi, "height": 1.0},
    "quartic": {"a": 0.0, "b": 1.0, "k_tilde": 1.0},
    "traveling_wave": {"sigma": 0.6, "xi0": 0.0},
    "custom_csv": {},
}

_SECTIONS = {
    "experiment": {"name", "route", "t_end", "record_every", "output_dir"},
    "model": {"equation", "m", "nu", "c"},
    "datum": None,  # keys depend on the kind
    "grid": {"x0", "dx", "n"},
    "solver": {"cfl", "limiter", "epsilon_visc"},
    "dual": {"n_mass", "eps", "contact_share", "slope_threshold"},
    "jko": {"h", "n_q", "entropy", "max_inner_iters", "grad_tol"},
    "diagnostics": {"front_window", "jump_threshold", "waiting_cells", "supnorm_eps",
                    "extinction_d", "contact_tolerance"},
}


@dataclass(frozen=True)
class Datum:
    kind: str
    params: dict = field(default_factory=dict)
    file: Optional[Path] = None
    mass: Optional[float] = None  # rescale to this mass when given

    def function(self, spec: ModelSpec) -> Callable[[np.ndarray], np.ndarray]:
        """Initial density as a function of ``x``."""
        p = self.params
        k = self.kind
        if k == "custom_csv":
            from .io import read_samples

            xs, us = read_samples(self.file)
            return lambda x: np.interp(x, xs, us, left=0.0, right=0.0)
        if k == "traveling_wave":
            from .analytic import traveling_wave

            w = traveling_wave(spec, p["sigma"], p["xi0"])
            return lambda x: w(0.0, x)
        a, b = p["a"], p["b"]
        if not b > a:
            raise ConfigError(f"datum needs b > a, got a={a}, b={b}")

        def inside(x):
            return (x >= a) & (x <= b)

        if k == "block":
            return lambda x: np.where(inside(x), p["height"], 0.0)
        if k in ("triangle", "triangle_squared"):
            power = 1 if k == "triangle" else 2

            def tent(x):
                r = 1.0 - np.abs(2.0 * (x - a) / (b - a) - 1.0)
                return np.where(inside(x), p["height"] * np.maximum(r, 0.0) ** power, 0.0)

            return tent
        if k == "cos_squared":
            return lambda x: np.where(inside(x), p["height"] * np.cos(x) ** 2, 0.0)
        if k == "quartic":
            return lambda x: np.where(inside(x), p["k_tilde"] * (x - a) ** 2 * (b - x) ** 2, 0.0)
        raise ConfigError(f"unknown datum kind {k!r}")

    def support(self) -> Optional[tuple[float, float]]:
        if "a" in self.params and "b" in self.params:
            return self.params["a"], self.params["b"]
        return None


@dataclass(frozen=True)
class Diagnostics:
    front_window: int = 10  # 0 disables the front report
    jump_threshold: float = 0.25
    waiting_cells: int = 2
    supnorm_eps: Optional[float] = None  # checks the sup-norm decay bound when set
    extinction_d: Optional[float] = None  # jump position for the extinction bound
    contact_tolerance: float = 0.2


@dataclass(frozen=True)
class DualSettings:
    n_mass: int = 500
    eps: float = 1e-4
    contact_share: float = 0.5
    slope_threshold: Optional[float] = None


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    spec: ModelSpec
    datum: Datum
    grid: Grid
    t_end: float
    record_every: Optional[float] = None
    route: str = "primal"
    output_dir: Path = Path("out")
    solver: SolverOptions = SolverOptions()
    dual: DualSettings = DualSettings()
    jko: Optional[JkoConfig] = None
    diagnostics: Diagnostics = Diagnostics()
    source: Optional[Path] = None

    def initial_profile(self) -> Profile:
        p = Profile.from_function(self.grid, self.datum.function(self.spec))
        if self.datum.mass is not None:
            if not p.mass > 0:
                raise ConfigError("cannot rescale a datum without mass")
            p = p.with_values(p.u * (self.datum.mass / p.mass))
        return p

    def jko_config(self) -> JkoConfig:
        if self.jko is not None:
            return self.jko
        if self.spec.is_rhe:
            return JkoConfig()
        return JkoConfig(entropy=Entropy.TSALLIS, m=self.spec.m)


def _get(sec, key, conv, default=None, required=False):
    if key not in sec:
        if required:
            raise ConfigError(f"[{sec.name}] is missing required key {key!r}")
        return default
    raw = sec[key].strip()
    try:
        return conv(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{sec.name}] {key} = {raw!r}: {exc}") from None


def _flag_unknown(cp: configparser.ConfigParser):
    for name in cp.sections():
        if name not in _SECTIONS:
            raise ConfigError(f"unknown section [{name}]")
        allowed = _SECTIONS[name]
        if allowed is None:
            continue
        extra = set(cp[name]) - allowed
        if extra:
            raise ConfigError(f"[{name}] has unknown keys {sorted(extra)}")


def parse_config(text: str, base_dir: Path = Path(".")) -> ExperimentConfig:
    """Build an :class:`ExperimentConfig` from config text.

    A relative data file resolves against ``base_dir``; ``output_dir`` against the working directory.
    """
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    _flag_unknown(cp)
    for req in ("experiment", "model", "datum", "grid"):
        if req not in cp:
            raise ConfigError(f"missing section [{req}]")
    ex, mo, da, gr = cp["experiment"], cp["model"], cp["datum"], cp["grid"]

    eq = _get(mo, "equation", str.lower, required=True)
    nu = _get(mo, "nu", float, 1.0)
    c = _get(mo, "c", float, 1.0)
    try:
        if eq == "rhe":
            spec = ModelSpec.rhe(nu, c)
        elif eq == "flpme":
            spec = ModelSpec.flpme(_get(mo, "m", float, required=True), nu, c)
        else:
            raise ConfigError(f"equation must be rhe or flpme, got {eq!r}")
    except FluxSatError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"[model] {exc}") from None

    kind = _get(da, "kind", str.lower, required=True)
    if kind not in DATUM_DEFAULTS:
        raise ConfigError(f"unknown datum kind {kind!r}; choose from {sorted(DATUM_DEFAULTS)}")
    params = dict(DATUM_DEFAULTS[kind])
    file = None
    mass = None
    for key in da:
        if key == "kind":
            continue
        if key == "file":
            file = (base_dir / da[key].strip()).resolve()
        elif key == "mass":
            mass = _get(da, key, float)
        elif key in params:
            params[key] = _get(da, key, float)
        else:
            raise ConfigError(f"[datum] key {key!r} does not apply to kind {kind!r}")
    if kind == "custom_csv":
        if file is None:
            raise ConfigError("[datum] custom_csv needs a file")
        if not file.is_file():
            raise ConfigError(f"[datum] initial data file not found: {file}")
    if kind == "traveling_wave" and spec.is_rhe:
        raise ConfigError("traveling_wave data need equation = flpme")

    try:
        grid = Grid(_get(gr, "x0", float, required=True), _get(gr, "dx", float, required=True),
                    _get(gr, "n", int, required=True))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"[grid] {exc}") from None

    t_end = _get(ex, "t_end", float, required=True)
    if not t_end > 0:
        raise ConfigError("t_end must be positive")
    route = _get(ex, "route", str.lower, "primal")
    if route not in ROUTES:
        raise ConfigError(f"route must be one of {ROUTES}, got {route!r}")
    record = _get(ex, "record_every", float)
    out = Path(_get(ex, "output_dir", str, "out"))

    try:
        solver = SolverOptions(record_every=record, **{
            k: _get(cp["solver"], k, conv) for k, conv in
            (("cfl", float), ("limiter", str), ("epsilon_visc", float)) if k in cp["solver"]
        }) if "solver" in cp else SolverOptions(record_every=record)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"[solver] {exc}") from None

    dual = DualSettings()
    if "dual" in cp:
        s = cp["dual"]
        dual = DualSettings(_get(s, "n_mass", int, 500), _get(s, "eps", float, 1e-4),
                            _get(s, "contact_share", float, 0.5), _get(s, "slope_threshold", float))

    jko = None
    if "jko" in cp:
        s = cp["jko"]
        ent = _get(s, "entropy", str.lower, "boltzmann" if spec.is_rhe else "tsallis")
        try:
            jko = JkoConfig(
                h=_get(s, "h", float, 0.01),
                entropy=ent.capitalize(),
                m=spec.m if not spec.is_rhe else 1.0,
                n_q=_get(s, "n_q", int, 256),
                max_inner_iters=_get(s, "max_inner_iters", int, 200),
                grad_tol=_get(s, "grad_tol", float, 1e-9),
            )
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"[jko] {exc}") from None

    diag = Diagnostics()
    if "diagnostics" in cp:
        s = cp["diagnostics"]
        diag = Diagnostics(
            front_window=_get(s, "front_window", int, 10),
            jump_threshold=_get(s, "jump_threshold", float, 0.25),
            waiting_cells=_get(s, "waiting_cells", int, 2),
            supnorm_eps=_get(s, "supnorm_eps", float),
            extinction_d=_get(s, "extinction_d", float),
            contact_tolerance=_get(s, "contact_tolerance", float, 0.2),
        )

    return ExperimentConfig(
        name=_get(ex, "name", str, required=True), spec=spec, datum=Datum(kind, params, file, mass),
        grid=grid, t_end=t_end, record_every=record, route=route, output_dir=out, solver=solver,
        dual=dual, jko=jko, diagnostics=diag,
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    cfg = parse_config(text, path.parent)
    return ExperimentConfig(**{**cfg.__dict__, "source": path})
