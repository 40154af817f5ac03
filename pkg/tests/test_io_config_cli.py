import json
import math
from pathlib import Path

import numpy as np
import pytest

from fluxsat import io
from fluxsat.cli import main
from fluxsat.config import ConfigError, load_config, parse_config
from fluxsat.core import Grid, ModelSpec, Profile
from fluxsat.dual import to_dual
from fluxsat.experiments import analytic_bounds, output_dir, run_experiment
from fluxsat.jko import quantiles
from fluxsat.solver import SolverOptions, evolve

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

SMALL = """
[experiment]
name = small
route = all
t_end = 0.1
record_every = 0.05

[model]
equation = rhe

[datum]
kind = cos_squared
a = -1
b = 1
mass = 1

[grid]
x0 = -1.5
dx = 0.01
n = 300

[jko]
h = 0.05
n_q = 64

[diagnostics]
front_window = 0
"""


@pytest.fixture
def out_root(tmp_path, monkeypatch):
    root = tmp_path / "out"
    monkeypatch.setenv("FLUXSAT_OUT", str(root))
    return root


def _write_cfg(tmp_path, text=SMALL, name="small.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return path


# ------------------------------------------------------------- serialization


def test_profile_csv_roundtrip(tmp_path):
    g = Grid(-1.0, 0.1, 20)
    p = Profile(g, np.linspace(0, 1, 20) ** 3 / 3)
    io.write_profile(tmp_path / "p.csv", p)
    lines = (tmp_path / "p.csv").read_text().splitlines()
    assert lines[0] == "x,u" and len(lines) == 21
    q = io.read_profile(tmp_path / "p.csv")
    assert q.grid.n == 20 and q.grid.dx == pytest.approx(0.1, rel=1e-12)
    np.testing.assert_array_equal(q.u, p.u)  # 17 significant digits are exact for doubles


def test_read_profile_rejects_bad_files(tmp_path):
    (tmp_path / "h.csv").write_text("a,b\n0,1\n1,2\n")
    with pytest.raises(ValueError):
        io.read_profile(tmp_path / "h.csv")
    (tmp_path / "n.csv").write_text("x,u\n0,1\n1,2\n3,2\n")
    with pytest.raises(ValueError):
        io.read_profile(tmp_path / "n.csv")


def test_trajectory_roundtrip(tmp_path):
    spec = ModelSpec.rhe()
    g = Grid.on_interval(-1, 2, 0.01)
    p0 = Profile.from_function(g, lambda x: np.where((x >= 0) & (x <= 1), 1.0, 0.0))
    tr = evolve(spec, p0, 0.1, SolverOptions(record_every=0.05))
    index = io.write_trajectory(tmp_path / "tr", tr)
    assert [e["file"] for e in index] == ["snap_0000.csv", "snap_0001.csv", "snap_0002.csv"]
    meta = json.loads((tmp_path / "tr" / "index.json").read_text())
    assert set(meta[0]) == {"t", "file", "mass", "support_left", "support_right"}
    assert meta[0]["support_left"] == pytest.approx(0.0, abs=1e-12)
    back = io.read_trajectory(tmp_path / "tr", spec)
    assert back.times.tolist() == tr.times.tolist()
    for a, b in zip(back, tr):
        np.testing.assert_array_equal(a.u, b.u)


def test_dual_and_quantile_roundtrip(tmp_path):
    spec = ModelSpec.rhe()
    g = Grid.on_interval(-1, 2, 0.01)
    p = Profile.from_function(g, lambda x: np.where((x >= 0) & (x <= 1), 1.0 + x, 0.0))
    d = to_dual(spec, p, 50)
    io.write_dual(tmp_path / "d.csv", d)
    assert (tmp_path / "d.csv").read_text().startswith("eta,v\n")
    e = io.read_dual(tmp_path / "d.csv", spec)
    np.testing.assert_array_equal(e.v, d.v)
    assert (e.M, e.a_left, e.t, e.scale) == (d.M, d.a_left, d.t, d.scale)
    qf = quantiles(p, 32)
    io.write_quantiles(tmp_path / "q.csv", qf)
    assert (tmp_path / "q.csv").read_text().startswith("s,Q\n")
    r = io.read_quantiles(tmp_path / "q.csv")
    np.testing.assert_array_equal(r.Q, qf.Q)
    assert (r.M, r.left, r.right) == (qf.M, qf.left, qf.right)


# ------------------------------------------------------------------- config


def test_parse_small_config():
    cfg = parse_config(SMALL)
    assert cfg.name == "small" and cfg.route == "all" and cfg.spec.is_rhe
    assert cfg.grid == Grid(-1.5, 0.01, 300)
    assert cfg.datum.params == {"a": -1.0, "b": 1.0, "height": 1.0}
    assert cfg.initial_profile().mass == pytest.approx(1.0, rel=1e-12)
    assert cfg.jko_config().h == 0.05 and cfg.jko_config().n_q == 64


@pytest.mark.parametrize("edit, msg", [
    (("equation = rhe", "equation = heat"), "equation"),
    (("kind = cos_squared", "kind = spiral"), "datum kind"),
    (("route = all", "route = both"), "route"),
    (("t_end = 0.1", "t_end = -1"), "t_end"),
    (("dx = 0.01", "dx = fast"), "dx"),
    (("mass = 1", "mass = 1\nwidth = 2"), "width"),
    (("[diagnostics]", "[extras]"), "unknown section"),
    (("n = 300", ""), "'n'"),
])
def test_config_errors(edit, msg):
    with pytest.raises(ConfigError, match=msg):
        parse_config(SMALL.replace(*edit))


def test_custom_csv_datum_resolves_against_config_dir(tmp_path):
    (tmp_path / "u0.csv").write_text("x,u\n0,0\n0.5,2\n1,0\n")
    text = SMALL.replace("kind = cos_squared\na = -1\nb = 1\nmass = 1", "kind = custom_csv\nfile = u0.csv")
    cfg = load_config(_write_cfg(tmp_path, text))
    assert cfg.initial_profile().mass == pytest.approx(1.0, rel=1e-3)
    (tmp_path / "u0.csv").unlink()
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "small.cfg")


def test_missing_config_file(tmp_path, capsys):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.cfg")
    assert main(["run", str(tmp_path / "nope.cfg")]) == 2
    assert "cannot read config" in capsys.readouterr().err


def test_shipped_configs_parse():
    paths = sorted(CONFIGS.glob("*.cfg"))
    assert len(paths) >= 8
    for path in paths:
        cfg = load_config(path)
        assert cfg.name == path.stem


# ---------------------------------------------------------------------- cli


def test_output_dir_env_override(tmp_path, monkeypatch):
    cfg = parse_config(SMALL)
    monkeypatch.delenv("FLUXSAT_OUT", raising=False)
    assert output_dir(cfg) == Path("out") / "small"
    monkeypatch.setenv("FLUXSAT_OUT", str(tmp_path))
    assert output_dir(cfg) == tmp_path / "small"


def test_route_all_writes_artifacts_and_l1_table(tmp_path, out_root):
    cfg = load_config(_write_cfg(tmp_path))
    res = run_experiment(cfg, plot=True)
    out = out_root / "small"
    assert res.out_dir == out and res.ok
    for route in ("primal", "dual", "jko"):
        assert len(json.loads((out / route / "index.json").read_text())) == 3
    assert set(res.l1_table) == {"primal-dual", "primal-jko", "dual-jko"}
    table = (out / "l1_table.csv").read_text().splitlines()
    assert table[0] == "route_a,route_b,t,l1" and len(table) == 4
    summary = json.loads((out / "summary.json").read_text())
    assert summary["all_hold"] is True and all(c["holds"] for c in summary["checks"])
    assert (out / "plot_snapshots.py").is_file() and (out / "snapshots.png").stat().st_size > 0
    assert (out / "dual" / "mass_coordinates").is_dir() and (out / "jko" / "quantiles").is_dir()


def test_runs_are_deterministic(tmp_path, monkeypatch):
    path = _write_cfg(tmp_path)
    trees = []
    for k in range(2):
        root = tmp_path / f"run{k}"
        monkeypatch.setenv("FLUXSAT_OUT", str(root))
        assert main(["run", str(path), "--no-plot"]) == 0
        trees.append({f.relative_to(root): f.read_bytes() for f in sorted(root.rglob("*")) if f.is_file()})
    assert trees[0].keys() == trees[1].keys() and len(trees[0]) > 10
    assert all(trees[0][k] == trees[1][k] for k in trees[0])


def test_fig1_run_via_cli(out_root, capsys):
    assert main(["run", str(CONFIGS / "fig1.cfg"), "--no-plot"]) == 0
    index = json.loads((out_root / "fig1" / "primal" / "index.json").read_text())
    assert [round(e["t"], 12) for e in index] == [0.0, 0.1, 0.2, 0.3, 0.4, 0.5]
    assert all(abs(e["mass"] - 1.0) < 1e-12 for e in index)
    assert "[ok  ] fig1: jump_extinction" in capsys.readouterr().out


def test_failing_bound_gives_exit_1(tmp_path, out_root, capsys):
    # a tolerance wider than the grid hides all support growth, so the triangle's
    # immediate spreading cannot be seen and its check must fail
    text = SMALL.replace("equation = rhe", "equation = flpme\nm = 1").replace("route = all", "route = primal")
    text = text.replace("kind = cos_squared\na = -1\nb = 1\nmass = 1", "kind = triangle\na = -0.5\nb = 0.5")
    text += "waiting_cells = 1000\n"
    assert main(["run", str(_write_cfg(tmp_path, text)), "--no-plot"]) == 1
    assert "[FAIL] small: no_waiting_time" in capsys.readouterr().out
    summary = json.loads((out_root / "small" / "summary.json").read_text())
    assert summary["all_hold"] is False


def test_waiting_bound_for_triangle_squared():
    text = SMALL.replace("equation = rhe", "equation = flpme\nm = 1")
    text = text.replace("kind = cos_squared\na = -1\nb = 1\nmass = 1", "kind = triangle_squared\na = -0.5\nb = 0.5")
    # the squared unit tent is at most 16 x^2 (1-x)^2 on its support, with equality at the ends
    assert analytic_bounds(parse_config(text))["waiting_time"] == pytest.approx(1 / (2 * 3 * 16), rel=1e-6)


def test_bounds_command(capsys):
    assert main(["bounds", str(CONFIGS / "fig1.cfg")]) == 0
    data = json.loads(capsys.readouterr().out)
    assert data["name"] == "fig1"
    assert data["bounds"]["jump_extinction"] == pytest.approx(3.3302, abs=1e-3)


def test_barrier_command(tmp_path, capsys):
    out = tmp_path / "b.csv"
    args = ["barrier", str(CONFIGS / "fig2b_triangle_squared.cfg"), "WaitingSuper",
            "--param", "k_tilde=16", "--param", "a=0", "--param", "b=1", "--times", "0", "0.005", "--out", str(out)]
    assert main(args) == 0
    rows = np.loadtxt(out, delimiter=",", skiprows=1)
    assert out.read_text().startswith("t,x,u\n")
    cfg = load_config(CONFIGS / "fig2b_triangle_squared.cfg")
    assert rows.shape == (2 * cfg.grid.n, 3)
    at0 = rows[rows[:, 0] == 0]
    x = at0[:, 1]
    inside = (x > 0) & (x < 1)
    # at t = 0 the super-solution dominates the quartic witness k~ x^2 (1 - x)^2
    assert np.all(at0[inside, 2] >= 16 * x[inside] ** 2 * (1 - x[inside]) ** 2 - 1e-12)
    assert np.all(at0[~inside, 2] == 0)
    assert main(["barrier", str(CONFIGS / "fig1.cfg"), "WaitingSuper"]) == 2
    assert "k_tilde" in capsys.readouterr().err


def test_suite_on_empty_dir(tmp_path, capsys):
    assert main(["suite", str(tmp_path)]) == 2
    assert "no .cfg" in capsys.readouterr().err


def test_suite_reports_bad_config(tmp_path, out_root):
    _write_cfg(tmp_path, SMALL.replace("route = all", "route = primal"), "a.cfg")
    _write_cfg(tmp_path, SMALL.replace("equation = rhe", "equation = nope"), "b.cfg")
    assert main(["suite", str(tmp_path), "--no-plot"]) == 1
    assert (out_root / "small" / "summary.json").is_file()


def test_check_values_are_json_safe(tmp_path, out_root):
    cfg = load_config(_write_cfg(tmp_path, SMALL.replace("route = all", "route = primal")))
    run_experiment(cfg, plot=False)
    summary = json.loads((out_root / "small" / "summary.json").read_text())
    for c in summary["checks"]:
        for key in ("bound", "measured"):
            v = c[key]
            assert v is None or isinstance(v, str) or math.isfinite(v)
