"""Snapshot overlays: a standalone matplotlib script plus the PNG it renders."""
from __future__ import annotations

import runpy
from pathlib import Path

_SCRIPT = '''"""Overlay of recorded snapshots; rerun with `python3 {name}` from this directory."""
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

HERE = Path(__file__).resolve().parent
ROUTES = {routes!r}
TITLE = {title!r}

fig, axes = plt.subplots(1, len(ROUTES), figsize=(5.5 * len(ROUTES), 4), squeeze=False)
for ax, route in zip(axes[0], ROUTES):
    index = json.loads((HERE / route / "index.json").read_text())
    cmap = plt.get_cmap("viridis")
    for k, entry in enumerate(index):
        data = np.loadtxt(HERE / route / entry["file"], delimiter=",", skiprows=1, ndmin=2)
        ax.plot(data[:, 0], data[:, 1], color=cmap(k / max(len(index) - 1, 1)),
                lw=1.2, label=f"t = {{entry['t']:.3g}}")
    ax.set_title(f"{{TITLE}} ({{route}})")
    ax.set_xlabel("x")
    ax.set_ylabel("u")
    ax.legend(fontsize=7, loc="upper right")
fig.tight_layout()
fig.savefig(HERE / {png!r}, dpi=120)
'''


def write_plot_script(out_dir: Path, routes: list[str], title: str,
                      name: str = "plot_snapshots.py", png: str = "snapshots.png") -> Path:
    """Write a script overlaying the snapshots listed in ``<route>/index.json``."""
    path = Path(out_dir) / name
    path.write_text(_SCRIPT.format(name=name, routes=list(routes), title=title, png=png))
    return path


def render(script: Path, png: str = "snapshots.png") -> Path:
    """Run an emitted plot script in-process and return the PNG it wrote."""
    import matplotlib

    matplotlib.use("Agg")
    ns = runpy.run_path(str(script), run_name="__main__")
    ns["plt"].close("all")
    return Path(script).parent / png
