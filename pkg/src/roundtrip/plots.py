"""Static SVG figures for task outputs (needs matplotlib)."""
from __future__ import annotations

import logging
from pathlib import Path

import numpy as np

from . import io as rio

log = logging.getLogger(__name__)


def _pyplot():
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        log.warning("matplotlib not installed; skipping plots")
        return None
    # fixed metadata keeps the SVG bytes reproducible
    plt.rcParams["svg.hashsalt"] = "roundtrip"
    return plt


def _save(plt, fig, path: Path) -> Path:
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def eigen_spider(plt, eig_csv: Path) -> Path:
    _, rows = rio.read_csv(eig_csv)
    z = np.array([[float(r[0]), float(r[1])] for r in rows])
    fig, ax = plt.subplots(figsize=(4, 4))
    th = np.linspace(0, 2 * np.pi, 400)
    ax.plot(np.cos(th), np.sin(th), lw=0.8, color="0.6")
    for re, im in z:
        ax.plot([0, re], [0, im], lw=0.8, color="C0")
    ax.plot(z[:, 0], z[:, 1], "o", color="C1")
    ax.set_aspect("equal")
    ax.set_title("return-map eigenvalues")
    return _save(plt, fig, eig_csv.with_suffix(".svg"))


def sigma_graph(plt, sigma_csv: Path) -> Path:
    _, rows = rio.read_csv(sigma_csv)
    d = np.array([[float(v) for v in r] for r in rows])
    fig, ax = plt.subplots(figsize=(4, 4))
    ax.plot(d[:, 0], d[:, 1], ".", ms=2)
    ax.set_xlabel("t")
    ax.set_ylabel("sigma(t)")
    return _save(plt, fig, sigma_csv.with_suffix(".svg"))


def orbit_projection(plt, orbit_csv: Path) -> Path:
    _, states, _ = rio.read_orbit(orbit_csv)
    n = states.shape[1] // 2
    fig, ax = plt.subplots(figsize=(4, 4))
    if n >= 2:
        ax.plot(states[:, 0], states[:, 1])
        ax.set_xlabel("q0")
        ax.set_ylabel("q1")
    else:
        ax.plot(states[:, 0], states[:, 1])
        ax.set_xlabel("q")
        ax.set_ylabel("p")
    ax.set_aspect("equal", adjustable="datalim")
    return _save(plt, fig, orbit_csv.with_suffix(".svg"))


def block_curves(plt, bundle_dir: Path) -> Path:
    header, rows = rio.read_csv(bundle_dir / "L.csv")
    _, rows_t = rio.read_csv(bundle_dir / "Ltilde.csv")
    d = np.array([[float(v) for v in r] for r in rows])
    dt = np.array([[float(v) for v in r] for r in rows_t])
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for j, name in enumerate(header):
        if name.startswith("B"):
            ax.plot(d[:, 0], d[:, j], label=f"{name}")
            ax.plot(dt[:, 0], dt[:, j], "--", label=f"{name}~")
    ax.set_xlabel("t")
    ax.legend(fontsize=7)
    return _save(plt, fig, bundle_dir / "B_blocks.svg")


def plot_item(task: str, out: Path) -> list[Path]:
    plt = _pyplot()
    if plt is None:
        return []
    made = []
    for f in sorted(out.glob("eigenvalues_*.csv")):
        made.append(eigen_spider(plt, f))
    for name, fn in (("sigma.csv", sigma_graph), ("orbit.csv", orbit_projection),
                     ("flow.csv", orbit_projection)):
        if (out / name).exists():
            made.append(fn(plt, out / name))
    if (out / "pair0" / "L.csv").exists():
        made.append(block_curves(plt, out / "pair0"))
    return made
