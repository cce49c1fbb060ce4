"""Static SVG plots of a simulation log: path, speed, accelerations, and
the steering-equivalent angle."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .road import RoadMap
from .simulate import SimLog


def _new_axes(xlabel, ylabel):
    fig, ax = plt.subplots(figsize=(7.0, 4.0))
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(True, alpha=0.3)
    return fig, ax


def plot_path(log: SimLog, road: RoadMap | None, path: Path) -> None:
    fig, ax = _new_axes("x [m]", "y [m]")
    if road is not None:
        for lane in road.lanes.values():
            ax.plot(*lane.centerline.points.T, color="green", lw=0.8, alpha=0.6)
            ax.plot(*lane.boundary_left.points.T, color="steelblue", lw=0.6, alpha=0.6)
            ax.plot(*lane.boundary_right.points.T, color="steelblue", lw=0.6, alpha=0.6)
    ax.plot(log.column("ego_x"), log.column("ego_y"), color="black", lw=1.6, label="ego")
    for vid in log.vehicle_ids:
        ax.plot(
            log.column(f"{vid}_x"), log.column(f"{vid}_y"), lw=1.0, alpha=0.8, label=vid
        )
    ax.legend(loc="best", fontsize=8)
    ax.set_aspect("equal", adjustable="datalim")
    fig.savefig(path, format="svg", bbox_inches="tight")
    plt.close(fig)


def plot_velocity(log: SimLog, path: Path) -> None:
    fig, ax = _new_axes("t [s]", "v [m/s]")
    ax.plot(log.column("t"), log.column("ego_v"), color="black")
    fig.savefig(path, format="svg", bbox_inches="tight")
    plt.close(fig)


def plot_acceleration(log: SimLog, path: Path) -> None:
    fig, ax = _new_axes("t [s]", "a [m/s^2]")
    ax.plot(log.column("t"), log.column("ego_a_lon"), color="tab:blue", label="longitudinal")
    ax.plot(log.column("t"), log.column("ego_a_lat"), color="tab:red", label="lateral")
    ax.legend(loc="best", fontsize=8)
    fig.savefig(path, format="svg", bbox_inches="tight")
    plt.close(fig)


def plot_steering(log: SimLog, path: Path) -> None:
    fig, ax = _new_axes("t [s]", "steering-equivalent [rad]")
    ax.plot(log.column("t"), log.column("ego_steer"), color="black")
    fig.savefig(path, format="svg", bbox_inches="tight")
    plt.close(fig)


def write_all(log: SimLog, road: RoadMap | None, out_dir) -> list[str]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for name, fn in (
        ("path.svg", lambda p: plot_path(log, road, p)),
        ("velocity.svg", lambda p: plot_velocity(log, p)),
        ("acceleration.svg", lambda p: plot_acceleration(log, p)),
        ("steering.svg", lambda p: plot_steering(log, p)),
    ):
        target = out / name
        fn(target)
        files.append(str(target))
    return files
