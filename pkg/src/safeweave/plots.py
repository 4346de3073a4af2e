"""Report figures rendered to files alongside the delimited trial output:
the value trace with its safety buffer, and the top-down trajectory view."""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .geometry import OrientedBox
from .sim import ScenarioConfig, TrialLog

__all__ = ["plot_v_trace", "plot_trajectory"]

_MODE_COLORS = {"tracking": "tab:red", "filtered": "tab:blue", "switching": "tab:orange"}


def _color(label, i):
    return _MODE_COLORS.get(label, f"C{i}")


def plot_v_trace(logs: dict, eps: float, out_path, title=None) -> None:
    """Cached game value over time for one or more trials, with the safety
    buffer line and constraint-active shading."""
    fig, ax = plt.subplots(figsize=(7.0, 3.4))
    for i, (label, log) in enumerate(logs.items()):
        t = log.data["t"]
        v = log.data["value"]
        ax.plot(t, v, label=label, color=_color(label, i), lw=1.4)
        active = log.data["active"] > 0.5
        if active.any():
            ax.fill_between(t, ax.get_ylim()[0], v, where=active, alpha=0.12, color=_color(label, i))
    ax.axhline(eps, color="k", ls="--", lw=0.9, label=f"buffer {eps:g}")
    ax.axhline(0.0, color="k", lw=0.6, alpha=0.5)
    ax.set_xlabel("time [s]")
    ax.set_ylabel("value [m]")
    if title:
        ax.set_title(title)
    ax.legend(loc="best", fontsize=8)
    ax.grid(alpha=0.25)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)


def _draw_boxes(ax, log, cfg, color, every_s=1.0):
    t = log.data["t"]
    step = max(int(round(every_s / max(t[1] - t[0], 1e-9))), 1) if len(t) > 1 else 1
    for i in range(0, len(t), step):
        for prefix, (ln, wd), style in (
            ("robot", (cfg.robot_box_length, cfg.robot_box_width), "-"),
            ("human", (cfg.human_box_length, cfg.human_box_width), "--"),
        ):
            box = OrientedBox(
                log.data[f"{prefix}_x"][i], log.data[f"{prefix}_y"][i],
                log.data[f"{prefix}_psi"][i], ln, wd,
            )
            corners = np.vstack([box.corners(), box.corners()[:1]])
            ax.plot(corners[:, 0], corners[:, 1], style, color=color if prefix == "robot" else "0.4",
                    lw=0.7, alpha=0.6)


def plot_trajectory(logs: dict, cfg: ScenarioConfig, out_path, title=None) -> None:
    """Top-down paths of both cars with lane markings and periodic box
    outlines (human outlines dashed gray)."""
    fig, ax = plt.subplots(figsize=(9.0, 3.2))
    w = cfg.lane_width
    xmax = max(float(log.data["robot_x"].max()) for log in logs.values()) + 10.0
    for y, style in ((-0.5 * w, "-"), (0.5 * w, "--"), (1.5 * w, "-")):
        ax.axhline(y, color="0.7", ls=style, lw=0.8)
    for i, (label, log) in enumerate(logs.items()):
        c = _color(label, i)
        ax.plot(log.data["robot_x"], log.data["robot_y"], color=c, lw=1.5, label=f"robot ({label})")
        _draw_boxes(ax, log, cfg, c, every_s=1.5)
    first = next(iter(logs.values()))
    ax.plot(first.data["human_x"], first.data["human_y"], color="0.3", lw=1.2, ls="--", label="human")
    ax.set_xlim(-5.0, min(xmax, cfg.track_length + 15.0))
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_aspect("equal", adjustable="datalim")
    if title:
        ax.set_title(title)
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
