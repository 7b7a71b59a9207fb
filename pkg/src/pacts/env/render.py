"""Top-down PNG rendering of PushBarrier states for the report CLI."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from matplotlib.patches import Circle, Polygon, Rectangle

from .pushbarrier import BLOCK_RECTS, EnvConfig, EnvState, block_corners

BLOCK_COLORS = {"t": "#888888", "l": "#557799"}


def draw_state(ax, state: EnvState, config: EnvConfig, trail: np.ndarray | None = None):
    cfg = config
    ax.set_xlim(0, cfg.workspace)
    ax.set_ylim(0, cfg.workspace)
    ax.set_aspect("equal")
    ax.set_xticks([])
    ax.set_yticks([])

    y0 = cfg.barrier_y - cfg.wall_half_thickness
    h = 2 * cfg.wall_half_thickness
    ax.add_patch(Rectangle((0, y0), cfg.door_x[0], h, color="#333333"))
    ax.add_patch(Rectangle((cfg.door_x[1], y0), cfg.workspace - cfg.door_x[1], h, color="#333333"))
    if not state.door_open:
        ax.add_patch(Rectangle((cfg.door_x[0], y0), cfg.door_x[1] - cfg.door_x[0], h, color="#aa3333"))

    ax.add_patch(
        Circle(cfg.button_center, cfg.button_radius, color="#33aa55" if state.button_pressed else "#bbddbb")
    )

    for key, pose, goal in (("t", state.t_pose, cfg.t_goal), ("l", state.l_pose, cfg.l_goal)):
        rects = BLOCK_RECTS[key]
        goal_corners = block_corners(np.asarray(goal, dtype=float), rects)
        for i in range(len(rects)):
            ax.add_patch(
                Polygon(goal_corners[4 * i : 4 * i + 4], closed=True, fill=False, edgecolor="#44aa44", ls="--")
            )
        corners = block_corners(pose, rects)
        for i in range(len(rects)):
            ax.add_patch(Polygon(corners[4 * i : 4 * i + 4], closed=True, color=BLOCK_COLORS[key], alpha=0.9))

    if trail is not None and len(trail):
        ax.plot(trail[:, 0], trail[:, 1], color="#dd8833", lw=0.8, alpha=0.8)
    ax.add_patch(Circle(state.agent_pos, cfg.agent_radius, color="#dd8833"))


def render_state(state: EnvState, config: EnvConfig, path, trail: np.ndarray | None = None):
    fig, ax = plt.subplots(figsize=(4, 4), dpi=110)
    draw_state(ax, state, config, trail)
    fig.tight_layout(pad=0.2)
    fig.savefig(path)
    plt.close(fig)
