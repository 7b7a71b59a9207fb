"""Deterministic 2D PushBarrier world.

A circular agent (the "finger") pushes a T block and an L block from start
regions below a horizontal barrier to goal poses above it. The barrier has a
door gap that only opens after the agent touches a button; while closed, the
door segment blocks the *blocks* (the finger itself can always pass, the way
an overhead pusher clears a low fence). Contacts are resolved quasi-statically:
per substep the deepest circle/rectangle penetration translates the block out
along the contact normal, and tangential finger motion while in contact drags
the block into rotation about its origin (high-friction contact on a
rotationally resistant support).

All dynamics are pure functions of (config, state, action); the environment
instance holds configuration only, so states can be shared freely.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import yaml

from ..errors import ConfigError

PREDICATE_NAMES = [
    "button_pressed",
    "door_open",
    "t_in_goal",
    "t_aligned",
    "l_in_goal",
    "l_aligned",
]

OBSERVATION_DIM = 12
ACTION_DIM = 2

# Block shapes as axis-aligned rectangles in the block frame: (cx, cy, half_w, half_h).
T_RECTS = ((0.0, 18.0, 36.0, 9.0), (0.0, -13.5, 9.0, 22.5))
L_RECTS = ((0.0, 0.0, 9.0, 36.0), (22.5, -27.0, 13.5, 9.0))
BLOCK_RECTS = {"t": T_RECTS, "l": L_RECTS}


def wrap_angle(theta: float) -> float:
    """Wrap to (-pi, pi]."""
    w = math.fmod(theta + math.pi, 2.0 * math.pi)
    if w <= 0.0:
        w += 2.0 * math.pi
    return w - math.pi


def rot2(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def block_corners(pose: np.ndarray, rects) -> np.ndarray:
    """World corners of every rectangle of a block, shape (n_rects*4, 2)."""
    r = rot2(pose[2])
    out = []
    for cx, cy, hw, hh in rects:
        local = np.array(
            [[cx - hw, cy - hh], [cx + hw, cy - hh], [cx + hw, cy + hh], [cx - hw, cy + hh]]
        )
        out.append(local @ r.T + pose[:2])
    return np.concatenate(out, axis=0)


def support_extent(pose_theta: float, rects, direction: np.ndarray) -> float:
    """Farthest extent of the block from its origin along a world direction."""
    r = rot2(pose_theta)
    best = 0.0
    for cx, cy, hw, hh in rects:
        for sx in (-1.0, 1.0):
            for sy in (-1.0, 1.0):
                corner = r @ np.array([cx + sx * hw, cy + sy * hh])
                best = max(best, float(corner @ direction))
    return best


def bounding_radius(rects) -> float:
    best = 0.0
    for cx, cy, hw, hh in rects:
        for sx in (-1.0, 1.0):
            for sy in (-1.0, 1.0):
                best = max(best, math.hypot(cx + sx * hw, cy + sy * hh))
    return best


@dataclass
class EnvConfig:
    """Geometry, tolerances and dynamics constants (workspace units / radians)."""

    workspace: float = 512.0
    agent_radius: float = 15.0
    agent_speed: float = 28.0  # per env step, split over substeps
    substeps: int = 4
    rot_inertia: float = 6000.0

    barrier_y: float = 256.0
    wall_half_thickness: float = 8.0
    door_x: tuple[float, float] = (186.0, 326.0)

    button_center: tuple[float, float] = (48.0, 48.0)
    button_radius: float = 30.0

    t_start: tuple[float, float, float] = (150.0, 150.0, 0.0)
    l_start: tuple[float, float, float] = (362.0, 150.0, 0.0)
    start_pos_jitter: float = 25.0
    start_angle_jitter: float = 0.5
    agent_start_x: tuple[float, float] = (40.0, 472.0)
    agent_start_y: tuple[float, float] = (40.0, 210.0)

    t_goal: tuple[float, float, float] = (140.0, 390.0, 0.0)
    l_goal: tuple[float, float, float] = (372.0, 390.0, 0.0)

    position_tolerance: float = 20.0
    angle_tolerance: float = math.radians(15.0)
    position_scale: float = 100.0  # reward decay length beyond tolerance
    angle_scale: float = math.radians(90.0)

    max_steps: int = 400

    def __post_init__(self):
        if self.position_tolerance <= 0 or self.angle_tolerance <= 0:
            raise ConfigError("tolerances must be positive")
        if self.substeps < 1:
            raise ConfigError("substeps must be >= 1")
        for goal in (self.t_goal, self.l_goal):
            if goal[1] <= self.barrier_y:
                raise ConfigError("goal poses must lie on the far side of the barrier")

    def save(self, path: str | Path) -> None:
        d = {k: list(v) if isinstance(v, tuple) else v for k, v in self.__dict__.items()}
        Path(path).write_text(yaml.safe_dump(d, sort_keys=True))

    @classmethod
    def load(cls, path: str | Path) -> "EnvConfig":
        raw = yaml.safe_load(Path(path).read_text())
        if not isinstance(raw, dict):
            raise ConfigError(f"environment config {path} is not a key-value mapping")
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown environment config keys: {sorted(unknown)}")
        kwargs = {k: tuple(v) if isinstance(v, list) else v for k, v in raw.items()}
        return cls(**kwargs)


@dataclass
class EnvState:
    """Full world state; never mutated by the environment."""

    agent_pos: np.ndarray  # (2,)
    t_pose: np.ndarray  # (x, y, theta)
    l_pose: np.ndarray
    door_open: bool
    button_pressed: bool
    step_count: int = 0

    def copy(self) -> "EnvState":
        return EnvState(
            agent_pos=self.agent_pos.copy(),
            t_pose=self.t_pose.copy(),
            l_pose=self.l_pose.copy(),
            door_open=self.door_open,
            button_pressed=self.button_pressed,
            step_count=self.step_count,
        )


def _circle_rect_penetration(center_local, rect, radius):
    """Deepest penetration of a circle into one axis-aligned rect (block frame).

    Returns (depth, push_normal, contact_point) in the block frame, where
    push_normal is the direction the *block* must move to separate, or None.
    """
    cx, cy, hw, hh = rect
    p = np.array([center_local[0] - cx, center_local[1] - cy])
    q = np.array([min(max(p[0], -hw), hw), min(max(p[1], -hh), hh)])
    d = p - q
    dist2 = float(d @ d)
    if dist2 > 1e-18:
        dist = math.sqrt(dist2)
        if dist >= radius:
            return None
        n = -d / dist
        contact = np.array([q[0] + cx, q[1] + cy])
        return radius - dist, n, contact
    # Circle center inside the rect: exit through the nearest face.
    gap_x = hw - abs(p[0])
    gap_y = hh - abs(p[1])
    if gap_x < gap_y:
        n = np.array([1.0, 0.0]) if p[0] < 0 else np.array([-1.0, 0.0])
        depth = radius + gap_x
    else:
        n = np.array([0.0, 1.0]) if p[1] < 0 else np.array([0.0, -1.0])
        depth = radius + gap_y
    return depth, n, np.array([center_local[0], center_local[1]])


def _obb_intersects_aabb(corners: np.ndarray, box) -> bool:
    """SAT test between a convex quad (4x2 corners) and an AABB (xmin,xmax,ymin,ymax)."""
    xmin, xmax, ymin, ymax = box
    if corners[:, 0].max() < xmin or corners[:, 0].min() > xmax:
        return False
    if corners[:, 1].max() < ymin or corners[:, 1].min() > ymax:
        return False
    box_pts = np.array([[xmin, ymin], [xmax, ymin], [xmax, ymax], [xmin, ymax]])
    for i in range(4):
        edge = corners[(i + 1) % 4] - corners[i]
        axis = np.array([-edge[1], edge[0]])
        a = corners @ axis
        b = box_pts @ axis
        if a.max() < b.min() or a.min() > b.max():
            return False
    return True


class PushBarrierEnv:
    """Deterministic PushBarrier dynamics, oracle predicates, reward, Gremlin."""

    def __init__(self, config: EnvConfig | None = None):
        self.config = config or EnvConfig()

    # -- lifecycle ---------------------------------------------------------

    def reset(self, seed: int) -> EnvState:
        cfg = self.config
        rng = np.random.default_rng(seed)

        def jitter_pose(base):
            dx, dy = rng.uniform(-cfg.start_pos_jitter, cfg.start_pos_jitter, size=2)
            dth = rng.uniform(-cfg.start_angle_jitter, cfg.start_angle_jitter)
            return np.array([base[0] + dx, base[1] + dy, wrap_angle(base[2] + dth)])

        t_pose = jitter_pose(cfg.t_start)
        l_pose = jitter_pose(cfg.l_start)

        button = np.array(cfg.button_center)
        agent = None
        for _ in range(200):
            cand = np.array(
                [
                    rng.uniform(*cfg.agent_start_x),
                    rng.uniform(*cfg.agent_start_y),
                ]
            )
            if np.linalg.norm(cand - button) <= cfg.button_radius + cfg.agent_radius + 5:
                continue
            clear = True
            for pose, rects in ((t_pose, T_RECTS), (l_pose, L_RECTS)):
                if self._penetration(cand, pose, rects, margin=4.0) is not None:
                    clear = False
                    break
            if clear:
                agent = cand
                break
        if agent is None:  # extremely unlikely; fall back to a fixed clear spot
            agent = np.array([cfg.workspace / 2.0, cfg.agent_start_y[0]])

        return EnvState(
            agent_pos=agent,
            t_pose=t_pose,
            l_pose=l_pose,
            door_open=False,
            button_pressed=False,
            step_count=0,
        )

    # -- dynamics ----------------------------------------------------------

    def step(self, state: EnvState, action: np.ndarray) -> EnvState:
        cfg = self.config
        target = np.clip(np.asarray(action, dtype=np.float64), 0.0, cfg.workspace)
        agent = state.agent_pos.astype(np.float64).copy()
        poses = {"t": state.t_pose.astype(np.float64).copy(), "l": state.l_pose.astype(np.float64).copy()}
        door_open = state.door_open
        button_pressed = state.button_pressed

        sub_speed = cfg.agent_speed / cfg.substeps
        lo = cfg.agent_radius
        hi = cfg.workspace - cfg.agent_radius
        button = np.array(cfg.button_center)

        for _ in range(cfg.substeps):
            delta = target - agent
            dist = float(np.linalg.norm(delta))
            move = np.zeros(2)
            if dist > 1e-12:
                move = delta * min(1.0, sub_speed / dist)
                agent = np.clip(agent + move, lo, hi)

            for key in ("t", "l"):
                rects = BLOCK_RECTS[key]
                pen = self._penetration(agent, poses[key], rects)
                if pen is None:
                    continue
                depth, n_world, contact_world = pen
                r = contact_world - poses[key][:2]
                # Angular correction from tangential drag: motion along the
                # contact normal only translates; sweeping along a face while
                # in contact rotates the block about its origin.
                v_t = move - float(move @ n_world) * n_world
                dtheta = (r[0] * v_t[1] - r[1] * v_t[0]) * depth / cfg.rot_inertia
                dc = n_world * depth
                for move, spin in (
                    (dc, dtheta),
                    (dc, 0.0),
                    (np.array([dc[0], 0.0]), 0.0),
                    (np.array([0.0, dc[1]]), 0.0),
                ):
                    cand = np.array(
                        [poses[key][0] + move[0], poses[key][1] + move[1], wrap_angle(poses[key][2] + spin)]
                    )
                    if self._pose_valid(cand, rects, door_open):
                        poses[key] = cand
                        break
                # The finger cannot occupy the block: if the block could not
                # fully yield (wall/bounds), push the agent back out.
                pen2 = self._penetration(agent, poses[key], rects)
                if pen2 is not None:
                    d2, n2, _ = pen2
                    agent = np.clip(agent - n2 * d2, lo, hi)

            if np.linalg.norm(agent - button) <= cfg.button_radius:
                button_pressed = True
                door_open = True

        return EnvState(
            agent_pos=agent,
            t_pose=poses["t"],
            l_pose=poses["l"],
            door_open=door_open,
            button_pressed=button_pressed,
            step_count=state.step_count + 1,
        )

    def _penetration(self, agent_pos, pose, rects, margin: float = 0.0):
        """Deepest circle/block penetration in world frame, or None."""
        radius = self.config.agent_radius + margin
        r = rot2(pose[2])
        local = r.T @ (np.asarray(agent_pos, dtype=np.float64) - pose[:2])
        best = None
        for rect in rects:
            hit = _circle_rect_penetration(local, rect, radius)
            if hit is not None and (best is None or hit[0] > best[0]):
                best = hit
        if best is None:
            return None
        depth, n_local, contact_local = best
        return depth, r @ n_local, r @ contact_local + pose[:2]

    def _wall_boxes(self, door_open: bool):
        cfg = self.config
        y0 = cfg.barrier_y - cfg.wall_half_thickness
        y1 = cfg.barrier_y + cfg.wall_half_thickness
        boxes = [
            (0.0, cfg.door_x[0], y0, y1),
            (cfg.door_x[1], cfg.workspace, y0, y1),
        ]
        if not door_open:
            boxes.append((cfg.door_x[0], cfg.door_x[1], y0, y1))
        return boxes

    def _pose_valid(self, pose, rects, door_open: bool) -> bool:
        cfg = self.config
        corners = block_corners(pose, rects)
        if corners.min() < 0.0 or corners.max() > cfg.workspace:
            return False
        boxes = self._wall_boxes(door_open)
        n_rects = len(rects)
        for i in range(n_rects):
            quad = corners[4 * i : 4 * i + 4]
            for box in boxes:
                if _obb_intersects_aabb(quad, box):
                    return False
        return True

    # -- task semantics ----------------------------------------------------

    def _block_errors(self, state: EnvState, key: str) -> tuple[float, float]:
        cfg = self.config
        pose = state.t_pose if key == "t" else state.l_pose
        goal = cfg.t_goal if key == "t" else cfg.l_goal
        pos_err = float(np.linalg.norm(pose[:2] - np.array(goal[:2])))
        ang_err = abs(wrap_angle(pose[2] - goal[2]))
        return pos_err, ang_err

    def oracle_predicates(self, state: EnvState) -> np.ndarray:
        """Ground-truth binary values for PREDICATE_NAMES, computed from state."""
        cfg = self.config
        out = np.zeros(len(PREDICATE_NAMES), dtype=np.int64)
        out[0] = int(state.button_pressed)
        out[1] = int(state.door_open)
        for i, key in ((2, "t"), (4, "l")):
            pos_err, ang_err = self._block_errors(state, key)
            in_goal = pos_err <= cfg.position_tolerance
            out[i] = int(in_goal)
            out[i + 1] = int(in_goal and ang_err <= cfg.angle_tolerance)
        return out

    def compute_reward(self, state: EnvState) -> float:
        """Mean over blocks of half position + half angle score; saturates at 1 inside tolerance."""
        cfg = self.config
        scores = []
        for key in ("t", "l"):
            pos_err, ang_err = self._block_errors(state, key)
            pos_term = min(max(1.0 - max(0.0, pos_err - cfg.position_tolerance) / cfg.position_scale, 0.0), 1.0)
            ang_term = min(max(1.0 - max(0.0, ang_err - cfg.angle_tolerance) / cfg.angle_scale, 0.0), 1.0)
            scores.append(0.5 * pos_term + 0.5 * ang_term)
        return float(sum(scores) / len(scores))

    def apply_gremlin(self, state: EnvState) -> EnvState:
        """Adversarial perturbation: slam the door shut and reset the button latch."""
        out = state.copy()
        out.door_open = False
        out.button_pressed = False
        return out

    def observe(self, state: EnvState) -> np.ndarray:
        """Low-dimensional observation vector (length OBSERVATION_DIM)."""
        return np.array(
            [
                state.agent_pos[0],
                state.agent_pos[1],
                state.t_pose[0],
                state.t_pose[1],
                math.sin(state.t_pose[2]),
                math.cos(state.t_pose[2]),
                state.l_pose[0],
                state.l_pose[1],
                math.sin(state.l_pose[2]),
                math.cos(state.l_pose[2]),
                1.0 if state.door_open else 0.0,
                1.0 if state.button_pressed else 0.0,
            ],
            dtype=np.float64,
        )

    def success(self, state: EnvState) -> bool:
        return self.compute_reward(state) >= 1.0
