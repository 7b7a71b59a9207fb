"""Scripted multimodal expert for PushBarrier demonstration generation.

The expert is a sequence of per-skill controllers: press the button, then
push each block along a waypoint route through the door gap, fix its heading
at a staging point above the door, and finish with a straight center-line
push into the goal (center-line pushes fall inside the contact model's
stick regime, so heading survives the final leg). Block order is drawn per
episode, which makes the demonstration distribution bimodal.

The same controllers serve as scripted skills for the plan executive: since
the dynamics are pure functions of state, a controller can simulate its own
closed loop ahead to emit an action chunk plus matching oracle belief rows.
"""

from __future__ import annotations

import logging
import math

import numpy as np

from ..data import EpisodeDataset
from ..errors import ValidationError
from .pushbarrier import (
    BLOCK_RECTS,
    PREDICATE_NAMES,
    EnvConfig,
    EnvState,
    PushBarrierEnv,
    bounding_radius,
    rot2,
    support_extent,
    wrap_angle,
)

logger = logging.getLogger(__name__)

# Tight completion thresholds (inside the success tolerances) so a finished
# block sits comfortably within the goal region rather than on its boundary.
DONE_POS = 16.0
DONE_ANG = math.radians(12.0)
ROT_ENTER = math.radians(9.0)
ROT_EXIT = math.radians(2.5)
AXIS_ENTER = 14.0  # re-open an axis leg only past this error
AXIS_EXIT = 5.0  # an axis leg is satisfied below this error

# Drag handles: (face start point, drag direction, inward press normal,
# sweep length), all in the block frame. Pressing on the face while sweeping
# along it spins the block; the sets below are grouped by rotation sign.
ROT_HANDLES = {
    "t": {
        +1: (
            ((30.0, 27.0), (-1.0, 0.0), (0.0, -1.0), 60.0),  # bar top, sweep left
            ((36.0, 11.0), (0.0, 1.0), (-1.0, 0.0), 14.0),  # bar right end, sweep up
        ),
        -1: (
            ((-30.0, 27.0), (1.0, 0.0), (0.0, -1.0), 60.0),  # bar top, sweep right
            ((-36.0, 11.0), (0.0, 1.0), (1.0, 0.0), 14.0),  # bar left end, sweep up
        ),
    },
    "l": {
        +1: (
            ((6.0, 36.0), (-1.0, 0.0), (0.0, -1.0), 12.0),  # leg top, sweep left
            ((-6.0, -36.0), (1.0, 0.0), (0.0, 1.0), 38.0),  # underside, sweep right
        ),
        -1: (
            ((-6.0, 36.0), (1.0, 0.0), (0.0, -1.0), 12.0),  # leg top, sweep right
            ((30.0, -36.0), (-1.0, 0.0), (0.0, 1.0), 38.0),  # underside, sweep left
        ),
    },
}

# Lateral coordinates (block frame) of candidate aim lines for face-on pushes
# in each world direction at heading ~0; every line meets a flat face whose
# normal matches the push direction. Later entries are fallbacks for when the
# preferred dock point is crowded by the other block.
PUSH_LINES = {
    "t": {"n": (0.0, 28.0, -28.0), "s": (0.0, -22.0, 22.0), "e": (18.0, -13.0), "w": (18.0, -13.0)},
    "l": {"n": (13.5, -4.0, 30.0), "s": (0.0,), "e": (0.0, -20.0, 20.0), "w": (15.0, -27.0)},
}

ROUTE_X = {"t": 250.0, "l": 252.0}


def _unit(v: np.ndarray) -> np.ndarray:
    n = float(np.linalg.norm(v))
    return v / n if n > 1e-9 else np.array([1.0, 0.0])


def _segment_clear(a: np.ndarray, b: np.ndarray, circles, shrink: float) -> bool:
    d = b - a
    dd = float(d @ d)
    for center, radius in circles:
        if dd < 1e-12:
            gap = float(np.linalg.norm(a - center))
        else:
            t = float(np.clip(((center - a) @ d) / dd, 0.0, 1.0))
            gap = float(np.linalg.norm(a + t * d - center))
        if gap < radius - shrink:
            return False
    return True


def _navigate(agent: np.ndarray, target: np.ndarray, circles, speed: float,
              allow_center: np.ndarray | None = None) -> np.ndarray:
    """One motion step toward ``target`` around inflated circular obstacles.

    Plans over a tiny visibility graph (ring points around each circle) with
    Dijkstra and steps toward the first via point; purely local steering
    livelocks when the two avoid circles overlap. Only the ``allow_center``
    circle may legitimately contain the target (deliberate docking against
    that block, see ``_docked_target``); a target inside any other circle is
    clipped back to its boundary. Inside a circle the agent first backs out.
    """
    d = target - agent
    dist = float(np.linalg.norm(d))
    if dist < 1e-9:
        return target
    active = []
    for c, r in circles:
        c = np.asarray(c, dtype=float)
        if allow_center is not None and float(np.linalg.norm(c - allow_center)) < 1e-6 \
                and np.linalg.norm(target - c) <= r:
            continue
        active.append((c, float(r)))
    for center, radius in active:
        if np.linalg.norm(target - center) <= radius:
            target = center + _unit(target - center) * (radius + 2.0)
    d = target - agent
    dist = float(np.linalg.norm(d))
    if dist < 1e-9:
        return target
    for center, radius in active:
        if np.linalg.norm(center - agent) < radius - 6.0:
            return agent - _unit(center - agent) * speed

    if _segment_clear(agent, target, active, shrink=2.0):
        return agent + d * min(1.0, speed / dist)

    # via-point graph: agent, target, and rings around each active circle
    nodes = [agent, target]
    for center, radius in active:
        ring = radius + 6.0
        for k in range(12):
            ang = k * math.pi / 6.0
            p = center + ring * np.array([math.cos(ang), math.sin(ang)])
            if not (0.0 <= p[0] <= 512.0 and 0.0 <= p[1] <= 512.0):
                continue
            if any(np.linalg.norm(p - c2) < r2 - 2.0 for c2, r2 in active):
                continue
            nodes.append(p)

    n = len(nodes)
    INF = float("inf")
    dist_to = [INF] * n
    prev = [-1] * n
    dist_to[0] = 0.0
    done = [False] * n
    for _ in range(n):
        u = min((i for i in range(n) if not done[i]), key=lambda i: dist_to[i], default=-1)
        if u < 0 or dist_to[u] is INF:
            break
        done[u] = True
        if u == 1:
            break
        for v in range(n):
            if done[v] or v == u:
                continue
            if not _segment_clear(nodes[u], nodes[v], active, shrink=2.0):
                continue
            w = dist_to[u] + float(np.linalg.norm(nodes[u] - nodes[v]))
            if w < dist_to[v]:
                dist_to[v] = w
                prev[v] = u

    if dist_to[1] is INF or prev[1] < 0:
        return agent + d * min(1.0, speed / dist)  # no route; inch ahead
    hop = 1
    while prev[hop] != 0:
        hop = prev[hop]
    to_hop = nodes[hop] - agent
    hop_dist = float(np.linalg.norm(to_hop))
    if hop_dist < 1e-9:
        return nodes[hop]
    return agent + to_hop * min(1.0, speed / hop_dist)


def _obstacle_circles(env, state):
    cfg = env.config
    out = []
    for key, pose in (("t", state.t_pose), ("l", state.l_pose)):
        out.append((pose[:2].copy(), bounding_radius(BLOCK_RECTS[key]) + cfg.agent_radius + 10.0))
    return out


def _clamp_point(p: np.ndarray, cfg: EnvConfig) -> np.ndarray:
    m = cfg.agent_radius + 2.0
    return np.clip(p, m, cfg.workspace - m)


class SkillController:
    """Closed-loop scripted controller for one symbolic skill."""

    name: str

    def action(self, env: PushBarrierEnv, state: EnvState) -> np.ndarray:
        raise NotImplementedError

    def done(self, env: PushBarrierEnv, state: EnvState) -> bool:
        raise NotImplementedError


class OpenDoorController(SkillController):
    name = "open_door"

    def action(self, env, state):
        button = np.array(env.config.button_center)
        return _navigate(state.agent_pos, button, _obstacle_circles(env, state), env.config.agent_speed)

    def done(self, env, state):
        return bool(state.button_pressed and state.door_open)


class AlignBlockController(SkillController):
    """Drive one block to its goal pose with axis-aligned face-on pushes.

    The block is kept near heading zero throughout (rotation fixes use drag
    handles), so world-axis pushes always meet a flat face: x-align below the
    barrier, cross the door gap northward, x-align to the goal above, finish
    with the y leg. A stall detector breaks contact limit cycles by forcing a
    re-dock.
    """

    def __init__(self, block: str):
        if block not in ("t", "l"):
            raise ValidationError(f"unknown block {block!r}")
        self.block = block
        self.name = f"align_{block}_block"
        self.rotating = False
        self._above = False  # sticky: block has reached the goal side
        self._leg = None  # committed (axis, target) push leg
        self._last_b = None
        self._stall = 0
        self._redock = 0

    def _pose_goal(self, env, state):
        pose = state.t_pose if self.block == "t" else state.l_pose
        goal = env.config.t_goal if self.block == "t" else env.config.l_goal
        return pose, np.array(goal)

    def done(self, env, state):
        pose, goal = self._pose_goal(env, state)
        pos_err = float(np.linalg.norm(pose[:2] - goal[:2]))
        ang_err = abs(wrap_angle(pose[2] - goal[2]))
        return pos_err <= DONE_POS and ang_err <= DONE_ANG

    def _candidate_legs(self, env, b, goal):
        """Ordered Manhattan legs for the current region."""
        cfg = env.config
        self._above = self._above or b[1] >= cfg.barrier_y + 66.0
        if not self._above:
            return [(0, ROUTE_X[self.block]), (1, cfg.barrier_y + 94.0)]
        return [(0, float(goal[0])), (1, float(goal[1]))]

    def action(self, env, state):
        pose, goal = self._pose_goal(env, state)
        b = pose[:2]
        ang_err = wrap_angle(goal[2] - pose[2])

        if self._last_b is not None and float(np.linalg.norm(b - self._last_b)) < 0.35:
            self._stall += 1
        else:
            self._stall = 0
        self._last_b = b.copy()
        if self._stall > 14:
            self._stall = 0
            self._redock = 10

        # tolerate some wobble while hauling; demand a clean heading when the
        # position legs are nearly finished
        pos_err = float(np.linalg.norm(b - goal[:2]))
        enter = math.radians(13.0) if pos_err > 24.0 else math.radians(6.0)
        if self.rotating and abs(ang_err) <= ROT_EXIT:
            self.rotating = False
        elif not self.rotating and abs(ang_err) > enter:
            self.rotating = True
        if self.rotating:
            self._leg = None
            return self._rotate_action(env, state, pose, ang_err)

        legs = self._candidate_legs(env, b, goal)
        if self._leg is not None:
            if self._leg not in legs or abs(self._leg[1] - b[self._leg[0]]) <= AXIS_EXIT:
                self._leg = None
            elif self._leg[0] == 1 and abs(legs[0][1] - b[0]) > 26.0:
                self._leg = None  # wandered too far off the x line mid-crossing
        if self._leg is None:
            for axis, target in legs:
                if abs(target - b[axis]) > AXIS_ENTER:
                    self._leg = (axis, target)
                    break
            else:
                # all legs nearly satisfied: polish the largest residual
                axis, target = max(legs, key=lambda leg: abs(leg[1] - b[leg[0]]))
                self._leg = (axis, target)
        axis, target = self._leg
        return self._axis_push(env, state, pose, axis, target)

    def _axis_push(self, env, state, pose, axis: int, target_coord: float):
        cfg = env.config
        rects = BLOCK_RECTS[self.block]
        b = pose[:2]
        err = target_coord - b[axis]
        sign = 1.0 if err >= 0 else -1.0
        d = np.array([sign, 0.0]) if axis == 0 else np.array([0.0, sign])
        direction = {0: {1.0: "e", -1.0: "w"}, 1: {1.0: "n", -1.0: "s"}}[axis][sign]
        line = PUSH_LINES[self.block][direction]
        r = rot2(pose[2])
        perp_local = np.array([0.0, line]) if axis == 0 else np.array([line, 0.0])
        anchor = b + r @ perp_local
        back = support_extent(pose[2], rects, -d)
        behind = anchor - d * (back + cfg.agent_radius + 6.0)

        rel = state.agent_pos - anchor
        longitudinal = float(rel @ (-d))
        lateral_vec = rel + d * longitudinal
        lateral = float(np.linalg.norm(lateral_vec))
        if self._redock > 0:
            self._redock -= 1
        elif 0.0 < longitudinal <= back + cfg.agent_radius + 20.0 and lateral <= 4.0:
            # advance along the aim line, throttled: fast pushes and eager
            # sideways chasing both drag the block into rotation
            desired = min(16.0, max(1.5, abs(err) - 2.0))
            lat_fix = np.zeros(2)
            if lateral > 0.8:
                lat_fix = -lateral_vec * (min(0.8, lateral) / lateral)
            return state.agent_pos + d * desired + lat_fix
        avoid_r = bounding_radius(rects) + cfg.agent_radius + 10.0
        nav_target = _docked_target(state.agent_pos, b, _clamp_point(behind, cfg), avoid_r)
        return _navigate(
            state.agent_pos, _clamp_point(nav_target, cfg), _obstacle_circles(env, state),
            cfg.agent_speed, allow_center=b,
        )

    def _rotate_action(self, env, state, pose, ang_err):
        cfg = env.config
        sign = 1 if ang_err > 0 else -1
        r = rot2(pose[2])
        best = None
        for p0, t_dir, n_in, sweep in ROT_HANDLES[self.block][sign]:
            p0_w = pose[:2] + r @ np.array(p0)
            t_w = r @ np.array(t_dir)
            n_w = r @ np.array(n_in)
            staging = p0_w - n_w * (cfg.agent_radius + 1.0)
            # prefer long faces (fewer re-docks per radian)
            score = float(np.linalg.norm(state.agent_pos - staging)) - 1.2 * sweep
            if best is None or score < best[0]:
                best = (score, p0_w, t_w, n_w, staging, sweep)
        _, p0_w, t_w, n_w, staging, sweep = best
        along = float((state.agent_pos - p0_w) @ t_w)
        pressed = float((state.agent_pos - staging) @ n_w)
        if -4.0 <= along <= sweep - 4.0 and abs(pressed) <= 8.0 and float(
            np.linalg.norm(state.agent_pos - staging - t_w * along)
        ) <= 10.0:
            # in position on the face: sweep along it while pressing in,
            # slowing down near the target heading for a clean exit
            speed = max(3.0, 22.0 * min(1.0, abs(ang_err) / 0.12))
            return state.agent_pos + t_w * speed + n_w * 5.0
        avoid_r = bounding_radius(BLOCK_RECTS[self.block]) + cfg.agent_radius + 10.0
        nav_target = _docked_target(state.agent_pos, pose[:2], _clamp_point(staging, cfg), avoid_r)
        return _navigate(
            state.agent_pos, _clamp_point(nav_target, cfg), _obstacle_circles(env, state),
            cfg.agent_speed, allow_center=pose[:2],
        )


class SettleController(SkillController):
    """Post-task retreat so episodes end with a few quiescent all-true frames."""

    name = "done"

    def __init__(self, steps: int = 8):
        self.steps = steps
        self._count = 0

    def action(self, env, state):
        self._count += 1
        return _navigate(
            state.agent_pos, np.array([256.0, 230.0]), _obstacle_circles(env, state), env.config.agent_speed
        )

    def done(self, env, state):
        return self._count >= self.steps


def make_skill_controller(name: str) -> SkillController:
    if name == "open_door":
        return OpenDoorController()
    if name == "align_t_block":
        return AlignBlockController("t")
    if name == "align_l_block":
        return AlignBlockController("l")
    raise ValidationError(f"no scripted controller for skill {name!r}")


class ScriptedExpert:
    """Full-task expert: open_door, then both align skills in a given order."""

    def __init__(self, t_first: bool, settle_steps: int = 8):
        skills: list[SkillController] = [OpenDoorController()]
        order = ("t", "l") if t_first else ("l", "t")
        skills.extend(AlignBlockController(b) for b in order)
        skills.append(SettleController(settle_steps))
        self.skills = skills
        self._idx = 0

    @property
    def finished(self) -> bool:
        return self._idx >= len(self.skills)

    @property
    def phase(self) -> str:
        return "done" if self.finished else self.skills[self._idx].name

    def act(self, env: PushBarrierEnv, state: EnvState):
        """Advance past completed skills, then return (action, phase label) or None."""
        while self._idx < len(self.skills) and self.skills[self._idx].done(env, state):
            self._idx += 1
        if self.finished:
            return None
        skill = self.skills[self._idx]
        return skill.action(env, state), skill.name


def run_expert_episode(env: PushBarrierEnv, seed: int, t_first: bool, settle_steps: int = 8):
    """Roll one expert episode; returns (records, final_state, success)."""
    state = env.reset(seed)
    expert = ScriptedExpert(t_first, settle_steps=settle_steps)
    obs, actions, preds, labels = [], [], [], []
    for _ in range(env.config.max_steps):
        step = expert.act(env, state)
        if step is None:
            break
        action, label = step
        obs.append(env.observe(state))
        preds.append(env.oracle_predicates(state).astype(np.float64))
        actions.append(np.asarray(action, dtype=np.float64))
        labels.append(label)
        state = env.step(state, action)
    success = env.success(state) and expert.finished
    return (obs, actions, preds, labels), state, success


def generate_demonstrations(
    n_episodes: int,
    seed: int,
    config: EnvConfig | None = None,
    settle_steps: int = 8,
    max_attempts: int = 5,
) -> EpisodeDataset:
    """Generate expert demonstrations as an EpisodeDataset.

    Episodes that fail to reach the success reward within the step budget are
    discarded, logged, and regenerated from a derived seed.
    """
    if n_episodes < 1:
        raise ValidationError("n_episodes must be >= 1")
    env = PushBarrierEnv(config)
    all_obs, all_act, all_pred, all_labels, starts = [], [], [], [], []
    n_total = 0
    order_rng = np.random.default_rng([seed, 0x5EED])
    orders = order_rng.random(n_episodes * max_attempts) < 0.5

    draw = 0
    for ep in range(n_episodes):
        success = False
        for attempt in range(max_attempts):
            t_first = bool(orders[draw])
            draw += 1
            ep_seed = int(np.random.default_rng([seed, ep, attempt]).integers(0, 2**31 - 1))
            records, final_state, success = run_expert_episode(
                env, ep_seed, t_first, settle_steps=settle_steps
            )
            if success:
                break
            logger.warning("expert episode %d attempt %d failed; regenerating", ep, attempt)
        if not success:
            raise RuntimeError(f"expert failed to produce episode {ep} after {max_attempts} attempts")
        obs, actions, preds, labels = records
        starts.append(n_total)
        n_total += len(obs)
        all_obs.extend(obs)
        all_act.extend(actions)
        all_pred.extend(preds)
        all_labels.extend(labels)

    return EpisodeDataset(
        observations=np.asarray(all_obs, dtype=np.float32),
        actions=np.asarray(all_act, dtype=np.float32),
        predicates=np.asarray(all_pred, dtype=np.float32),
        episode_starts=np.asarray(starts, dtype=np.int64),
        predicate_names=list(PREDICATE_NAMES),
        skill_labels=all_labels,
        metadata={"seed": seed, "n_episodes": n_episodes, "env": "pushbarrier"},
    )
