"""Goal-conditioned social-force rollouts.

The simulator integrates driving plus repulsive forces with semi-implicit
Euler from the last observed state toward a goal. Each of the ``K`` samples
steers toward its own perturbed copy of the goal (sample 0 keeps the goal as
given), which is what makes the predictor stochastic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from goalforce.forces import EPS, ForceParams, batch_forces, estimate_desired_speed
from goalforce.grouping import GroupAssignment, window_groups


class GoalMode(str, Enum):
    ORACLE = "oracle"
    EXTRAPOLATE = "extrapolate"


@dataclass(frozen=True)
class GoalSource:
    mode: GoalMode = GoalMode.ORACLE
    noise_std: float = 0.5  # m

    def __post_init__(self):
        object.__setattr__(self, "mode", GoalMode(self.mode))
        if not self.noise_std >= 0:
            raise ValueError("noise_std must be >= 0")


@dataclass(frozen=True, eq=False)
class PredictionSet:
    ego_id: int
    samples: np.ndarray  # (K, T, 2)
    goals_used: np.ndarray  # (K, 2)
    seed: int
    window_id: int = 0
    scene: str = ""

    @property
    def K(self) -> int:
        return len(self.samples)


class SimulationError(RuntimeError):
    pass


def estimate_goal(window, source: GoalSource) -> np.ndarray:
    """Ground-truth final position (oracle) or a constant-velocity extrapolation."""
    if source.mode is GoalMode.ORACLE:
        return np.array(window.goal, dtype=float)
    mean_v = np.mean([s.velocity for s in window.observed], axis=0)
    return window.observed[-1].position + mean_v * window.pred_len * window.dt


def step(
    positions,
    velocities,
    goals,
    desired_speeds,
    params: ForceParams,
    *,
    dt: float | None = None,
    mask=None,
    others=None,
    fov_on_source: bool = False,
):
    """Advance ``N`` agents by one semi-implicit Euler step.

    ``positions``, ``velocities`` and ``goals`` have shape ``(..., N, 2)`` and
    ``desired_speeds`` broadcasts against ``(..., N)``. ``mask`` is an
    ``(N, N)`` boolean array of pairs whose repulsion is removed. ``others``
    optionally adds ``(pos, vel, mask)`` for ``M`` agents that exert forces
    but are not integrated, with ``pos, vel`` of shape ``(..., M, 2)`` and an
    ``(N, M)`` mask. Agents on their goal are returned unchanged.
    """
    dt = params.dt if dt is None else dt
    pos = np.asarray(positions, dtype=float)
    vel = np.asarray(velocities, dtype=float)
    goal = np.broadcast_to(np.asarray(goals, dtype=float), pos.shape)
    lead, n = pos.shape[:-2], pos.shape[-2]
    v0 = np.broadcast_to(np.asarray(desired_speeds, dtype=float), lead + (n,))

    active = ~np.eye(n, dtype=bool)
    if mask is not None:
        active &= ~np.asarray(mask, dtype=bool)
    nb_pos = np.broadcast_to(pos[..., None, :, :], lead + (n, n, 2))
    nb_vel = np.broadcast_to(vel[..., None, :, :], lead + (n, n, 2))
    if others is not None:
        o_pos, o_vel, o_mask = others
        o_pos = np.asarray(o_pos, dtype=float)
        m = o_pos.shape[-2]
        o_pos = np.broadcast_to(o_pos[..., None, :, :], lead + (n, m, 2))
        o_vel = np.broadcast_to(np.asarray(o_vel, dtype=float)[..., None, :, :], lead + (n, m, 2))
        o_active = np.ones((n, m), dtype=bool) if o_mask is None else ~np.asarray(o_mask, dtype=bool)
        nb_pos = np.concatenate([nb_pos, o_pos], axis=-2)
        nb_vel = np.concatenate([nb_vel, o_vel], axis=-2)
        active = np.concatenate([active, o_active], axis=-1)
    active = np.broadcast_to(active, lead + active.shape)

    f_dr, f_re = batch_forces(pos, vel, goal, v0, nb_pos, nb_vel, active, params, fov_on_source)
    force = f_dr + f_re
    bad = ~np.all(np.isfinite(force), axis=-1)
    if np.any(bad):
        agent = int(np.argwhere(bad)[0][-1])
        raise SimulationError(f"non-finite force on agent index {agent}")

    new_vel = vel + force * dt
    speed = np.sqrt(np.sum(new_vel**2, axis=-1))
    v_max = params.v_max_factor * v0
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(speed > v_max, v_max / speed, 1.0)
    new_vel = new_vel * scale[..., None]
    new_pos = pos + new_vel * dt

    frozen = (np.sqrt(np.sum((goal - pos) ** 2, axis=-1)) < EPS)[..., None]
    return np.where(frozen, pos, new_pos), np.where(frozen, vel, new_vel)


def sample_goals(goal, K: int, seed: int, window_id: int, noise_std: float) -> np.ndarray:
    """``K`` goal candidates; candidate ``k`` draws from its own ``(seed, window_id, k)`` stream."""
    goal = np.asarray(goal, dtype=float)
    out = np.tile(goal, (K, 1))
    if noise_std > 0:
        for k in range(1, K):
            rng = np.random.default_rng([seed, window_id, k])
            out[k] += rng.normal(0.0, noise_std, size=2)
    return out


def _pair_mask(ids_a, ids_b, groups: GroupAssignment | None) -> np.ndarray | None:
    if groups is None or not groups.pairs:
        return None
    return np.array([[(a, b) in groups for b in ids_b] for a in ids_a], dtype=bool).reshape(len(ids_a), len(ids_b))


def _neighbor_goal(window, agent_id: int, mode: GoalMode) -> np.ndarray:
    last = window.frames[-1].states.get(agent_id)
    if mode is GoalMode.ORACLE and last is not None:
        return np.array(last.position)
    seen = [f.states[agent_id] for f in window.observed_frames if agent_id in f.states]
    mean_v = np.mean([s.velocity for s in seen], axis=0)
    return seen[-1].position + mean_v * window.pred_len * window.dt


def rollout(
    window,
    goal,
    K: int = 20,
    seed: int = 0,
    params: ForceParams | None = None,
    *,
    noise_std: float = 0.5,
    joint: bool = False,
    substeps: int = 1,
    groups: GroupAssignment | None = None,
    fov_on_source: bool = False,
    neighbor_goal_mode: GoalMode = GoalMode.ORACLE,
) -> PredictionSet:
    """Simulate ``K`` futures of the window's ego agent.

    By default only the ego is integrated and the neighbors replay their
    ground-truth future; a neighbor that leaves the scene stays frozen at its
    last known position. With ``joint=True`` every agent present at the last
    observed frame is simulated together, neighbors steering toward their
    own (oracle or extrapolated) goals.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    params = params or ForceParams()
    T = window.pred_len
    h = params.dt / substeps
    ego = window.ego_id
    last_obs = window.obs_len - 1
    goals = sample_goals(goal, K, seed, window.window_id, noise_std)
    samples = np.empty((K, T, 2))

    if joint:
        ids = [ego] + [a for a in window.frames[last_obs].ids.tolist() if a != ego]
        st0 = [window.frames[last_obs].states[a] for a in ids]
        pos = np.tile(np.array([s.position for s in st0]), (K, 1, 1))
        vel = np.tile(np.array([s.velocity for s in st0]), (K, 1, 1))
        goal_arr = np.tile(np.array([_neighbor_goal(window, a, neighbor_goal_mode) for a in ids]), (K, 1, 1))
        goal_arr[:, 0] = goals
        v0 = np.array([
            estimate_desired_speed([f.states[a] for f in window.observed_frames if a in f.states], params.v0_default)
            for a in ids
        ])
        mask = _pair_mask(ids, ids, groups)
        integrated = set(ids)
        for k in range(T):
            frame = window.frames[last_obs + k]
            extra = [a for a in frame.ids.tolist() if a not in integrated]
            others = None
            if extra:
                others = (
                    np.array([frame.states[a].position for a in extra]),
                    np.array([frame.states[a].velocity for a in extra]),
                    _pair_mask(ids, extra, groups),
                )
            for _ in range(substeps):
                try:
                    pos, vel = step(pos, vel, goal_arr, v0, params, dt=h, mask=mask, others=others, fov_on_source=fov_on_source)
                except SimulationError as exc:
                    raise SimulationError(f"window {window.window_id}, step {k + 1}: {exc}") from None
            samples[:, k] = pos[:, 0]
    else:
        st = window.observed[-1]
        pos = np.tile(st.position, (K, 1, 1))
        vel = np.tile(st.velocity, (K, 1, 1))
        goal_arr = goals[:, None, :]
        v0 = np.array([estimate_desired_speed(window.observed, params.v0_default)])
        known: dict[int, tuple[np.ndarray, np.ndarray]] = {}
        for k in range(T):
            frame = window.frames[last_obs + k]
            for a in known:
                if a not in frame.states:
                    known[a] = (known[a][0], np.zeros(2))
            for a, s in frame.states.items():
                if a != ego:
                    known[a] = (s.position, s.velocity)
            others = None
            if known:
                nb = sorted(known)
                others = (
                    np.array([known[a][0] for a in nb]),
                    np.array([known[a][1] for a in nb]),
                    _pair_mask([ego], nb, groups),
                )
            for _ in range(substeps):
                try:
                    pos, vel = step(pos, vel, goal_arr, v0, params, dt=h, others=others, fov_on_source=fov_on_source)
                except SimulationError as exc:
                    raise SimulationError(f"window {window.window_id}, step {k + 1}: {exc}") from None
            samples[:, k] = pos[:, 0]

    return PredictionSet(ego, samples, goals, seed, window.window_id, window.scene_name)


@dataclass
class ConstantVelocityPredictor:
    """Extrapolates the last observed velocity; all ``K`` samples coincide."""

    name: str = "constant-velocity"

    def __call__(self, window, K: int = 20, seed: int = 0) -> PredictionSet:
        st = window.observed[-1]
        t = np.arange(1, window.pred_len + 1)[:, None] * window.dt
        traj = st.position + t * st.velocity
        samples = np.broadcast_to(traj, (K,) + traj.shape).copy()
        return PredictionSet(window.ego_id, samples, np.tile(traj[-1], (K, 1)), seed, window.window_id, window.scene_name)


@dataclass
class SocialForcePredictor:
    params: ForceParams = field(default_factory=ForceParams)
    goal_source: GoalSource = field(default_factory=GoalSource)
    joint: bool = False
    substeps: int = 1
    grouping: bool = True
    eps: float = 1.0
    min_pts: int = 2
    sigma: int = 4
    fov_on_source: bool = False
    name: str = "social-force"

    def __call__(self, window, K: int = 20, seed: int = 0) -> PredictionSet:
        groups = window_groups(window, self.eps, self.min_pts, self.sigma) if self.grouping else None
        goal = estimate_goal(window, self.goal_source)
        return rollout(
            window,
            goal,
            K,
            seed,
            self.params,
            noise_std=self.goal_source.noise_std,
            joint=self.joint,
            substeps=self.substeps,
            groups=groups,
            fov_on_source=self.fov_on_source,
            neighbor_goal_mode=self.goal_source.mode,
        )
