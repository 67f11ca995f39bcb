"""Driving and elliptical repulsive social forces.

All kernels broadcast over leading axes, so the same code serves a single
pair, a whole frame, or ``K`` simulated samples at once. A zero vector plays
the role of the "no desired direction" sentinel: an agent standing on its
goal gets neither a driving nor a repulsive force.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import asdict, dataclass, fields
from typing import Callable, Iterable, Iterator, Mapping, NamedTuple, Sequence, TextIO

import numpy as np

logger = logging.getLogger(__name__)

EPS = 1e-9  # m; below this a distance counts as zero
ZERO = np.zeros(2)
ZERO.setflags(write=False)


class ConfigError(ValueError):
    """A numeric parameter violates its documented range."""

    def __init__(self, field_name: str, message: str):
        self.field = field_name
        super().__init__(f"{field_name}: {message}")


@dataclass(frozen=True)
class ForceParams:
    tau: float = 0.5  # s, relaxation time
    v0_default: float = 1.34  # m/s, fallback desired speed
    V0: float = 2.1  # m^2/s^2, potential amplitude
    sigma_V: float = 0.3  # m, potential decay length
    two_epsilon_deg: float = 200.0  # effective sight angle
    c: float = 0.5  # out-of-view attenuation
    dt: float = 0.4  # s, anticipation horizon of the neighbor ellipse
    v_max_factor: float = 1.3

    def __post_init__(self):
        checks = {
            "tau": self.tau > 0,
            "v0_default": self.v0_default > 0,
            "V0": self.V0 >= 0,
            "sigma_V": self.sigma_V > 0,
            "two_epsilon_deg": 0 < self.two_epsilon_deg <= 360,
            "c": 0 < self.c <= 1,
            "dt": self.dt > 0,
            "v_max_factor": self.v_max_factor > 0,
        }
        for name, ok in checks.items():
            value = getattr(self, name)
            if not (ok and np.isfinite(value)):
                raise ConfigError(name, f"invalid value {value!r}")

    @property
    def cos_eps(self) -> float:
        return float(np.cos(np.deg2rad(self.two_epsilon_deg / 2.0)))

    def replace(self, **changes) -> ForceParams:
        return ForceParams(**{**asdict(self), **changes})

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


class ForceSample(NamedTuple):
    driving: np.ndarray
    repulsive: np.ndarray


def _norm(a: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(a * a, axis=-1))


def desired_direction(position, goal) -> np.ndarray:
    """Unit vector from ``position`` toward ``goal``, or zero when they coincide."""
    d = np.asarray(goal, dtype=float) - np.asarray(position, dtype=float)
    n = _norm(d)
    with np.errstate(divide="ignore", invalid="ignore"):
        e = d / n[..., None]
    return np.where((n >= EPS)[..., None], e, 0.0)


def driving_force(velocity, desired_dir, v0, tau) -> np.ndarray:
    """Relaxation of ``velocity`` toward ``v0 * desired_dir`` over ``tau`` seconds."""
    v = np.asarray(velocity, dtype=float)
    e = np.asarray(desired_dir, dtype=float)
    f = (np.asarray(v0, dtype=float)[..., None] * e - v) / tau
    return np.where((_norm(e) > 0)[..., None], f, 0.0)


def semi_minor_axis(r_ab, speed_b, dir_b, dt) -> np.ndarray:
    """Semi-minor axis ``b`` of the ellipse through ``r_ab`` with foci 0 and ``speed_b*dt*dir_b``.

    A stationary neighbor gives ``b = |r_ab|`` exactly. A negative radicand
    can only come from rounding; it is clamped to zero.
    """
    r = np.asarray(r_ab, dtype=float)
    s = np.asarray(speed_b, dtype=float) * dt
    step = s[..., None] * np.asarray(dir_b, dtype=float)
    rn = _norm(r)
    radicand = (rn + _norm(r - step)) ** 2 - s**2
    if np.any(radicand < -1e-12):
        logger.warning("semi-minor axis radicand below -1e-12 clamped to 0")
    return np.where(s == 0, rn, 0.5 * np.sqrt(np.maximum(radicand, 0.0)))


def repulsive_potential(b, V0, sigma_V) -> np.ndarray:
    return V0 * np.exp(-np.asarray(b, dtype=float) / sigma_V)


def neighbor_step(vel_b, dt) -> np.ndarray:
    """``speed_b * dt * e_b`` with ``e_b`` the velocity heading; zero for a (near) stationary neighbor."""
    v = np.asarray(vel_b, dtype=float)
    return np.where((_norm(v) >= EPS)[..., None], v * dt, 0.0)


def repulsion(r_ab, vel_b, V0: float, sigma_V: float, dt: float) -> np.ndarray:
    """Negative gradient of ``V(b(r_ab))`` with respect to ``r_ab``.

    ``r_ab = pos_a - pos_b``. Where ``b`` or one of the two focal distances
    falls below ``EPS`` the force is replaced by the radial direction with the
    capped magnitude ``V0 / sigma_V``; coincident agents get that cap along +x.
    """
    r = np.asarray(r_ab, dtype=float)
    step = neighbor_step(vel_b, dt)
    s = _norm(step)
    d = r - step
    rn = _norm(r)
    dn = _norm(d)
    total = rn + dn
    b = np.where(s == 0, rn, 0.5 * np.sqrt(np.maximum(total**2 - s**2, 0.0)))
    regular = (b >= EPS) & (rn >= EPS) & (dn >= EPS)
    with np.errstate(divide="ignore", invalid="ignore"):
        grad_b = (total / (4.0 * b))[..., None] * (r / rn[..., None] + d / dn[..., None])
        radial = r / rn[..., None]
    cap = V0 / sigma_V
    mag = cap * np.exp(-b / sigma_V)
    plus_x = np.zeros_like(r)
    plus_x[..., 0] = cap
    f = np.where(
        regular[..., None],
        mag[..., None] * grad_b,
        np.where((rn >= EPS)[..., None], cap * radial, plus_x),
    )
    if not np.all(regular):
        n_bad = int(np.size(regular) - np.count_nonzero(regular))
        logger.debug("repulsion: %d degenerate pair(s) used the capped radial fallback", n_bad)
    return f


def repulsive_force_pair(state_a, state_b, params: ForceParams) -> np.ndarray:
    """Unweighted repulsive force exerted by agent ``b`` on agent ``a``."""
    r = np.asarray(state_a.position) - np.asarray(state_b.position)
    return repulsion(r, state_b.velocity, params.V0, params.sigma_V, params.dt)


def fov_weights(heading, f, cos_eps: float, c: float, on_source: bool = False) -> np.ndarray:
    """Vectorized field-of-view weight: 1 inside the sight cone, ``c`` outside.

    The cone test is ``heading . f >= |f| cos(eps)``; with ``on_source`` it is
    applied to ``-f`` (the direction toward the neighbor) instead.
    """
    e = np.asarray(heading, dtype=float)
    f = np.asarray(f, dtype=float)
    if on_source:
        f = -f
    dot = np.sum(e * f, axis=-1)
    fn = _norm(f)
    inside = (dot >= fn * cos_eps) | (_norm(e) == 0) | (fn == 0)
    return np.where(inside, 1.0, c)


def fov_weight(heading, f, params: ForceParams, on_source: bool = False) -> float:
    return float(fov_weights(heading, f, params.cos_eps, params.c, on_source))


def batch_forces(
    pos: np.ndarray,
    vel: np.ndarray,
    goal: np.ndarray,
    v0: np.ndarray,
    nb_pos: np.ndarray,
    nb_vel: np.ndarray,
    active: np.ndarray,
    params: ForceParams,
    fov_on_source: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    """Forces on ``B`` egos from ``M`` neighbors each.

    Shapes: ``pos, vel, goal (B, 2)``, ``v0 (B,)``, ``nb_pos, nb_vel (B, M, 2)``
    and ``active (B, M)``; inactive neighbors (self, masked group members,
    padding) contribute nothing. Egos on their goal get zero for both forces.
    """
    e = desired_direction(pos, goal)
    f_dr = driving_force(vel, e, v0, params.tau)
    if nb_pos.shape[-2] == 0:
        return f_dr, np.zeros_like(f_dr)
    r = pos[..., None, :] - nb_pos
    f = repulsion(r, nb_vel, params.V0, params.sigma_V, params.dt)
    w = fov_weights(e[..., None, :], f, params.cos_eps, params.c, fov_on_source)
    f_re = np.sum(np.where(active[..., None], w[..., None] * f, 0.0), axis=-2)
    f_re = np.where((_norm(e) > 0)[..., None], f_re, 0.0)
    return f_dr, f_re


def estimate_desired_speed(states: Sequence, fallback: float, min_speed: float = 0.1) -> float:
    """Mean observed speed, or ``fallback`` when the agent barely moves."""
    if len(states) == 0:
        return fallback
    speed = float(np.mean([np.hypot(*s.velocity) for s in states]))
    return speed if speed >= min_speed else fallback


def total_forces(
    frame_states,
    goals: Mapping[int, np.ndarray],
    group_mask: Callable[[int, int], bool] | None,
    params: ForceParams,
    *,
    desired_speeds: Mapping[int, float] | None = None,
    fov_on_source: bool = False,
) -> dict[int, ForceSample]:
    """Driving and FOV-weighted repulsive force on every agent of one frame.

    ``frame_states`` is a :class:`~goalforce.data.Frame` or a mapping of agent
    id to state. ``group_mask(a, b)`` returns True for pairs whose mutual
    repulsion is removed. ``desired_speeds`` defaults to ``params.v0_default``.
    """
    states = getattr(frame_states, "states", frame_states)
    ids = sorted(states)
    missing = [a for a in ids if a not in goals]
    if missing:
        raise KeyError(f"no goal for agent(s) {missing}")
    if not ids:
        return {}
    desired_speeds = desired_speeds or {}
    pos = np.array([states[a].position for a in ids], dtype=float)
    vel = np.array([states[a].velocity for a in ids], dtype=float)
    goal = np.array([goals[a] for a in ids], dtype=float)
    v0 = np.array([desired_speeds.get(a, params.v0_default) for a in ids], dtype=float)
    n = len(ids)
    active = ~np.eye(n, dtype=bool)
    if group_mask is not None:
        for i in range(n):
            for j in range(i + 1, n):
                if group_mask(ids[i], ids[j]):
                    active[i, j] = active[j, i] = False
    nb_pos = np.broadcast_to(pos, (n, n, 2))
    nb_vel = np.broadcast_to(vel, (n, n, 2))
    f_dr, f_re = batch_forces(pos, vel, goal, v0, nb_pos, nb_vel, active, params, fov_on_source)
    return {a: ForceSample(f_dr[k], f_re[k]) for k, a in enumerate(ids)}


def window_forces(window, mask: Callable[[int, int], bool] | None, params: ForceParams, *, fov_on_source: bool = False) -> list[ForceSample]:
    """Forces on the ego of ``window`` at each of its frames, using ground-truth states throughout."""
    ego = window.ego_id
    v0 = np.array([estimate_desired_speed(window.observed, params.v0_default)])
    goal = np.asarray(window.goal, dtype=float)[None]
    out = []
    for frame in window.frames:
        st = frame.states[ego]
        others = [a for a in frame.ids if a != ego]
        nb_pos = np.array([frame.states[a].position for a in others], dtype=float).reshape(1, -1, 2)
        nb_vel = np.array([frame.states[a].velocity for a in others], dtype=float).reshape(1, -1, 2)
        active = np.array([[not (mask is not None and mask(ego, a)) for a in others]], dtype=bool).reshape(1, -1)
        f_dr, f_re = batch_forces(
            st.position[None], st.velocity[None], goal, v0, nb_pos, nb_vel, active, params, fov_on_source
        )
        out.append(ForceSample(f_dr[0], f_re[0]))
    return out


def force_sequences(
    windows: Iterable,
    group_assignments: Mapping[int, object] | None,
    params: ForceParams,
    *,
    fov_on_source: bool = False,
) -> dict[int, list[ForceSample]]:
    """Per-window ego force sequence over all ``H + 1 + T`` frames.

    ``group_assignments`` maps ``window_id`` to a
    :class:`~goalforce.grouping.GroupAssignment`; windows without an entry
    are computed without masking.
    """
    from goalforce.grouping import group_mask

    out = {}
    for w in windows:
        assignment = None if group_assignments is None else group_assignments.get(w.window_id)
        mask = None if assignment is None else group_mask(assignment)
        out[w.window_id] = window_forces(w, mask, params, fov_on_source=fov_on_source)
    return out


FEATURE_COLUMNS = ["scene", "window_id", "agent_id", "t", "f_dr", "f_re", "pos", "vel", "goal"]


def feature_records(windows: Iterable, sequences: Mapping[int, list[ForceSample]]) -> Iterator[dict]:
    """Flatten force sequences into export records; ``t`` runs from ``-H`` to ``T``."""
    for w in windows:
        seq = sequences[w.window_id]
        states = w.observed + w.future
        goal = [float(v) for v in w.goal]
        for k, (sample, st) in enumerate(zip(seq, states)):
            yield {
                "scene": w.scene_name,
                "window_id": w.window_id,
                "agent_id": w.ego_id,
                "t": k - (w.obs_len - 1),
                "f_dr": [float(v) for v in sample.driving],
                "f_re": [float(v) for v in sample.repulsive],
                "pos": [float(v) for v in st.position],
                "vel": [float(v) for v in st.velocity],
                "goal": goal,
            }


def write_features_jsonl(records: Iterable[dict], stream: TextIO) -> None:
    for rec in records:
        stream.write(json.dumps(rec) + "\n")


def write_features_csv(records: Iterable[dict], stream: TextIO) -> None:
    """CSV mirror of the JSONL export; vector cells hold the same JSON arrays."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(FEATURE_COLUMNS)
    for rec in records:
        writer.writerow([json.dumps(rec[c]) if isinstance(rec[c], list) else rec[c] for c in FEATURE_COLUMNS])
