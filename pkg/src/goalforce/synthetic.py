"""Seeded synthetic scenes used for tests, demos and the bundled fixtures.

Every builder returns a 20-frame :class:`~goalforce.data.Scene` (8 observed
plus 12 future frames at 0.4 s) with a random rigid placement, so suites of
variants differ in orientation and position as well as in timing.
"""

from __future__ import annotations

import numpy as np

from goalforce.data import DEFAULT_DT, Scene

N_FRAMES = 20
LAST_OBS = 7


def _place(tracks: dict[int, np.ndarray], rng: np.random.Generator) -> dict[int, np.ndarray]:
    theta = rng.uniform(0, 2 * np.pi)
    rot = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
    shift = rng.uniform(-20, 20, size=2)
    return {a: pts @ rot.T + shift for a, pts in tracks.items()}


def straight_walk(speed: float = 1.34, *, seed: int | None = None, dt: float = DEFAULT_DT) -> Scene:
    """One agent walking a straight line at constant ``speed``."""
    t = np.arange(N_FRAMES) * dt
    tracks = {1: np.stack([speed * t, np.zeros_like(t)], axis=1)}
    if seed is not None:
        tracks = _place(tracks, np.random.default_rng(seed))
    return Scene.from_tracks(tracks, dt=dt, name="straight")


def head_on_corridor(seed: int, *, separation: float = 8.0, lateral_offset: float = 0.05, dt: float = DEFAULT_DT) -> Scene:
    """Two agents approaching head-on.

    They are ``separation`` apart at the last observed frame and their
    straight ground-truth paths pass ``lateral_offset`` apart exactly at a
    sampled frame, ten steps later.
    """
    rng = np.random.default_rng(seed)
    meet = LAST_OBS + 10
    closing = separation / (10 * dt)
    u1 = rng.uniform(0.4, 0.6) * closing
    u2 = closing - u1
    t = (np.arange(N_FRAMES) - meet) * dt
    half = lateral_offset / 2
    tracks = {
        1: np.stack([u1 * t, np.full_like(t, half)], axis=1),
        2: np.stack([-u2 * t, np.full_like(t, -half)], axis=1),
    }
    return Scene.from_tracks(_place(tracks, rng), dt=dt, name=f"headon-{seed}")


def turning_corridor(seed: int, *, dt: float = DEFAULT_DT) -> Scene:
    """One agent whose ground truth turns 90 degrees a few steps into the future."""
    rng = np.random.default_rng(seed)
    speed = rng.uniform(1.0, 1.4)
    corner = LAST_OBS + int(rng.integers(2, 6))
    side = rng.choice([-1.0, 1.0])
    s = speed * dt * np.arange(N_FRAMES)
    s_c = speed * dt * corner
    x = np.minimum(s, s_c)
    y = side * np.maximum(s - s_c, 0.0)
    tracks = {1: np.stack([x, y], axis=1)}
    return Scene.from_tracks(_place(tracks, rng), dt=dt, name=f"turning-{seed}")


def side_by_side_dyad(seed: int = 0, *, separation: float = 0.8, speed: float = 1.2, dt: float = DEFAULT_DT) -> Scene:
    """Two agents walking in parallel, ``separation`` apart."""
    rng = np.random.default_rng(seed)
    t = np.arange(N_FRAMES) * dt
    x = speed * t
    tracks = {
        1: np.stack([x, np.zeros_like(t)], axis=1),
        2: np.stack([x, np.full_like(t, separation)], axis=1),
    }
    return Scene.from_tracks(_place(tracks, rng), dt=dt, name=f"dyad-{seed}")


def crowd(seed: int, n_agents: int = 12, n_frames: int = 40, *, area: float = 12.0, dt: float = DEFAULT_DT) -> Scene:
    """Agents crossing a square at random headings, entering at staggered times."""
    rng = np.random.default_rng(seed)
    tracks, starts = {}, {}
    for a in range(n_agents):
        start = int(rng.integers(0, max(1, n_frames - N_FRAMES)))
        length = int(rng.integers(N_FRAMES, n_frames - start + 1))
        p0 = rng.uniform(-area / 2, area / 2, size=2)
        heading = rng.uniform(0, 2 * np.pi)
        speed = rng.uniform(0.8, 1.6)
        v = speed * np.array([np.cos(heading), np.sin(heading)])
        wobble = rng.normal(0, 0.02, size=(length, 2))
        tracks[a + 1] = p0 + np.arange(length)[:, None] * dt * v + wobble
        starts[a + 1] = start
    return Scene.from_tracks(tracks, start_frames=starts, dt=dt, name=f"crowd-{seed}")


SUITES = {
    "headon": head_on_corridor,
    "turning": turning_corridor,
    "dyad": side_by_side_dyad,
    "crowd": crowd,
}


def suite(name: str, n_variants: int = 20, seed: int = 0) -> list[Scene]:
    build = SUITES[name]
    return [build(seed + k) for k in range(n_variants)]
