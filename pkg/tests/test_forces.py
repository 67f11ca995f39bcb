import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from goalforce.data import AgentState, Frame, window_scene
from goalforce.forces import (
    ConfigError,
    ForceParams,
    desired_direction,
    driving_force,
    feature_records,
    force_sequences,
    fov_weight,
    repulsive_force_pair,
    repulsive_potential,
    semi_minor_axis,
    total_forces,
    write_features_csv,
    write_features_jsonl,
)
from goalforce.grouping import GroupAssignment, group_mask
from goalforce.synthetic import head_on_corridor, straight_walk

P = ForceParams()


def scalar_b(r, vb, dt):
    """Semi-minor axis written out with plain floats."""
    rx, ry = r
    speed = math.hypot(*vb)
    if speed < 1e-9:
        sx = sy = 0.0
    else:
        sx, sy = vb[0] * dt, vb[1] * dt
    s = math.hypot(sx, sy)
    rad = (math.hypot(rx, ry) + math.hypot(rx - sx, ry - sy)) ** 2 - s * s
    return 0.5 * math.sqrt(max(rad, 0.0))


def fd_force(r, vb, params, h=1e-5):
    def V(x, y):
        return params.V0 * math.exp(-scalar_b((x, y), vb, params.dt) / params.sigma_V)

    gx = (V(r[0] + h, r[1]) - V(r[0] - h, r[1])) / (2 * h)
    gy = (V(r[0], r[1] + h) - V(r[0], r[1] - h)) / (2 * h)
    return np.array([-gx, -gy])


def assert_close(a, b, tol=1e-12):
    # near the focal segment the force is steep, so scale by its magnitude
    assert np.abs(a - b).max() <= tol * max(1.0, np.abs(b).max())


def state(aid, pos, vel=(0.0, 0.0)):
    return AgentState(aid, pos, vel)


def rot(theta):
    return np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])


def test_params_validation():
    for field, bad in [("tau", 0), ("v0_default", -1), ("V0", -0.1), ("sigma_V", 0), ("two_epsilon_deg", 361), ("c", 0), ("c", 1.5), ("dt", 0)]:
        with pytest.raises(ConfigError) as err:
            ForceParams(**{field: bad})
        assert err.value.field == field


def test_default_hyperparameters():
    assert P.two_epsilon_deg == 200 and P.c == 0.5
    assert P.cos_eps == pytest.approx(math.cos(math.radians(100)))


class TestDesiredDirection:
    def test_axis(self):
        np.testing.assert_array_equal(desired_direction((0, 0), (5, 0)), [1, 0])

    def test_three_four_five(self):
        e = desired_direction((0, 0), (3, 4))
        # independent normalization
        n = math.sqrt(3**2 + 4**2)
        np.testing.assert_allclose(e, [3 / n, 4 / n], rtol=0, atol=1e-15)
        np.testing.assert_allclose(e, [0.6, 0.8], atol=1e-15)

    def test_at_goal_is_zero(self):
        np.testing.assert_array_equal(desired_direction((1, 2), (1, 2)), [0, 0])
        np.testing.assert_array_equal(desired_direction((1, 2), (1 + 1e-10, 2)), [0, 0])


class TestDrivingForce:
    def test_equilibrium(self):
        e = np.array([0.6, 0.8])
        np.testing.assert_array_equal(driving_force(1.3 * e, e, 1.3, 0.5), [0, 0])

    def test_from_rest(self):
        f = driving_force((0, 0), (1, 0), 1.34, 0.5)
        assert f[0] == pytest.approx(1.34 / 0.5, abs=1e-12) and f[1] == 0
        assert f[0] == pytest.approx(2.68, abs=1e-12)

    def test_zero_sentinel(self):
        np.testing.assert_array_equal(driving_force((1.0, -2.0), (0, 0), 1.34, 0.5), [0, 0])


class TestSemiMinorAxis:
    def test_stationary_neighbor(self):
        for x, y in np.random.default_rng(0).uniform(-10, 10, (100, 2)).tolist():
            assert semi_minor_axis((x, y), 0.0, (1, 0), 0.4) == math.sqrt(x * x + y * y)

    def test_hand_value(self):
        b = semi_minor_axis((2.0, 0.0), 2.5, (1.0, 0.0), 0.4)  # speed*dt = 1
        assert b == pytest.approx(math.sqrt(8) / 2, abs=1e-12)
        assert b == pytest.approx(1.41421356, abs=1e-8)

    def test_clamp_boundary(self):
        assert semi_minor_axis((0.5, 0.0), 2.5, (1.0, 0.0), 0.4) == 0.0

    def test_matches_scalar_reimplementation(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            r = rng.uniform(-5, 5, 2)
            vb = rng.uniform(-2, 2, 2)
            speed = np.linalg.norm(vb)
            assert semi_minor_axis(r, speed, vb / speed, 0.4) == pytest.approx(scalar_b(r, vb, 0.4), rel=1e-12)


class TestPotential:
    def test_values(self):
        assert repulsive_potential(0.0, 2.1, 0.3) == 2.1
        assert repulsive_potential(0.3, 2.1, 0.3) == pytest.approx(2.1 / math.e)
        assert repulsive_potential(3.0, 2.1, 0.3) == pytest.approx(2.1 * 4.539992976248485e-05, rel=1e-12)


class TestRepulsivePair:
    def test_stationary_points_away(self):
        f = repulsive_force_pair(state(1, (1.0, 1.0)), state(2, (0.0, 0.0)), P)
        r = np.array([1.0, 1.0])
        assert f @ r > 0
        assert abs(f[0] * r[1] - f[1] * r[0]) < 1e-15

    def test_finite_difference(self):
        rng = np.random.default_rng(2)
        for _ in range(200):
            r = rng.uniform(0.2, 10) * np.array([1, 0]) @ rot(rng.uniform(0, 2 * np.pi)).T
            vb = rng.uniform(0, 2) * np.array([1, 0]) @ rot(rng.uniform(0, 2 * np.pi)).T
            f = repulsive_force_pair(state(1, r), state(2, (0, 0), vb), P)
            ref = fd_force(r, vb, P)
            assert np.linalg.norm(f - ref) <= 1e-6 * np.linalg.norm(ref)

    def test_monotone_in_distance(self):
        d = np.array([0.3, 0.4])
        prev = None
        for scale in [0.5, 1, 2, 4, 8]:
            m = np.linalg.norm(repulsive_force_pair(state(1, d * scale), state(2, (0, 0)), P))
            if prev is not None:
                assert m < prev
            prev = m

    def test_coincident_capped(self):
        f = repulsive_force_pair(state(1, (1, 1)), state(2, (1, 1)), P)
        np.testing.assert_allclose(f, [P.V0 / P.sigma_V, 0])

    def test_on_segment_falls_back_radial(self):
        f = repulsive_force_pair(state(1, (0.5, 0)), state(2, (0, 0), (2.5, 0)), P)
        np.testing.assert_allclose(f, [P.V0 / P.sigma_V, 0])

    def test_moving_neighbor_ellipse_anisotropy(self):
        # same distance, neighbor walking toward a versus away from a
        toward = repulsive_force_pair(state(1, (1, 0)), state(2, (0, 0), (1, 0)), P)
        away = repulsive_force_pair(state(1, (1, 0)), state(2, (0, 0), (-1, 0)), P)
        assert np.linalg.norm(toward) > np.linalg.norm(away)


class TestFOV:
    def test_aligned(self):
        assert fov_weight((1, 0), (2, 0), P) == 1.0

    def test_anti_parallel(self):
        assert fov_weight((1, 0), (-2, 0), P) == 0.5

    def test_zero_force_and_zero_heading(self):
        assert fov_weight((1, 0), (0, 0), P) == 1.0
        assert fov_weight((0, 0), (-1, 0), P) == 1.0

    def test_source_convention_flips(self):
        assert fov_weight((1, 0), (-2, 0), P, on_source=True) == 1.0
        assert fov_weight((1, 0), (2, 0), P, on_source=True) == 0.5

    def test_cone_edge(self):
        # 99 deg off heading is inside a 200 deg cone, 101 deg is not
        for deg, w in [(99, 1.0), (101, 0.5)]:
            f = np.array([math.cos(math.radians(deg)), math.sin(math.radians(deg))])
            assert fov_weight((1, 0), f, P) == w


def brute_total(states, goals, mask, params, v0):
    """O(N^2) loop over pairs with the scalar helpers."""
    out = {}
    for a, sa in states.items():
        e = desired_direction(sa.position, goals[a])
        if not e.any():
            out[a] = (np.zeros(2), np.zeros(2))
            continue
        f_dr = driving_force(sa.velocity, e, v0, params.tau)
        f_re = np.zeros(2)
        for b, sb in states.items():
            if b == a or mask(a, b):
                continue
            f = repulsive_force_pair(sa, sb, params)
            f_re = f_re + fov_weight(e, f, params) * f
        out[a] = (f_dr, f_re)
    return out


def random_states(rng, n):
    return {
        a: state(a, rng.uniform(-4, 4, 2), rng.uniform(-1.5, 1.5, 2)) for a in range(1, n + 1)
    }


class TestTotalForces:
    def test_single_agent(self):
        out = total_forces({1: state(1, (0, 0), (1, 0))}, {1: np.array([5.0, 0])}, None, P)
        np.testing.assert_array_equal(out[1].repulsive, [0, 0])

    def test_grouped_pair_removed(self):
        states = {1: state(1, (0, 0), (1, 0)), 2: state(2, (0, 0.6), (1, 0))}
        goals = {1: np.array([10.0, 0]), 2: np.array([10.0, 0.6])}
        mask = group_mask(GroupAssignment(frozenset({(1, 2)}), 4))
        out = total_forces(states, goals, mask, P)
        for a in states:
            np.testing.assert_array_equal(out[a].repulsive, [0, 0])
        unmasked = total_forces(states, goals, None, P)
        assert np.linalg.norm(unmasked[1].repulsive) > 0

    def test_three_agents_match_brute_force(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            states = random_states(rng, 3)
            goals = {a: rng.uniform(-10, 10, 2) for a in states}
            out = total_forces(states, goals, None, P)
            ref = brute_total(states, goals, lambda a, b: False, P, P.v0_default)
            for a in states:
                np.testing.assert_allclose(out[a].driving, ref[a][0], rtol=0, atol=1e-12)
                np.testing.assert_allclose(out[a].repulsive, ref[a][1], rtol=0, atol=1e-12)

    def test_agent_at_goal_gets_nothing(self):
        states = {1: state(1, (0, 0), (1, 0)), 2: state(2, (0.3, 0))}
        out = total_forces(states, {1: np.array([0.0, 0.0]), 2: np.array([5.0, 0])}, None, P)
        np.testing.assert_array_equal(out[1].driving, [0, 0])
        np.testing.assert_array_equal(out[1].repulsive, [0, 0])

    def test_missing_goal(self):
        with pytest.raises(KeyError, match="2"):
            total_forces({1: state(1, (0, 0)), 2: state(2, (1, 0))}, {1: np.zeros(2)}, None, P)

    def test_accepts_frame(self):
        frame = Frame(0, {1: state(1, (0, 0), (1, 0)), 2: state(2, (2, 0))})
        out = total_forces(frame, {1: np.array([5.0, 0]), 2: np.array([-5.0, 0])}, None, P)
        assert set(out) == {1, 2}


angles = st.floats(0, 2 * math.pi)
offsets = st.floats(-20, 20)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), angles)
def test_rotation_equivariance(seed, theta):
    rng = np.random.default_rng(seed)
    states = random_states(rng, 4)
    goals = {a: rng.uniform(-10, 10, 2) for a in states}
    R = rot(theta)
    rs = {a: state(a, R @ s.position, R @ s.velocity) for a, s in states.items()}
    rg = {a: R @ g for a, g in goals.items()}
    base = total_forces(states, goals, None, P)
    turned = total_forces(rs, rg, None, P)
    for a in states:
        assert_close(turned[a].driving, R @ base[a].driving)
        assert_close(turned[a].repulsive, R @ base[a].repulsive)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), offsets, offsets)
def test_translation_invariance(seed, dx, dy):
    rng = np.random.default_rng(seed)
    states = random_states(rng, 4)
    goals = {a: rng.uniform(-10, 10, 2) for a in states}
    d = np.array([dx, dy])
    moved = total_forces({a: state(a, s.position + d, s.velocity) for a, s in states.items()}, {a: g + d for a, g in goals.items()}, None, P)
    base = total_forces(states, goals, None, P)
    for a in states:
        assert_close(moved[a].driving, base[a].driving)
        assert_close(moved[a].repulsive, base[a].repulsive)


@settings(max_examples=100, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5))
def test_stationary_pair_antisymmetry(x, y):
    if math.hypot(x, y) < 1e-6:
        return
    f_ab = repulsive_force_pair(state(1, (x, y)), state(2, (0, 0)), P)
    f_ba = repulsive_force_pair(state(2, (0, 0)), state(1, (x, y)), P)
    np.testing.assert_array_equal(f_ab, -f_ba)


@settings(max_examples=100, deadline=None)
@given(angles, angles, st.floats(0.01, 5))
def test_fov_two_valued_and_direction_preserving(a, b, mag):
    e = np.array([math.cos(a), math.sin(a)])
    f = mag * np.array([math.cos(b), math.sin(b)])
    w = fov_weight(e, f, P)
    assert w in (1.0, P.c)
    wf = w * f
    assert abs(wf[0] * f[1] - wf[1] * f[0]) < 1e-12 and wf @ f > 0


class TestForceSequences:
    def test_lone_agent_at_equilibrium(self):
        scene = straight_walk(1.2)
        (w,) = window_scene(scene)
        seq = force_sequences([w], None, P)[w.window_id]
        assert len(seq) == 20
        for s in seq:
            np.testing.assert_allclose(s.driving, 0, atol=1e-12)
            np.testing.assert_array_equal(s.repulsive, [0, 0])
        # the last frame sits on the goal
        np.testing.assert_array_equal(seq[-1].driving, [0, 0])

    def test_trailing_frames_at_goal_are_zero(self):
        from goalforce.data import Scene

        pts = np.array([[0.4 * min(k, 15), 0.0] for k in range(20)])
        (w,) = window_scene(Scene.from_tracks({1: pts}))
        seq = force_sequences([w], None, P)[w.window_id]
        for s in seq[15:]:
            np.testing.assert_array_equal(s.driving, [0, 0])
            np.testing.assert_array_equal(s.repulsive, [0, 0])

    def test_head_on_pair_mirror_symmetry(self):
        from goalforce.data import Scene

        t = (np.arange(20) - 7) * 0.4
        # 4 m apart at the last observed frame, 1 m/s each, same line
        tracks = {1: np.stack([-2 + t, 0 * t], 1), 2: np.stack([2 - t, 0 * t], 1)}
        windows = window_scene(Scene.from_tracks(tracks))
        seqs = force_sequences(windows, None, P)
        a, b = seqs[windows[0].window_id], seqs[windows[1].window_id]
        for sa, sb in zip(a[:8], b[:8]):
            assert sa.repulsive[0] == pytest.approx(-sb.repulsive[0], abs=1e-12)
            assert sa.repulsive[0] < 0 < sb.repulsive[0]

    def test_group_assignment_masks(self):
        windows = window_scene(head_on_corridor(0))
        w = windows[0]
        other = windows[1].ego_id
        g = {w.window_id: GroupAssignment(frozenset({tuple(sorted((w.ego_id, other)))}), 4)}
        seq = force_sequences([w], g, P)[w.window_id]
        assert all(not s.repulsive.any() for s in seq)

    def test_export(self, tmp_path):
        import csv
        import json

        windows = window_scene(head_on_corridor(1))
        seqs = force_sequences(windows, None, P)
        records = list(feature_records(windows, seqs))
        assert len(records) == 40
        assert [r["t"] for r in records[:20]] == list(range(-7, 13))
        with (tmp_path / "f.jsonl").open("w") as fh:
            write_features_jsonl(records, fh)
        with (tmp_path / "f.csv").open("w") as fh:
            write_features_csv(records, fh)
        first = json.loads((tmp_path / "f.jsonl").read_text().splitlines()[0])
        assert set(first) == {"scene", "window_id", "agent_id", "t", "f_dr", "f_re", "pos", "vel", "goal"}
        with (tmp_path / "f.csv").open() as fh:
            row = next(csv.DictReader(fh))
        assert set(row) == set(first)
        assert json.loads(row["f_re"]) == first["f_re"]
