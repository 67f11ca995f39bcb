"""Trajectory ingestion, windowing and dataset bookkeeping.

Input files hold one ``(frame, id, x, y)`` record per line, the layout used by
the public ETH/UCY exports. Positions are in meters; frame ids may be spaced
(the raw exports list every 10th video frame), and ``dt`` is the wall-clock
interval between consecutive *listed* frames.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Sequence, TextIO

import numpy as np

DEFAULT_DT = 0.4  # 2.5 Hz
OBS_STEPS = 7  # H; the observation holds H + 1 = 8 frames
PRED_STEPS = 12  # T

# Valid-trajectory counts reported for the five public subsets.
REFERENCE_COUNTS = {
    "eth": 364,
    "hotel": 1197,
    "univ": 24334,
    "zara1": 2356,
    "zara2": 5910,
}


class ParseError(ValueError):
    """A line of a trajectory file could not be parsed."""

    def __init__(self, lineno: int, line: str, reason: str):
        self.lineno = lineno
        self.line = line
        super().__init__(f"line {lineno}: {reason}: {line!r}")


class IntegrityError(ValueError):
    """The records are well-formed but inconsistent (e.g. duplicate keys)."""


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float).reshape(2)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class AgentState:
    agent_id: int
    position: np.ndarray
    velocity: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "position", _frozen(self.position))
        object.__setattr__(self, "velocity", _frozen(self.velocity))

    def __repr__(self):
        return (
            f"AgentState(agent_id={self.agent_id}, position={self.position.tolist()}, "
            f"velocity={self.velocity.tolist()})"
        )


@dataclass(frozen=True, eq=False)
class Frame:
    frame_index: int
    states: Mapping[int, AgentState]

    @cached_property
    def ids(self) -> np.ndarray:
        return np.array(sorted(self.states), dtype=int)

    @cached_property
    def positions(self) -> np.ndarray:
        """(n, 2) positions in ascending agent-id order."""
        return np.array([self.states[i].position for i in self.ids], dtype=float).reshape(-1, 2)

    @cached_property
    def velocities(self) -> np.ndarray:
        return np.array([self.states[i].velocity for i in self.ids], dtype=float).reshape(-1, 2)

    def __contains__(self, agent_id) -> bool:
        return agent_id in self.states

    def __len__(self):
        return len(self.states)


@dataclass(frozen=True, eq=False)
class Scene:
    frames: tuple[Frame, ...]
    dt: float = DEFAULT_DT
    name: str = ""

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        idx = [f.frame_index for f in self.frames]
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise IntegrityError("frame indices must be strictly increasing")

    def __len__(self):
        return len(self.frames)

    @cached_property
    def agent_ids(self) -> list[int]:
        return sorted({i for f in self.frames for i in f.states})

    @classmethod
    def from_tracks(
        cls,
        tracks: Mapping[int, np.ndarray],
        *,
        start_frames: Mapping[int, int] | None = None,
        dt: float = DEFAULT_DT,
        frame_step: int = 10,
        name: str = "",
    ) -> Scene:
        """Build a scene from per-agent position arrays.

        ``tracks[a]`` is an ``(n_a, 2)`` array sampled every listed frame,
        starting at listed-frame ordinal ``start_frames[a]`` (default 0).
        """
        start_frames = start_frames or {}
        records = []
        for agent_id, pts in tracks.items():
            pts = np.asarray(pts, dtype=float).reshape(-1, 2)
            s = start_frames.get(agent_id, 0)
            for k, (x, y) in enumerate(pts):
                records.append(((s + k) * frame_step, int(agent_id), float(x), float(y)))
        return build_scene(records, dt=dt, name=name)


def build_scene(records: Iterable[tuple[int, int, float, float]], *, dt: float = DEFAULT_DT, name: str = "") -> Scene:
    """Assemble a scene from ``(frame_id, agent_id, x, y)`` records.

    Velocities are backward differences between an agent's consecutive listed
    frames, divided by the elapsed time; the first observation of each track
    copies the velocity of the second, and single-observation tracks get zero.
    """
    by_frame: dict[int, dict[int, np.ndarray]] = {}
    for frame_id, agent_id, x, y in records:
        slot = by_frame.setdefault(int(frame_id), {})
        if agent_id in slot:
            raise IntegrityError(f"duplicate record for agent {agent_id} in frame {frame_id}")
        slot[int(agent_id)] = np.array((x, y), dtype=float)

    frame_ids = sorted(by_frame)
    ordinal = {f: k for k, f in enumerate(frame_ids)}

    tracks: dict[int, list[tuple[int, np.ndarray]]] = {}
    for f in frame_ids:
        for agent_id, pos in by_frame[f].items():
            tracks.setdefault(agent_id, []).append((ordinal[f], pos))

    velocity: dict[tuple[int, int], np.ndarray] = {}
    for agent_id, track in tracks.items():
        if len(track) == 1:
            velocity[(track[0][0], agent_id)] = np.zeros(2)
            continue
        for (o_prev, p_prev), (o, p) in zip(track, track[1:]):
            velocity[(o, agent_id)] = (p - p_prev) / (dt * (o - o_prev))
        velocity[(track[0][0], agent_id)] = velocity[(track[1][0], agent_id)]

    frames = []
    for f in frame_ids:
        o = ordinal[f]
        states = {
            a: AgentState(a, pos, velocity[(o, a)]) for a, pos in sorted(by_frame[f].items())
        }
        frames.append(Frame(f, states))
    return Scene(tuple(frames), dt=dt, name=name)


@dataclass(frozen=True)
class FormatConfig:
    """Column layout of a trajectory file.

    ``columns`` names each field; it must contain ``frame``, ``id``, ``x`` and
    ``y``, and any other name (e.g. ``_``) marks a column to ignore. A
    ``sep`` of ``None`` splits on arbitrary whitespace.
    """

    columns: tuple[str, ...] = ("frame", "id", "x", "y")
    sep: str | None = None

    def __post_init__(self):
        missing = {"frame", "id", "x", "y"} - set(self.columns)
        if missing:
            raise ValueError(f"format is missing column(s): {', '.join(sorted(missing))}")

    @classmethod
    def from_string(cls, text: str) -> FormatConfig:
        """Parse ``"cols=frame,id,x,y;sep=,"`` (either key optional)."""
        columns = cls.columns
        sep = None
        for part in filter(None, (p.strip() for p in text.split(";"))):
            key, _, value = part.partition("=")
            key = key.strip().lower()
            if key in ("cols", "columns"):
                columns = tuple(c.strip().lower() for c in value.split(","))
            elif key == "sep":
                sep = {"tab": "\t", "\\t": "\t", "space": None, "whitespace": None, "": None}.get(value, value)
            else:
                raise ValueError(f"unknown format key {key!r}")
        return cls(columns=columns, sep=sep)

    def __str__(self):
        sep = "whitespace" if self.sep is None else ("tab" if self.sep == "\t" else self.sep)
        return f"cols={','.join(self.columns)};sep={sep}"


def _parse_int(token: str) -> int:
    value = float(token)
    if not value.is_integer():
        raise ValueError(f"non-integer id {token!r}")
    return int(value)


def parse_scene(
    source: TextIO | str,
    fmt: FormatConfig | None = None,
    *,
    dt: float = DEFAULT_DT,
    name: str = "",
) -> Scene:
    """Parse a trajectory text stream into a :class:`Scene`.

    Blank lines and lines starting with ``#`` are skipped. Raises
    :class:`ParseError` on malformed or non-finite fields and
    :class:`IntegrityError` on a repeated ``(frame, agent)`` pair.
    """
    fmt = fmt or FormatConfig()
    if isinstance(source, str):
        source = io.StringIO(source)
    col = {c: k for k, c in enumerate(fmt.columns)}
    records = []
    seen = set()
    for lineno, line in enumerate(source, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        fields = stripped.split(fmt.sep)
        if len(fields) != len(fmt.columns):
            raise ParseError(lineno, stripped, f"expected {len(fmt.columns)} columns, got {len(fields)}")
        try:
            frame_id = _parse_int(fields[col["frame"]])
            agent_id = _parse_int(fields[col["id"]])
            x = float(fields[col["x"]])
            y = float(fields[col["y"]])
        except ValueError as exc:
            raise ParseError(lineno, stripped, str(exc)) from None
        if not (math.isfinite(x) and math.isfinite(y)):
            raise ParseError(lineno, stripped, "non-finite coordinate")
        if (frame_id, agent_id) in seen:
            raise IntegrityError(f"line {lineno}: duplicate record for agent {agent_id} in frame {frame_id}")
        seen.add((frame_id, agent_id))
        records.append((frame_id, agent_id, x, y))
    return build_scene(records, dt=dt, name=name)


def load_scene(path, fmt: FormatConfig | None = None, *, dt: float = DEFAULT_DT, name: str | None = None) -> Scene:
    from pathlib import Path

    path = Path(path)
    with path.open() as fh:
        return parse_scene(fh, fmt, dt=dt, name=path.stem if name is None else name)


def write_scene(scene: Scene, stream: TextIO, fmt: FormatConfig | None = None, precision: int | None = None) -> None:
    """Serialize ``scene`` in the layout described by ``fmt``.

    With ``precision=None`` floats are written with ``repr`` so a re-parse is
    bit-exact. Ignored columns are written as ``0``.
    """
    fmt = fmt or FormatConfig()
    sep = " " if fmt.sep is None else fmt.sep

    def num(v: float) -> str:
        return repr(float(v)) if precision is None else f"{v:.{precision}f}"

    for frame in scene.frames:
        for agent_id, st in frame.states.items():
            values = {"frame": str(frame.frame_index), "id": str(agent_id), "x": num(st.position[0]), "y": num(st.position[1])}
            stream.write(sep.join(values.get(c, "0") for c in fmt.columns) + "\n")


@dataclass(frozen=True, eq=False)
class TrajectoryWindow:
    """One agent's ``H + 1`` observed and ``T`` future frames.

    ``frames`` keeps the full scene frames of the window so neighbor states
    are available at every step without copying them.
    """

    scene_name: str
    window_id: int
    start: int
    ego_id: int
    frames: tuple[Frame, ...]
    dt: float
    obs_len: int = OBS_STEPS + 1
    observed: tuple[AgentState, ...] = field(init=False)
    future: tuple[AgentState, ...] = field(init=False)

    def __post_init__(self):
        ego = [f.states[self.ego_id] for f in self.frames]
        object.__setattr__(self, "observed", tuple(ego[: self.obs_len]))
        object.__setattr__(self, "future", tuple(ego[self.obs_len :]))

    @property
    def goal(self) -> np.ndarray:
        return self.future[-1].position

    @property
    def pred_len(self) -> int:
        return len(self.future)

    @property
    def observed_frames(self) -> tuple[Frame, ...]:
        return self.frames[: self.obs_len]

    @property
    def neighbors(self) -> tuple[tuple[AgentState, ...], ...]:
        return tuple(
            tuple(st for a, st in f.states.items() if a != self.ego_id) for f in self.frames
        )

    @property
    def observed_positions(self) -> np.ndarray:
        return np.array([s.position for s in self.observed])

    @property
    def future_positions(self) -> np.ndarray:
        return np.array([s.position for s in self.future])


def window_scene(scene: Scene, H: int = OBS_STEPS, T: int = PRED_STEPS, stride: int = 1) -> list[TrajectoryWindow]:
    """Slice a scene into every full ``H + 1 + T`` frame window.

    Start frames step by ``stride`` over listed-frame ordinals; every agent
    present in all frames of a slice yields one window. Windows are ordered
    by ``(start, agent_id)`` and numbered consecutively from 0.
    """
    if stride < 1:
        raise ValueError("stride must be >= 1")
    length = H + 1 + T
    windows = []
    frames = scene.frames
    for start in range(0, len(frames) - length + 1, stride):
        chunk = frames[start : start + length]
        present = set(chunk[0].states)
        for f in chunk[1:]:
            present &= f.states.keys()
            if not present:
                break
        for agent_id in sorted(present):
            windows.append(
                TrajectoryWindow(scene.name, len(windows), start, agent_id, chunk, scene.dt, obs_len=H + 1)
            )
    return windows


@dataclass(frozen=True)
class CountRow:
    subset: str
    count: int
    expected: int | None
    deviation_pct: float | None


def validate_counts(
    scenes: Mapping[str, Scene | Sequence[Scene]],
    *,
    H: int = OBS_STEPS,
    T: int = PRED_STEPS,
    stride: int = 1,
    expected: Mapping[str, int] = REFERENCE_COUNTS,
) -> list[CountRow]:
    """Count windows per subset and compare them with the reference counts.

    A subset may consist of several recordings (Univ ships as two files).
    ``deviation_pct`` is ``|count - expected| / expected * 100``; it is
    ``None`` for subsets without a reference value.
    """
    rows = []
    for subset, sc in scenes.items():
        members = [sc] if isinstance(sc, Scene) else list(sc)
        count = sum(len(window_scene(s, H, T, stride)) for s in members)
        ref = expected.get(subset.lower())
        dev = None if ref is None else abs(count - ref) / ref * 100.0
        rows.append(CountRow(subset, count, ref, dev))
    return rows


def format_counts(rows: Sequence[CountRow]) -> str:
    lines = [f"{'subset':<10}{'count':>8}{'expected':>10}{'deviation %':>13}"]
    for r in rows:
        exp = "-" if r.expected is None else str(r.expected)
        dev = "-" if r.deviation_pct is None else f"{r.deviation_pct:.2f}"
        lines.append(f"{r.subset:<10}{r.count:>8}{exp:>10}{dev:>13}")
    return "\n".join(lines)


def write_counts_csv(rows: Sequence[CountRow], stream: TextIO) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["subset", "count", "expected", "deviation_pct"])
    for r in rows:
        writer.writerow(
            [r.subset, r.count, "" if r.expected is None else r.expected,
             "" if r.deviation_pct is None else f"{r.deviation_pct:.4f}"]
        )
