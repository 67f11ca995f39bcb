"""Best-of-K displacement errors and collision counting."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from typing import Callable, Iterable, Mapping, Sequence, TextIO

import numpy as np

from goalforce.data import Scene, TrajectoryWindow, window_scene


def _check(sample, truth):
    a = np.asarray(sample, dtype=float)
    b = np.asarray(truth, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"trajectory shapes differ: {a.shape} vs {b.shape}")
    return a, b


def ade(sample, truth) -> float:
    """Mean Euclidean distance over the time steps."""
    a, b = _check(sample, truth)
    return float(np.mean(np.linalg.norm(a - b, axis=-1)))


def fde(sample, truth) -> float:
    """Euclidean distance at the final time step."""
    a, b = _check(sample, truth)
    return float(np.linalg.norm(a[-1] - b[-1]))


def best_of_k(pred, ground_truth) -> tuple[int, float, float]:
    """Index of the lowest-ADE sample (first on ties) with its ADE and FDE."""
    samples = np.asarray(getattr(pred, "samples", pred), dtype=float)
    gt = np.asarray(ground_truth, dtype=float)
    if samples.shape[1:] != gt.shape:
        raise ValueError(f"sample shape {samples.shape[1:]} does not match ground truth {gt.shape}")
    dist = np.linalg.norm(samples - gt, axis=-1)
    ades = dist.mean(axis=-1)
    k = int(np.argmin(ades))
    return k, float(ades[k]), float(dist[k, -1])


def collision_count(trajectories, gamma: float = 0.1, unordered: bool = False) -> int:
    """Number of ``(m, n, t)`` events with ``m != n`` and distance below ``gamma``.

    ``trajectories`` is a mapping of agent to ``(T, 2)`` positions or an
    ``(N, T, 2)`` array, all aligned on the same time steps. Each close pair
    counts twice (once per ordering) unless ``unordered`` is set.
    """
    if isinstance(trajectories, Mapping):
        trajectories = [trajectories[a] for a in sorted(trajectories)]
    traj = np.asarray(trajectories, dtype=float)
    if traj.ndim != 3 or len(traj) < 2:
        return 0
    diff = traj[:, None] - traj[None, :]
    close = np.linalg.norm(diff, axis=-1) < gamma
    n = len(traj)
    close[np.arange(n), np.arange(n)] = False
    events = int(np.count_nonzero(close))
    return events // 2 if unordered else events


@dataclass(frozen=True)
class MetricsReport:
    subset: str
    ade_k: float
    fde_k: float
    nc: int
    num_windows: int
    K: int
    gamma: float
    predictor: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


REPORT_COLUMNS = ["subset", "predictor", "ade_k", "fde_k", "nc", "num_windows", "K", "gamma"]


def evaluate(
    scene: Scene | Sequence[Scene] | Sequence[TrajectoryWindow],
    predictor: Callable,
    K: int = 20,
    gamma: float = 0.1,
    seed: int = 0,
    *,
    unordered: bool = False,
    stride: int = 1,
    subset: str | None = None,
) -> MetricsReport:
    """ADE_K / FDE_K averaged over windows, plus NC over co-windowed agents.

    ``predictor(window, K, seed)`` returns a
    :class:`~goalforce.sim.PredictionSet`. Windows sharing a scene and start
    frame cover the same future frames; NC counts collisions among their
    best-ADE trajectories, chosen independently per agent.
    """
    windows = _collect_windows(scene, stride)
    ades, fdes = [], []
    best: dict[tuple[str, int], dict[int, np.ndarray]] = {}
    for w in windows:
        pred = predictor(w, K, seed)
        gt = w.future_positions
        k, a, f = best_of_k(pred, gt)
        ades.append(a)
        fdes.append(f)
        best.setdefault((w.scene_name, w.start), {})[w.ego_id] = pred.samples[k]
    nc = sum(collision_count(group, gamma, unordered) for _, group in sorted(best.items()))
    if subset is None:
        subset = windows[0].scene_name if windows else getattr(scene, "name", "")
    n = len(windows)
    return MetricsReport(
        subset=subset,
        ade_k=float(sum(ades) / n) if n else float("nan"),
        fde_k=float(sum(fdes) / n) if n else float("nan"),
        nc=nc,
        num_windows=n,
        K=K,
        gamma=gamma,
        predictor=getattr(predictor, "name", type(predictor).__name__),
    )


def _collect_windows(scene, stride: int) -> list[TrajectoryWindow]:
    if isinstance(scene, Scene):
        return window_scene(scene, stride=stride)
    items = list(scene)
    if items and isinstance(items[0], TrajectoryWindow):
        return items
    windows = []
    for s in items:
        windows.extend(window_scene(s, stride=stride))
    return windows


def _fmt(v) -> str:
    return repr(v) if isinstance(v, float) else str(v)


def write_reports_csv(reports: Iterable[MetricsReport], stream: TextIO) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(REPORT_COLUMNS)
    for r in reports:
        d = r.to_dict()
        writer.writerow([_fmt(d[c]) for c in REPORT_COLUMNS])


def write_reports_json(reports: Iterable[MetricsReport], stream: TextIO) -> None:
    json.dump([r.to_dict() for r in reports], stream, indent=2, sort_keys=True)
    stream.write("\n")


def read_reports_csv(stream: TextIO) -> list[MetricsReport]:
    out = []
    for row in csv.DictReader(stream):
        out.append(
            MetricsReport(
                subset=row["subset"],
                ade_k=float(row["ade_k"]),
                fde_k=float(row["fde_k"]),
                nc=int(row["nc"]),
                num_windows=int(row["num_windows"]),
                K=int(row["K"]),
                gamma=float(row["gamma"]),
                predictor=row.get("predictor", ""),
            )
        )
    return out


def summary_table(reports: Sequence[MetricsReport]) -> tuple[list[str], list[list[str]]]:
    """Predictor rows by subset columns of ``ADE/FDE``, plus an average column."""
    subsets = list(dict.fromkeys(r.subset for r in reports))
    predictors = list(dict.fromkeys(r.predictor for r in reports))
    header = ["method"] + subsets + ["average"]
    rows = []
    for p in predictors:
        cells = [p]
        ade_vals, fde_vals = [], []
        for s in subsets:
            match = [r for r in reports if r.predictor == p and r.subset == s]
            if match:
                r = match[-1]
                cells.append(f"{r.ade_k:.2f}/{r.fde_k:.2f}")
                ade_vals.append(r.ade_k)
                fde_vals.append(r.fde_k)
            else:
                cells.append("-")
        if ade_vals:
            cells.append(f"{np.mean(ade_vals):.2f}/{np.mean(fde_vals):.2f}")
        else:
            cells.append("-")
        rows.append(cells)
    return header, rows
