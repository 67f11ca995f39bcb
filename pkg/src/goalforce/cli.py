"""Command-line entry point: ``goalforce <subcommand> [flags]``.

Every flag can also come from a ``GOALFORCE_<NAME>`` environment variable or
a flat ``key = value`` config file (``--config``); a run manifest JSON is
accepted as a config file too. Precedence: command line, environment,
config file, built-in defaults.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
from dataclasses import asdict
from pathlib import Path

from goalforce import __version__
from goalforce.data import (
    DEFAULT_DT,
    FormatConfig,
    IntegrityError,
    ParseError,
    format_counts,
    load_scene,
    validate_counts,
    window_scene,
    write_counts_csv,
)
from goalforce.forces import (
    ConfigError,
    ForceParams,
    feature_records,
    force_sequences,
    write_features_csv,
    write_features_jsonl,
)
from goalforce.grouping import window_groups, write_groups_csv
from goalforce.metrics import (
    evaluate,
    read_reports_csv,
    summary_table,
    write_reports_csv,
    write_reports_json,
)
from goalforce.sim import ConstantVelocityPredictor, GoalSource, SocialForcePredictor
from goalforce import synthetic

ENV_PREFIX = "GOALFORCE_"
SUBCOMMANDS = ("ingest", "groups", "features", "simulate", "evaluate", "report")
PREDICTORS = ("social-force", "constant-velocity")

# Recording names used by the common ETH/UCY exports.
SUBSET_ALIASES = {
    "eth": ["biwi_eth", "eth"],
    "hotel": ["biwi_hotel", "hotel"],
    "univ": ["students001", "students003", "uni_examples", "univ"],
    "zara1": ["crowds_zara01", "zara01", "zara1"],
    "zara2": ["crowds_zara02", "zara02", "zara2"],
}

DEFAULTS = {
    "dataset_dir": None,
    "subset": [],
    "input": [],
    "synthetic": None,
    "variants": 20,
    "format": str(FormatConfig()),
    "dt": DEFAULT_DT,
    "stride": 1,
    **{k: v for k, v in asdict(ForceParams()).items() if k != "dt"},
    "eps": 1.0,
    "min_pts": 2,
    "sigma": 4,
    "no_groups": False,
    "K": 20,
    "gamma": 0.1,
    "seed": 0,
    "goal": "oracle",
    "goal_noise": 0.5,
    "predictor": "social-force",
    "fov_on_source": False,
    "unordered_nc": False,
    "joint": False,
    "substeps": 1,
    "out": "out",
    "reports": [],
}


class UsageError(Exception):
    pass


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    value = str(text).strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off", ""):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _list(text) -> list[str]:
    if isinstance(text, list):
        return text
    return [p for p in (s.strip() for s in str(text).split(",")) if p]


def _add_common(p: argparse.ArgumentParser) -> None:
    S = argparse.SUPPRESS
    g = p.add_argument_group("input")
    g.add_argument("--config", default=S, help="flat key = value file or a run manifest JSON")
    g.add_argument("--dataset-dir", dest="dataset_dir", default=S)
    g.add_argument("--subset", action="append", default=S, help="subset name (repeatable)")
    g.add_argument("--input", action="append", default=S, help="trajectory file (repeatable)")
    g.add_argument("--synthetic", default=S, choices=sorted(synthetic.SUITES), help="use a seeded synthetic suite")
    g.add_argument("--variants", type=int, default=S, help="synthetic variants (default 20)")
    g.add_argument("--format", default=S, help="column layout, e.g. 'cols=frame,id,x,y;sep=,'")
    g.add_argument("--dt", type=float, default=S, help="seconds between listed frames (default 0.4)")
    g.add_argument("--stride", type=int, default=S, help="window start stride in frames (default 1)")

    f = p.add_argument_group("social force")
    f.add_argument("--tau", type=float, default=S, help="relaxation time, s (default 0.5)")
    f.add_argument("--v0", dest="v0_default", type=float, default=S, help="fallback desired speed, m/s (default 1.34)")
    f.add_argument("--V0", dest="V0", type=float, default=S, help="repulsive amplitude, m^2/s^2 (default 2.1)")
    f.add_argument("--sigma-v", dest="sigma_V", type=float, default=S, help="potential decay length, m (default 0.3)")
    f.add_argument("--two-eps-deg", dest="two_epsilon_deg", type=float, default=S, help="sight angle (default 200)")
    f.add_argument("--c", type=float, default=S, help="out-of-view weight (default 0.5)")
    f.add_argument("--v-max-factor", dest="v_max_factor", type=float, default=S, help="speed clamp (default 1.3)")
    f.add_argument("--fov-on-source", dest="fov_on_source", action="store_true", default=S)

    gr = p.add_argument_group("grouping")
    gr.add_argument("--eps", type=float, default=S, help="DBSCAN radius, m (default 1.0)")
    gr.add_argument("--min-pts", dest="min_pts", type=int, default=S, help="DBSCAN min points (default 2)")
    gr.add_argument("--sigma", type=int, default=S, help="frames co-clustered to group, strict (default 4)")
    gr.add_argument("--no-groups", dest="no_groups", action="store_true", default=S)

    s = p.add_argument_group("simulation and evaluation")
    s.add_argument("--K", dest="K", type=int, default=S, help="samples per agent (default 20)")
    s.add_argument("--gamma", type=float, default=S, help="collision threshold, m (default 0.1)")
    s.add_argument("--seed", type=int, default=S)
    s.add_argument("--goal", choices=("oracle", "extrapolate"), default=S)
    s.add_argument("--goal-noise", dest="goal_noise", type=float, default=S, help="goal perturbation std, m (default 0.5)")
    s.add_argument("--predictor", default=S, help=f"comma list of {', '.join(PREDICTORS)}")
    s.add_argument("--unordered-nc", dest="unordered_nc", action="store_true", default=S)
    s.add_argument("--joint", action="store_true", default=S)
    s.add_argument("--substeps", type=int, default=S)
    s.add_argument("--out", default=S, help="output directory (default ./out)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="goalforce",
        description="Social-force trajectory features, simulation and evaluation.",
        epilog=f"Each flag is mirrored by an environment variable {ENV_PREFIX}<DEST>, e.g. {ENV_PREFIX}SIGMA_V.",
    )
    parser.add_argument("--version", action="version", version=f"goalforce {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="{" + ",".join(SUBCOMMANDS) + "}")
    sub.required = True
    helps = {
        "ingest": "parse subsets and report window counts",
        "groups": "detect groups per window",
        "features": "export per-step driving/repulsive forces",
        "simulate": "sample K futures per window",
        "evaluate": "compute ADE_K / FDE_K / NC",
        "report": "merge metrics CSVs into one table",
    }
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, help=helps[name])
        _add_common(p)
        if name == "report":
            p.add_argument("reports", nargs="*", default=argparse.SUPPRESS, help="metrics.csv files or directories")
    return parser


def _flag_table(parser: argparse.ArgumentParser) -> dict[str, argparse.Action]:
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    table = {}
    for p in sub.choices.values():
        for action in p._actions:
            if action.dest in DEFAULTS or action.dest == "config":
                table[action.dest] = action
                for opt in action.option_strings:
                    table[opt.lstrip("-").replace("-", "_")] = action
    return table


def _convert(action: argparse.Action, key: str, raw):
    dest = action.dest
    try:
        if isinstance(action, argparse._StoreTrueAction):
            return _bool(raw)
        if dest in ("subset", "input", "reports"):
            return _list(raw)
        return raw if action.type is None else action.type(raw)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad value for {key}: {raw!r} ({exc})") from None


def read_config_file(path: str, table) -> dict:
    text = Path(path).read_text()
    if text.lstrip().startswith("{"):
        items = json.loads(text).get("config", {}).items()
    else:
        items = []
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise UsageError(f"{path}:{lineno}: expected key = value")
            items.append((key.strip(), value.strip()))
    out = {}
    for key, value in items:
        action = table.get(key) or table.get(key.replace("-", "_"))
        if action is None:
            raise UsageError(f"{path}: unknown config key {key!r}")
        if action.dest == "config":
            continue
        out[action.dest] = value if value is None else _convert(action, key, value)
    return out


def resolve_config(argv) -> dict:
    """Merge defaults, config file, environment and command line."""
    parser = build_parser()
    ns = vars(parser.parse_args(argv))
    table = _flag_table(parser)
    command = ns.pop("command")
    cfg = dict(DEFAULTS)
    config_path = ns.pop("config", None) or os.environ.get(ENV_PREFIX + "CONFIG")
    if config_path:
        cfg.update(read_config_file(config_path, table))
    for dest in DEFAULTS:
        raw = os.environ.get(ENV_PREFIX + dest.upper())
        if raw is not None and dest in table:
            cfg[dest] = _convert(table[dest], ENV_PREFIX + dest.upper(), raw)
    for dest, value in ns.items():
        if dest in ("subset", "input", "reports"):
            value = [p for v in value for p in _list(v)]
        cfg[dest] = value
    cfg["command"] = command
    return cfg


def force_params(cfg) -> ForceParams:
    names = [n for n in ForceParams.field_names() if n != "dt"]
    return ForceParams(dt=cfg["dt"], **{n: cfg[n] for n in names})


def check_config(cfg) -> None:
    force_params(cfg)
    rules = {
        "dt": cfg["dt"] > 0,
        "stride": cfg["stride"] >= 1,
        "eps": cfg["eps"] > 0,
        "min_pts": cfg["min_pts"] >= 1,
        "sigma": cfg["sigma"] >= 0,
        "K": cfg["K"] >= 1,
        "gamma": cfg["gamma"] > 0,
        "goal_noise": cfg["goal_noise"] >= 0,
        "substeps": cfg["substeps"] >= 1,
        "variants": cfg["variants"] >= 1,
    }
    for name, ok in rules.items():
        if not ok:
            raise ConfigError(name, f"invalid value {cfg[name]!r}")
    for p in _list(cfg["predictor"]):
        if p not in PREDICTORS:
            raise ConfigError("predictor", f"unknown predictor {p!r}")


def resolve_subset_files(dataset_dir: str, subset: str) -> list[Path]:
    root = Path(dataset_dir)
    direct = root / f"{subset}.txt"
    if direct.is_file():
        return [direct]
    for sub in (root / subset / "test", root / subset):
        files = sorted(sub.glob("*.txt")) if sub.is_dir() else []
        if files:
            return files
    names = SUBSET_ALIASES.get(subset.lower(), [subset])
    files = sorted(p for p in root.rglob("*.txt") if p.stem in names)
    seen, unique = set(), []
    for p in files:
        if p.name not in seen:
            seen.add(p.name)
            unique.append(p)
    if not unique:
        raise UsageError(f"no trajectory files found for subset {subset!r} under {root}")
    return unique


def load_inputs(cfg) -> tuple[dict[str, list], list[Path]]:
    """Scenes per subset, plus every file read (for the manifest)."""
    fmt = FormatConfig.from_string(cfg["format"])
    subsets: dict[str, list] = {}
    files: list[Path] = []
    if cfg["synthetic"]:
        subsets[cfg["synthetic"]] = synthetic.suite(cfg["synthetic"], cfg["variants"], cfg["seed"])
    if cfg["subset"]:
        if not cfg["dataset_dir"]:
            raise UsageError("--subset needs --dataset-dir")
        for name in cfg["subset"]:
            paths = resolve_subset_files(cfg["dataset_dir"], name)
            subsets[name] = [load_scene(p, fmt, dt=cfg["dt"]) for p in paths]
            files.extend(paths)
    for path in cfg["input"]:
        p = Path(path)
        if not p.is_file():
            raise UsageError(f"no such input file: {path}")
        subsets.setdefault(p.stem, []).append(load_scene(p, fmt, dt=cfg["dt"]))
        files.append(p)
    if not subsets and cfg["command"] != "report":
        raise UsageError("no input: give --synthetic, --input or --dataset-dir with --subset")
    return subsets, files


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_manifest(out: Path, cfg, files) -> None:
    config = {k: v for k, v in cfg.items() if k != "command"}
    manifest = {
        "tool": "goalforce",
        "version": __version__,
        "command": cfg["command"],
        "config": config,
        "inputs": [{"path": str(p), "sha256": _sha256(p)} for p in files],
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def make_predictor(name: str, cfg):
    if name == "constant-velocity":
        return ConstantVelocityPredictor()
    return SocialForcePredictor(
        params=force_params(cfg),
        goal_source=GoalSource(cfg["goal"], cfg["goal_noise"]),
        joint=cfg["joint"],
        substeps=cfg["substeps"],
        grouping=not cfg["no_groups"],
        eps=cfg["eps"],
        min_pts=cfg["min_pts"],
        sigma=cfg["sigma"],
        fov_on_source=cfg["fov_on_source"],
    )


def _windows(scenes, cfg):
    out = []
    for s in scenes:
        out.extend(window_scene(s, stride=cfg["stride"]))
    return out


def cmd_ingest(cfg, subsets, out: Path) -> None:
    rows = validate_counts(subsets, stride=cfg["stride"])
    print(format_counts(rows))
    with (out / "counts.csv").open("w") as fh:
        write_counts_csv(rows, fh)


def cmd_groups(cfg, subsets, out: Path) -> None:
    with (out / "groups.csv").open("w") as fh:
        for i, scenes in enumerate(subsets.values()):
            for j, scene in enumerate(scenes):
                windows = window_scene(scene, stride=cfg["stride"])
                assignments = {w.window_id: window_groups(w, cfg["eps"], cfg["min_pts"], cfg["sigma"]) for w in windows}
                write_groups_csv(windows, assignments, fh, header=(i == 0 and j == 0))


def cmd_features(cfg, subsets, out: Path) -> None:
    params = force_params(cfg)
    records = []
    for scenes in subsets.values():
        for scene in scenes:
            windows = window_scene(scene, stride=cfg["stride"])
            groups = None
            if not cfg["no_groups"]:
                groups = {w.window_id: window_groups(w, cfg["eps"], cfg["min_pts"], cfg["sigma"]) for w in windows}
            seqs = force_sequences(windows, groups, params, fov_on_source=cfg["fov_on_source"])
            records.extend(feature_records(windows, seqs))
    with (out / "forces.jsonl").open("w") as fh:
        write_features_jsonl(records, fh)
    with (out / "forces.csv").open("w") as fh:
        write_features_csv(records, fh)


def cmd_simulate(cfg, subsets, out: Path) -> None:
    name = _list(cfg["predictor"])[0]
    predictor = make_predictor(name, cfg)
    with (out / "predictions.jsonl").open("w") as fh:
        for scenes in subsets.values():
            for w in _windows(scenes, cfg):
                pred = predictor(w, cfg["K"], cfg["seed"])
                for k, traj in enumerate(pred.samples):
                    for t, (x, y) in enumerate(traj, start=1):
                        rec = {"scene": w.scene_name, "window_id": w.window_id, "k": k, "t": t, "x": float(x), "y": float(y)}
                        fh.write(json.dumps(rec) + "\n")


def cmd_evaluate(cfg, subsets, out: Path) -> None:
    reports = []
    for name in _list(cfg["predictor"]):
        predictor = make_predictor(name, cfg)
        for subset, scenes in subsets.items():
            reports.append(
                evaluate(
                    scenes, predictor, K=cfg["K"], gamma=cfg["gamma"], seed=cfg["seed"],
                    unordered=cfg["unordered_nc"], stride=cfg["stride"], subset=subset,
                )
            )
    with (out / "metrics.csv").open("w") as fh:
        write_reports_csv(reports, fh)
    with (out / "metrics.json").open("w") as fh:
        write_reports_json(reports, fh)
    for r in reports:
        print(f"{r.predictor:<18} {r.subset:<10} ADE {r.ade_k:.3f}  FDE {r.fde_k:.3f}  NC {r.nc}  windows {r.num_windows}")


def cmd_report(cfg, out: Path) -> list[Path]:
    paths = []
    for item in cfg["reports"]:
        p = Path(item)
        paths.extend(sorted(p.rglob("metrics.csv")) if p.is_dir() else [p])
    if not paths:
        raise UsageError("report needs metrics.csv files or directories")
    reports = []
    for p in paths:
        with p.open() as fh:
            reports.extend(read_reports_csv(fh))
    header, rows = summary_table(reports)
    with (out / "report.csv").open("w") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    widths = [max(len(r[i]) for r in [header] + rows) for i in range(len(header))]
    for r in [header] + rows:
        print("  ".join(c.ljust(w) for c, w in zip(r, widths)))
    return paths


def run(argv=None) -> int:
    try:
        cfg = resolve_config(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"goalforce: error: {exc}", file=sys.stderr)
        return 2
    try:
        check_config(cfg)
        out = Path(cfg["out"])
        if cfg["command"] == "report":
            out.mkdir(parents=True, exist_ok=True)
            files = cmd_report(cfg, out)
        else:
            subsets, files = load_inputs(cfg)
            out.mkdir(parents=True, exist_ok=True)
            {
                "ingest": cmd_ingest,
                "groups": cmd_groups,
                "features": cmd_features,
                "simulate": cmd_simulate,
                "evaluate": cmd_evaluate,
            }[cfg["command"]](cfg, subsets, out)
        write_manifest(out, cfg, files)
    except ConfigError as exc:
        print(f"goalforce: config error: {exc}", file=sys.stderr)
        return 2
    except UsageError as exc:
        print(f"goalforce: error: {exc}", file=sys.stderr)
        return 2
    except (ParseError, IntegrityError) as exc:
        print(f"goalforce: input error: {exc}", file=sys.stderr)
        return 1
    return 0


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
