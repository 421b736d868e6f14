"""Run-directory layout and artifact export.

    <run_dir>/config.json        resolved config, seed included
    <run_dir>/episodes/ep_<k>.csv    per-step trajectory + reward breakdown
    <run_dir>/maps/              final (and optionally per-step) grid snapshots
    <run_dir>/checkpoints/       value-network checkpoints + loss curve CSV
    <run_dir>/summary.json       metric aggregates (no timestamps: reruns of the
                                 same config+seed are byte-identical)
    <run_dir>/manifest.json      file list with sizes and sha256 hashes

Grids export as plain CSV and 8-bit grayscale PGM named step_<t>_<grid>.<ext>.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from pathlib import Path

import numpy as np

from .belief import BeliefTracker, certainty_weighted_observation
from .config import ExperimentConfig
from .dqn import save_checkpoint
from .env import BURNT, EnvState
from .mission import EpisodeResult, run_experiment_in_memory

EPISODE_COLUMNS = ["t", "x", "y", "heading", "battery", "action", "r_obj",
                   "r_cstr", "r_inf", "r_total", "mia", "n_det", "n_tot",
                   "coverage"]


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.9g}"
    return str(value)


def write_episode_csv(path: Path, rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(EPISODE_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in EPISODE_COLUMNS])


def write_grid_csv(path: Path, grid: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in np.asarray(grid):
            writer.writerow([_fmt(float(v)) for v in row])


def write_grid_pgm(path: Path, grid: np.ndarray, vmax: float | None = None) -> None:
    """8-bit grayscale PGM (binary P5), values scaled onto 0..255."""
    g = np.asarray(grid, dtype=float)
    if vmax is None:
        vmax = float(g.max()) if g.size and g.max() > 0 else 1.0
    scaled = np.clip(g / vmax * 255.0, 0.0, 255.0).astype(np.uint8)
    h, w = scaled.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode())
        fh.write(scaled.tobytes())


def export_env_snapshot(out_dir: Path, state: EnvState, a_max: float) -> list[Path]:
    """Per-step environment grids, CSV + PGM, named step_<t>_<grid>.<ext>."""
    out_dir.mkdir(parents=True, exist_ok=True)
    grids = {
        "F": (state.ignition.astype(float), 2.0),
        "f": (state.fuel, max(1.0, float(state.fuel_initial.max()))),
        "A": (state.wind_mag, max(1.0, a_max)),
        "phi": (state.wind_phase, 2.0 * math.pi),
    }
    written = []
    for name, (grid, vmax) in grids.items():
        p_csv = out_dir / f"step_{state.t}_{name}.csv"
        p_pgm = out_dir / f"step_{state.t}_{name}.pgm"
        write_grid_csv(p_csv, grid)
        write_grid_pgm(p_pgm, grid, vmax)
        written.extend([p_csv, p_pgm])
    return written


def export_agent_snapshot(out_dir: Path, tracker: BeliefTracker, t: int,
                          tag: str) -> list[Path]:
    """Belief / certainty-weighted-observation snapshots next to the env ones."""
    out_dir.mkdir(parents=True, exist_ok=True)
    grids = {
        "belief": tracker.belief.b,
        "certainty": tracker.certainty.certainty(t),
        "zweighted": certainty_weighted_observation(tracker.certainty, t),
    }
    written = []
    for name, grid in grids.items():
        p_csv = out_dir / f"{tag}_{name}.csv"
        p_pgm = out_dir / f"{tag}_{name}.pgm"
        write_grid_csv(p_csv, grid)
        write_grid_pgm(p_pgm, grid, 1.0)
        written.extend([p_csv, p_pgm])
    return written


def default_output_root(cfg: ExperimentConfig) -> Path:
    return Path(os.environ.get("PYROFRONT_OUT", cfg.output_dir))


def run_dir_name(cfg: ExperimentConfig) -> str:
    return f"{cfg.mode}_{cfg.scenario}_seed{cfg.seed}"


def summarize(cfg: ExperimentConfig, episodes: list[EpisodeResult]) -> dict:
    causes: dict[str, int] = {}
    for e in episodes:
        causes[e.termination] = causes.get(e.termination, 0) + 1
    per_episode = [
        {
            "episode": k,
            "steps": e.steps,
            "coverage": e.coverage,
            "time_average_mia": e.time_avg_mia,
            "termination": e.termination,
            "burnout_steps": e.burnout_steps,
        }
        for k, e in enumerate(episodes)
    ]
    return {
        "config_hash": cfg.config_hash(),
        "mode": cfg.mode,
        "scenario": cfg.scenario,
        "seed": cfg.seed,
        "num_episodes": len(episodes),
        "coverage_ratio": float(np.mean([e.coverage for e in episodes])),
        "time_average_mia": float(np.mean([e.time_avg_mia for e in episodes])),
        "termination_causes": dict(sorted(causes.items())),
        "episodes": per_episode,
    }


def write_summary(run_dir: Path, summary: dict) -> None:
    (run_dir / "summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n")
    with open(run_dir / "summary.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["episode", "steps", "coverage", "time_average_mia",
                         "termination", "burnout_steps"])
        for row in summary["episodes"]:
            writer.writerow([row["episode"], row["steps"], _fmt(row["coverage"]),
                             _fmt(row["time_average_mia"]), row["termination"],
                             row["burnout_steps"]])


def run_experiment(cfg: ExperimentConfig, run_dir: str | Path | None = None) -> Path:
    """Execute one experiment and write all artifacts under the run directory.

    On abort, whatever episodes finished are flushed and the manifest carries
    partial=true before the exception propagates.
    """
    cfg.validate()
    if run_dir is None:
        run_dir = default_output_root(cfg) / run_dir_name(cfg)
    run_dir = Path(run_dir)
    (run_dir / "episodes").mkdir(parents=True, exist_ok=True)
    (run_dir / "maps").mkdir(parents=True, exist_ok=True)
    (run_dir / "checkpoints").mkdir(parents=True, exist_ok=True)
    (run_dir / "config.json").write_text(cfg.to_json() + "\n")

    episodes: list[EpisodeResult] = []

    def hook(ep: int, result: EpisodeResult, tracker: BeliefTracker) -> None:
        episodes.append(result)
        write_episode_csv(run_dir / "episodes" / f"ep_{ep}.csv", result.rows)
        final_t = result.final_env.t
        write_grid_csv(run_dir / "maps" / f"ep_{ep}_final_F.csv",
                       result.final_env.ignition.astype(float))
        export_agent_snapshot(run_dir / "maps", tracker, final_t, f"ep_{ep}_final")

    step_hook = None
    if cfg.snapshot_maps:
        def step_hook(ep: int, env, tracker: BeliefTracker) -> None:
            out = run_dir / "maps" / f"ep_{ep}_env"
            export_env_snapshot(out, env, cfg.env.a_max)
            export_agent_snapshot(out, tracker, env.t, f"step_{env.t}")

    try:
        result = run_experiment_in_memory(cfg, episode_hook=hook,
                                          step_hook=step_hook)
    except Exception:
        export_artifacts(run_dir, partial=True)
        raise

    save_checkpoint(result.trainer.net, run_dir / "checkpoints" / "final.ckpt",
                    cfg.config_hash())
    with open(run_dir / "checkpoints" / "loss.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "loss"])
        for step, loss in result.trainer.loss_log:
            writer.writerow([step, _fmt(loss)])

    write_summary(run_dir, summarize(cfg, episodes))
    export_artifacts(run_dir)
    return run_dir


def _episode_trajectory_overlay(run_dir: Path, ep: int) -> Path | None:
    """Merge the UAV path with the final burnt map into one CSV."""
    ep_csv = run_dir / "episodes" / f"ep_{ep}.csv"
    final_f = run_dir / "maps" / f"ep_{ep}_final_F.csv"
    if not (ep_csv.exists() and final_f.exists()):
        return None
    out = run_dir / "episodes" / f"ep_{ep}_trajectory.csv"
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["record", "t", "x", "y", "value"])
        with open(ep_csv, newline="") as src:
            for row in csv.DictReader(src):
                writer.writerow(["path", row["t"], row["x"], row["y"],
                                 row["action"]])
        grid = np.loadtxt(final_f, delimiter=",", ndmin=2)
        for (y, x) in np.argwhere(grid == float(BURNT)):
            writer.writerow(["burnt", "", int(x), int(y), BURNT])
    return out


def export_artifacts(run_dir: str | Path, partial: bool = False) -> dict:
    """Write trajectory overlays and a manifest of every artifact with sizes
    and sha256 hashes. Returns the manifest."""
    run_dir = Path(run_dir)
    if not run_dir.is_dir():
        raise FileNotFoundError(f"run directory not found: {run_dir}")

    ep_ids = sorted(
        int(p.stem.split("_")[1]) for p in (run_dir / "episodes").glob("ep_*.csv")
        if p.stem.count("_") == 1
    ) if (run_dir / "episodes").is_dir() else []
    for ep in ep_ids:
        _episode_trajectory_overlay(run_dir, ep)

    if not partial:
        partial = not (run_dir / "summary.json").exists()
    files = []
    for path in sorted(run_dir.rglob("*")):
        if not path.is_file() or path.name == "manifest.json":
            continue
        digest = hashlib.sha256(path.read_bytes()).hexdigest()
        files.append({
            "path": str(path.relative_to(run_dir)),
            "size": path.stat().st_size,
            "sha256": digest,
        })
    manifest = {"partial": bool(partial), "files": files}
    (run_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest
