"""Operator entry points for the arena toolkit.

Six subcommands, all exiting nonzero on any error:

    serve         run the TCP/WebSocket server until interrupted
    validate      check config files; diagnostics go to standard error
    eval          run a scripted-agent battery, writing report + trajectories
    procgen       expand a template into a numbered battery of config files
    replay        re-simulate a trajectory log and verify it bitwise
    render-frame  save the agent camera view as a PNG

The environment variable ARENA_LAB_SEED overrides the default ``--seed`` of
the commands that take one.  Every artifact written here (report, trajectory,
frame) embeds the build version and the seed that produced it.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from functools import lru_cache
from pathlib import Path

from PIL import Image
from PIL.PngImagePlugin import PngInfo

from . import PROTOCOL_VERSION
from .agents import (
    EvaluationReport,
    EvaluationRow,
    HeuristicPolicy,
    RandomPolicy,
    button_heuristic_params,
    foraging_heuristic_params,
    run_episode,
)
from .config_dsl import ConfigError, Diagnostic, parse_config, validate
from .config_dsl import load_config as _load_config
from .episode import TRAJECTORY_HEADER, Action, Episode, TrajectoryLog
from .episode import replay as replay_episode
from .observations import ObsSpec, camera_observation
from .physics import PhysicsParams
from .procgen import TemplateError, expand_exhaustive, expand_sample, write_battery
from .server import serve

AGENT_PRESETS = {
    "random": lambda: RandomPolicy(),
    "heuristic": lambda: HeuristicPolicy(foraging_heuristic_params()),
    "button": lambda: HeuristicPolicy(button_heuristic_params()),
}

_INT_PHYSICS_FIELDS = ("iterations", "max_slides")


class CliError(Exception):
    """Operator error reported as ``error: ...`` with a nonzero exit."""


def default_seed() -> int:
    """0 unless ARENA_LAB_SEED is set."""
    raw = os.environ.get("ARENA_LAB_SEED", "")
    if not raw:
        return 0
    try:
        return int(raw)
    except ValueError as exc:
        raise CliError(f"ARENA_LAB_SEED must be an integer, got {raw!r}") from exc


def parse_physics(text: str) -> PhysicsParams:
    """``gravity=0.03,drag=0.8`` -> PhysicsParams with those fields replaced."""
    known = [f.name for f in fields(PhysicsParams)]
    overrides = {}
    for part in text.split(","):
        name, eq, value = part.partition("=")
        name = name.strip()
        if not eq or name not in known:
            raise argparse.ArgumentTypeError(
                f"bad physics override {part!r} (known fields: {', '.join(known)})"
            )
        cast = int if name in _INT_PHYSICS_FIELDS else float
        try:
            overrides[name] = cast(value)
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad value for {name}: {value!r}") from None
    return replace(PhysicsParams(), **overrides)


@dataclass
class RunConfig:
    """Run plumbing shared by the subcommands: seeding, physics, endpoints."""

    seed: int = 0
    physics: PhysicsParams = field(default_factory=PhysicsParams)
    out_dir: Path | None = None
    host: str = "127.0.0.1"
    port: int = 0


def _run_config(args) -> RunConfig:
    seed = getattr(args, "seed", None)
    out = getattr(args, "out", None)
    return RunConfig(
        seed=default_seed() if seed is None else seed,
        physics=getattr(args, "physics", None) or PhysicsParams(),
        out_dir=Path(out) if out is not None else None,
        host=getattr(args, "host", "127.0.0.1"),
        port=getattr(args, "port", 0),
    )


# --- serve --------------------------------------------------------------------


def cmd_serve(args) -> int:
    run = _run_config(args)
    serve(run.host, run.port, ui_dir=args.ui_dir)
    return 0


# --- validate -----------------------------------------------------------------


def _file_diagnostics(path) -> list[Diagnostic]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        return [Diagnostic("error", f"cannot read file: {exc.strerror or exc}")]
    cfg, diags = parse_config(text)
    if cfg is not None:
        diags = diags + validate(cfg)
    return diags


def cmd_validate(args) -> int:
    errors = 0
    for path in args.files:
        diags = _file_diagnostics(path)
        for d in diags:
            print(f"{path}:{d}", file=sys.stderr)
        errors += sum(d.severity == "error" for d in diags)
    print(f"checked {len(args.files)} file(s): {errors} error(s)")
    return 0 if errors == 0 else 1


# --- eval ---------------------------------------------------------------------


@lru_cache(maxsize=None)
def _cached_config(path: str):
    return _load_config(path)


def _eval_episode(job):
    """Worker for one rollout; module level so process pools can pickle it."""
    config_path, agent, arena_index, episode, seed, max_steps = job
    try:
        cfg = _cached_config(config_path)
        policy = AGENT_PRESETS[agent]()
        summary = run_episode(policy, cfg, arena_index, seed, max_steps)
        row = EvaluationRow(
            config=config_path,
            episode=episode,
            seed=seed,
            reward=summary.final_reward,
            passed=summary.passed,
            steps=summary.steps,
            done_reason=summary.done_reason,
        )
        return episode, row, summary.trajectory
    except Exception as exc:  # noqa: BLE001 - fault captured per-row
        row = EvaluationRow(
            config=config_path,
            episode=episode,
            seed=seed,
            reward=float("nan"),
            passed=False,
            steps=0,
            done_reason=f"error:{type(exc).__name__}",
        )
        return episode, row, None


def cmd_eval(args) -> int:
    if args.episodes < 1:
        raise CliError("--episodes must be >= 1")
    if args.workers < 1:
        raise CliError("--workers must be >= 1")
    run = _run_config(args)
    cfg = _cached_config(str(args.config))
    indices = sorted(cfg.arenas)
    jobs = [
        (str(args.config), args.agent, indices[i % len(indices)], i, run.seed + i, args.max_steps)
        for i in range(args.episodes)
    ]
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            results = list(pool.map(_eval_episode, jobs))
    else:
        results = [_eval_episode(job) for job in jobs]
    results.sort(key=lambda r: r[0])  # merge deterministically by episode index

    run.out_dir.mkdir(parents=True, exist_ok=True)
    width = max(3, len(str(args.episodes - 1)))
    report = EvaluationReport()
    for episode, row, log in results:
        report.rows.append(row)
        if log is not None:
            path = run.out_dir / f"trajectory_{episode:0{width}d}.csv"
            path.write_text(log.to_csv())
    report_path = run.out_dir / "report.csv"
    report_path.write_text(f"# {PROTOCOL_VERSION} seed={run.seed}\n" + report.to_csv())
    print(
        f"{len(report.rows)} episode(s): mean reward {report.mean:.4f}, "
        f"median {report.median:.4f}, pass rate {report.pass_rate:.3f}"
    )
    print(f"report {report_path}")
    return 0


# --- procgen ------------------------------------------------------------------


def cmd_procgen(args) -> int:
    run = _run_config(args)
    text = Path(args.template).read_text(encoding="utf-8")
    if args.sample is not None:
        battery = expand_sample(text, args.sample, run.seed)
    else:
        battery = expand_exhaustive(text)
    manifest = write_battery(battery, args.out, stem=args.stem)
    print(f"wrote {len(battery.texts)} file(s) to {args.out}; manifest {manifest}")
    return 0


# --- replay -------------------------------------------------------------------


def _first_divergence(logged: TrajectoryLog, regenerated: TrajectoryLog) -> str | None:
    """None when bitwise identical, else a first-mismatch description."""
    a = logged.to_csv().splitlines()[2:]
    b = regenerated.to_csv().splitlines()[2:]
    names = TRAJECTORY_HEADER.split(",")
    for i, (line_a, line_b) in enumerate(zip(a, b)):
        if line_a == line_b:
            continue
        for name, va, vb in zip(names, line_a.split(","), line_b.split(",")):
            if va != vb:
                return f"mismatch at row {i + 1}: {name} logged {va}, replayed {vb}"
    if len(a) != len(b):
        return f"length mismatch: logged {len(a)} row(s), replayed {len(b)}"
    return None


def cmd_replay(args) -> int:
    run = _run_config(args)
    try:
        log = TrajectoryLog.from_csv(Path(args.trajectory).read_text(encoding="utf-8"))
    except (ValueError, KeyError) as exc:
        raise CliError(f"{args.trajectory}: {exc}") from exc
    if log.version != PROTOCOL_VERSION:
        raise CliError(
            f"log version {log.version!r} does not match this build ({PROTOCOL_VERSION!r})"
        )
    if not log.rows:
        raise CliError(f"{args.trajectory}: log has no rows")
    cfg = _load_config(args.config)
    if log.arena_index not in cfg.arenas:
        raise CliError(f"arena {log.arena_index} not present in {args.config}")
    regenerated = replay_episode(cfg.arenas[log.arena_index], log, params=run.physics)
    verdict = _first_divergence(log, regenerated)
    if verdict is None:
        print("exact")
        return 0
    print(verdict)
    return 1


# --- render-frame -------------------------------------------------------------


def cmd_render_frame(args) -> int:
    run = _run_config(args)
    cfg = _load_config(args.config)
    ep = Episode.from_config(
        cfg,
        args.arena,
        run.seed,
        obs_spec=ObsSpec(rays=None, camera=None, vector=False),
        params=run.physics,
    )
    for _ in range(args.steps):
        if ep.done:
            break
        ep.step(Action.NoAction)
    img = camera_observation(ep.world, args.size, args.grayscale, ep.lights_on)
    info = PngInfo()
    info.add_text("arena-lab-version", PROTOCOL_VERSION)
    info.add_text("arena-lab-seed", str(run.seed))
    info.add_text("arena-lab-arena", str(args.arena))
    info.add_text("arena-lab-step", str(ep.step_count))
    Image.fromarray(img).save(args.frame, pnginfo=info)
    print(f"wrote {args.frame}")
    return 0


# --- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="arena-lab",
        description="Deterministic arena environments: serve, evaluate, expand, verify.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the TCP/WebSocket server")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=0, help="0 picks a free port")
    p.add_argument("--ui-dir", default=None, help="static files to serve over HTTP")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("validate", help="check config files and print diagnostics")
    p.add_argument("files", nargs="+")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("eval", help="run a scripted agent over seeded episodes")
    p.add_argument("config")
    p.add_argument("agent", choices=sorted(AGENT_PRESETS))
    p.add_argument("--episodes", type=int, default=100)
    p.add_argument(
        "--seed",
        type=int,
        default=None,
        help="base seed; episode i uses seed+i (default: ARENA_LAB_SEED or 0)",
    )
    p.add_argument("--out", default="eval_out", help="directory for report + trajectories")
    p.add_argument("--max-steps", type=int, default=20000, help="cap for untimed arenas")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("procgen", help="expand a template into numbered config files")
    p.add_argument("template")
    p.add_argument("--out", required=True)
    p.add_argument("--stem", default="arena")
    p.add_argument(
        "--sample", type=int, default=None, help="draw N seeded samples instead of every combination"
    )
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_procgen)

    p = sub.add_parser("replay", help="re-simulate a trajectory log and verify it bitwise")
    p.add_argument("config")
    p.add_argument("trajectory")
    p.add_argument(
        "--physics",
        type=parse_physics,
        default=None,
        help="comma-separated field=value overrides, e.g. gravity=0.03,drag=0.8",
    )
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("render-frame", help="save the agent camera view as a PNG")
    p.add_argument("config")
    p.add_argument("frame", nargs="?", default="frame.png", help="output PNG path")
    p.add_argument("--arena", type=int, default=0)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--steps", type=int, default=0, help="advance this many no-op steps first")
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--grayscale", action="store_true")
    p.add_argument(
        "--physics",
        type=parse_physics,
        default=None,
        help="comma-separated field=value overrides",
    )
    p.set_defaults(func=cmd_render_frame)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CliError, ConfigError, TemplateError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
