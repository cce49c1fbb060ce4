"""Command-line front end.

Subcommands: ``run`` simulates a scenario and writes the log, metrics and
plots; ``plan-once`` executes a single planning cycle and dumps its
artifacts; ``validate`` checks a scenario file without running it.
Exit codes: 0 success, 1 input error, 2 scenario FAILED.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .config import PlannerConfig
from .optimizer import evaluate_constraints
from .planner import Planner
from .road import VehicleState
from .scenario_io import ScenarioFormatError, load_scenario
from .scenarios import BUILTIN
from .simulate import Scenario, metrics, run


def _load(args) -> Scenario:
    if args.builtin is not None:
        return BUILTIN[args.builtin](seed=args.seed or 0)
    try:
        scenario = load_scenario(args.scenario)
    except FileNotFoundError:
        raise SystemExit(_fail(f"scenario file not found: {args.scenario}"))
    except ScenarioFormatError as exc:
        raise SystemExit(_fail(f"invalid scenario file:\n{exc}"))
    if args.seed is not None:
        scenario.seed = args.seed
    return scenario


def _config(args) -> PlannerConfig:
    cfg = PlannerConfig()
    if getattr(args, "config", None):
        try:
            overrides = json.loads(Path(args.config).read_text(encoding="utf-8"))
            cfg = cfg.merged(overrides)
        except FileNotFoundError:
            raise SystemExit(_fail(f"config file not found: {args.config}"))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise SystemExit(_fail(f"invalid config file: {exc}"))
    return cfg


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return 1


def cmd_run(args) -> int:
    scenario = _load(args)
    problems = scenario.validate()
    if problems:
        return _fail("scenario invalid:\n" + "\n".join(problems))
    cfg = _config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    log = run(scenario, cfg)
    csv_text = log.to_csv()
    (out / "log.csv").write_text(csv_text, encoding="utf-8")
    # metrics derive from the file as written, so an independent reader
    # reproduces them exactly
    from .simulate import SimLog

    summary = metrics(SimLog.from_csv(csv_text))
    from .plots import write_all

    plot_files = write_all(log, scenario.road, out)
    report = {
        "scenario": scenario.name,
        "status": log.status,
        "metrics": summary,
        "artifacts": [str(out / "log.csv"), str(out / "metrics.json")] + plot_files,
    }
    (out / "metrics.json").write_text(
        json.dumps(report, indent=2) + "\n", encoding="utf-8"
    )
    print(f"{scenario.name}: {log.status} ({len(log.rows)} ticks) -> {out}")
    return 0 if log.status == "OK" else 2


def cmd_plan_once(args) -> int:
    scenario = _load(args)
    problems = scenario.validate()
    if problems:
        return _fail("scenario invalid:\n" + "\n".join(problems))
    cfg = _config(args).merged(scenario.config_overrides)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    planner = Planner(scenario.road, scenario.ego.route or [scenario.ego.lane_id], cfg)
    route = planner.route
    s0 = route.lane_offset(scenario.ego.lane_id) + scenario.ego.s0
    pos = route.centerline.point_at(s0)
    heading = route.centerline.heading_at(s0)
    v0 = scenario.ego.v0
    if args.state:
        try:
            x, y, heading, v0 = (float(p) for p in args.state.split(","))
        except ValueError:
            return _fail("--state expects x,y,heading,v")
        pos = np.array([x, y])
    ego = VehicleState(
        x=pos[0], y=pos[1], heading=heading, v=v0,
        length=cfg.ego_length, width=cfg.ego_width,
    )
    from .simulate import _TrafficAgent

    others = {
        sv.vehicle_id: _TrafficAgent(sv, scenario.road, cfg).state()
        for sv in scenario.vehicles
    }
    result = planner.plan(ego, others, t=0.0)
    residuals = evaluate_constraints(result.points, result.constraints, cfg.dt)
    worst = {fam: float(arr.max()) for fam, arr in residuals.items()}

    np.savetxt(
        out / "behavior.csv", result.behavior.points, delimiter=",",
        header="x,y", comments="",
    )
    np.savetxt(
        out / "trajectory.csv", result.points, delimiter=",",
        header="x,y", comments="",
    )
    report = {
        "mode": result.mode,
        "maneuver": result.maneuver,
        "solver_status": result.report.status,
        "cost": result.report.cost,
        "max_violation": result.report.max_violation,
        "per_family_max_residual": worst,
        "iterations": result.report.iterations,
    }
    (out / "plan.json").write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    print(json.dumps(report, indent=2))
    return 0


def cmd_validate(args) -> int:
    scenario = _load(args)
    problems = scenario.validate()
    if problems:
        print("\n".join(problems), file=sys.stderr)
        return 1
    print(f"{scenario.name}: OK")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="roadplan", description="On-road motion planning simulator"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_source(p):
        group = p.add_mutually_exclusive_group(required=True)
        group.add_argument("--scenario", help="scenario JSON file")
        group.add_argument("--builtin", choices=sorted(BUILTIN))
        p.add_argument("--seed", type=int, default=None)

    p_run = sub.add_parser("run", help="simulate a scenario closed loop")
    add_source(p_run)
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.add_argument("--config", help="JSON config override file")
    p_run.set_defaults(func=cmd_run)

    p_once = sub.add_parser("plan-once", help="run a single planning cycle")
    add_source(p_once)
    p_once.add_argument("--out", required=True)
    p_once.add_argument("--config", help="JSON config override file")
    p_once.add_argument("--state", help="ego override: x,y,heading,v")
    p_once.set_defaults(func=cmd_plan_once)

    p_val = sub.add_parser("validate", help="check a scenario file")
    add_source(p_val)
    p_val.set_defaults(func=cmd_validate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on usage errors; that code is reserved for
        # FAILED scenario runs here
        return 0 if exc.code == 0 else 1
    try:
        return args.func(args)
    except SystemExit as exc:
        code = exc.code
        return code if isinstance(code, int) else 1


if __name__ == "__main__":
    sys.exit(main())
