"""``vbcsim`` command line: trim, allocate, run, sweep, report.

Exit codes: 0 success, 1 I/O or config error, 2 usage error, 3 simulation
fault, 4 mission ran but did not settle (or trim is infeasible).
"""
import argparse
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import MISSIONS, load_config
from .control import WrenchTarget, allocate_open_loop, build_B, compute_trim
from .errors import ConfigError, DomainError, SimulationFault
from .missions import compute_metrics, run_mission, schedule_from_log
from .telemetry import read_csv
from .vehicle import ACTUATOR_NAMES

EXIT_OK, EXIT_IO, EXIT_USAGE, EXIT_FAULT, EXIT_UNSETTLED = 0, 1, 2, 3, 4

log = logging.getLogger("vbcsim")


class UsageError(Exception):
    pass


def _fmt(v, digits=6):
    return " ".join(f"{x: .{digits}g}" for x in np.atleast_1d(v))


def cmd_trim(cfg, args, out=None):
    trim = compute_trim(cfg.geometry, cfg.environment, cfg.controller.b_matrix)
    print(f"g0_z      {trim.g0_z: .6g} N  (buoyancy minus weight at mid-stroke)", file=out)
    print(f"u_trim    {_fmt(trim.u_trim)} m  ({', '.join(ACTUATOR_NAMES)} offsets)", file=out)
    print(f"residual  {_fmt(trim.residual)}", file=out)
    print(f"saturated {trim.is_saturated}", file=out)
    if trim.is_saturated:
        print("trim infeasible: offsets exceed half the stroke", file=sys.stderr)
        return EXIT_UNSETTLED
    return EXIT_OK


def cmd_allocate(cfg, args, out=None):
    if any(not math.isfinite(w) for w in args.wrench):
        raise UsageError("wrench values must be finite")
    B = build_B(cfg.geometry, cfg.environment, cfg.controller.b_matrix)
    tau = WrenchTarget(*args.wrench)
    g0 = np.zeros(6)
    if args.g0 is not None:
        g0 = np.array(args.g0, float)
    alloc = allocate_open_loop(B, tau, g0, cfg.geometry.actuator.stroke_max)
    ref = np.array(cfg.geometry.mid_stroke())
    print("B (rows Fx Fy Fz tx ty tz; columns " + " ".join(ACTUATOR_NAMES) + "):", file=out)
    for row in B:
        print("  " + _fmt(row), file=out)
    print(f"offsets   {_fmt(alloc.offsets)} m", file=out)
    print(f"residual  {_fmt(alloc.residual)}", file=out)
    print(f"command   {_fmt(ref + np.asarray(alloc.saturated))} m  "
          f"(saturated={alloc.is_saturated})", file=out)
    return EXIT_OK


def _summary(name, metrics, out):
    print(f"mission {name}: {len(metrics.segments)} segments", file=out)
    for s in metrics.segments:
        st = f"{s.settling_time:6.1f} s" if s.settled else "unsettled"
        print(f"  [{s.index:2d}] t={s.t_start:7.1f} depth={s.depth_setpoint:.3f} "
              f"roll={s.roll_setpoint_deg:6.1f} pitch={s.pitch_setpoint_deg:6.1f}  "
              f"err depth={s.depth_error:+.4f} m roll={s.roll_error_deg:+.2f} "
              f"pitch={s.pitch_error_deg:+.2f} deg  settle {st}", file=out)
    dx, dy, dz = metrics.net_displacement
    print(f"  net displacement ({dx:+.3f}, {dy:+.3f}, {dz:+.3f}) m, net yaw "
          f"{metrics.net_yaw_deg:+.2f} deg, horizontal drift {metrics.horizontal_drift:.3f} m, "
          f"max depth error {metrics.max_depth_error:.3f} m, actuator duty "
          f"{metrics.actuator_duty:.3f} m", file=out)


def _write_outputs(cfg, mission, result_log, metrics, extra=None):
    csv_path, report_path = cfg.output_paths(mission)
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    report_path.parent.mkdir(parents=True, exist_ok=True)
    result_log.write_csv(csv_path)
    report = {"mission": mission, "seed": cfg.seed, **(extra or {})}
    if metrics is not None:
        report["metrics"] = metrics.to_dict()
    report_path.write_text(json.dumps(report, indent=2) + "\n")
    return csv_path, report_path


def _fly(cfg, mission):
    return run_mission(cfg.schedule(mission), cfg.geometry, cfg.environment, cfg.controller,
                       cfg.sim, seed=cfg.seed)


def cmd_run(cfg, args, out=None):
    mission = args.mission
    try:
        result = _fly(cfg, mission)
    except SimulationFault as exc:
        if exc.partial is not None:
            _write_outputs(cfg, mission, exc.partial, None, {"fault": str(exc), "tick": exc.tick})
        print(f"simulation fault at tick {exc.tick}: {exc}", file=sys.stderr)
        return EXIT_FAULT
    csv_path, report_path = _write_outputs(cfg, mission, result.log, result.metrics)
    _summary(mission, result.metrics, out)
    print(f"wrote {csv_path} and {report_path}", file=out)
    return EXIT_OK if result.metrics.all_settled else EXIT_UNSETTLED


def _sweep_one(job):
    config_path, overrides, mission = job
    cfg = load_config(config_path, overrides, environ={})
    try:
        result = _fly(cfg, mission)
    except SimulationFault as exc:
        return {"overrides": overrides, "fault": str(exc)}
    m = result.metrics
    return {"overrides": overrides, "all_settled": m.all_settled,
            "worst_settling_time": max((s.settling_time if s.settled else math.inf)
                                       for s in m.segments),
            "net_displacement": m.net_displacement, "net_yaw_deg": m.net_yaw_deg,
            "horizontal_drift": m.horizontal_drift, "max_depth_error": m.max_depth_error,
            "actuator_duty": m.actuator_duty}


def cmd_sweep(cfg, args, out=None):
    if not args.values:
        raise UsageError("sweep needs at least one value")
    base = list(args.set or [])
    if cfg.raw["sim"]["seed"] is not None:
        base.append(f"sim.seed={cfg.seed}")
    jobs = [(args.config, base + [f"{args.param}={v}"], args.mission) for v in args.values]
    for _, ov, _ in jobs:  # fail fast on a bad key or value before launching anything
        load_config(args.config, ov, environ={})
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            rows = list(pool.map(_sweep_one, jobs))
    else:
        rows = [_sweep_one(j) for j in jobs]
    code = EXIT_OK
    for v, r in zip(args.values, rows):
        if "fault" in r:
            code = EXIT_FAULT
            print(f"{args.param}={v}: FAULT {r['fault']}", file=out)
            continue
        if not r["all_settled"] and code == EXIT_OK:
            code = EXIT_UNSETTLED
        dx, dy, _ = r["net_displacement"]
        print(f"{args.param}={v}: settled={r['all_settled']} worst_settle="
              f"{r['worst_settling_time']:.1f} s net=({dx:+.3f},{dy:+.3f}) m "
              f"yaw={r['net_yaw_deg']:+.2f} deg drift={r['horizontal_drift']:.3f} m "
              f"duty={r['actuator_duty']:.3f} m", file=out)
    path = cfg.output_dir / f"sweep_{args.mission}.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps({"param": args.param, "values": args.values, "runs": rows},
                               indent=2, default=float) + "\n")
    print(f"wrote {path}", file=out)
    return code


def cmd_report(cfg, args, out=None):
    tick_log = read_csv(args.csv)
    schedule = schedule_from_log(tick_log, Path(args.csv).stem)
    metrics = compute_metrics(tick_log, schedule)
    _summary(schedule.name, metrics, out)
    if args.json:
        Path(args.json).write_text(json.dumps(metrics.to_dict(), indent=2) + "\n")
        print(f"wrote {args.json}", file=out)
    return EXIT_OK if metrics.all_settled else EXIT_UNSETTLED


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("-c", "--config", help="YAML run config (defaults are packaged)")
    common.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override a config key, e.g. controller.pitch.kp=0.01")
    common.add_argument("--seed", type=int, help="shorthand for --set sim.seed=N")
    common.add_argument("-o", "--output-dir", help="shorthand for --set output.dir=PATH")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = _Parser(prog="vbcsim", description="Vectored-buoyancy vehicle simulator.")
    ap.add_argument("--version", action="version", version=f"vbcsim {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("trim", parents=[common], help="static ballast/trim solution")
    p.set_defaults(func=cmd_trim)

    p = sub.add_parser("allocate", parents=[common], help="open-loop allocation for a wrench")
    p.add_argument("wrench", nargs=6, type=float, metavar="W",
                   help="Fx Fy Fz tau_x tau_y tau_z (hover frame: Fz up)")
    p.add_argument("--g0", nargs=6, type=float, metavar="G", help="restoring term (default 0)")
    p.set_defaults(func=cmd_allocate)

    p = sub.add_parser("run", parents=[common], help="fly a mission closed loop")
    p.add_argument("mission", choices=MISSIONS)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", parents=[common], help="run a mission over values of one key")
    p.add_argument("mission", choices=MISSIONS)
    p.add_argument("--param", required=True, help="dotted config key to vary")
    p.add_argument("--values", nargs="+", required=True)
    p.add_argument("-j", "--jobs", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", parents=[common], help="metrics from a tick CSV")
    p.add_argument("csv")
    p.add_argument("--json", help="also write the metrics here")
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"vbcsim: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = list(args.set or [])
    if args.seed is not None:
        overrides.append(f"sim.seed={args.seed}")
    if args.output_dir is not None:
        overrides.append(f"output.dir={args.output_dir}")
    args.set = overrides
    try:
        cfg = load_config(args.config, overrides)
        return args.func(cfg, args)
    except UsageError as exc:
        print(f"vbcsim: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, OSError) as exc:
        print(f"vbcsim: {exc}", file=sys.stderr)
        return EXIT_IO
    except DomainError as exc:
        print(f"vbcsim: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def _entry():
    sys.exit(main())


if __name__ == "__main__":
    _entry()
