"""Command-line front end.

Exit codes: 0 on success, 2 on configuration or input errors, 3 when a
simulation diverges to a non-finite state.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from functools import partial
from pathlib import Path

import numpy as np

from tiltlink.errors import (DegenerateConvex, NonFiniteState, RankDeficient,
                             ScenarioConfigError, SingularForm)

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED = 0, 2, 3

BETA_COLUMNS = ("beta", "u_s_min", "u_s_max", "tau_z_min", "tau_z_max", "f_xy_norm", "l_air",
                "tau_min")
JOINT_COLUMNS = ("q1", "q2", "u_s_min", "u_s_max", "tau_z_min", "tau_z_max", "f_xy_norm",
                 "tau_min", "valid")


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    return format(float(v), ".17g")


def _csv(columns, rows) -> str:
    lines = [",".join(columns)] + [",".join(_fmt(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def _emit(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
        return
    path = Path(out)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    tmp.replace(path)


def _map(fn, items, jobs: int):
    if jobs and jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(fn, items, chunksize=max(1, len(items) // (4 * jobs))))
    return [fn(it) for it in items]


def _grid(lo: float, hi: float, step: float) -> np.ndarray:
    if not step > 0 or hi < lo:
        raise ScenarioConfigError("grid needs step > 0 and to >= from")
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return lo + step * np.arange(n)


def _load_spec(path):
    from tiltlink.model import RobotSpec
    if path is None:
        return RobotSpec()
    try:
        return RobotSpec.from_file(path)
    except ValueError as exc:
        raise ScenarioConfigError(str(exc)) from exc


def _load_gains(path):
    from tiltlink.control import ControllerConfig
    if path is None:
        return ControllerConfig()
    try:
        return ControllerConfig.from_file(path)
    except ValueError as exc:
        raise ScenarioConfigError(str(exc)) from exc


# ----------------------------------------------------------------------- design


def _beta_row(beta, spec, q):
    from tiltlink.design import envelope, torque_convex
    from tiltlink.model import allocation
    s = spec.with_tilt(beta)
    hov, env = envelope(s, q)
    tmin = torque_convex(allocation(s, q), s.u_max).tau_min
    return (beta, hov.u_s_min, hov.u_s_max, env.tau_z_min, env.tau_z_max, env.f_xy_norm,
            env.l_air, tmin)


def _joint_row(q, spec, u_thre, tau_thre):
    from tiltlink.design import envelope, torque_convex
    from tiltlink.model import allocation
    nan = float("nan")
    try:
        hov, env = envelope(spec, q)
        tmin = torque_convex(allocation(spec, q), spec.u_max).tau_min
    except (SingularForm, RankDeficient, DegenerateConvex):
        return (q[0], q[1], nan, nan, nan, nan, nan, nan, False)
    valid = (hov.u_s_min >= u_thre and hov.u_s_max <= spec.u_max - u_thre and tmin >= tau_thre)
    return (q[0], q[1], hov.u_s_min, hov.u_s_max, env.tau_z_min, env.tau_z_max,
            env.f_xy_norm, tmin, valid)


def _tau_row(q, spec):
    from tiltlink.design import torque_convex
    from tiltlink.model import allocation
    try:
        return (q[0], q[1], torque_convex(allocation(spec, q), spec.u_max).tau_min)
    except (SingularForm, DegenerateConvex):
        return (q[0], q[1], float("nan"))


def _joint_grid(args) -> list:
    g = np.linspace(args.lo, args.hi, args.n)
    return [(float(a), float(b)) for a in g for b in g]


def cmd_design(args) -> int:
    from tiltlink.design import DEFAULT_WEIGHTS, optimize_tilt
    spec = _load_spec(args.spec)
    q = (args.q1, args.q2)
    if args.what == "sweep-beta":
        betas = [float(b) for b in _grid(args.beta_from, args.beta_to, args.beta_step)]
        if max(betas) >= math.pi / 2:
            raise ScenarioConfigError("tilt angles must stay below pi/2")
        rows = _map(partial(_beta_row, spec=spec, q=q), betas, args.jobs)
        _emit(_csv(BETA_COLUMNS, rows), args.out)
    elif args.what == "sweep-joints":
        rows = _map(partial(_joint_row, spec=spec, u_thre=args.u_thre, tau_thre=args.tau_thre),
                    _joint_grid(args), args.jobs)
        _emit(_csv(JOINT_COLUMNS, rows), args.out)
    elif args.what == "tau-min-map":
        rows = _map(partial(_tau_row, spec=spec), _joint_grid(args), args.jobs)
        _emit(_csv(("q1", "q2", "tau_min"), rows), args.out)
    else:
        weights = tuple(args.weights) if args.weights else DEFAULT_WEIGHTS
        grid = _grid(args.beta_from, args.beta_to, args.beta_step)
        opt = optimize_tilt(spec, weights, grid)
        rows = [(b, *x, o) for b, x, o in zip(opt.betas, opt.x, opt.objective)]
        _emit(_csv(("beta", "x1", "x2", "x3", "x4", "objective"), rows), args.out)
        dest = sys.stderr if args.out in (None, "-") else sys.stdout
        print(f"beta_opt={_fmt(opt.beta_opt)}", file=dest)
    return EXIT_OK


# ------------------------------------------------------------------------ gains


def cmd_gains(args) -> int:
    from tiltlink.control import PositionGains, gain_check, lqi_synthesize
    from tiltlink.model import allocation, inertia
    spec = _load_spec(args.spec)
    cfg = _load_gains(args.gains)
    q = (args.q1, args.q2)
    alloc = allocation(spec, q)
    inert = inertia(spec, q, alloc)
    lqi = lqi_synthesize(alloc, inert, cfg.attitude)
    pos: PositionGains = cfg.position
    chk = gain_check(pos, lqi, alloc, args.gamma, args.O, args.e_r_max, spec.mass)
    report = {
        "q": list(q),
        "K_x": lqi.K_x.tolist(),
        "are_residual": lqi.residual,
        "spectral_abscissa": lqi.spectral_abscissa,
        "gain_check": chk.as_dict(),
    }
    _emit(json.dumps(report, indent=2) + "\n", args.out)
    return EXIT_OK


# -------------------------------------------------------------------------- run


def _run_one(name: str, spec, cfg, seed: int, out: str | None, sensor_log: bool) -> dict:
    from tiltlink.estimation.replay import format_record
    from tiltlink.sim.runner import run_scenario
    from tiltlink.sim.scenario import load_scenario
    sc = load_scenario(name)
    log = run_scenario(sc, spec, cfg, seed=seed, record_sensors=sensor_log)
    if out is not None:
        stem = f"{sc.name}_seed{seed}"
        log.write(out, stem)
        if sensor_log:
            text = "\n".join(format_record(r) for r in log.sensor_log) + "\n"
            _emit(text, str(Path(out) / f"{stem}_sensors.log"))
    return log.summary


def _run_safe(item, spec, cfg, out, sensor_log):
    name, seed = item
    try:
        return ("ok", _run_one(name, spec, cfg, seed, out, sensor_log))
    except NonFiniteState as exc:
        return ("diverged", {"scenario": name, "seed": seed, "t": exc.t, "error": str(exc)})


def cmd_run(args) -> int:
    from tiltlink.sim.scenario import load_scenario
    spec = _load_spec(args.spec)
    cfg = _load_gains(args.gains)
    names = args.scenario or ["hover"]
    for n in names:
        load_scenario(n)  # validate everything before running anything
    items = [(n, args.seed) for n in names]
    results = _map(partial(_run_safe, spec=spec, cfg=cfg, out=args.out,
                           sensor_log=args.sensor_log), items, args.jobs)
    code = EXIT_OK
    summaries = []
    for status, payload in results:
        summaries.append(payload)
        if status == "diverged":
            print(f"divergence in {payload['scenario']} at t={payload['t']}: {payload['error']}",
                  file=sys.stderr)
            code = EXIT_DIVERGED
    if args.out is None:
        print(json.dumps(summaries if len(summaries) > 1 else summaries[0], indent=2,
                         sort_keys=True))
    return code


# ----------------------------------------------------------------------- replay


def cmd_replay(args) -> int:
    from tiltlink.estimation.replay import parse_log, replay
    spec = _load_spec(args.spec)
    try:
        text = Path(args.log).read_text()
    except OSError as exc:
        raise ScenarioConfigError(f"cannot read log {args.log}: {exc}") from exc
    res = replay(parse_log(text, args.log), spec, chronological=args.sorted)
    _emit(res.to_csv(), args.out)
    if res.stale:
        print(f"{res.stale} stale measurements dropped", file=sys.stderr)
    return EXIT_OK


# ----------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tiltlink", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--spec", help="robot spec file (key = value)")
        sp.add_argument("--out", help="output file or directory (default stdout)")
        sp.add_argument("--jobs", type=int, default=1, help="parallel worker processes")

    d = sub.add_parser("design", help="design sweeps and tilt optimization")
    d.add_argument("what", choices=("sweep-beta", "sweep-joints", "tau-min-map", "optimize"))
    common(d)
    d.add_argument("--from", dest="beta_from", type=float, default=0.0)
    d.add_argument("--to", dest="beta_to", type=float, default=0.8)
    d.add_argument("--step", dest="beta_step", type=float, default=0.01)
    d.add_argument("--q1", type=float, default=math.pi / 2)
    d.add_argument("--q2", type=float, default=math.pi / 2)
    d.add_argument("--n", type=int, default=31, help="joint grid points per axis")
    d.add_argument("--lo", type=float, default=-math.pi / 2)
    d.add_argument("--hi", type=float, default=math.pi / 2)
    d.add_argument("--u-thre", type=float, default=0.5)
    d.add_argument("--tau-thre", type=float, default=0.05)
    d.add_argument("--weights", type=float, nargs=4)
    d.set_defaults(func=cmd_design)

    g = sub.add_parser("gains", help="synthesize the attitude gain and check gain constraints")
    common(g)
    g.add_argument("--gains", help="controller gains file (key = value)")
    g.add_argument("--q1", type=float, default=math.pi / 2)
    g.add_argument("--q2", type=float, default=math.pi / 2)
    g.add_argument("--gamma", type=float, default=0.1)
    g.add_argument("--O", type=float, default=1.0)
    g.add_argument("--e-r-max", type=float, default=1.0)
    g.set_defaults(func=cmd_gains)

    r = sub.add_parser("run", help="run closed-loop scenarios")
    common(r)
    r.add_argument("--gains", help="controller gains file (key = value)")
    r.add_argument("--scenario", action="append",
                   help="built-in name or scenario file; repeat for several runs")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--sensor-log", action="store_true",
                   help="also write the raw sensor stream for replay")
    r.set_defaults(func=cmd_run)

    rp = sub.add_parser("replay", help="replay a sensor log through the estimator")
    common(rp)
    rp.add_argument("log")
    rp.add_argument("--sorted", action="store_true", help="replay in stamp order")
    rp.set_defaults(func=cmd_replay)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if not 0 <= getattr(args, "seed", 0) < 2 ** 64:
        print("error: seed must be a 64-bit unsigned value", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NonFiniteState as exc:
        print(f"divergence at t={exc.t}: {exc}", file=sys.stderr)
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
