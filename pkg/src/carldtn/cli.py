"""Command-line entry point: ``carldtn run|sweep|dump-fuzzy|dump-qtable``.

Exit codes: 0 success, 1 a simulation run failed, 2 configuration error.
"""
from __future__ import annotations

import argparse
import csv
import io
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import ROUTERS, Scenario, parse_scenario, validate
from .engine import Simulator
from .errors import InvalidScenario
from .fuzzy import FLC1, FLC2, FLC3, FLC4
from .metrics import _fmt, report_csv, series_csv
from .sweep import AXES, output_dir, parse_axis_values, run_sweep

EXIT_OK, EXIT_RUN_FAILED, EXIT_CONFIG = 0, 1, 2
CONTROLLERS = {"FLC1": FLC1, "FLC2": FLC2, "FLC3": FLC3, "FLC4": FLC4}


class ConfigError(Exception):
    pass


def _load(path: str) -> Scenario:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    try:
        return parse_scenario(text)
    except InvalidScenario as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _override(s: Scenario, args) -> Scenario:
    changes = {}
    if getattr(args, "router", None):
        changes["router"] = args.router
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if getattr(args, "duration", None) is not None:
        changes["duration"] = args.duration
    if not changes:
        return s
    try:
        return validate(replace(s, **changes))
    except InvalidScenario as exc:
        raise ConfigError(str(exc)) from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ConfigError(f"expected comma-separated integers, got {text!r}") from None


def cmd_run(args) -> int:
    s = _override(_load(args.scenario), args)
    sim = Simulator(s, trace=args.decision_log, check_invariants=args.check_invariants,
                    record_popularity=args.dump_popularity)
    try:
        rep = sim.run()
    except Exception as exc:  # noqa: BLE001 - reported through the exit code
        print(f"run failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUN_FAILED
    out = output_dir(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = f"{s.name}_{s.router}_{s.seed}"
    (out / f"report_{stem}.csv").write_text(report_csv([rep]))
    (out / f"series_{stem}.csv").write_text(series_csv(rep))
    if args.dump_popularity:
        (out / f"popularity_{stem}.csv").write_text(
            _rows_csv(["time", "node", "popularity"], sim.popularity_log))
    if args.decision_log:
        (out / f"decisions_{stem}.csv").write_text(
            _rows_csv(["time", "sender", "receiver", "msg_id", "action"], sim.decision_log))
    row = rep.row()
    print(" ".join(f"{k}={row[k]}" for k in ("router", "seed", "created", "delivered",
                                             "delivery_probability", "overhead_ratio",
                                             "avg_latency", "copy_violations")))
    return EXIT_OK


def _rows_csv(header: list[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(x) for x in r])
    return buf.getvalue()


def cmd_sweep(args) -> int:
    base = _load(args.scenario)
    routers = args.routers.split(",") if args.routers else list(ROUTERS)
    try:
        values = parse_axis_values(args.axis, args.values)
    except InvalidScenario as exc:
        raise ConfigError(str(exc)) from None
    seeds = _int_list(args.seeds)
    out = output_dir(args.output_dir)

    def progress(o):
        state = "ok" if o.error is None else "FAILED"
        print(f"{args.axis}={o.axis_value} seed={o.seed} router={o.router} {state}",
              file=sys.stderr)

    try:
        result = run_sweep(base, args.axis, values, seeds, routers, out, jobs=args.jobs,
                           progress=None if args.quiet else progress)
    except InvalidScenario as exc:
        raise ConfigError(str(exc)) from None
    for o in result.failures:
        print(f"failed: {args.axis}={o.axis_value} seed={o.seed} router={o.router}: {o.error}",
              file=sys.stderr)
    print(f"{len(result.runs) - len(result.failures)}/{len(result.runs)} runs ok; "
          f"results in {out}")
    return result.exit_code


def fuzzy_grid_csv(names: list[str], steps: int) -> str:
    xs = np.linspace(0.0, 1.0, steps)
    g1, g2 = np.meshgrid(xs, xs, indexing="ij")
    rows = []
    for name in names:
        rb = CONTROLLERS[name]
        ys = rb.crisp_batch(g1.ravel(), g2.ravel())
        rows.extend((name, a, b, y) for a, b, y in zip(g1.ravel(), g2.ravel(), ys))
    return _rows_csv(["controller", "input1", "input2", "output"], rows)


def cmd_dump_fuzzy(args) -> int:
    if args.steps < 2:
        raise ConfigError("--steps must be at least 2")
    names = list(CONTROLLERS) if args.controller == "all" else [args.controller]
    _emit(fuzzy_grid_csv(names, args.steps), args.output)
    return EXIT_OK


def qtable_csv(sim: Simulator, node: int) -> str:
    now = sim.clock.now
    p = sim.router.params.q
    rows = [(node, d, h, v, age) for d, h, v, age in sim.nodes[node].qtable.rows(now, p)]
    return _rows_csv(["owner", "dest", "next_hop", "value", "age"], rows)


def cmd_dump_qtable(args) -> int:
    s = _override(_load(args.scenario), args)
    if s.router != "carl":
        raise ConfigError("dump-qtable needs router = carl (only CARL keeps Q-tables)")
    if not 0 <= args.node < s.n_total:
        raise ConfigError(f"--node must be in 0..{s.n_total - 1}")
    sim = Simulator(s)
    try:
        sim.run()
    except Exception as exc:  # noqa: BLE001
        print(f"run failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUN_FAILED
    _emit(qtable_csv(sim, args.node), args.output)
    return EXIT_OK


def _emit(text: str, path: str | None) -> None:
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="carldtn", description=__doc__.splitlines()[0],
                                 allow_abbrev=False)
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate one scenario file", allow_abbrev=False)
    run.add_argument("scenario")
    run.add_argument("--router", choices=ROUTERS)
    run.add_argument("--seed", type=int)
    run.add_argument("--duration", type=float)
    run.add_argument("--output-dir")
    run.add_argument("--dump-popularity", action="store_true",
                     help="also write each node's popularity at every report sample")
    run.add_argument("--decision-log", action="store_true",
                     help="also write every forward/skip decision")
    run.add_argument("--check-invariants", action="store_true",
                     help="assert conservation and buffer invariants after every event")
    run.set_defaults(func=cmd_run)

    sw = sub.add_parser("sweep", help="run a parameter sweep", allow_abbrev=False)
    sw.add_argument("scenario")
    sw.add_argument("--axis", required=True, choices=AXES)
    sw.add_argument("--values", required=True, help="comma-separated axis values")
    sw.add_argument("--seeds", required=True, help="comma-separated seeds")
    sw.add_argument("--routers", help=f"comma-separated subset of {','.join(ROUTERS)}")
    sw.add_argument("--output-dir")
    sw.add_argument("--jobs", type=int, default=1, help="worker processes")
    sw.add_argument("--quiet", action="store_true")
    sw.set_defaults(func=cmd_sweep)

    fz = sub.add_parser("dump-fuzzy", help="crisp FLC outputs over an input grid",
                        allow_abbrev=False)
    fz.add_argument("--controller", choices=[*CONTROLLERS, "all"], default="all")
    fz.add_argument("--steps", type=int, default=51)
    fz.add_argument("--output")
    fz.set_defaults(func=cmd_dump_fuzzy)

    qt = sub.add_parser("dump-qtable", help="one node's Q-table at the end of a run",
                        allow_abbrev=False)
    qt.add_argument("scenario")
    qt.add_argument("--node", type=int, required=True)
    qt.add_argument("--seed", type=int)
    qt.add_argument("--duration", type=float)
    qt.add_argument("--output")
    qt.set_defaults(func=cmd_dump_qtable)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
