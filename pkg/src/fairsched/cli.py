"""Command-line driver: ``run``, ``compare``, ``sweep`` and ``oracle``."""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import io as fio
from .config import ConfigError
from .exact import BudgetExceeded, ExactInstance, gap, is_feasible, run_heuristic, solve_exact
from .sched import SCHEDULERS
from .sim import SWEEP_AXES, run, sweep, with_axis


class CliError(Exception):
    pass


def _floats(text: str) -> list:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("expected at least one value")
    return vals


def _names(text: str) -> list:
    names = [v.strip().lower() for v in text.split(",") if v.strip()]
    bad = [n for n in names if n not in SCHEDULERS]
    if bad or not names:
        raise argparse.ArgumentTypeError(
            f"unknown scheduler(s) {','.join(bad) or '<none>'}; choose from {','.join(SCHEDULERS)}")
    return names


def _load(args):
    config, sources = fio.load_config(args.config)
    if getattr(args, "scheduler", None) is not None:
        config.scheduler = args.scheduler
        sources["scheduler"] = "flag"
    if getattr(args, "seed", None) is not None:
        config.scenario.seed = args.seed
        sources["scenario.seed"] = "flag"
    if getattr(args, "out", None) is not None:
        config.output.dir = str(args.out)
        sources["output.dir"] = "flag"
    return config.validate(), sources


def summary_line(record) -> str:
    m = record.metrics
    line = (f"scheduler={record.scheduler} total_received={m.total_received!r} "
            f"fair_nodes={m.fair_nodes} dead_nodes={m.dead_nodes} frames={record.flags['frames']}")
    if record.flags.get("max_frames_reached"):
        line += " max_frames_reached"
    return line


def cmd_run(args) -> int:
    config, sources = _load(args)
    record = run(config, sources=sources)
    fio.emit_results(record, config.output.dir, config.output.prefix)
    print(summary_line(record))
    return 0


def _compare_one(job):
    cfg, name = job
    return run(cfg, name)


def cmd_compare(args) -> int:
    config, _ = _load(args)
    jobs = []
    for name in args.schedulers:
        for k in args.kappas:
            jobs.append((with_axis(config, "kappa", k), name))
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            records = list(pool.map(_compare_one, jobs))
    else:
        records = [_compare_one(j) for j in jobs]
    rows = []
    for (cfg, name), r in zip(jobs, records):
        m = r.metrics
        rows.append([name, cfg.kappa, cfg.scenario.seed, m.total_received, m.fair_nodes, m.dead_nodes])
        print(f"kappa={cfg.kappa!r} " + summary_line(r))
    path = Path(config.output.dir) / f"{config.output.prefix}_compare.csv"
    fio.write_compare(path, rows)
    print(f"wrote {path}")
    return 0


def cmd_sweep(args) -> int:
    config, _ = _load(args)
    values = [int(v) for v in args.values] if args.axis == "n" else args.values
    records = sweep(config, args.axis, values, workers=args.jobs)
    paths = fio.emit_sweep(values, records, config.output.dir, f"{config.output.prefix}_{args.axis}")
    for v, r in zip(values, records):
        print(f"{args.axis}={v!r} " + summary_line(r))
    print(f"wrote {paths[-1]}")
    return 0


def cmd_oracle(args) -> int:
    try:
        text = Path(args.instance).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot read instance {args.instance}: {exc.strerror}") from None
    try:
        instance = ExactInstance.loads(text)
    except (ValueError, TypeError, KeyError) as exc:
        raise CliError(f"{args.instance}: invalid instance: {exc}") from None
    exact = solve_exact(instance)
    heur = run_heuristic(instance, args.scheduler)
    t_heur = heur.runtime_s
    if not exact.feasible:
        print(f"INFEASIBLE: no schedule meets kappa={instance.kappa!r} for every node "
              f"(explored {exact.nodes_explored} nodes in {exact.runtime_s:.3f} s)")
        print(f"heuristic[{args.scheduler}]={heur.objective!r} runtime_s={t_heur:.6f}")
        return 2
    print(f"exact={exact.objective!r} runtime_s={exact.runtime_s:.6f} nodes={exact.nodes_explored}")
    print(f"heuristic[{args.scheduler}]={heur.objective!r} runtime_s={t_heur:.6f} "
          f"fair_nodes={heur.fair_nodes}/{instance.n} feasible={is_feasible(heur.slacks)}")
    if exact.objective > 0:
        print(f"gap={gap(heur.objective, exact.objective)!r}")
    else:
        print("gap=undefined (exact optimum is zero)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fairsched", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, scheduler=True):
        sp.add_argument("config", help="YAML or JSON run configuration")
        if scheduler:
            sp.add_argument("--scheduler", choices=sorted(SCHEDULERS), default=None)
        sp.add_argument("--seed", type=int, default=None, help="override scenario.seed")
        sp.add_argument("--out", default=None, help="output directory (overrides output.dir)")

    sp = sub.add_parser("run", help="one simulation run")
    common(sp)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("compare", help="schedulers x kappa values on identical seeds")
    common(sp, scheduler=False)
    sp.add_argument("--schedulers", type=_names, default=["ehfs", "fcfs", "le", "hp"])
    sp.add_argument("--kappas", type=_floats, default=[0.1, 0.5, 0.9])
    sp.add_argument("--jobs", type=int, default=1)
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("sweep", help="one run per value of a parameter axis")
    common(sp)
    sp.add_argument("--axis", choices=SWEEP_AXES, required=True)
    sp.add_argument("--values", type=_floats, required=True)
    sp.add_argument("--jobs", type=int, default=1)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("oracle", help="exact optimum vs heuristic on a small instance")
    sp.add_argument("instance", help="YAML instance document")
    sp.add_argument("--scheduler", choices=sorted(SCHEDULERS), default="ehfs")
    sp.set_defaults(func=cmd_oracle)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, fio.TraceError, BudgetExceeded, CliError, ValueError, OSError) as exc:
        print(f"fairsched {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
