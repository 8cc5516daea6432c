"""Command-line entry point.

Exit status: 0 on success, 1 for invalid arguments/config/input files,
2 for failures while running. Data goes to stdout, diagnostics to stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from typing import Any, Sequence

from . import env, rl
from .errors import EmptyInput, InputError, InvariantViolation, NarrarlError, Unsatisfiable
from .experiment import SweepFailure, load_config, run_experiment, sweep
from .render import episode_trajectory, render_frame
from .trace import read_log, report_from_log

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


class _Usage(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        raise _Usage(f"{self.prog}: error: {message}")


def _dump(obj: Any) -> None:
    json.dump(obj, sys.stdout, indent=2)
    sys.stdout.write("\n")


def cmd_gen(args: argparse.Namespace) -> int:
    grid = env.generate_grid(args.size, args.density, args.seed)
    env.save_grid(grid, args.out)
    _dump(
        {
            "out": args.out,
            "n": grid.n,
            "obstacles": len(grid.obstacles),
            "shortest_path": env.shortest_path_len(grid),
        }
    )
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    grid = env.load_grid(args.grid)
    params = rl.RlParams(
        alpha=args.alpha,
        gamma=args.gamma,
        epsilon=args.epsilon,
        episodes=args.episodes,
        max_steps=args.max_steps,
    )
    q_seed, rng = rl.run_streams(args.seed)
    table, results = rl.train(grid, params, rl.init_qtable(grid.n, q_seed), rng)
    rl.save_qtable(table, args.out)
    greedy = rl.greedy_rollout(grid, table, params.step_budget(grid.n))
    _dump(
        {
            "out": args.out,
            "episodes": len(results),
            "successes": sum(r.success for r in results),
            "greedy_success": greedy.success,
            "greedy_steps": greedy.steps if greedy.success else None,
        }
    )
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    report = run_experiment(load_config(args.config))
    _dump(report.to_dict())
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    configs = [load_config(p) for p in args.configs]
    results = sweep(configs, args.parallel)
    out = []
    failed = False
    for path, res in zip(args.configs, results):
        if isinstance(res, SweepFailure):
            failed = True
            print(f"sweep: {path}: {res.error}", file=sys.stderr)
            out.append({"config": path, "error": res.error})
        else:
            out.append({"config": path, "report": res.to_dict()})
    _dump(out)
    return EXIT_RUNTIME if failed else EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    _dump(report_from_log(args.log).to_dict())
    return EXIT_OK


def cmd_render(args: argparse.Namespace) -> int:
    grid = env.load_grid(args.grid)
    records = read_log(args.log)
    trajectory = episode_trajectory(records, args.episode)
    if not trajectory:
        raise InputError(f"{args.log}: no records for episode {args.episode}")
    sys.stdout.write(render_frame(grid, trajectory).text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="narrarl", description="Narrative-arbitrated Q-learning in gridworlds.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="generate a solvable grid")
    g.add_argument("--size", type=int, required=True)
    g.add_argument("--density", type=float, required=True)
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    defaults = rl.RlParams()
    t = sub.add_parser("train", help="train a Q-table without an arbiter")
    t.add_argument("--grid", required=True)
    t.add_argument("--episodes", type=int, required=True)
    t.add_argument("--seed", type=int, required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--alpha", type=float, default=defaults.alpha)
    t.add_argument("--gamma", type=float, default=defaults.gamma)
    t.add_argument("--epsilon", type=float, default=defaults.epsilon)
    t.add_argument("--max-steps", type=int, default=None)
    t.set_defaults(func=cmd_train)

    r = sub.add_parser("run", help="run one experiment from a config file")
    r.add_argument("--config", required=True)
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="run several experiment configs")
    s.add_argument("--configs", nargs="+", required=True)
    s.add_argument("--parallel", type=int, default=1)
    s.set_defaults(func=cmd_sweep)

    rep = sub.add_parser("report", help="recompute metrics from a decision log")
    rep.add_argument("--log", required=True)
    rep.set_defaults(func=cmd_report)

    ren = sub.add_parser("render", help="draw one logged episode as ASCII")
    ren.add_argument("--grid", required=True)
    ren.add_argument("--log", required=True)
    ren.add_argument("--episode", type=int, required=True)
    ren.set_defaults(func=cmd_render)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _Usage as exc:
        print(exc, file=sys.stderr)
        return EXIT_INVALID
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except (InputError, InvariantViolation, EmptyInput, Unsatisfiable, ValueError) as exc:
        print(f"narrarl {args.command}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except FileNotFoundError as exc:
        print(f"narrarl {args.command}: no such file: {exc.filename}", file=sys.stderr)
        return EXIT_INVALID
    except (NarrarlError, OSError) as exc:
        print(f"narrarl {args.command}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
