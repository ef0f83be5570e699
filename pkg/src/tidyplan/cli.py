"""Command line entry point: generate, train-uodm, train-planner, eval, bench.

Exit codes: 0 success, 1 usage error (bad flags, bad config, missing model),
2 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import asdict, replace
from pathlib import Path

from .checkpoint import CheckpointError
from .config import ConfigError, RunConfig, load_config
from .gridworld import ScenarioError, generate_scenario, load_scenario, save_scenario
from .harness import (
    AGG_COLUMNS,
    PLANNERS,
    MissingModelError,
    aggregate,
    compute_metrics,
    make_planner,
    rows_to_csv,
    run_benchmark,
    run_episode,
)
from .rlplanner import QModel
from .training import train_planner, write_curve
from .uodm import UodmModel, train_uodm

log = logging.getLogger("tidyplan")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--out", help="output path")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tidyplan", description="Multi-room rearrangement planning under partial observability.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", help="write a scenario JSON file")
    _common(p)

    p = sub.add_parser("train-uodm", help="train the unseen-object filter and ranker")
    _common(p)

    p = sub.add_parser("train-planner", help="train the graph Q-network")
    _common(p)
    p.add_argument("--uodm", help="discovery model checkpoint (trained on the bundled table if omitted)")
    p.add_argument("--steps", type=int, help="override rl.total_steps")

    p = sub.add_parser("eval", help="run one episode and write its trace JSON")
    _common(p)
    p.add_argument("--planner", choices=PLANNERS, default="hp")
    p.add_argument("--checkpoint", help="planner checkpoint (needed for cql)")
    p.add_argument("--uodm", help="discovery model checkpoint (trained on the bundled table if omitted)")
    p.add_argument("--scenario", help="scenario JSON; generated from --config/--seed if omitted")

    p = sub.add_parser("bench", help="run a benchmark suite and write per-episode CSV")
    _common(p)
    p.add_argument("--planner", choices=PLANNERS, action="append", help="restrict to these planners (repeatable)")
    p.add_argument("--checkpoint", help="planner checkpoint (needed for cql)")
    p.add_argument("--uodm", help="discovery model checkpoint (trained on the bundled table if omitted)")
    p.add_argument("--workers", type=int, help="parallel episode workers")
    return parser


# ---------------------------------------------------------------------------
# helpers


def _write_text(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _uodm(path: str | None, cfg: RunConfig) -> UodmModel:
    if path:
        return UodmModel.load(path)
    log.info("training discovery model on the bundled table")
    model, _ = train_uodm(config=cfg.uodm)
    return model


def _sibling(path: str, suffix: str) -> Path:
    p = Path(path)
    return p.with_name(p.stem + suffix)


# ---------------------------------------------------------------------------
# commands


def cmd_generate(args, cfg: RunConfig) -> None:
    scenario = generate_scenario(cfg.scenario_config(), args.seed)
    if args.out:
        save_scenario(scenario, args.out)
    else:
        from .gridworld import scenario_to_dict

        sys.stdout.write(json.dumps(scenario_to_dict(scenario)) + "\n")


def cmd_train_uodm(args, cfg: RunConfig) -> None:
    ucfg = replace(cfg.uodm, seed=args.seed)
    model, report = train_uodm(config=ucfg)
    summary = {
        "filter_accuracy": report.filter_accuracy,
        "rank_spearman": report.rank_spearman,
        "n_train": report.n_train,
        "n_heldout": report.n_heldout,
    }
    if args.out:
        model.save(args.out, meta=summary)
    sys.stdout.write(json.dumps(summary) + "\n")


def cmd_train_planner(args, cfg: RunConfig) -> None:
    if not args.out:
        raise UsageError("train-planner needs --out for the checkpoint")
    rl = replace(cfg.rl, seed=args.seed)
    if args.steps is not None:
        rl = replace(rl, total_steps=args.steps)
    uodm = _uodm(args.uodm, cfg)
    model, curve = train_planner(rl, uodm, cem=cfg.cem, log_every=max(1, min(1000, rl.total_steps)))
    model.save(args.out)
    write_curve(curve, _sibling(args.out, ".curve.csv"))


def cmd_eval(args, cfg: RunConfig) -> None:
    scenario = load_scenario(args.scenario) if args.scenario else generate_scenario(cfg.scenario_config(), args.seed)
    qmodel = QModel.load(args.checkpoint) if args.checkpoint else None
    if args.planner == "cql" and qmodel is None:
        raise UsageError("the cql planner needs --checkpoint")
    uodm = _uodm(args.uodm, cfg) if args.planner in ("cql", "hp") else None
    planner = make_planner(args.planner, qmodel, uodm)
    trace = run_episode(
        scenario, planner, uodm, cfg.cem, cfg.perception.label_noise,
        seed=args.seed, waypoints_per_attempt=cfg.perception.waypoints_per_attempt,
    )
    m = compute_metrics(trace)
    out = trace.to_dict()
    out["metrics"] = {"srn": m.srn, "eod": m.eod_text if m.eod is None else m.eod, "ttl": m.ttl}
    _write_text(args.out, json.dumps(out, indent=2) + "\n")


def cmd_bench(args, cfg: RunConfig) -> None:
    bench = cfg.bench_config(args.seed, tuple(args.planner) if args.planner else None)
    if args.workers is not None:
        bench = replace(bench, workers=args.workers)
    qmodel = QModel.load(args.checkpoint) if args.checkpoint else None
    if "cql" in bench.planners and qmodel is None:
        raise UsageError("the cql planner needs --checkpoint")
    uodm = _uodm(args.uodm, cfg) if {"cql", "hp"} & set(bench.planners) else None
    timings: list[dict] = []
    rows = run_benchmark(bench, qmodel, uodm, cfg.cem, timings)
    _write_text(args.out, rows_to_csv(rows))
    if args.out:
        _sibling(args.out, ".agg.csv").write_text(rows_to_csv(aggregate(rows), AGG_COLUMNS))
        with open(_sibling(args.out, ".timings.csv"), "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=["suite", "planner", "seed", "wall_time_s"], lineterminator="\n")
            w.writeheader()
            w.writerows(timings)


COMMANDS = {
    "generate": cmd_generate,
    "train-uodm": cmd_train_uodm,
    "train-planner": cmd_train_planner,
    "eval": cmd_eval,
    "bench": cmd_bench,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        COMMANDS[args.command](args, cfg)
    except (UsageError, ConfigError, MissingModelError) as exc:
        print(f"tidyplan: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ScenarioError, CheckpointError, OSError, RuntimeError, ValueError) as exc:
        print(f"tidyplan: failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
