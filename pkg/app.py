import argparse
import dataclasses
import json
import logging
import os
import sys
from typing import List, Optional

import numpy as np

from bench import load_config, read_result, report, run_experiment, write_sweep_csv
from gps_engine import is_unimodal, sweep_switching_profile
from nn_core import init_params, train
from pseudo_tasks import METHODS as SYNTHESIS_METHODS
from pseudo_tasks import SynthesisSpec, synthesize_sequence
from task_streams import difficulty_profile, summarize_profile, zero_shot_transfer
from utils.errors import ReplayEngineError, exit_code_for
from utils.seeding import SeedBundle

logger = logging.getLogger(__name__)


def setup_logging(level: str = "INFO", log_file: str = "main.log") -> None:
    handlers: List[logging.Handler] = [logging.StreamHandler()]
    if log_file:
        handlers.insert(0, logging.FileHandler(log_file))
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=handlers,
        force=True,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description='Experience replay with switching-point search by pseudo-task simulation')
    parser.add_argument('--log-level', default='INFO', help='Logging level (DEBUG, INFO, WARNING, ...)')
    parser.add_argument('--log-file', default='main.log', help='Log file; empty string disables file logging')
    sub = parser.add_subparsers(dest='command', required=True)

    run = sub.add_parser('run', help='Run an experiment config (file path or preset name)')
    run.add_argument('config')
    run.add_argument('--output-dir', help='Overrides the output_dir of the config')

    oracle = sub.add_parser('oracle', help='Offline switching-point search on the benchmark of a config')
    oracle.add_argument('config')
    oracle.add_argument('--output-dir', help='Overrides the output_dir of the config')

    sweep = sub.add_parser('sweep', help='Global loss of one task over a grid of ring sizes')
    sweep.add_argument('config')
    sweep.add_argument('--task', type=int, required=True, help='Task whose ring size is swept')
    sweep.add_argument('--stride', type=int, help='Grid spacing; the search stride by default')
    sweep.add_argument('--output', help='CSV path; <output_dir>/<name>.sweep-<task>.csv by default')
    sweep.add_argument('--tolerance', type=float, default=0.0, help='Loss steps treated as flat')

    rep = sub.add_parser('report', help='Compare result files of one benchmark')
    rep.add_argument('results', nargs='+')
    rep.add_argument('--output-dir', help='Write table.txt and the CSV series here')

    diagnose = sub.add_parser('diagnose', help='Task difficulty or zero-shot transfer profiles')
    diagnose.add_argument('kind', choices=['difficulty', 'zeroshot'])
    diagnose.add_argument('config')
    diagnose.add_argument('--pseudo-tasks', type=int, default=3, help='Pseudo-tasks per synthesis method')
    return parser


def cmd_run(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    result = run_experiment(config, args.output_dir)
    print(f"{config.name} ({config.method}): {100 * result.mean_accuracy:.2f} +- {100 * result.std_accuracy:.2f}")
    return 0


def cmd_oracle(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    if config.method != "oracle":
        config = dataclasses.replace(config, method="oracle", name=f"{config.name}-oracle")
    result = run_experiment(config, args.output_dir)
    for rep in result.repeats:
        print(f"repeat {rep.repeat}: plan {rep.plan['points'] if rep.plan else {}}")
    print(f"{config.name}: {100 * result.mean_accuracy:.2f} +- {100 * result.std_accuracy:.2f}")
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    seeds = SeedBundle(config.master_seed, 0)
    stream = config.benchmark.build(seeds)
    rows = sweep_switching_profile(
        stream, config.memory_size, config.train, config.simulation, seeds, args.task, args.stride
    )
    path = args.output or os.path.join(config.output_dir, f"{config.name}.sweep-{args.task}.csv")
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    write_sweep_csv(rows, path)
    unimodal = is_unimodal([row["loss"] for row in rows], args.tolerance)
    print(json.dumps({"task": args.task, "points": len(rows), "unimodal": unimodal, "csv": path}))
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    results = [read_result(path) for path in args.results]
    outputs = report(results, args.output_dir)
    print(outputs["table"])
    return 0


def _pseudo_tasks(task, method: str, count: int, capacity: int, seed: int):
    spec = SynthesisSpec(method=method, count=count, examples_per_task=capacity, seed=seed)
    return synthesize_sequence(task, spec)


def cmd_diagnose(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    seeds = SeedBundle(config.master_seed, 0)
    stream = config.benchmark.build(seeds)
    first = stream.tasks[0]
    methods = [m for m in SYNTHESIS_METHODS if m == "permutation" or first.image_shape is not None]
    summary = {}
    if args.kind == "difficulty":
        accuracies, _ = difficulty_profile(stream.tasks, config.train, stream.num_outputs)
        summary["real"] = {"accuracies": accuracies, **summarize_profile(accuracies)}
        for method in methods:
            pseudo = _pseudo_tasks(first, method, args.pseudo_tasks, len(first.train), seeds.seed("simulation", 0))
            accuracies, _ = difficulty_profile(pseudo, config.train, stream.num_outputs)
            summary[method] = {"accuracies": accuracies, **summarize_profile(accuracies)}
    else:
        params = init_params(config.train.layer_sizes(stream.input_dim, stream.num_outputs), seeds.seed("init"))
        train(params, first.train.inputs, first.train.labels, config.train, rng=seeds.rng("shuffle"))
        summary["trained_on_task"] = first.task_id
        summary["chance"] = 1.0 / len(first.class_ids)
        for method in methods:
            pseudo = _pseudo_tasks(first, method, args.pseudo_tasks, len(first.train), seeds.seed("simulation", 0))
            summary[method] = [zero_shot_transfer(params, task) for task in pseudo]
        summary["mean"] = float(np.mean([a for m in methods for a in summary[m]]))
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


COMMANDS = {
    'run': cmd_run,
    'oracle': cmd_oracle,
    'sweep': cmd_sweep,
    'report': cmd_report,
    'diagnose': cmd_diagnose,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level, args.log_file)
    try:
        return COMMANDS[args.command](args)
    except ReplayEngineError as e:
        logger.error(f"{args.command} failed: {e}")
        print(json.dumps(e.to_dict()), file=sys.stderr)
        return exit_code_for(e)
    except Exception as e:
        logger.exception(f"{args.command} failed unexpectedly")
        print(json.dumps({"error": "internal", "message": str(e)}), file=sys.stderr)
        return 1


if __name__ == '__main__':
    sys.exit(main())
