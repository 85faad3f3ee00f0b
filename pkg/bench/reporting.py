"""Comparison tables and plot-data files built from run results."""

import csv
import json
import logging
import os
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np

from utils.errors import ReportError
from .runner import RunResult

logger = logging.getLogger(__name__)


def _check_same_benchmark(results: Sequence[RunResult]) -> None:
    if not results:
        raise ReportError("no results to report")
    reference = json.dumps(results[0].benchmark, sort_keys=True)
    for result in results[1:]:
        if json.dumps(result.benchmark, sort_keys=True) != reference:
            raise ReportError(
                f"result '{result.name}' uses benchmark {result.benchmark}, "
                f"but '{results[0].name}' uses {results[0].benchmark}"
            )


def comparison_table(results: Sequence[RunResult]) -> str:
    """Aligned text table of method x accuracy (mean +- std, in %), best first."""
    _check_same_benchmark(results)
    ordered = sorted(results, key=lambda r: (-r.mean_accuracy, r.name))
    rows = [("Method", "Run", "Accuracy (%)", "Global loss", "Repeats")]
    for result in ordered:
        losses = [rep.global_loss for rep in result.repeats]
        rows.append((
            result.method,
            result.name,
            f"{100 * result.mean_accuracy:.2f} +- {100 * result.std_accuracy:.2f}",
            f"{np.mean(losses):.4f}",
            str(len(result.repeats)),
        ))
    widths = [max(len(row[k]) for row in rows) for k in range(len(rows[0]))]
    lines = ["  ".join(cell.ljust(width) for cell, width in zip(row, widths)).rstrip() for row in rows]
    lines.insert(1, "  ".join("-" * width for width in widths))
    return "\n".join(lines)


def forgetting_rows(result: RunResult) -> List[Dict[str, float]]:
    """Per task: final accuracy, best accuracy seen and forgetting (best - final), averaged over repeats."""
    num_tasks = len(result.repeats[0].accuracy_matrix)
    rows = []
    for j in range(num_tasks):
        finals, bests = [], []
        for rep in result.repeats:
            column = [row[j] for row in rep.accuracy_matrix[j:]]
            finals.append(column[-1])
            bests.append(max(column))
        rows.append({
            "method": result.method,
            "run": result.name,
            "task": j + 1,
            "final_accuracy": float(np.mean(finals)),
            "max_accuracy": float(np.mean(bests)),
            "forgetting": float(np.mean(bests) - np.mean(finals)),
        })
    return rows


def accuracy_curve_rows(result: RunResult) -> List[Dict[str, float]]:
    """Mean accuracy of every task after every training step (forgetting curves)."""
    num_tasks = len(result.repeats[0].accuracy_matrix)
    rows = []
    for i in range(num_tasks):
        for j in range(i + 1):
            rows.append({
                "method": result.method,
                "run": result.name,
                "after_task": i + 1,
                "task": j + 1,
                "accuracy": float(np.mean([rep.accuracy_matrix[i][j] for rep in result.repeats])),
            })
    return rows


def _write_csv(path: str, fieldnames: Sequence[str], rows: Sequence[Mapping]) -> str:
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=list(fieldnames))
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
    return path


def write_sweep_csv(rows: Sequence[Mapping], path: str) -> str:
    """Loss-vs-a_j series with columns (a_j, loss, accuracy)."""
    return _write_csv(path, ["a_j", "loss", "accuracy"], rows)


def report(results: Sequence[RunResult], output_dir: Optional[str] = None) -> Dict[str, str]:
    """Comparison table plus forgetting and accuracy-curve CSVs.

    Args:
        results: Results of one benchmark
        output_dir: Where the CSVs and ``table.txt`` go; nothing is written when None

    Returns:
        Dict with the table text under ``table`` and any written paths

    Raises:
        ReportError: Results from different benchmarks
    """
    table = comparison_table(results)
    outputs = {"table": table}
    if output_dir is not None:
        os.makedirs(output_dir, exist_ok=True)
        with open(os.path.join(output_dir, "table.txt"), "w") as f:
            f.write(table + "\n")
        forgetting = [row for result in results for row in forgetting_rows(result)]
        curves = [row for result in results for row in accuracy_curve_rows(result)]
        outputs["forgetting"] = _write_csv(
            os.path.join(output_dir, "forgetting.csv"),
            ["method", "run", "task", "final_accuracy", "max_accuracy", "forgetting"],
            forgetting,
        )
        outputs["curves"] = _write_csv(
            os.path.join(output_dir, "curves.csv"), ["method", "run", "after_task", "task", "accuracy"], curves
        )
        logger.info(f"Report for {len(results)} results written to {output_dir}")
    return outputs
