import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Tuple

from .plan import SearchTrace, SimConfig

logger = logging.getLogger(__name__)

Score = Callable[[int], Tuple[float, float]]


def search_stride(budget: int, min_stride: int, max_stride: int) -> int:
    """Stride epsilon = clamp(budget / 5, min_stride, max_stride)."""
    return min(max(budget // 5, min_stride), max_stride)


def candidate_grid(upper: int, stride: int) -> List[int]:
    """0, stride, 2 * stride, ... and ``upper`` itself."""
    grid = list(range(0, upper + 1, stride))
    if grid[-1] != upper:
        grid.append(upper)
    return grid


def _evaluate(score: Score, trace: SearchTrace, points: List[int], workers: int) -> None:
    todo = [a for a in points if a not in trace.evaluated]
    if not todo:
        return
    if workers > 1 and len(todo) > 1:
        with ThreadPoolExecutor(max_workers=min(workers, len(todo))) as pool:
            results = list(pool.map(score, todo))
    else:
        results = [score(a) for a in todo]
    for a, (loss, accuracy) in zip(todo, results):
        trace.evaluated[a] = (float(loss), float(accuracy))
        logger.debug(f"Candidate a={a}: loss {loss:.4f}, accuracy {accuracy:.4f}")


def stride_bisection(score: Score, upper: int, stride: int, objective: str = "accuracy", workers: int = 1) -> SearchTrace:
    """Bisect the candidate grid of [0, upper] for the best score.

    Each step scores the middle candidate and its grid neighbours inside
    the bracket, then keeps the half holding the better neighbour. The
    search stops once the middle beats both neighbours or the bracket is a
    single candidate. Scores are memoised in the trace.

    Args:
        score: Maps a candidate to (loss, accuracy)
        upper: Largest candidate (slot budget)
        stride: Grid spacing
        objective: ``accuracy`` (loss breaks ties) or ``loss``
        workers: Threads used for the neighbour evaluations

    Returns:
        SearchTrace with the chosen point
    """
    trace = SearchTrace(upper=upper, stride=stride, objective=objective)
    if upper < stride:
        trace.chosen = upper
        trace.degenerate = True
        logger.warning(f"Slot budget {upper} below stride {stride}: search skipped, ring size set to {upper}")
        return trace
    grid = candidate_grid(upper, stride)
    lo, hi = 0, len(grid) - 1
    interior = False
    while True:
        mid = (lo + hi) // 2
        neighbours = [k for k in (mid - 1, mid + 1) if lo <= k <= hi]
        _evaluate(score, trace, [grid[mid]] + [grid[k] for k in neighbours], workers)
        trace.brackets.append((grid[lo], grid[mid], grid[hi]))
        centre = trace.score_key(grid[mid])
        better = [k for k in neighbours if trace.score_key(grid[k]) > centre]
        if not better:
            around = [grid[k] for k in (mid - 1, mid + 1) if 0 <= k < len(grid)]
            interior = len(around) == 2 and all(
                a in trace.evaluated and trace.score_key(a) < centre for a in around
            )
            break
        step = max(better, key=lambda k: (trace.score_key(grid[k]), -k))
        if step < mid:
            hi = mid - 1
        else:
            lo = mid + 1
    trace.chosen = trace.best_point()
    trace.fallback_used = not interior
    if trace.fallback_used:
        logger.warning(f"No interior optimum on [0, {upper}]: best evaluated point {trace.chosen} used")
    return trace


def global_bs(score: Score, budget: int, sim_config: SimConfig) -> SearchTrace:
    """Switching-point search over [0, budget] with the configured stride clamp and objective."""
    stride = search_stride(budget, sim_config.min_stride, sim_config.max_stride)
    trace = stride_bisection(score, budget, stride, sim_config.objective, sim_config.workers)
    logger.debug(
        f"Search over [0, {budget}] with stride {stride}: chose {trace.chosen} after {trace.num_evaluations} simulations"
    )
    return trace
