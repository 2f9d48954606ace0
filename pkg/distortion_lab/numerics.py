"""Extended-real helpers, compensated sums and tail estimation shared by the modules."""
import logging
import math
from typing import Any, Callable, Iterable, List, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed

from .config import get_settings

logger = logging.getLogger(__name__)

INF = math.inf


def to_extended(value: Any) -> float:
    """Parse a number or the strings "inf"/"-inf" into a float"""
    if isinstance(value, str):
        text = value.strip().lower()
        if text in ("inf", "+inf", "infinity", "∞"):
            return INF
        if text in ("-inf", "-infinity"):
            return -INF
        return float(text)
    return float(value)


def xmul(a: float, b: float) -> float:
    """Extended-real product with the integration convention inf * 0 = 0"""
    if a == 0.0 or b == 0.0:
        return 0.0
    return a * b


def weighted_sum(values: Iterable[float], weights: Iterable[float]) -> float:
    """Compensated sum of values * weights with inf * 0 = 0"""
    terms: List[float] = []
    for v, w in zip(values, weights):
        if w == 0.0 or v == 0.0:
            continue
        if math.isinf(v):
            return INF if (v > 0) == (w > 0) else -INF
        terms.append(v * w)
    return math.fsum(terms)


def weighted_sum_array(values: np.ndarray, weights: np.ndarray) -> float:
    """Vectorized weighted_sum for large per-cell arrays"""
    values = np.asarray(values, dtype=float).ravel()
    weights = np.asarray(weights, dtype=float).ravel()
    active = (weights != 0.0) & (values != 0.0)
    if not np.any(active):
        return 0.0
    v = values[active]
    w = weights[active]
    if np.any(np.isinf(v)):
        return INF
    return math.fsum((v * w).tolist())


def group_sums(index: np.ndarray, weights: np.ndarray, groups: int) -> np.ndarray:
    """Compensated per-group sums of weights (index values in [0, groups))"""
    index = np.asarray(index).ravel()
    weights = np.asarray(weights, dtype=float).ravel()
    order = np.argsort(index, kind="stable")
    sorted_index = index[order]
    sorted_weights = weights[order]
    bounds = np.searchsorted(sorted_index, np.arange(groups + 1))
    return np.array([math.fsum(sorted_weights[bounds[u]:bounds[u + 1]].tolist()) for u in range(groups)])


def geometric_schedule(start: float, ratio: float, count: int) -> np.ndarray:
    return start * ratio ** np.arange(count, dtype=float)


def parallel_map(fn: Callable[[Any], Any], items: Sequence[Any]) -> List[Any]:
    """Map fn over items with joblib threads; results keep input order"""
    n_jobs = get_settings().n_jobs
    if n_jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    return Parallel(n_jobs=n_jobs, prefer="threads")(delayed(fn)(item) for item in items)


def wynn_epsilon(sequence: Sequence[float]) -> float:
    """Wynn epsilon extrapolation; returns the last even-column estimate"""
    current = [float(x) for x in sequence]
    previous = [0.0] * (len(current) + 1)
    best = current[-1]
    column = 0
    while len(current) > 1:
        following = []
        for i in range(len(current) - 1):
            diff = current[i + 1] - current[i]
            scale = max(1.0, abs(current[i + 1]), abs(current[i]))
            if not math.isfinite(diff) or abs(diff) <= 1e-14 * scale:
                return best
            following.append(previous[i + 1] + 1.0 / diff)
        previous, current = current, following
        column += 1
        if column % 2 == 0:
            best = current[-1]
    return best


def tail_of(values: Sequence[float]) -> List[float]:
    """Tail half of a sequence, at least three entries when available"""
    n = len(values)
    start = max(0, min(n // 2, n - 3))
    return [float(v) for v in values[start:]]


def shrinking_suffix(values: Sequence[float]) -> List[float]:
    """Longest suffix whose differences keep one sign and never grow"""
    vals = [float(v) for v in values]
    diffs = np.diff(vals)
    if len(diffs) == 0:
        return vals
    direction = np.sign(diffs[-1])
    start = len(diffs) - 1
    while start > 0:
        prev, cur = diffs[start - 1], diffs[start]
        if not np.isfinite(prev) or np.sign(prev) * direction < 0 or abs(prev) < abs(cur):
            break
        start -= 1
    return vals[start:]


def estimate_liminf(values: Sequence[float]) -> Tuple[float, str]:
    """
    Estimate liminf of a finite prefix of a sequence

    Args:
        values: sequence values in index order (may contain inf)

    Returns:
        (estimate, method) where method is one of
        "constant-tail", "divergent-tail", "extrapolated", "tail-minimum"
    """
    if len(values) == 0:
        raise ValueError("estimate_liminf needs at least one value")
    tail = tail_of(values)
    arr = np.array(tail, dtype=float)
    finite = np.isfinite(arr)

    if not np.any(finite):
        return float(arr.min()), "constant-tail"

    diffs = np.diff(arr[finite]) if np.all(finite) else None
    if not np.all(finite):
        # inf at the end of a nondecreasing tail is divergence
        nondecreasing = all(b >= a for a, b in zip(tail, tail[1:]))
        if nondecreasing and math.isinf(tail[-1]) and tail[-1] > 0:
            return INF, "divergent-tail"
        return float(arr.min()), "tail-minimum"

    lo, hi = float(arr.min()), float(arr.max())
    if hi - lo <= 1e-12 * max(1.0, abs(lo)):
        return lo, "constant-tail"

    # divergence needs four accelerating terms; a short tail borrows earlier values
    window = np.array(values[-max(4, len(arr)):], dtype=float)
    if len(window) >= 4 and np.all(np.isfinite(window)):
        steps = np.diff(window)
        if np.all(steps > 0) and np.all(steps[1:] >= steps[:-1] * (1.0 - 1e-9)):
            return INF, "divergent-tail"

    if len(arr) >= 3:
        monotone = np.all(diffs >= 0) or np.all(diffs <= 0)
        shrinking = np.all(np.abs(diffs[1:]) <= np.abs(diffs[:-1]))
        if monotone and shrinking:
            suffix = shrinking_suffix(values)
            estimate = wynn_epsilon(suffix)
            if math.isfinite(estimate):
                logger.debug(f"Extrapolated {len(suffix)} terms ending {suffix[-3:]} to {estimate}")
                return float(estimate), "extrapolated"

    return lo, "tail-minimum"


def relative_gap(a: float, b: float) -> float:
    """a - b scaled by max(1, |b|), with extended-real conventions"""
    if math.isinf(a) and math.isinf(b) and (a > 0) == (b > 0):
        return 0.0
    if math.isinf(a) or math.isinf(b):
        return a - b
    return (a - b) / max(1.0, abs(b))
