"""Deterministic JSON, CSV and SVG writers for experiment results."""
import csv
import json
import logging
import math
from pathlib import Path
from typing import Any, Iterable, List, Optional, Sequence, Tuple, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from pydantic import BaseModel  # noqa: E402

logger = logging.getLogger(__name__)

plt.rcParams["svg.hashsalt"] = "distortion-lab"
plt.rcParams["svg.fonttype"] = "none"

PathLike = Union[str, Path]


def format_float(x: float) -> str:
    """17 significant digits; non-finite values as inf / -inf / nan"""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def _plain(obj: Any) -> Any:
    if isinstance(obj, BaseModel):
        return _plain(obj.model_dump())
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


def _encode(obj: Any, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    close = " " * (indent * level)
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return format_float(obj) if math.isfinite(obj) else json.dumps(format_float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {_encode(obj[k], indent, level + 1)}" for k in sorted(obj)]
        return "{\n" + ",\n".join(items) + "\n" + close + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        items = [f"{pad}{_encode(v, indent, level + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + close + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj: Any, indent: int = 2) -> str:
    """JSON with sorted keys, 17-digit floats and "inf" strings for non-finite values"""
    return _encode(_plain(obj), indent, 0) + "\n"


def write_json(obj: Any, path: PathLike) -> None:
    with open(path, "w") as f:
        f.write(dumps(obj))
    logger.info(f"Wrote {path}")


def _cell(value: Any) -> str:
    if isinstance(value, (float, np.floating)):
        return format_float(value)
    return str(value)


def write_csv(path: PathLike, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])
    logger.info(f"Wrote {path}")


def _finite_points(xs: Sequence[float], ys: Sequence[float]) -> Tuple[List[float], List[float]]:
    pts = [(float(x), float(y)) for x, y in zip(xs, ys) if math.isfinite(x) and math.isfinite(y)]
    return [p[0] for p in pts], [p[1] for p in pts]


def _save(fig, path: PathLike) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    logger.info(f"Wrote {path}")


def plot_sequence(indices: Sequence[int], values: Sequence[float], limit_value: float, path: PathLike,
                  title: str = "") -> None:
    """Functional values against j with the limit value as a horizontal line"""
    fig, ax = plt.subplots(figsize=(6, 4))
    xs, ys = _finite_points(indices, values)
    ax.plot(xs, ys, marker="o", label="sequence")
    if math.isfinite(limit_value):
        ax.axhline(limit_value, color="tab:red", linestyle="--", label=f"limit = {limit_value:.6g}")
    else:
        ax.set_title("limit value = inf", loc="right", fontsize=8)
    if len(xs) < len(values):
        ax.annotate(f"{len(values) - len(xs)} infinite values omitted", xy=(0.02, 0.02), xycoords="axes fraction",
                    fontsize=8)
    ax.set_xlabel("j")
    ax.set_ylabel("functional value")
    ax.set_title(title, loc="left", fontsize=9)
    ax.legend(fontsize=8)
    _save(fig, path)


def plot_evidence(evidence: Sequence[Tuple[float, float]], path: PathLike, title: str = "",
                  ylabel: str = "value") -> None:
    """(scale, value) pairs on a log scale axis"""
    fig, ax = plt.subplots(figsize=(6, 4))
    xs, ys = _finite_points([e[0] for e in evidence], [e[1] for e in evidence])
    ax.plot(xs, ys, marker=".")
    ax.set_xscale("log")
    if ys and min(ys) > 0:
        ax.set_yscale("log")
    ax.set_xlabel("scale")
    ax.set_ylabel(ylabel)
    ax.set_title(title, loc="left", fontsize=9)
    _save(fig, path)


def plot_growth(g, path: PathLike, t_max: Optional[float] = None) -> None:
    """g on a geometric grid, log-log"""
    upper = t_max or (g.T0 if math.isfinite(g.T0) else 1e4)
    ts = np.geomspace(1e-3, upper, 400)
    fig, ax = plt.subplots(figsize=(6, 4))
    xs, ys = _finite_points(ts, g.evaluate_many(ts))
    positive = [(x, y) for x, y in zip(xs, ys) if y > 0]
    ax.plot([p[0] for p in positive], [p[1] for p in positive])
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("t")
    ax.set_ylabel(g.label or "g(t)")
    _save(fig, path)
