"""Quadrature on the unit sphere S^{n-1} and ball averages built from it."""
import logging
import math
from functools import lru_cache
from typing import Callable, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import gamma, roots_jacobi

logger = logging.getLogger(__name__)


def sphere_area(n: int) -> float:
    """omega_{n-1} = 2 pi^{n/2} / Gamma(n/2), the area of the unit sphere in R^n"""
    return float(2.0 * math.pi ** (n / 2.0) / gamma(n / 2.0))


def ball_volume(n: int, r: float = 1.0) -> float:
    return sphere_area(n) * r ** n / n


@lru_cache(maxsize=32)
def sphere_rule(n: int, order: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Product rule on S^{n-1}: points (N, n) and weights summing to 1

    The first coordinate u = cos(theta) carries the weight (1 - u^2)^{(n-3)/2}
    and is integrated by Gauss-Jacobi; the remaining directions recurse down to
    equispaced points on the circle. Exact for polynomials of degree < 2 order.
    """
    if n < 2:
        raise ValueError("sphere rule needs n >= 2")
    if n == 2:
        m = 2 * order
        angles = 2.0 * math.pi * np.arange(m) / m
        return np.column_stack((np.cos(angles), np.sin(angles))), np.full(m, 1.0 / m)

    a = (n - 3) / 2.0
    u, w = roots_jacobi(order, a, a)
    w = w / w.sum()
    sub_points, sub_weights = sphere_rule(n - 1, order)
    rad = np.sqrt(np.clip(1.0 - u ** 2, 0.0, None))
    points = np.concatenate([np.column_stack((np.full(len(sub_points), ui), ri * sub_points))
                             for ui, ri in zip(u, rad)])
    weights = np.concatenate([wi * sub_weights for wi in w])
    logger.debug(f"Sphere rule n={n}, order={order}: {len(weights)} points")
    return points, weights


def sphere_mean(fn: Callable[[np.ndarray], np.ndarray], x0: np.ndarray, r: float, order: int) -> float:
    """Average of fn over the sphere |x - x0| = r"""
    x0 = np.asarray(x0, dtype=float)
    points, weights = sphere_rule(len(x0), order)
    values = np.asarray(fn(x0 + r * points), dtype=float)
    return float(np.dot(weights, values))


def ball_mean(fn: Callable[[np.ndarray], np.ndarray], x0: np.ndarray, eps: float, order: int) -> float:
    """
    Average of fn over the ball |x - x0| < eps

    Radial Gauss-Legendre in s = (r / eps)^n, which absorbs the r^{n-1} weight.
    """
    x0 = np.asarray(x0, dtype=float)
    n = len(x0)
    nodes, weights = leggauss(order)
    s = 0.5 * (nodes + 1.0)
    radii = eps * s ** (1.0 / n)
    points, sphere_weights = sphere_rule(n, order)
    total = 0.0
    for r, w in zip(radii, 0.5 * weights):
        total += w * float(np.dot(sphere_weights, np.asarray(fn(x0 + r * points), dtype=float)))
    return total
