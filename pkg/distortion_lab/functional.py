"""Integral functionals of dilatation fields and the semicontinuity harness."""
import logging
import math
from typing import Callable, Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial.legendre import leggauss
from pydantic import BaseModel, ConfigDict, Field
from scipy.interpolate import CubicSpline

from .config import get_settings
from .errors import CubeOutOfDomain, DominationFailed, ParamOutOfRange
from .field import Box, DilatationField, dilatation_field, outer_dilatation_batch
from .growth import GrowthFunction, linear_function
from .numerics import (INF, estimate_liminf, parallel_map, relative_gap, tail_of, weighted_sum,
                       weighted_sum_array)

logger = logging.getLogger(__name__)

WEAK_CONVERGENCE_NOTE = ("weak L1 convergence of partial derivatives is not checked numerically; "
                         "only the functional inequality is evaluated")

FieldIntegrand = Callable[[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray], np.ndarray]


class Weight:
    """The density Psi of a functional: unit, spherical (1+|x|^2)^-n or a custom callable"""

    def __init__(self, kind: str = "unit", fn: Optional[Callable[[np.ndarray], np.ndarray]] = None):
        if kind not in ("unit", "spherical", "custom"):
            raise ParamOutOfRange(f"unknown weight kind {kind!r}")
        if kind == "custom" and fn is None:
            raise ParamOutOfRange("custom weight needs a callable")
        self.kind = kind
        self.fn = fn

    def __repr__(self) -> str:
        return f"Weight({self.kind})"

    def values(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        if self.kind == "unit":
            return np.ones(points.shape[:-1])
        if self.kind == "spherical":
            n = points.shape[-1]
            return (1.0 + np.sum(points ** 2, axis=-1)) ** -n
        return np.asarray(self.fn(points), dtype=float)

    def check_positive(self, region: Box) -> None:
        """Sampled positivity check on the region"""
        axes = [np.linspace(lo, hi, 9) for lo, hi in region]
        points = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        if np.any(self.values(points) <= 0):
            raise ParamOutOfRange(f"weight {self.kind} is not positive on {region}")

    def slab_weights(self, breaks: np.ndarray, axis: int, region: Box) -> np.ndarray:
        """int of Psi over (slab cap region) for every slab [breaks[k], breaks[k+1])"""
        lo, hi = region[axis]
        a = np.clip(breaks[:-1], lo, hi)
        b = np.clip(breaks[1:], lo, hi)
        others = [i for i in range(len(region)) if i != axis]
        if self.kind == "unit":
            cross = math.prod(region[i][1] - region[i][0] for i in others)
            return (b - a) * cross
        cumulative = self._cumulative(axis, region)
        return cumulative(b) - cumulative(a)

    def _cumulative(self, axis: int, region: Box) -> Callable[[np.ndarray], np.ndarray]:
        """W(s) = int_{lo}^{s} int_{cross-section} Psi, as a spline antiderivative"""
        settings = get_settings().functional
        n = len(region)
        others = [i for i in range(n) if i != axis]
        nodes, weights = leggauss(settings.cross_section_order)
        grids, wgrids = [], []
        for i in others:
            lo_i, hi_i = region[i]
            grids.append(0.5 * (hi_i - lo_i) * nodes + 0.5 * (hi_i + lo_i))
            wgrids.append(0.5 * (hi_i - lo_i) * weights)
        cross_points = np.stack(np.meshgrid(*grids, indexing="ij"), axis=-1).reshape(-1, n - 1)
        cross_weights = np.prod(np.stack(np.meshgrid(*wgrids, indexing="ij"), axis=-1), axis=-1).ravel()

        lo, hi = region[axis]
        ts = np.linspace(lo, hi, settings.weight_knots)
        points = np.empty((len(ts), len(cross_points), n))
        points[:, :, others] = cross_points[None, :, :]
        points[:, :, axis] = ts[:, None]
        density = self.values(points) @ cross_weights
        return CubicSpline(ts, density).antiderivative()

    def cell_weights(self, field: DilatationField, region: Box) -> np.ndarray:
        """Psi(center) times the overlap volume of every cell with the region"""
        m = field.mapping
        overlaps = []
        for i, (lo, hi) in enumerate(region):
            nodes = m.axis_nodes(i)
            overlaps.append(np.clip(np.minimum(nodes[1:], hi) - np.maximum(nodes[:-1], lo), 0.0, None))
        volume = overlaps[0]
        for o in overlaps[1:]:
            volume = np.multiply.outer(volume, o)
        if self.kind == "unit":
            return volume
        return volume * self.values(m.cell_centers())


class FunctionalSpec(BaseModel):
    """Phi, Psi and Omega of the functional int_Omega Phi(P_f) Psi dm"""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    phi: GrowthFunction
    weight: Weight = Field(default_factory=Weight)
    region: Optional[Box] = None
    dilatation: Literal["P", "K"] = "P"


def _region_for(field: DilatationField, region: Optional[Box]) -> Box:
    if region is None:
        return field.box
    region = tuple(tuple(map(float, r)) for r in region)
    for (lo, hi), (blo, bhi) in zip(region, field.box):
        if lo < blo - 1e-12 or hi > bhi + 1e-12 or hi <= lo:
            raise ParamOutOfRange(f"region {region} is not a sub-box of {field.box}")
    return region


def integrate_field(field: DilatationField, fn: FieldIntegrand, region: Optional[Box] = None,
                    weight: Optional[Weight] = None) -> float:
    """
    int_region fn(|f'|, J, K, P, f') Psi dm

    Analytic fields are integrated slab by slab with exact measures; sampled
    fields by the cell-center rule with exact cell overlaps.
    """
    region = _region_for(field, region)
    weight = weight or Weight()
    slabs = field.slabs
    if slabs is not None:
        values = np.asarray(fn(slabs.op_norm, slabs.J, slabs.K, slabs.P, slabs.matrices), dtype=float)
        slab_w = weight.slab_weights(slabs.breaks, slabs.axis, region)
        return weighted_sum(values.tolist(), slabs.matrix_weights(slab_w).tolist())
    values = np.asarray(fn(field.op_norm, field.J, field.K, field.P, field.jacobian), dtype=float)
    return weighted_sum_array(values, weight.cell_weights(field, region))


def _dilatation_of(spec_dilatation: str) -> Callable:
    if spec_dilatation == "K":
        return lambda op, J, K, P, jac: K
    return lambda op, J, K, P, jac: P


def functional_value(field: DilatationField, spec: FunctionalSpec) -> float:
    """int_Omega Phi(P_f) Psi dm (K_f when spec.dilatation == "K")"""
    pick = _dilatation_of(spec.dilatation)
    value = integrate_field(field, lambda *args: spec.phi.evaluate_many(pick(*args)), spec.region, spec.weight)
    logger.debug(f"Functional {spec.phi.label} on {field.mapping.label}: {value}")
    return value


def cube_box(field: DilatationField, x0: Sequence[float], h: float) -> Box:
    """The cube of side h centered at x0, checked against the field's box"""
    x0 = np.asarray(x0, dtype=float)
    if h <= 0:
        raise ParamOutOfRange("cube side must be positive", h=h)
    box = tuple((float(c - h / 2.0), float(c + h / 2.0)) for c in x0)
    for (lo, hi), (blo, bhi) in zip(box, field.box):
        if lo < blo - 1e-12 or hi > bhi + 1e-12:
            raise CubeOutOfDomain(f"cube of side {h} at {x0.tolist()} leaves the domain", x0=x0.tolist(), h=h)
    return tuple((max(lo, blo), min(hi, bhi)) for (lo, hi), (blo, bhi) in zip(box, field.box))


def cube_average(field: DilatationField, x0: Sequence[float], h: float, g: GrowthFunction,
                 dilatation: str = "P") -> float:
    """(1/h^n) int_{C(x0, h)} g(P_f) dm"""
    box = cube_box(field, x0, h)
    pick = _dilatation_of(dilatation)
    total = integrate_field(field, lambda *args: g.evaluate_many(pick(*args)), box)
    return total / h ** field.n


def point_dilatation(field: DilatationField, x0: Sequence[float]) -> Tuple[float, float]:
    """(K, P) of an analytic field at a point"""
    m = field.mapping
    if not m.analytic:
        raise ParamOutOfRange("pointwise dilatation needs an analytic source")
    coord = np.array([float(x0[m.source.axis])])
    _, _, K, P = outer_dilatation_batch(m.source.cell_jacobians(coord))
    return float(K[0]), float(P[0])


class PointwiseBoundReport(BaseModel):
    point_value: float
    h_values: List[float]
    averages: List[List[float]]
    inner_liminf: List[float]
    double_liminf: float
    method: str
    holds: bool


def check_pointwise_bound(limit_field: DilatationField, sequence_fields: Sequence[DilatationField],
                          x0: Sequence[float], h_sequence: Sequence[float], tolerance: float = 1e-6,
                          dilatation: str = "P") -> PointwiseBoundReport:
    """
    P_f(x0) <= liminf_h liminf_j (1/h^n) int_{C(x0,h)} P_{f_j}

    The trace keeps the full array of averages (rows h, columns j).
    """
    identity = linear_function(1.0, 0.0, label="t")
    K0, P0 = point_dilatation(limit_field, x0)
    point_value = K0 if dilatation == "K" else P0

    averages = [[cube_average(f, x0, h, identity, dilatation) for f in sequence_fields] for h in h_sequence]
    inner = [estimate_liminf(row)[0] for row in averages]
    double, method = estimate_liminf(inner)
    holds = point_value <= double + tolerance * max(1.0, abs(double))
    logger.info(f"Pointwise bound at {list(x0)}: value {point_value:.12g} vs double liminf {double:.12g}")
    return PointwiseBoundReport(point_value=point_value, h_values=list(h_sequence), averages=averages,
                                inner_liminf=inner, double_liminf=double, method=method, holds=holds)


class JensenReport(BaseModel):
    phi_of_average: float
    average_of_phi: float
    holds: bool


def jensen_check(field: DilatationField, x0: Sequence[float], h: float, phi: GrowthFunction) -> JensenReport:
    """Phi(average P) <= average Phi(P) on one cube"""
    identity = linear_function(1.0, 0.0, label="t")
    mean = cube_average(field, x0, h, identity)
    lhs = phi(mean)
    rhs = cube_average(field, x0, h, phi)
    holds = lhs <= rhs + 1e-9 * max(1.0, abs(rhs))
    return JensenReport(phi_of_average=lhs, average_of_phi=rhs, holds=holds)


Verdict = Literal["inequality-holds", "strict-violation", "inconclusive"]


class SemicontinuityReport(BaseModel):
    limit_value: float
    sequence_values: List[float]
    indices: List[int]
    liminf_estimate: float
    liminf_method: str
    verdict: Verdict
    margins: Dict[str, float]
    slab_exact: bool
    phi_label: str
    weight: str
    omega: Optional[List[List[float]]] = None
    sequence: str = ""
    notes: List[str] = []


def classify_gap(limit_value: float, liminf: float, tolerance: float, margin: float) -> Tuple[Verdict, float]:
    gap = relative_gap(limit_value, liminf)
    if gap <= tolerance:
        return "inequality-holds", gap
    if gap > margin:
        return "strict-violation", gap
    return "inconclusive", gap


def semicontinuity_experiment(seq, spec: FunctionalSpec, j_max: int) -> SemicontinuityReport:
    """
    Compare int Phi(P_f) with liminf_j int Phi(P_{f_j}) over j = 1..j_max

    Args:
        seq: MappingSequence from the construct module
        spec: functional description
        j_max: last index (at least 3)
    """
    if j_max < 3:
        raise ParamOutOfRange("j_max must be at least 3", j_max=j_max)
    settings = get_settings().functional
    last = min(j_max, seq.max_j)
    if last < j_max:
        logger.info(f"{seq.kind}: j_max capped at {last}")
    indices = list(range(1, last + 1))

    limit_field = dilatation_field(seq.limit())
    limit_value = functional_value(limit_field, spec)
    fields = parallel_map(lambda j: dilatation_field(seq.member(j)), indices)
    values = parallel_map(lambda f: functional_value(f, spec), fields)

    slab_exact = limit_field.analytic and all(f.analytic for f in fields)
    tolerance = settings.exact_tolerance if slab_exact else settings.sampled_tolerance
    margin = settings.margin_factor * tolerance
    liminf, method = estimate_liminf(values)
    verdict, scaled_gap = classify_gap(limit_value, liminf, tolerance, margin)

    notes = [WEAK_CONVERGENCE_NOTE]
    if method == "constant-tail" and slab_exact:
        notes.append("sequence values are constant in j (slab-exact), so the liminf estimate is exact")
    gap = limit_value - liminf if not (math.isinf(limit_value) and math.isinf(liminf)) else 0.0
    report = SemicontinuityReport(
        limit_value=limit_value,
        sequence_values=values,
        indices=indices,
        liminf_estimate=liminf,
        liminf_method=method,
        verdict=verdict,
        margins={"gap": gap, "scaled_gap": scaled_gap, "tolerance": tolerance, "violation_margin": margin},
        slab_exact=slab_exact,
        phi_label=spec.phi.label,
        weight=spec.weight.kind,
        omega=[list(r) for r in spec.region] if spec.region else None,
        sequence=seq.describe(),
        notes=notes,
    )
    logger.info(f"Semicontinuity {seq.kind} / {spec.phi.label}: limit={limit_value:.12g}, "
                f"liminf={liminf:.12g} ({method}) -> {verdict}")
    return report


def run_stock_suite(phi: GrowthFunction, n: int, j_max: int,
                    weight: Optional[Weight] = None) -> List[SemicontinuityReport]:
    """Semicontinuity experiments on the four stock sequences"""
    from .construct import stock_sequences

    spec = FunctionalSpec(phi=phi, weight=weight or Weight())
    return [semicontinuity_experiment(seq, spec, j_max) for seq in stock_sequences(n)]


class FatouReport(BaseModel):
    lhs: float
    rhs: float
    holds: bool
    row_liminf: List[float]
    column_sums: List[float]


def fatou_series(a, b: Optional[Sequence[float]] = None) -> FatouReport:
    """
    sum_m liminf_j a_mj <= liminf_j sum_m a_mj over the tail half of j

    Signed arrays need a dominating sequence b with |a_mj| <= b_m, sum b < inf.

    Raises:
        DominationFailed: signed input without a valid b
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise ParamOutOfRange("a must be a 2D array (rows m, columns j)")
    if np.any(np.isnan(a)):
        raise ParamOutOfRange("a contains NaN")
    if np.any(a < 0):
        if b is None:
            raise DominationFailed("signed entries need a dominating sequence b")
        b = np.asarray(b, dtype=float)
        if b.shape != (a.shape[0],) or not np.all(np.isfinite(b)) or not math.isfinite(math.fsum(b)):
            raise DominationFailed("b must be a finite sequence with one entry per row")
        if np.any(np.abs(a) > b[:, None]):
            rows = np.where(np.any(np.abs(a) > b[:, None], axis=1))[0].tolist()
            raise DominationFailed(f"rows {rows[:10]} are not dominated by b", rows=rows)

    start = len(tail_of(list(range(a.shape[1]))))
    tail = a[:, a.shape[1] - start:]
    row_liminf = tail.min(axis=1)
    column_sums = [math.fsum(col) for col in tail.T]
    lhs = math.fsum(row_liminf)
    rhs = min(column_sums)
    return FatouReport(lhs=lhs, rhs=rhs, holds=lhs <= rhs + 1e-12, row_liminf=row_liminf.tolist(),
                       column_sums=column_sums)
