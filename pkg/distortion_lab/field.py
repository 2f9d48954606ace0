"""Mappings of boxes in R^n and their dilatation fields.

Analytic sources are exact (slab-wise affine maps, the Cantor staircase);
sampled sources hold node values on a uniform grid and are differentiated by
central differences at cell centers.
"""
import itertools
import logging
import math
from functools import cached_property
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel
from scipy.spatial import ConvexHull, QhullError
from scipy.spatial.distance import pdist

from .config import get_settings
from .errors import BoundaryCell, Inconclusive, InfiniteDilatation, InvariantBreach, ParamOutOfRange, PreconditionFailed
from .growth import GrowthFunction, calderon_integral
from .numerics import INF, group_sums

logger = logging.getLogger(__name__)

Box = Tuple[Tuple[float, float], ...]


def unit_box(n: int) -> Box:
    return tuple((0.0, 1.0) for _ in range(n))


def outer_dilatation_full(jac: np.ndarray) -> Tuple[float, float, float, float]:
    """(op_norm, J, K, P) of one n x n matrix"""
    op, det, K, P = outer_dilatation_batch(np.asarray(jac, dtype=float)[None, ...])
    return float(op[0]), float(det[0]), float(K[0]), float(P[0])


def outer_dilatation(jac: np.ndarray) -> Tuple[float, float]:
    """
    Outer dilatation K = |f'|^n / |J| and P = K^{1/(n-1)}

    K = 1 for the zero matrix and K = inf for nonzero singular matrices.
    """
    _, _, K, P = outer_dilatation_full(jac)
    return K, P


def outer_dilatation_batch(jacs: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized outer_dilatation over a stack of matrices (..., n, n)"""
    jacs = np.asarray(jacs, dtype=float)
    n = jacs.shape[-1]
    flat = jacs.reshape(-1, n, n)
    off_diagonal = flat - np.einsum("kii->ki", flat)[:, :, None] * np.eye(n)
    diagonal = ~np.any(off_diagonal != 0.0, axis=(1, 2))

    op_norm = np.empty(len(flat))
    det = np.empty(len(flat))
    if np.any(diagonal):
        diag = np.abs(np.einsum("kii->ki", flat[diagonal]))
        op_norm[diagonal] = diag.max(axis=1)
        det[diagonal] = np.prod(np.einsum("kii->ki", flat[diagonal]), axis=1)
    general = ~diagonal
    if np.any(general):
        op_norm[general] = np.linalg.svd(flat[general], compute_uv=False)[:, 0]
        det[general] = np.linalg.det(flat[general])

    abs_det = np.abs(det)
    K = np.empty(len(flat))
    zero = op_norm == 0.0
    singular = (abs_det == 0.0) & ~zero
    regular = ~zero & ~singular
    K[zero] = 1.0
    K[singular] = INF
    K[regular] = op_norm[regular] ** n / abs_det[regular]
    # rounding can push conformal matrices just below 1
    K = np.where(regular & (K < 1.0), 1.0, K)
    P = np.power(K, 1.0 / (n - 1))
    shape = jacs.shape[:-2]
    return op_norm.reshape(shape), det.reshape(shape), K.reshape(shape), P.reshape(shape)


class SlabView:
    """
    Exact slab decomposition of a dilatation field along one axis

    Slab k covers [breaks[k], breaks[k+1]) and is a mixture of matrices
    matrices[index[k, c]] with measure fractions fractions[k, c].
    """

    def __init__(self, axis: int, breaks: np.ndarray, matrices: np.ndarray, index: np.ndarray,
                 fractions: np.ndarray):
        self.axis = axis
        self.breaks = np.asarray(breaks, dtype=float)
        self.matrices = np.asarray(matrices, dtype=float)
        self.index = np.asarray(index, dtype=int).reshape(len(self.breaks) - 1, -1)
        self.fractions = np.asarray(fractions, dtype=float).reshape(self.index.shape)
        self.op_norm, self.J, self.K, self.P = outer_dilatation_batch(self.matrices)

    @property
    def n(self) -> int:
        return self.matrices.shape[-1]

    def matrix_weights(self, slab_weights: np.ndarray) -> np.ndarray:
        """Total weight carried by each unique matrix given per-slab weights"""
        weights = self.fractions * np.asarray(slab_weights, dtype=float)[:, None]
        return group_sums(self.index, weights, len(self.matrices))

    def clipped_lengths(self, lo: float, hi: float) -> np.ndarray:
        a = np.clip(self.breaks[:-1], lo, hi)
        b = np.clip(self.breaks[1:], lo, hi)
        return b - a

    def value_fractions(self, values: np.ndarray, lo: float, hi: float) -> Dict[float, float]:
        """Measure fraction of each distinct value (e.g. P) on [lo, hi] along the axis"""
        weights = self.matrix_weights(self.clipped_lengths(lo, hi)) / (hi - lo)
        out: Dict[float, float] = {}
        for v, w in zip(values, weights):
            if w > 0:
                out[float(v)] = out.get(float(v), 0.0) + float(w)
        return out


class AffineSlabs:
    """f(x) = A_k x + b_k on the k-th slab breaks[k] <= x[axis] < breaks[k+1]"""

    kind = "affine-slabs"

    def __init__(self, axis: int, breaks: Sequence[float], matrices: np.ndarray,
                 matrix_index: Sequence[int], offsets: np.ndarray, check_gluing: bool = True):
        breaks = np.asarray(breaks, dtype=float)
        matrix_index = np.asarray(matrix_index, dtype=int)
        offsets = np.asarray(offsets, dtype=float)
        keep = np.diff(breaks) > 0
        if not np.all(keep):
            logger.debug(f"Dropping {int(np.sum(~keep))} zero-width slabs")
            breaks = np.append(breaks[:-1][keep], breaks[-1])
            matrix_index = matrix_index[keep]
            offsets = offsets[keep]
        self.axis = axis
        self.breaks = breaks
        self.matrices = np.asarray(matrices, dtype=float)
        self.matrix_index = matrix_index
        self.offsets = offsets
        if check_gluing:
            self.check_gluing()

    @property
    def n(self) -> int:
        return self.matrices.shape[-1]

    def slab_of(self, coord: np.ndarray, lower_ties: bool = False) -> np.ndarray:
        side = "left" if lower_ties else "right"
        idx = np.searchsorted(self.breaks, coord, side=side) - 1
        return np.clip(idx, 0, len(self.breaks) - 2)

    def apply(self, points: np.ndarray, slabs: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        out = np.empty_like(points)
        mats = self.matrix_index[slabs]
        for u in np.unique(mats):
            mask = mats == u
            out[mask] = points[mask] @ self.matrices[u].T + self.offsets[slabs[mask]]
        return out

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        return self.apply(points, self.slab_of(points[..., self.axis]))

    def check_gluing(self, box: Optional[Box] = None) -> float:
        """Largest mismatch of neighbouring affine pieces at the face corners"""
        if len(self.breaks) < 3:
            return 0.0
        tol = get_settings().field.gluing_tolerance
        box = box or unit_box(self.n)
        faces = self.breaks[1:-1]
        lower = np.arange(len(faces))
        others = [i for i in range(self.n) if i != self.axis]
        worst = 0.0
        for corner in itertools.product(*[box[i] for i in others]):
            points = np.zeros((len(faces), self.n))
            points[:, self.axis] = faces
            for i, value in zip(others, corner):
                points[:, i] = value
            left = self.apply(points, lower)
            right = self.apply(points, lower + 1)
            scale = np.maximum(1.0, np.abs(left))
            worst = max(worst, float(np.max(np.abs(left - right) / scale)))
        if worst > tol:
            raise InvariantBreach(f"gluing condition fails: mismatch {worst:.3g} at slab faces", mismatch=worst)
        return worst

    def slab_view(self, box: Box) -> SlabView:
        return SlabView(self.axis, self.breaks, self.matrices, self.matrix_index[:, None],
                        np.ones((len(self.matrix_index), 1)))

    def cell_jacobians(self, centers_axis: np.ndarray) -> np.ndarray:
        return self.matrices[self.matrix_index[self.slab_of(centers_axis, lower_ties=True)]]


def cantor_layout(lam: float, levels: int) -> Tuple[np.ndarray, float, List[np.ndarray]]:
    """
    Cantor procedure on [0, 1] with removal ratio q = (1 - lam) / (2 - lam)

    Level i removes an open interval of length q^i / 2^{i-1} from the middle of
    each of the 2^{i-1} segments.

    Returns:
        (segment starts, segment length, gaps per level as (start, length) arrays)
    """
    if not 0 < lam < 1:
        raise ParamOutOfRange("lambda must lie in (0, 1)", lam=lam)
    q = (1.0 - lam) / (2.0 - lam)
    starts = np.array([0.0])
    length = 1.0
    gaps: List[np.ndarray] = []
    for i in range(1, levels + 1):
        gap = q ** i / 2.0 ** (i - 1)
        child = 0.5 * (length - gap)
        gaps.append(np.column_stack((starts + child, np.full(len(starts), gap))))
        starts = np.column_stack((starts, starts + child + gap)).ravel()
        length = child
    return starts, length, gaps


class CantorStaircase:
    """
    y_i = x_i (i < n), y_n = psi(x_n) with psi(x) = tau0 (x - |E cap [0, x]|)

    E is the Cantor set of measure lam; psi(x + 1) = psi(x) + (1 - lam) tau0.
    """

    kind = "cantor-staircase"
    depth = 64

    def __init__(self, tau0: float, lam: float, n: int):
        if tau0 <= 0:
            raise ParamOutOfRange("tau0 must be positive", tau0=tau0)
        if not 0 < lam < 1:
            raise ParamOutOfRange("lambda must lie in (0, 1)", lam=lam)
        self.tau0 = tau0
        self.lam = lam
        self.q = (1.0 - lam) / (2.0 - lam)
        self._n = n
        self.axis = n - 1
        self.period_gain = (1.0 - lam) * tau0

    @property
    def n(self) -> int:
        return self._n

    def _descend(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray, float, float]:
        """Walk x in [0, 1) down the construction; returns (mass below, active, start, length, mass)"""
        start = np.zeros_like(x)
        below = np.zeros_like(x)
        active = np.ones(x.shape, dtype=bool)
        length, mass = 1.0, self.lam
        for i in range(1, self.depth + 1):
            gap = self.q ** i / 2.0 ** (i - 1)
            child = 0.5 * (length - gap)
            half = 0.5 * mass
            r = x - start
            right = active & (r >= child + gap)
            in_gap = active & (r >= child) & ~right
            below = below + np.where(right | in_gap, half, 0.0)
            start = np.where(right, start + child + gap, start)
            active = active & ~in_gap
            length, mass = child, half
            if length < 1e-300:
                break
        return below, active, start, length, mass

    def measure_below(self, x: np.ndarray) -> np.ndarray:
        """|E cap [0, x]| with periodic extension"""
        x = np.asarray(x, dtype=float)
        period = np.floor(x)
        r = x - period
        below, active, start, length, mass = self._descend(r)
        inside = np.where(active, mass * np.clip((r - start) / length, 0.0, 1.0), 0.0)
        return period * self.lam + below + inside

    def in_set(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        _, active, _, _, _ = self._descend(x - np.floor(x))
        return active

    def psi(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.tau0 * (x - self.measure_below(x))

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        out = np.array(points, dtype=float)
        out[..., self.axis] = self.psi(out[..., self.axis])
        return out

    def matrices(self) -> np.ndarray:
        gap_matrix = np.eye(self.n)
        gap_matrix[self.axis, self.axis] = self.tau0
        set_matrix = np.eye(self.n)
        set_matrix[self.axis, self.axis] = 0.0
        return np.stack((gap_matrix, set_matrix))

    def slab_view(self, box: Box, levels: int = 12) -> SlabView:
        lo, hi = box[self.axis]
        cuts = [np.array([lo, hi])]
        _, _, gaps = cantor_layout(self.lam, levels)
        gap_edges = np.concatenate([np.concatenate((g[:, 0], g[:, 0] + g[:, 1])) for g in gaps])
        for period in range(int(math.floor(lo)), int(math.ceil(hi))):
            edges = period + np.concatenate(([0.0], gap_edges))
            cuts.append(edges[(edges > lo) & (edges < hi)])
        breaks = np.unique(np.concatenate(cuts))
        mu = self.measure_below(breaks)
        frac_set = np.clip(np.diff(mu) / np.diff(breaks), 0.0, 1.0)
        index = np.tile(np.array([0, 1]), (len(breaks) - 1, 1))
        fractions = np.column_stack((1.0 - frac_set, frac_set))
        return SlabView(self.axis, breaks, self.matrices(), index, fractions)

    def cell_jacobians(self, centers_axis: np.ndarray) -> np.ndarray:
        mats = self.matrices()
        return mats[self.in_set(centers_axis).astype(int)]


class SampledNodes:
    """Node values of a mapping on a uniform grid, shape (r_1+1, ..., r_n+1, n)"""

    kind = "sampled"

    def __init__(self, nodes: np.ndarray):
        nodes = np.asarray(nodes, dtype=float)
        if nodes.ndim < 3 or nodes.shape[-1] != nodes.ndim - 1:
            raise ParamOutOfRange(f"node array of shape {nodes.shape} does not describe a map R^n -> R^n")
        self.nodes = nodes

    @property
    def n(self) -> int:
        return self.nodes.shape[-1]

    @property
    def resolution(self) -> Tuple[int, ...]:
        return tuple(s - 1 for s in self.nodes.shape[:-1])


MappingSource = Union[AffineSlabs, CantorStaircase, SampledNodes]


class GridMapping:
    """A mapping of a box in R^n together with the grid it is examined on"""

    def __init__(self, source: MappingSource, box: Optional[Box] = None,
                 resolution: Optional[Sequence[int]] = None, label: str = ""):
        n = source.n
        if n < 2:
            raise ParamOutOfRange("dimension must be at least 2", n=n)
        box = tuple(tuple(map(float, b)) for b in (box or unit_box(n)))
        if len(box) != n or any(hi <= lo for lo, hi in box):
            raise ParamOutOfRange(f"degenerate box {box}")
        if isinstance(source, SampledNodes):
            if resolution is not None and tuple(resolution) != source.resolution:
                raise ParamOutOfRange("resolution does not match the node array")
            resolution = source.resolution
        resolution = tuple(int(r) for r in (resolution or (8,) * n))
        if len(resolution) != n or any(r < 2 for r in resolution):
            raise ParamOutOfRange(f"resolution must be at least 2 per axis, got {resolution}")
        self.source = source
        self.box: Box = box
        self.resolution = resolution
        self.label = label

    def __repr__(self) -> str:
        return f"GridMapping({self.label or self.source.kind}, n={self.n}, res={self.resolution})"

    @property
    def n(self) -> int:
        return self.source.n

    @property
    def analytic(self) -> bool:
        return not isinstance(self.source, SampledNodes)

    @property
    def steps(self) -> np.ndarray:
        return np.array([(hi - lo) / r for (lo, hi), r in zip(self.box, self.resolution)])

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.steps))

    @property
    def volume(self) -> float:
        return float(np.prod([hi - lo for lo, hi in self.box]))

    def axis_nodes(self, i: int) -> np.ndarray:
        lo, hi = self.box[i]
        return np.linspace(lo, hi, self.resolution[i] + 1)

    def axis_centers(self, i: int) -> np.ndarray:
        nodes = self.axis_nodes(i)
        return 0.5 * (nodes[:-1] + nodes[1:])

    def node_points(self) -> np.ndarray:
        grids = np.meshgrid(*[self.axis_nodes(i) for i in range(self.n)], indexing="ij")
        return np.stack(grids, axis=-1)

    def cell_centers(self) -> np.ndarray:
        grids = np.meshgrid(*[self.axis_centers(i) for i in range(self.n)], indexing="ij")
        return np.stack(grids, axis=-1)

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        if isinstance(self.source, SampledNodes):
            raise ParamOutOfRange("sampled mappings are only known at their nodes")
        return self.source.evaluate(points)

    def slab_view(self) -> Optional[SlabView]:
        if isinstance(self.source, SampledNodes):
            return None
        return self.source.slab_view(self.box)

    def scaled(self, c: float) -> "GridMapping":
        """c * f"""
        src = self.source
        if isinstance(src, SampledNodes):
            new = SampledNodes(c * src.nodes)
        elif isinstance(src, AffineSlabs):
            new = AffineSlabs(src.axis, src.breaks, c * src.matrices, src.matrix_index, c * src.offsets,
                              check_gluing=False)
        else:
            return sample(self, self.resolution).scaled(c)
        return GridMapping(new, self.box, self.resolution, label=f"{c:g} * {self.label}")

    def post_rotated(self, rotation: np.ndarray) -> "GridMapping":
        """R o f for an orthogonal matrix R"""
        rotation = np.asarray(rotation, dtype=float)
        src = self.source
        if isinstance(src, SampledNodes):
            new = SampledNodes(src.nodes @ rotation.T)
        elif isinstance(src, AffineSlabs):
            new = AffineSlabs(src.axis, src.breaks, rotation @ src.matrices, src.matrix_index,
                              src.offsets @ rotation.T, check_gluing=False)
        else:
            return sample(self, self.resolution).post_rotated(rotation)
        return GridMapping(new, self.box, self.resolution, label=f"R o {self.label}")


def map_nodes(m: GridMapping) -> np.ndarray:
    """Node values of the mapping, shape (r_1+1, ..., r_n+1, n)"""
    if isinstance(m.source, SampledNodes):
        return m.source.nodes
    return m.evaluate(m.node_points())


def sample(m: GridMapping, resolution: Optional[Sequence[int]] = None) -> GridMapping:
    """Sampled copy of an analytic mapping"""
    if isinstance(resolution, int):
        resolution = (resolution,) * m.n
    res = tuple(resolution) if resolution is not None else m.resolution
    if isinstance(res, tuple) and len(res) == 1:
        res = res * m.n
    gridded = GridMapping(m.source, m.box, res, label=m.label)
    return GridMapping(SampledNodes(map_nodes(gridded)), m.box, label=f"{m.label} sampled")


def _sampled_jacobians(m: GridMapping) -> Tuple[np.ndarray, np.ndarray]:
    """Central differences of cell-center values (mean of the 2^n corners)"""
    nodes = m.source.nodes
    n = m.n
    centers = nodes
    for axis in range(n):
        lo = [slice(None)] * (n + 1)
        hi = [slice(None)] * (n + 1)
        lo[axis] = slice(None, -1)
        hi[axis] = slice(1, None)
        centers = 0.5 * (centers[tuple(lo)] + centers[tuple(hi)])
    jac = np.empty(centers.shape[:-1] + (n, n))
    for j in range(n):
        # np.gradient is central inside and one-sided on the boundary
        jac[..., :, j] = np.gradient(centers, m.steps[j], axis=j)
    boundary = np.zeros(centers.shape[:-1], dtype=bool)
    for axis in range(n):
        index = [slice(None)] * n
        index[axis] = 0
        boundary[tuple(index)] = True
        index[axis] = -1
        boundary[tuple(index)] = True
    return jac, boundary


def jacobian(m: GridMapping, cell: Sequence[int], allow_one_sided: Optional[bool] = None) -> np.ndarray:
    """
    Derivative of the mapping at a cell center

    Raises:
        BoundaryCell: sampled source and the cell touches the grid boundary
    """
    cell = tuple(int(i) for i in cell)
    if len(cell) != m.n or any(not 0 <= c < r for c, r in zip(cell, m.resolution)):
        raise ParamOutOfRange(f"cell {cell} outside resolution {m.resolution}")
    if m.analytic:
        center = m.axis_centers(m.source.axis)[cell[m.source.axis]]
        return m.source.cell_jacobians(np.array([center]))[0]

    if allow_one_sided is None:
        allow_one_sided = get_settings().field.allow_one_sided
    on_boundary = any(c == 0 or c == r - 1 for c, r in zip(cell, m.resolution))
    if on_boundary and not allow_one_sided:
        raise BoundaryCell(f"cell {cell} lies on the grid boundary", cells=[cell])
    jac, _ = _sampled_jacobians(m)
    return jac[cell]


class DilatationField:
    """Per-cell Jacobian, J, |f'|, K and P of a GridMapping"""

    def __init__(self, mapping: GridMapping):
        self.mapping = mapping
        self.n = mapping.n
        self.box = mapping.box
        self.resolution = mapping.resolution

    @property
    def analytic(self) -> bool:
        return self.mapping.analytic

    @cached_property
    def _cells(self) -> Tuple[np.ndarray, np.ndarray]:
        m = self.mapping
        if m.analytic:
            axis = m.source.axis
            per_axis = m.source.cell_jacobians(m.axis_centers(axis))
            shape = [1] * m.n
            shape[axis] = m.resolution[axis]
            jac = np.broadcast_to(per_axis.reshape(tuple(shape) + (m.n, m.n)),
                                  tuple(m.resolution) + (m.n, m.n))
            return np.array(jac), np.zeros(m.resolution, dtype=bool)
        jac, boundary = _sampled_jacobians(m)
        if np.any(boundary):
            logger.debug(f"{int(boundary.sum())} boundary cells use one-sided differences")
        return jac, boundary

    @cached_property
    def _values(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        return outer_dilatation_batch(self.jacobian)

    @property
    def jacobian(self) -> np.ndarray:
        return self._cells[0]

    @property
    def boundary_mask(self) -> np.ndarray:
        """Cells whose derivative used one-sided differences"""
        return self._cells[1]

    @property
    def op_norm(self) -> np.ndarray:
        return self._values[0]

    @property
    def J(self) -> np.ndarray:
        return self._values[1]

    @property
    def K(self) -> np.ndarray:
        return self._values[2]

    @property
    def P(self) -> np.ndarray:
        return self._values[3]

    @cached_property
    def slabs(self) -> Optional[SlabView]:
        return self.mapping.slab_view()

    def interior_mask(self) -> np.ndarray:
        return ~self.boundary_mask

    def cell_indices(self) -> np.ndarray:
        return np.stack(np.meshgrid(*[np.arange(r) for r in self.resolution], indexing="ij"), axis=-1)


def dilatation_field(m: GridMapping) -> DilatationField:
    field = DilatationField(m)
    logger.debug(f"Dilatation field for {m!r}")
    return field


def image_volume(field: DilatationField, box: Optional[Box] = None) -> float:
    """|f(A)| = integral of |J| over the box"""
    from .functional import integrate_field
    return integrate_field(field, lambda op, J, K, P, jac: np.abs(J), box)


class HolderReport(BaseModel):
    p: float
    gamma: float
    partial_norms: List[float]
    derivative_norm: float
    lhs: float
    K_norm: float
    image_volume: float
    rhs: float
    holds: bool


def holder_estimate(m: GridMapping, gamma: float) -> HolderReport:
    """
    max_i |d_i f|_p <= |f'|_p <= |K|_gamma^{1/n} |f(C)|^{1/n} with p = n / (1/gamma + 1)

    Raises:
        InfiniteDilatation: cells with K = inf
    """
    from .functional import integrate_field

    if gamma <= 0:
        raise ParamOutOfRange("gamma must be positive", gamma=gamma)
    field = dilatation_field(m)
    n = m.n
    p = n / (1.0 / gamma + 1.0)

    infinite = _infinite_cells(field)
    if infinite:
        raise InfiniteDilatation(f"{len(infinite)} cells have K = inf", cells=infinite[:20])

    partial = []
    for i in range(n):
        value = integrate_field(field, lambda op, J, K, P, jac, i=i: np.linalg.norm(jac[..., :, i], axis=-1) ** p)
        partial.append(value ** (1.0 / p))
    derivative_norm = integrate_field(field, lambda op, J, K, P, jac: op ** p) ** (1.0 / p)
    K_norm = integrate_field(field, lambda op, J, K, P, jac: K ** gamma) ** (1.0 / gamma)
    volume = integrate_field(field, lambda op, J, K, P, jac: np.abs(J))
    lhs = max(partial)
    rhs = K_norm ** (1.0 / n) * volume ** (1.0 / n)
    holds = lhs <= rhs * (1.0 + 1e-6)
    logger.info(f"Holder chain for {m.label}: p={p:.6g}, lhs={lhs:.10g}, rhs={rhs:.10g}, holds={holds}")
    return HolderReport(p=p, gamma=gamma, partial_norms=partial, derivative_norm=derivative_norm, lhs=lhs,
                        K_norm=K_norm, image_volume=volume, rhs=rhs, holds=holds)


def _infinite_cells(field: DilatationField) -> List:
    slabs = field.slabs
    if slabs is not None:
        lo, hi = field.box[slabs.axis]
        weights = slabs.matrix_weights(slabs.clipped_lengths(lo, hi))
        bad = np.where(np.isinf(slabs.K) & (weights > 0))[0]
        if len(bad) == 0:
            return []
        slab_ids = np.where(np.isin(slabs.index, bad).any(axis=1))[0]
        return [("slab", int(k)) for k in slab_ids]
    return [tuple(int(i) for i in c) for c in np.argwhere(np.isinf(field.K))]


class DiameterReport(BaseModel):
    sides: List[float]
    ratios: List[float]
    max_ratio: float
    min_ratio: float
    bounded: bool


def _image_diameter(m: GridMapping, lower: np.ndarray, side: float) -> float:
    n = m.n
    if m.analytic:
        axes = [np.linspace(lower[i], lower[i] + side, 5) for i in range(n)]
        src = m.source
        if isinstance(src, AffineSlabs):
            inner = src.breaks[(src.breaks > lower[src.axis]) & (src.breaks < lower[src.axis] + side)]
            axes[src.axis] = np.unique(np.concatenate((axes[src.axis], inner[:2000])))
        points = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
        images = m.evaluate(points)
    else:
        nodes = m.node_points().reshape(-1, n)
        inside = np.all((nodes >= lower - 1e-12) & (nodes <= lower + side + 1e-12), axis=1)
        images = m.source.nodes.reshape(-1, n)[inside]
    try:
        hull = ConvexHull(images)
        images = images[hull.vertices]
    except (QhullError, ValueError):
        pass
    return float(np.max(pdist(images))) if len(images) > 1 else 0.0


def _require_calderon(g: GrowthFunction, n: int) -> None:
    t_star = 1.0
    while not g(t_star) > 0 and t_star < 1e300:
        t_star *= 2.0
    try:
        value = calderon_integral(g, 1.0 / (n - 1), t_star)
    except Inconclusive as e:
        logger.warning(f"Calderon condition for {g.label} not certified: {e}")
        return
    if math.isinf(value):
        raise PreconditionFailed(f"{g.label} fails the Calderon condition in dimension {n}", n=n)


def calderon_diameter_check(m: GridMapping, g: GrowthFunction,
                            cubes: Sequence[Tuple[Sequence[float], float]], spread: float = 10.0) -> DiameterReport:
    """
    Ratios diam f(C) / [int_C g(|grad f|)]^{1/n} over cubes given as (lower corner, side)

    |grad f| is the Frobenius norm of the Jacobian.

    Raises:
        PreconditionFailed: g fails the Calderon condition int^inf (t/g)^{1/(n-1)} dt < inf
    """
    from .functional import integrate_field

    n = m.n
    _require_calderon(g, n)
    field = dilatation_field(m)
    ratios, sides = [], []
    for lower, side in cubes:
        lower = np.asarray(lower, dtype=float)
        box = tuple((float(lower[i]), float(lower[i] + side)) for i in range(n))
        energy = integrate_field(
            field, lambda op, J, K, P, jac: g.evaluate_many(np.linalg.norm(jac, axis=(-2, -1))), box)
        diameter = _image_diameter(m, lower, side)
        ratio = diameter / energy ** (1.0 / n) if energy > 0 else INF
        ratios.append(ratio)
        sides.append(float(side))
    finite = [r for r in ratios if math.isfinite(r)]
    bounded = bool(finite) and len(finite) == len(ratios) and max(finite) <= spread * min(finite)
    return DiameterReport(sides=sides, ratios=ratios, max_ratio=max(ratios), min_ratio=min(ratios),
                          bounded=bounded)
