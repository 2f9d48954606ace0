"""Explicit mapping sequences and the counterexample dispatcher.

Every sequence member is an analytic GridMapping (slab-wise affine in x_n),
so functionals of it are evaluated slab-exactly.
"""
import logging
import math
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .config import get_settings
from .errors import InvariantBreach, ParamOutOfRange
from .field import AffineSlabs, Box, CantorStaircase, GridMapping, cantor_layout, map_nodes, outer_dilatation_batch
from .growth import GrowthFunction
from .numerics import INF

logger = logging.getLogger(__name__)

SequenceKind = str
MAX_AXIS_CELLS = 2 ** 18


def _stretch_matrix(c: float, n: int) -> np.ndarray:
    mat = np.eye(n)
    mat[n - 1, n - 1] = c
    return mat


def glued_slabs(breaks: Sequence[float], stretches: Sequence[float], index: Sequence[int], n: int) -> AffineSlabs:
    """
    y_i = x_i (i < n), y_n = psi(x_n) with psi' = stretches[index[k]] on slab k

    Offsets are accumulated from psi(breaks[0]) = breaks[0] * stretches[index[0]]
    so that neighbouring pieces agree on the slab faces.
    """
    breaks = np.asarray(breaks, dtype=float)
    index = np.asarray(index, dtype=int)
    slopes = np.asarray(stretches, dtype=float)[index]
    values = np.empty(len(breaks))
    values[0] = slopes[0] * breaks[0]
    values[1:] = values[0] + np.cumsum(slopes * np.diff(breaks))
    offsets = np.zeros((len(index), n))
    offsets[:, n - 1] = values[:-1] - slopes * breaks[:-1]
    matrices = np.stack([_stretch_matrix(c, n) for c in stretches])
    return AffineSlabs(n - 1, breaks, matrices, index, offsets)


def affine_stretch(c: float, n: int, box: Optional[Box] = None, resolution: Optional[Sequence[int]] = None
                   ) -> GridMapping:
    """y_i = x_i (i < n), y_n = c x_n"""
    if c <= 0:
        raise ParamOutOfRange("stretch factor must be positive", c=c)
    box = box or tuple((0.0, 1.0) for _ in range(n))
    lo, hi = box[n - 1]
    source = glued_slabs([lo, hi], [c], [0], n)
    return GridMapping(source, box, resolution, label=f"stretch {c:.6g}")


class MappingSequence:
    """
    f_j -> f with a certified uniform bound sup |f_j - f| <= uniform_bound(j)

    Members are indexed from j = 1.
    """

    def __init__(self, kind: SequenceKind, params: Dict[str, Any], n: int,
                 generator: Callable[[int], GridMapping], limit: Callable[[], GridMapping],
                 uniform_bound: Callable[[int], float], max_j: int, notes: Optional[List[str]] = None):
        self.kind = kind
        self.params = params
        self.n = n
        self._generator = generator
        self._limit = limit
        self._bound = uniform_bound
        self.max_j = max_j
        self.notes = notes or []

    def __repr__(self) -> str:
        return f"MappingSequence({self.describe()})"

    def describe(self) -> str:
        args = ", ".join(f"{k}={_short(v)}" for k, v in sorted(self.params.items()))
        return f"{self.kind}({args}, n={self.n})"

    def member(self, j: int) -> GridMapping:
        if not 1 <= j <= self.max_j:
            raise ParamOutOfRange(f"{self.kind} members exist for 1 <= j <= {self.max_j}", j=j)
        return self._generator(j)

    def limit(self) -> GridMapping:
        return self._limit()

    def uniform_bound(self, j: int) -> float:
        return self._bound(j)

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind, "params": self.params, "n": self.n, "notes": self.notes}


def _short(value: Any) -> str:
    return f"{value:.6g}" if isinstance(value, float) else str(value)


def member_resolution(n: int, j: int) -> Tuple[int, ...]:
    """2 cells across, 2^{j+3} along x_n (capped)"""
    return (2,) * (n - 1) + (min(2 ** (j + 3), MAX_AXIS_CELLS),)


def _check_dimension(n: int) -> None:
    if n < 2:
        raise ParamOutOfRange("dimension must be at least 2", n=n)


def laminate_slabs(t1: float, t2: float, lam: float, n: int, j: int) -> AffineSlabs:
    h = 2.0 ** -j
    m = np.arange(2 ** j, dtype=float)
    breaks = np.empty(2 * len(m) + 1)
    breaks[0:-1:2] = m * h
    breaks[1::2] = m * h + lam * h
    breaks[-1] = 1.0
    index = np.tile([0, 1], len(m))
    return glued_slabs(breaks, [t1, t2], index, n)


def laminate_sequence(t1: float, t2: float, lam: float, n: int) -> MappingSequence:
    """
    Two stretches t1 (fraction lam) and t2 alternating on slabs of width 2^-j

    Limit: affine_stretch(t0) with t0 = lam t1 + (1 - lam) t2.
    """
    _check_dimension(n)
    if t1 <= 0 or t2 <= 0:
        raise ParamOutOfRange("stretches must be positive", t1=t1, t2=t2)
    if not 0.0 <= lam <= 1.0:
        raise ParamOutOfRange("lambda must lie in [0, 1]", lam=lam)
    t0 = lam * t1 + (1.0 - lam) * t2
    max_j = get_settings().construction.laminate_max_j

    def member(j: int) -> GridMapping:
        return GridMapping(laminate_slabs(t1, t2, lam, n, j), resolution=member_resolution(n, j),
                           label=f"laminate j={j}")

    def limit() -> GridMapping:
        return affine_stretch(t0, n)

    logger.info(f"Laminate sequence t1={t1:g}, t2={t2:g}, lambda={lam:g}: limit stretch {t0:.12g}")
    return MappingSequence("laminate", {"t1": t1, "t2": t2, "lambda": lam, "t0": t0}, n, member, limit,
                           lambda j: t0 * 2.0 ** -j, max_j)


def collapse_parameters(tau0: float, tau_star: float, n: int) -> Tuple[float, float, float]:
    """(t1, t2, lambda) with both stretches at P = tau_star and average stretch tau0"""
    t1 = tau_star ** (1 - n)
    lam = (tau_star - tau0) / (tau_star - t1)
    return t1, tau_star, lam


def collapse_sequence(tau0: float, tau_star: float, n: int) -> MappingSequence:
    _check_dimension(n)
    if not 1.0 <= tau0 < tau_star:
        raise ParamOutOfRange("need 1 <= tau0 < tau_star", tau0=tau0, tau_star=tau_star)
    t1, t2, lam = collapse_parameters(tau0, tau_star, n)
    base = laminate_sequence(t1, t2, lam, n)
    qc = tau_star ** (n - 1)
    notes = [f"both branches have K = tau_star^(n-1) = {qc:.12g}; (n-1)^2 in the exponent would give "
             f"{tau_star ** ((n - 1) ** 2):.12g}"]
    return MappingSequence("collapse", {"tau0": tau0, "tau_star": tau_star, "t1": t1, "lambda": lam}, n,
                           base.member, base.limit, base.uniform_bound, base.max_j, notes)


def cantor_intervals(lam: float, levels: int) -> Dict[str, Any]:
    """Surviving segments E_levels and removed gaps of the Cantor procedure on [0, 1]"""
    if levels < 0:
        raise ParamOutOfRange("levels must be nonnegative", levels=levels)
    starts, length, gaps = cantor_layout(lam, levels)
    q = (1.0 - lam) / (2.0 - lam)
    return {
        "q": q,
        "segment_starts": starts,
        "segment_length": length,
        "gaps": gaps,
        "measure": math.fsum([length] * len(starts)),
        "series_measure": 1.0 - math.fsum(q ** i for i in range(1, levels + 1)),
    }


def cantor_slabs(tau0: float, tau_j: float, lam: float, n: int, levels: int) -> AffineSlabs:
    starts, length, _ = cantor_layout(lam, levels)
    breaks = np.empty(2 * len(starts))
    breaks[0::2] = starts
    breaks[1::2] = starts + length
    breaks[-1] = 1.0
    index = np.zeros(len(breaks) - 1, dtype=int)
    index[1::2] = 1
    return glued_slabs(breaks, [tau_j ** (1 - n), tau0], index, n)


TauSchedule = Callable[[int], float]


def dyadic_schedule(tau0: float) -> TauSchedule:
    return lambda j: max(tau0, 2.0 ** j)


def cantor_sequence(tau0: float, tau_schedule: Optional[TauSchedule], lam: float, n: int) -> MappingSequence:
    """
    Stretch tau_j^{1-n} on E_{j+1} (P = tau_j) and tau0 on the removed gaps

    The limit is the Cantor staircase with P = inf on E, |E| = lam.
    """
    _check_dimension(n)
    if tau0 < 1.0:
        raise ParamOutOfRange("tau0 must be at least 1", tau0=tau0)
    if not 0.0 < lam < 1.0:
        raise ParamOutOfRange("lambda must lie in (0, 1)", lam=lam)
    schedule = tau_schedule or dyadic_schedule(tau0)
    max_j = get_settings().construction.cantor_max_j
    taus = [schedule(j) for j in range(1, max_j + 1)]
    if any(b < a for a, b in zip(taus, taus[1:])) or taus[0] <= 0:
        raise ParamOutOfRange("tau schedule must be positive and nondecreasing")
    if taus[-1] <= taus[0]:
        raise ParamOutOfRange("tau schedule must grow")

    def measure(j: int) -> float:
        return cantor_intervals(lam, j + 1)["measure"]

    def member(j: int) -> GridMapping:
        return GridMapping(cantor_slabs(tau0, schedule(j), lam, n, j + 1), resolution=member_resolution(n, j),
                           label=f"cantor j={j}")

    def limit() -> GridMapping:
        return GridMapping(CantorStaircase(tau0, lam, n), resolution=(2,) * (n - 1) + (3 ** 7,),
                           label="cantor staircase")

    def bound(j: int) -> float:
        e = measure(j)
        return max(schedule(j) ** (1 - n) * e, tau0 * (e - lam))

    gain = (1.0 - lam) * tau0
    notes = [f"psi(1) = (1 - lambda) tau0 = {gain:.12g}",
             f"removal ratio q = (1 - lambda) / (2 - lambda) = {(1.0 - lam) / (2.0 - lam):.12g}"]
    logger.info(f"Cantor sequence tau0={tau0:g}, lambda={lam:g}, j <= {max_j}")
    return MappingSequence("cantor", {"tau0": tau0, "lambda": lam}, n, member, limit, bound, max_j, notes)


def cantor_gain(seq: MappingSequence, j: int) -> float:
    """psi_j(1) = c_j, the period increment of the j-th member"""
    m = seq.member(j)
    point = np.zeros(seq.n)
    point[-1] = 1.0
    return float(m.evaluate(point[None, :])[0, -1])


def left_jump_sequence(T: float, t_schedule: Optional[TauSchedule], n: int) -> MappingSequence:
    """f_j = affine_stretch(t_j) with t_j increasing to T, f = affine_stretch(T)"""
    _check_dimension(n)
    if T <= 1.0:
        raise ParamOutOfRange("T must exceed 1", T=T)
    schedule = t_schedule or (lambda j: T - (T - 1.0) * 2.0 ** -j)
    max_j = get_settings().construction.laminate_max_j
    ts = [schedule(j) for j in range(1, max_j + 1)]
    if any(not 1.0 <= t < T for t in ts) or any(b <= a for a, b in zip(ts, ts[1:])):
        raise ParamOutOfRange("t schedule must increase inside [1, T)")

    return MappingSequence("left_jump", {"T": T}, n,
                           lambda j: affine_stretch(schedule(j), n, resolution=member_resolution(n, j)),
                           lambda: affine_stretch(T, n),
                           lambda j: T - schedule(j), max_j)


def constant_sequence(c: float, n: int) -> MappingSequence:
    _check_dimension(n)
    return MappingSequence("constant", {"c": c}, n, lambda j: affine_stretch(c, n), lambda: affine_stretch(c, n),
                           lambda j: 0.0, get_settings().construction.laminate_max_j)


def stock_sequences(n: int) -> List[MappingSequence]:
    """laminate (1, 3, 1/2), collapse (1.5, 2), cantor (1, 2^j, 1/2), left jump to 2"""
    return [
        laminate_sequence(1.0, 3.0, 0.5, n),
        collapse_sequence(1.5, 2.0, n),
        cantor_sequence(1.0, None, 0.5, n),
        left_jump_sequence(2.0, None, n),
    ]


def node_distance(seq: MappingSequence, j: int) -> float:
    """max over the member's grid nodes of |f_j - f|"""
    member = seq.member(j)
    nodes = member.node_points()
    return float(np.max(np.abs(map_nodes(member) - seq.limit().evaluate(nodes))))


def check_uniform_bound(seq: MappingSequence, j: int, tolerance: float = 1e-12) -> float:
    distance = node_distance(seq, j)
    bound = seq.uniform_bound(j)
    if distance > bound + tolerance:
        raise InvariantBreach(f"{seq.kind} j={j}: node distance {distance:.3g} exceeds bound {bound:.3g}",
                              j=j, distance=distance, bound=bound)
    return distance


def quasiconformality_constant(seq: MappingSequence, j: int) -> float:
    """Largest K over the slabs of f_j"""
    source = seq.member(j).source
    _, _, K, _ = outer_dilatation_batch(source.matrices[np.unique(source.matrix_index)])
    return float(np.max(K))


# Sequence JSON
class SequenceSpec(BaseModel):
    """{"kind": "...", "params": {...}, "n": int, "j_max": int}"""

    model_config = ConfigDict(extra="forbid")

    kind: str
    params: Dict[str, Any] = {}
    n: int = Field(3, ge=2)
    j_max: Optional[int] = Field(None, ge=3)

    @field_validator("kind")
    @classmethod
    def _known_kind(cls, value: str) -> str:
        if value not in BUILDERS:
            raise ValueError(f"unknown sequence kind {value!r}")
        return value


def _schedule_from(params: Dict[str, Any], key: str, default: Optional[TauSchedule]) -> Optional[TauSchedule]:
    spec = params.get(key)
    if spec is None:
        return default
    if isinstance(spec, list):
        values = [float(v) for v in spec]
        return lambda j: values[min(j, len(values)) - 1]
    if isinstance(spec, dict) and "base" in spec:
        base, scale = float(spec["base"]), float(spec.get("scale", 1.0))
        floor = float(params.get("tau0", 0.0))
        return lambda j: max(floor, scale * base ** j)
    raise ParamOutOfRange(f"cannot read schedule {key}: {spec!r}")


BUILDERS: Dict[str, Callable[[Dict[str, Any], int], MappingSequence]] = {
    "laminate": lambda p, n: laminate_sequence(float(p["t1"]), float(p["t2"]), float(p["lambda"]), n),
    "collapse": lambda p, n: collapse_sequence(float(p["tau0"]), float(p["tau_star"]), n),
    "cantor": lambda p, n: cantor_sequence(float(p.get("tau0", 1.0)), _schedule_from(p, "tau_schedule", None),
                                           float(p.get("lambda", 0.5)), n),
    "left_jump": lambda p, n: left_jump_sequence(float(p["T"]), _schedule_from(p, "t_schedule", None), n),
    "constant": lambda p, n: constant_sequence(float(p.get("c", 1.0)), n),
}


def load_sequence(data: Dict[str, Any]) -> Tuple[MappingSequence, Optional[int]]:
    """Build a sequence from its JSON description; returns (sequence, j_max or None)"""
    try:
        spec = SequenceSpec.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        raise ParamOutOfRange(f"sequence spec: {first.get('msg')}", field=".".join(map(str, first.get("loc", ()))))
    try:
        seq = BUILDERS[spec.kind](spec.params, spec.n)
    except KeyError as e:
        raise ParamOutOfRange(f"{spec.kind} needs parameter {e.args[0]}", field=f"params.{e.args[0]}")
    except (ValueError, TypeError) as e:
        raise ParamOutOfRange(f"{spec.kind} parameters: {e}", field="params")
    return seq, spec.j_max


# Counterexample dispatcher
class CertifiedGood(BaseModel):
    """No counterexample on the sample grid"""

    evidence: Dict[str, Any]


class Witness(BaseModel):
    reason: str
    values: Dict[str, float]
    description: str


def dispatcher_grid(phi: GrowthFunction) -> np.ndarray:
    settings = get_settings().construction
    ts = np.geomspace(1.0, settings.dispatcher_t_max, settings.dispatcher_points)
    extra = [b for b in phi.breakpoints() if 1.0 <= b < settings.dispatcher_t_max]
    ts = np.unique(np.concatenate((ts, extra)))
    return ts[ts < phi.T0]


def find_convexity_witness(phi: GrowthFunction, ts: np.ndarray, vals: np.ndarray
                           ) -> Optional[Tuple[float, float, float, float]]:
    """(t1, t2, lambda, excess) maximizing phi(mix) - mix of phi over grid pairs"""
    settings = get_settings().construction
    lams = np.arange(1, settings.dispatcher_lambda_steps) / settings.dispatcher_lambda_steps
    best: Optional[Tuple[float, float, float, float]] = None
    span = 1
    while span <= settings.dispatcher_max_span and span < len(ts):
        a, b = ts[:-span], ts[span:]
        va, vb = vals[:-span], vals[span:]
        mid = lams[:, None] * a[None, :] + (1.0 - lams[:, None]) * b[None, :]
        chord = lams[:, None] * va[None, :] + (1.0 - lams[:, None]) * vb[None, :]
        with np.errstate(invalid="ignore"):
            excess = (phi.evaluate_many(mid) - chord) / np.maximum(1.0, np.abs(chord))
        excess = np.where(np.isfinite(excess), excess, -INF)
        k, i = np.unravel_index(int(np.argmax(excess)), excess.shape)
        if excess[k, i] > 1e-6 and (best is None or excess[k, i] > best[3]):
            best = (float(a[i]), float(b[i]), float(lams[k]), float(excess[k, i]))
        span *= 2
    return best


def find_monotonicity_witness(ts: np.ndarray, vals: np.ndarray) -> Optional[Tuple[float, float, float]]:
    """(tau0, tau_star, drop) with the largest drop phi(tau0) - phi(tau_star), tau0 < tau_star"""
    finite = np.isfinite(vals)
    ts, vals = ts[finite], vals[finite]
    if len(ts) < 2:
        return None
    prefix = np.maximum.accumulate(vals)
    drops = prefix[:-1] - vals[1:]
    k = int(np.argmax(drops))
    if drops[k] <= 1e-9 * max(1.0, abs(prefix[k])):
        return None
    i = int(np.argmax(vals[:k + 1]))
    return float(ts[i]), float(ts[k + 1]), float(drops[k])


def counterexample_for(phi: GrowthFunction, n: int) -> Union[Tuple[MappingSequence, Witness], CertifiedGood]:
    """
    Pick the sequence that breaks semicontinuity for phi, tests in order:
    non-convex, non-monotone, left-discontinuous at T0, constant on [1, inf)

    Returns:
        (sequence, witness) or CertifiedGood with the evidence of the grid scans
    """
    ts = dispatcher_grid(phi)
    vals = phi.evaluate_many(ts)

    convex = find_convexity_witness(phi, ts, vals)
    if convex is not None:
        t1, t2, lam, excess = convex
        t0 = lam * t1 + (1.0 - lam) * t2
        witness = Witness(reason="not convex", values={"t1": t1, "t2": t2, "lambda": lam, "excess": excess},
                          description=f"phi({t0:.6g}) > {lam:.6g} phi({t1:.6g}) + {1 - lam:.6g} phi({t2:.6g})")
        logger.info(f"{phi.label}: {witness.description}")
        return laminate_sequence(t1, t2, lam, n), witness

    drop = find_monotonicity_witness(ts, vals)
    if drop is not None:
        tau0, tau_star, amount = drop
        witness = Witness(reason="not nondecreasing", values={"tau0": tau0, "tau_star": tau_star, "drop": amount},
                          description=f"phi({tau0:.6g}) > phi({tau_star:.6g})")
        logger.info(f"{phi.label}: {witness.description}")
        return collapse_sequence(tau0, tau_star, n), witness

    T = phi.T0
    if math.isfinite(T) and T > 1.0:
        left, at = phi.left_limit(T), phi.value_at_T0()
        if at > left + 1e-9 * max(1.0, abs(left)):
            witness = Witness(reason="not continuous from the left", values={"T": T, "left": left, "value": at},
                              description=f"phi({T:.6g}-) = {left:.6g} < phi({T:.6g}) = {at:.6g}")
            logger.info(f"{phi.label}: {witness.description}")
            return left_jump_sequence(T, None, n), witness

    finite = vals[np.isfinite(vals)]
    flat = len(finite) == len(vals) and finite.max() - finite.min() <= 1e-12 * max(1.0, abs(finite.max()))
    if flat and phi.value_at_infinity() > finite.max():
        witness = Witness(reason="constant on [1, inf)", values={"value": float(finite[0])},
                          description=f"phi = {finite[0]:.6g} on [1, inf) and phi(inf) = inf")
        logger.info(f"{phi.label}: {witness.description}")
        return cantor_sequence(1.0, dyadic_schedule(1.0), 0.5, n), witness

    evidence = {
        "grid_points": int(len(ts)),
        "t_range": [float(ts[0]), float(ts[-1])],
        "convexity": "no chord violation",
        "monotonicity": "no drop",
        "left_continuity": "continuous at T0" if math.isfinite(T) else "T0 = inf",
        "scope": "sample-grid certification",
    }
    logger.info(f"{phi.label}: certified good on {len(ts)} grid points")
    return CertifiedGood(evidence=evidence)
