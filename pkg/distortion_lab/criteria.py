"""Checkers for the integral conditions on dominants Q and growth functions Phi.

Symbolic inputs (constants, radial log-power and affine profiles, power and
exponential growth functions) get closed-form verdicts marked certified;
numeric inputs get slope heuristics that fall back to "inconclusive".
"""
import logging
import math
from typing import Any, Callable, Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, model_validator
from scipy.integrate import quad
from scipy.interpolate import RegularGridInterpolator

from .config import get_settings
from .errors import Inconclusive, InvalidDominant, ParamOutOfRange, PreconditionFailed, SphereOutOfDomain
from .field import Box
from .growth import GrowthFunction, exp_power, generalized_inverse
from .numerics import INF, geometric_schedule, parallel_map, tail_of
from .sphere import ball_mean, sphere_area, sphere_mean, sphere_rule

logger = logging.getLogger(__name__)

Verdict = Literal["holds", "fails", "inconclusive"]


class ConditionReport(BaseModel):
    condition: str
    verdict: Verdict
    evidence: List[Tuple[float, float]]
    method: str
    certified: bool = False
    details: Dict[str, Any] = {}

    @model_validator(mode="after")
    def _enough_evidence(self) -> "ConditionReport":
        scales = [abs(s) for s, _ in self.evidence if s != 0 and math.isfinite(s)]
        if len(self.evidence) < 4 or not scales or max(scales) / min(scales) < 1e3:
            raise ValueError(f"{self.condition}: evidence needs 4 points spanning 3 decades")
        return self


class RadialProfile(BaseModel):
    """
    q(r) in one of the symbolic forms

      constant:  c
      log_power: c * log(1/r)^k
      affine:    a + b * r
      inverse:   1 / r          (test function psi)
      log_inverse: 1 / (r log(1/r))
    """

    form: Literal["constant", "log_power", "affine", "inverse", "log_inverse"]
    c: float = 1.0
    k: float = 0.0
    a: float = 0.0
    b: float = 0.0

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            if self.form == "constant":
                return np.full_like(r, self.c)
            if self.form == "log_power":
                return self.c * np.power(np.log(1.0 / r), self.k)
            if self.form == "affine":
                return self.a + self.b * r
            if self.form == "inverse":
                return 1.0 / r
            return 1.0 / (r * np.log(1.0 / r))

    def at_zero(self) -> float:
        if self.form == "constant":
            return self.c
        if self.form == "affine":
            return self.a
        if self.form == "log_power" and self.k == 0:
            return self.c
        return INF


class Dominant:
    """A dominant Q >= 1: constant, radial profile around x0, grid field or callable"""

    def __init__(self, kind: str, n: int, x0: Optional[Sequence[float]] = None, value: float = 1.0,
                 profile: Optional[RadialProfile] = None, grid: Optional[np.ndarray] = None,
                 box: Optional[Box] = None, fn: Optional[Callable[[np.ndarray], np.ndarray]] = None):
        if kind not in ("constant", "radial", "grid", "callable"):
            raise InvalidDominant(f"unknown dominant kind {kind!r}")
        self.kind = kind
        self.n = n
        self.x0 = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float)
        self.value = value
        self.profile = profile
        self.box = box
        self.fn = fn
        self._interp = None
        if kind == "radial" and profile is None:
            raise InvalidDominant("radial dominant needs a profile")
        if kind == "callable" and fn is None:
            raise InvalidDominant("callable dominant needs a function")
        if kind == "grid":
            if grid is None or box is None:
                raise InvalidDominant("grid dominant needs values and a box")
            grid = np.asarray(grid, dtype=float)
            axes = [np.linspace(lo, hi, s) for (lo, hi), s in zip(box, grid.shape)]
            self._interp = RegularGridInterpolator(axes, grid)
            self.grid = grid

    def __repr__(self) -> str:
        return f"Dominant({self.kind}, n={self.n})"

    @property
    def radial(self) -> bool:
        return self.kind in ("constant", "radial")

    def __call__(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        if self.kind == "constant":
            return np.full(points.shape[:-1], self.value)
        if self.kind == "radial":
            return self.profile(np.linalg.norm(points - self.x0, axis=-1))
        if self.kind == "grid":
            return self._interp(points)
        return np.asarray(self.fn(points), dtype=float)

    def radial_value(self, r: float) -> float:
        if self.kind == "constant":
            return self.value
        return float(self.profile(r))

    def inside(self, center: np.ndarray, r: float) -> bool:
        if self.box is None:
            return True
        return all(lo - 1e-12 <= c - r and c + r <= hi + 1e-12 for c, (lo, hi) in zip(center, self.box))

    def check_floor(self, x0: np.ndarray, radius: float) -> None:
        """Q >= 1 sampled on a few spheres inside B(x0, radius)"""
        order = 6
        for r in np.geomspace(radius * 1e-3, radius, 5):
            points = np.asarray(x0) + r * sphere_rule(self.n, order)[0]
            if self.box is not None and not self.inside(np.asarray(x0), r):
                continue
            values = self(points)
            if np.any(values < 1.0 - 1e-12):
                raise InvalidDominant(f"Q < 1 near {list(np.asarray(x0))} at radius {r:.3g}",
                                      minimum=float(np.min(values)))


def dominant_from_dict(data: Dict[str, Any], n: int) -> Dominant:
    """{"kind": "constant", "value": 5} | {"kind": "radial", "profile": {...}} | {"kind": "grid", ...}"""
    kind = data.get("kind")
    x0 = data.get("x0")
    if kind == "constant":
        return Dominant("constant", n, x0, value=float(data.get("value", 1.0)))
    if kind == "radial":
        return Dominant("radial", n, x0, profile=RadialProfile.model_validate(data.get("profile", {})))
    if kind == "grid":
        values = np.load(data["path"]) if "path" in data else np.asarray(data["values"], dtype=float)
        box = tuple(tuple(b) for b in data["box"])
        return Dominant("grid", n, x0, grid=values, box=box)
    raise InvalidDominant(f"unknown dominant kind {kind!r}")


def default_schedule(eps0: float) -> np.ndarray:
    """eps0/2, eps0/4, ... (ratio and count from the settings)"""
    settings = get_settings().criteria
    return geometric_schedule(eps0 * settings.schedule_ratio, settings.schedule_ratio, settings.schedule_points)


def _check_schedule(eps_schedule: Sequence[float], minimum: int = 6) -> np.ndarray:
    eps = np.asarray(eps_schedule, dtype=float)
    if len(eps) < minimum:
        raise ParamOutOfRange(f"eps schedule needs at least {minimum} values", count=len(eps))
    if np.any(eps <= 0) or np.any(np.diff(eps) >= 0):
        raise ParamOutOfRange("eps schedule must be positive and decreasing")
    if eps[0] / eps[-1] < 1e3:
        raise ParamOutOfRange("eps schedule must span at least three decades")
    return eps


# Averages
def sphere_average(Q: Dominant, x0: Sequence[float], r: float) -> float:
    """q_{x0}(r), exact for constant and centered radial dominants"""
    x0 = np.asarray(x0, dtype=float)
    if r <= 0:
        raise ParamOutOfRange("radius must be positive", r=r)
    if not Q.inside(x0, r):
        raise SphereOutOfDomain(f"sphere of radius {r} at {x0.tolist()} leaves the domain", r=r)
    if Q.kind == "constant":
        return Q.value
    if Q.kind == "radial" and np.allclose(x0, Q.x0):
        return Q.radial_value(r)
    return sphere_mean(Q, x0, r, get_settings().criteria.sphere_order)


def ball_average(Q: Dominant, x0: Sequence[float], eps: float) -> float:
    """(1/|B|) int_{B(x0, eps)} Q dm"""
    x0 = np.asarray(x0, dtype=float)
    n = len(x0)
    if not Q.inside(x0, eps):
        raise SphereOutOfDomain(f"ball of radius {eps} at {x0.tolist()} leaves the domain", eps=eps)
    if Q.kind == "constant":
        return Q.value
    if Q.kind == "radial" and np.allclose(x0, Q.x0):
        value, _ = quad(lambda r: Q.radial_value(r) * r ** (n - 1), 0.0, eps, limit=200)
        return n * value / eps ** n
    return ball_mean(Q, x0, eps, get_settings().criteria.sphere_order)


def _loglog_slope(scales: np.ndarray, values: np.ndarray) -> float:
    """Least-squares slope of log(value) against log(1/scale)"""
    x = np.log(1.0 / scales)
    y = np.log(values)
    return float(np.polyfit(x, y, 1)[0])


def ball_average_limsup(Q: Dominant, x0: Sequence[float], eps_schedule: Optional[Sequence[float]] = None,
                        eps0: float = 0.5) -> ConditionReport:
    """limsup of ball averages at x0 is finite"""
    settings = get_settings().criteria
    eps = _check_schedule(eps_schedule if eps_schedule is not None else default_schedule(eps0))
    Q.check_floor(np.asarray(x0, dtype=float), float(eps[0]))
    averages = np.array(parallel_map(lambda e: ball_average(Q, x0, e), list(eps)))
    tail_idx = len(eps) - len(tail_of(list(eps)))
    t_eps, t_avg = eps[tail_idx:], averages[tail_idx:]

    details: Dict[str, Any] = {}
    if not np.all(np.isfinite(averages)):
        verdict: Verdict = "fails"
        method = "infinite ball average"
    else:
        slope = _loglog_slope(t_eps, t_avg) if np.all(t_avg > 0) else 0.0
        details["tail_slope"] = slope
        growing = bool(np.all(np.diff(t_avg) > 0)) and slope > settings.growth_slope
        bounded = float(t_avg.max()) <= settings.bounded_factor * float(np.median(t_avg))
        if growing:
            verdict, method = "fails", "averages grow with positive log-log slope"
        elif bounded:
            verdict, method = "holds", f"tail max within {settings.bounded_factor:g} x tail median"
        else:
            verdict, method = "inconclusive", "tail neither bounded nor steadily growing"
    report = ConditionReport(condition="ball_average_limsup", verdict=verdict,
                             evidence=list(zip(eps.tolist(), averages.tolist())), method=method, details=details)
    logger.info(f"Ball-average limsup for {Q!r}: {verdict}")
    return report


def lebesgue_point_condition(Q: Dominant, x0: Sequence[float], eps_schedule: Optional[Sequence[float]] = None,
                             eps0: float = 0.5) -> ConditionReport:
    """(1/|B|) int_B |Q - Q(x0)| -> 0"""
    x0 = np.asarray(x0, dtype=float)
    eps = _check_schedule(eps_schedule if eps_schedule is not None else default_schedule(eps0))
    if Q.kind == "radial" and np.allclose(x0, Q.x0):
        center = Q.profile.at_zero()
    else:
        center = float(Q(x0[None, :])[0])
    if not math.isfinite(center):
        return ConditionReport(condition="lebesgue_point", verdict="fails",
                               evidence=[(float(e), INF) for e in eps], method="Q(x0) is infinite",
                               certified=Q.radial)

    deviation = Dominant("callable", len(x0), x0, fn=lambda p: np.abs(Q(p) - center))
    if Q.kind == "radial" and np.allclose(x0, Q.x0):
        n = len(x0)

        def oscillation(e: float) -> float:
            value, _ = quad(lambda r: abs(Q.radial_value(r) - center) * r ** (n - 1), 0.0, e, limit=200)
            return n * value / e ** n
    else:
        def oscillation(e: float) -> float:
            return ball_mean(deviation, x0, e, get_settings().criteria.sphere_order)

    values = np.array(parallel_map(oscillation, list(eps)))
    verdict, method = ratio_to_zero(eps, values)
    return ConditionReport(condition="lebesgue_point", verdict=verdict,
                           evidence=list(zip(eps.tolist(), values.tolist())), method=method)


def ratio_to_zero(eps: np.ndarray, ratios: np.ndarray, decay: float = 0.1, settle: float = 1e-3
                  ) -> Tuple[Verdict, str]:
    """
    Decide whether ratios(eps) -> 0 as eps -> 0 from the tail of the schedule

    holds: strictly decreasing with elasticity against log(1/eps) below -decay
    fails: nondecreasing tail, or a decreasing tail that has settled at a positive level
    """
    tail_start = len(eps) - len(tail_of(list(eps)))
    r = np.asarray(ratios[tail_start:], dtype=float)
    s = np.log(1.0 / np.asarray(eps[tail_start:], dtype=float))
    if np.all(r == 0):
        return "holds", "identically zero"
    if not np.all(np.isfinite(r)) or np.any(r < 0):
        return "inconclusive", "non-finite or negative ratios"
    diffs = np.diff(r)
    if np.all(diffs >= 0):
        return "fails", "ratio nondecreasing on the tail"
    if np.all(diffs < 0) and np.all(r > 0):
        elasticity = float(np.polyfit(np.log(s), np.log(r), 1)[0])
        if elasticity <= -decay:
            return "holds", f"ratio decays with elasticity {elasticity:.3g} against log(1/eps)"
        if (r[0] - r[-1]) / r[0] < settle:
            return "fails", f"ratio settles at {r[-1]:.6g} > 0"
    return "inconclusive", "no clear trend on the tail"


# Radial integrals
def _segment_integrals(integrand: Callable[[float], float], eps: np.ndarray, eps0: float) -> np.ndarray:
    """Cumulative int_{eps_k}^{eps0} integrand, summed over the schedule segments"""
    edges = np.concatenate(([eps0], eps))
    pieces = parallel_map(lambda k: quad(integrand, edges[k + 1], edges[k], limit=200)[0], list(range(len(eps))))
    return np.array([math.fsum(pieces[:k + 1]) for k in range(len(eps))])


def _radial_mean(Q: Dominant, x0: np.ndarray) -> Callable[[float], float]:
    return lambda r: sphere_average(Q, x0, r)


class DivergenceVerdict(BaseModel):
    diverges: bool
    reason: str


def _radial_divergence_closed_form(q: Union[RadialProfile, Dominant], n: int, eps0: float
                                   ) -> Optional[Tuple[DivergenceVerdict, Callable[[float], float]]]:
    """Closed form of I(eps) = int_eps^eps0 dr / (r q^{1/(n-1)}) for symbolic q"""
    if isinstance(q, Dominant):
        if q.kind == "constant":
            q = RadialProfile(form="constant", c=q.value)
        elif q.kind == "radial":
            q = q.profile
        else:
            return None
    m = 1.0 / (n - 1)
    if q.form == "constant":
        scale = q.c ** -m
        return (DivergenceVerdict(diverges=True, reason="q constant: I = c^{-1/(n-1)} log(eps0/eps)"),
                lambda e: scale * math.log(eps0 / e))
    if q.form == "log_power":
        beta = q.k * m
        scale = q.c ** -m
        u0 = math.log(1.0 / eps0)

        def value(e: float) -> float:
            u = math.log(1.0 / e)
            if abs(beta - 1.0) < 1e-15:
                return scale * math.log(u / u0)
            return scale * (u ** (1.0 - beta) - u0 ** (1.0 - beta)) / (1.0 - beta)

        return (DivergenceVerdict(diverges=beta <= 1.0,
                                  reason=f"q = c log^k(1/r): integrand u^(-{beta:.6g}) in u = log(1/r)"), value)
    if q.form == "affine" and q.a > 0:
        return (DivergenceVerdict(diverges=True, reason="q(0+) = a > 0 finite: logarithmic divergence"), None)
    return None


def divergence_integral(q: Union[RadialProfile, Dominant, Callable[[float], float]], n: int, eps0: float,
                        eps_schedule: Optional[Sequence[float]] = None) -> ConditionReport:
    """
    I(eps) = int_eps^eps0 dr / (r q^{1/(n-1)}(r)) -> inf as eps -> 0 ("holds" means divergence)
    """
    if n < 2:
        raise ParamOutOfRange("dimension must be at least 2", n=n)
    eps = _check_schedule(eps_schedule if eps_schedule is not None else default_schedule(eps0))
    if isinstance(q, Dominant):
        profile = q.radial_value if q.radial else _radial_mean(q, q.x0)
    elif isinstance(q, RadialProfile):
        profile = lambda r: float(q(r))
    else:
        profile = q
    m = 1.0 / (n - 1)
    floor = min(profile(float(e)) for e in np.concatenate(([eps0], eps)))
    if floor < 1.0 - 1e-12:
        raise PreconditionFailed(f"q must be at least 1 on (0, eps0], found {floor:.6g}")

    closed = None if callable(q) and not isinstance(q, (RadialProfile, Dominant)) else \
        _radial_divergence_closed_form(q, n, eps0)
    if closed is not None and closed[1] is not None:
        values = np.array([closed[1](float(e)) for e in eps])
    else:
        values = _segment_integrals(lambda r: 1.0 / (r * profile(r) ** m), eps, eps0)

    if closed is not None:
        verdict: Verdict = "holds" if closed[0].diverges else "fails"
        report = ConditionReport(condition="divergence_integral", verdict=verdict,
                                 evidence=list(zip(eps.tolist(), values.tolist())),
                                 method=f"closed form: {closed[0].reason}", certified=True)
    else:
        verdict, method = _growth_verdict(eps, values)
        report = ConditionReport(condition="divergence_integral", verdict=verdict,
                                 evidence=list(zip(eps.tolist(), values.tolist())), method=method)
    logger.info(f"Divergence integral (n={n}): {report.verdict} ({report.method})")
    return report


def _growth_verdict(eps: np.ndarray, values: np.ndarray) -> Tuple[Verdict, str]:
    """Divergence heuristic: increments per unit of log log(1/eps) stay bounded away from 0"""
    tail_start = len(eps) - len(tail_of(list(eps)))
    loglog = np.log(np.log(1.0 / eps[tail_start:]))
    rates = np.diff(values[tail_start:]) / np.diff(loglog)
    if np.all(rates > get_settings().criteria.growth_slope) and rates[-1] >= 0.95 * rates[0]:
        return "holds", f"I grows at rate {rates[-1]:.3g} per unit of log log(1/eps)"
    if np.all(rates >= 0) and np.all(np.diff(rates) < 0) and rates[-1] < 0.8 * rates[0]:
        return "fails", "increments decay on the tail"
    return "inconclusive", "no certified trend on the tail"


def annulus_integrals(Q: Dominant, x0: Sequence[float], weight: Callable[[float], float], eps: np.ndarray,
                      eps0: float) -> np.ndarray:
    """int_{eps < |x - x0| < eps0} Q w(|x - x0|) dm = omega int q(r) w(r) r^{n-1} dr, per schedule point"""
    x0 = np.asarray(x0, dtype=float)
    n = len(x0)
    omega = sphere_area(n)
    mean = _radial_mean(Q, x0)
    return omega * _segment_integrals(lambda r: mean(r) * weight(r) * r ** (n - 1), eps, eps0)


def annulus_grid_integral(Q: Dominant, x0: Sequence[float], weight: Callable[[np.ndarray], np.ndarray],
                          eps: float, eps0: float, resolution: int = 128) -> float:
    """Cell-center sum of Q w(|x - x0|) over the annulus on a cube grid around x0"""
    x0 = np.asarray(x0, dtype=float)
    n = len(x0)
    h = 2.0 * eps0 / resolution
    centers = -eps0 + h * (np.arange(resolution) + 0.5)
    total = 0.0
    # slice along the first axis to bound memory
    rest = np.stack(np.meshgrid(*([centers] * (n - 1)), indexing="ij"), axis=-1).reshape(-1, n - 1)
    for c in centers:
        offsets = np.column_stack((np.full(len(rest), c), rest))
        r = np.linalg.norm(offsets, axis=-1)
        mask = (r > eps) & (r < eps0)
        if np.any(mask):
            total += math.fsum((Q(x0 + offsets[mask]) * weight(r[mask])).tolist())
    return total * h ** n


def ring_condition(Q: Dominant, x0: Sequence[float], psi: Union[RadialProfile, Callable[[float], float]],
                   eps_schedule: Optional[Sequence[float]] = None, eps0: float = 0.5) -> ConditionReport:
    """int_{annulus} Q psi^n(|x - x0|) dm = o(I^n(eps, eps0)), I = int_eps^eps0 psi"""
    x0 = np.asarray(x0, dtype=float)
    n = len(x0)
    eps = _check_schedule(eps_schedule if eps_schedule is not None else default_schedule(eps0))
    Q.check_floor(x0, eps0)
    psi_fn = (lambda r: float(psi(r))) if isinstance(psi, RadialProfile) else psi
    I = _segment_integrals(psi_fn, eps, eps0)
    if np.any(I <= 0) or not np.all(np.isfinite(I)):
        raise PreconditionFailed("I(eps, eps0) must be positive and finite on the schedule")
    R = annulus_integrals(Q, x0, lambda r: psi_fn(r) ** n, eps, eps0)
    ratios = R / I ** n
    verdict, method = ratio_to_zero(eps, ratios)
    report = ConditionReport(condition="ring_condition", verdict=verdict,
                             evidence=list(zip(eps.tolist(), ratios.tolist())), method=method,
                             details={"I": I.tolist(), "R": R.tolist()})
    logger.info(f"Ring condition for {Q!r}: {verdict}")
    return report


def log_order_condition(Q: Dominant, x0: Sequence[float], eps_schedule: Optional[Sequence[float]] = None,
                        eps0: float = 0.5) -> ConditionReport:
    """int_{annulus} Q / |x - x0|^n dm = o(log^n(1/eps))"""
    x0 = np.asarray(x0, dtype=float)
    n = len(x0)
    eps = _check_schedule(eps_schedule if eps_schedule is not None else default_schedule(eps0))
    Q.check_floor(x0, eps0)
    L = annulus_integrals(Q, x0, lambda r: r ** -n, eps, eps0)
    ratios = L / np.log(1.0 / eps) ** n
    verdict, method = ratio_to_zero(eps, ratios)
    report = ConditionReport(condition="log_order_condition", verdict=verdict,
                             evidence=list(zip(eps.tolist(), ratios.tolist())), method=method,
                             details={"L": L.tolist()})
    logger.info(f"Log-order condition for {Q!r}: {verdict}")
    return report


# Growth-function divergence
def _tail_exponents(phi: GrowthFunction) -> Tuple[str, Tuple[float, ...]]:
    piece = phi.pieces[-1]
    growth = piece.asymptotic()
    if growth[0] == "power":
        return "power", growth[1:]
    if growth[0] == "exp":
        a, b, p, _, q, _ = piece.coeffs
        return "exp", (b, p * piece.inner, q)
    if growth[0] == "decay":
        return "bounded", ()
    raise Inconclusive(f"{phi.label}: no symbolic tail (piece kind {piece.kind})", kind=piece.kind)


def direct_form_diverges(phi: GrowthFunction, exponent: float) -> Tuple[bool, str]:
    """int dtau / (tau [Phi^{-1}(tau)]^{1/exponent}) = inf, from the tail of Phi^{-1}"""
    if math.isfinite(phi.T0):
        return True, "Phi^{-1} <= T0 bounded: integrand >= 1 / (tau T0^{1/exponent})"
    family, params = _tail_exponents(phi)
    if family in ("power", "bounded"):
        return False, "Phi^{-1}(tau) grows like a power of tau (or Phi is bounded): convergent"
    b, p, q = params
    if p <= 0.0:
        # log Phi ~ b log(t)^q: Phi^{-1}(e^u) ~ exp((u/b)^{1/q}) beats every power of u
        return False, f"exp(-(u/b)^(1/{q:.6g}) / {exponent:.6g}) in u = log tau: convergent"
    kappa = 1.0 / (p * exponent)
    # Phi^{-1}(e^u) ~ (u/b)^{1/p} (log u / p)^{-q/p}: integrand u^{-kappa} (log u)^{q kappa}
    if abs(kappa - 1.0) < 1e-12:
        return q >= -1.0, f"u^(-1) (log u)^({q:.6g}) in u = log tau"
    return kappa < 1.0, f"u^(-{kappa:.6g}) in u = log tau"


def log_form_diverges(phi: GrowthFunction, exponent: float) -> Tuple[bool, str]:
    """int log Phi(t) dt / t^{1 + 1/exponent} = inf, from the tail of log Phi"""
    if math.isfinite(phi.T0):
        return True, "log Phi = inf beyond T0"
    family, params = _tail_exponents(phi)
    if family in ("power", "bounded"):
        return False, "log Phi grows like log t: convergent"
    b, p, q = params
    excess = p - 1.0 / exponent
    if abs(excess) < 1e-12:
        return q >= -1.0, f"t^(-1) log(t)^({q:.6g})"
    return excess > 0, f"t^({excess - 1.0:.6g}) up to logarithms"


def _log_phi(phi: GrowthFunction, t: float) -> float:
    value = phi(t)
    if math.isfinite(value) and value > 0:
        return math.log(value)
    piece = phi.pieces[phi.piece_index(t)]
    if piece.kind == "exp" and math.isinf(value):
        a, b, p, _, q, big_a = piece.coeffs
        u = t ** piece.inner
        return math.log(a) + b * u ** p * math.log(big_a + u) ** q
    return value if math.isinf(value) else -INF


def phi_divergence(phi: GrowthFunction, exponent: float, delta: float,
                   lambdas: Optional[Sequence[float]] = None) -> ConditionReport:
    """
    int_delta^inf dtau / (tau [Phi^{-1}(tau)]^{1/exponent}) = inf ("holds" means divergence)

    Raises:
        PreconditionFailed: delta <= Phi(1)
        Inconclusive: the tail of Phi has no symbolic form
    """
    if exponent <= 0:
        raise ParamOutOfRange("exponent must be positive", exponent=exponent)
    if not delta > phi(1.0):
        raise PreconditionFailed(f"delta must exceed Phi(1) = {phi(1.0):.6g}", delta=delta)

    direct, direct_reason = direct_form_diverges(phi, exponent)
    logform, log_reason = log_form_diverges(phi, exponent)

    # numeric partial integrals as evidence, tau = e^u
    lambdas = np.asarray(lambdas if lambdas is not None else delta * 10.0 ** np.arange(1, 13, dtype=float))
    edges = np.log(np.concatenate(([delta], lambdas)))

    def direct_integrand(u: float) -> float:
        inverse = generalized_inverse(phi, math.exp(u))
        return 0.0 if math.isinf(inverse) else inverse ** (-1.0 / exponent)

    pieces = [quad(direct_integrand, edges[k], edges[k + 1], limit=200)[0] for k in range(len(lambdas))]
    partial = [math.fsum(pieces[:k + 1]) for k in range(len(pieces))]

    t_delta = max(1.0, generalized_inverse(phi, delta))
    upper = [t_delta * 10.0 ** k for k in range(1, 9)] if math.isinf(phi.T0) else []
    log_partial: List[Tuple[float, float]] = []
    if upper:
        t_edges = [t_delta] + upper
        log_pieces = [quad(lambda t: _log_phi(phi, t) / t ** (1.0 + 1.0 / exponent), t_edges[k], t_edges[k + 1],
                           limit=200)[0] for k in range(len(upper))]
        log_partial = [(upper[k], math.fsum(log_pieces[:k + 1])) for k in range(len(upper))]

    report = ConditionReport(
        condition="phi_divergence",
        verdict="holds" if direct else "fails",
        evidence=list(zip(lambdas.tolist(), partial)),
        method=f"closed form: {direct_reason}",
        certified=True,
        details={"log_form_verdict": "holds" if logform else "fails", "log_form_reason": log_reason,
                 "forms_agree": direct == logform, "log_form_evidence": log_partial, "exponent": exponent,
                 "delta": delta},
    )
    if direct != logform:
        logger.warning(f"{phi.label}: direct and log forms disagree at exponent {exponent}")
    logger.info(f"Phi divergence for {phi.label} at exponent {exponent:g}: {report.verdict}")
    return report


def exp_dominant_condition(Q: Dominant, alpha: float, n: int, region: Box,
                           resolutions: Optional[Sequence[int]] = None) -> ConditionReport:
    """int_region exp(alpha Q^{1/(n-1)}) (1 + |x|^2)^{-n} dm by cell-center sums at refining grids"""
    if alpha <= 0:
        raise ParamOutOfRange("alpha must be positive", alpha=alpha)
    if resolutions is None:
        resolutions = [4]
        while (resolutions[-1] / resolutions[0]) ** n < 1e3 or len(resolutions) < 4:
            resolutions.append(2 * resolutions[-1])
    evidence = []
    for res in resolutions:
        axes = [lo + (hi - lo) * (np.arange(res) + 0.5) / res for lo, hi in region]
        points = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
        cell = math.prod((hi - lo) / res for lo, hi in region)
        with np.errstate(over="ignore"):
            values = np.exp(alpha * np.power(Q(points), 1.0 / (n - 1))) * (1.0 + np.sum(points ** 2, axis=-1)) ** -n
        total = math.fsum(values.tolist()) * cell if np.all(np.isfinite(values)) else INF
        evidence.append((float(res ** n), total))

    phi = exp_power(alpha, 1.0 / (n - 1))
    divergence = phi_divergence(phi, n - 1.0, max(phi(1.0), 0.0) + 1.0)
    finite = all(math.isfinite(v) for _, v in evidence)
    values = [v for _, v in evidence]
    settled = finite and abs(values[-1] - values[-2]) <= 1e-2 * max(1.0, abs(values[-1]))
    verdict: Verdict = "holds" if settled else ("fails" if not finite else "inconclusive")
    return ConditionReport(condition="exp_dominant", verdict=verdict, evidence=evidence,
                           method="cell-center sums at refining resolutions",
                           details={"phi_divergence": divergence.verdict, "alpha": alpha})
