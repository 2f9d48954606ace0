"""Orlicz-type growth functions on [0, inf].

A GrowthFunction is an immutable list of symbolic pieces on half-open
intervals [start, end) plus a domain end T0 beyond which the value is +inf.
Every piece evaluates ``base(t ** inner)`` so composition with t -> t^m is exact.
"""
import logging
import math
from typing import Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss
from pydantic import BaseModel, ConfigDict, model_validator
from scipy import integrate, optimize

from .config import get_settings
from .errors import GrowthSpecError, Inconclusive, NoTangent, NotConvex, PreconditionFailed
from .numerics import INF

logger = logging.getLogger(__name__)

PieceKind = Literal["constant", "linear", "power", "logpow", "exp", "tabulated", "slope_integral", "composed"]

# Coefficient layout and defaults per kind (None = required)
COEFF_DEFAULTS: Dict[str, Tuple[Optional[float], ...]] = {
    "constant": (None,),                      # c
    "linear": (None, 0.0),                    # b, c
    "power": (None, None, 0.0, 0.0),          # a, p, s, c
    "logpow": (None, None, None, math.e, 0.0),  # a, p, q, A, c
    "exp": (None, None, None, 0.0, 0.0, math.e),  # a, b, p, c, q, A
    "tabulated": (),
    "slope_integral": (None, None),           # lam, level
    "composed": (None, None),                 # lam, level
}

# Pieces defined through a cumulative table (x, F(x)) of level + int (source')^lam
TABLE_KINDS = ("slope_integral", "composed")

_GAUSS_X, _GAUSS_W = leggauss(48)


def _close(a: float, b: float, rel: float = 1e-12) -> bool:
    return math.isclose(a, b, rel_tol=rel, abs_tol=rel)


class Piece(BaseModel):
    """One symbolic piece of a growth function on [start, end)"""

    model_config = ConfigDict(frozen=True)

    start: float
    end: float
    kind: PieceKind
    coeffs: Tuple[float, ...] = ()
    inner: float = 1.0
    knots: Tuple[Tuple[float, float], ...] = ()
    source: Optional["Piece"] = None

    @model_validator(mode="before")
    @classmethod
    def _fill_defaults(cls, data):
        if not isinstance(data, dict) or data.get("kind") not in COEFF_DEFAULTS:
            return data
        defaults = COEFF_DEFAULTS[data["kind"]]
        coeffs = tuple(data.get("coeffs", ()))
        if data["kind"] == "tabulated":
            return data
        if len(coeffs) > len(defaults):
            raise ValueError(f"{data['kind']} takes at most {len(defaults)} coefficients")
        required = sum(1 for d in defaults if d is None)
        if len(coeffs) < required:
            raise ValueError(f"{data['kind']} needs at least {required} coefficients")
        return {**data, "coeffs": coeffs + tuple(defaults[len(coeffs):])}

    @model_validator(mode="after")
    def _check_layout(self) -> "Piece":
        if not self.end > self.start:
            raise ValueError(f"empty interval [{self.start}, {self.end})")
        if self.inner <= 0:
            raise ValueError("inner exponent must be positive")
        if self.kind in TABLE_KINDS and self.source is None:
            raise ValueError(f"{self.kind} piece needs a source piece")
        if self.kind == "tabulated" or self.kind in TABLE_KINDS:
            if len(self.knots) < 2:
                raise ValueError(f"{self.kind} piece needs at least two knots")
            xs = [k[0] for k in self.knots]
            if any(b <= a for a, b in zip(xs, xs[1:])):
                raise ValueError("tabulated knots must be strictly increasing")
        return self

    # Evaluation in u = t ** inner
    def _base(self, u: np.ndarray) -> np.ndarray:
        k, c = self.kind, self.coeffs
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            if k == "slope_integral":
                return self._cumulative(u)
            if k == "composed":
                return self.source.values(self._invert_cumulative(u))
            if k == "constant":
                return np.full_like(u, c[0])
            if k == "linear":
                return c[0] * u + c[1]
            if k == "power":
                a, p, s, off = c
                return a * np.power(np.maximum(u - s, 0.0), p) + off
            if k == "logpow":
                a, p, q, big_a, off = c
                return a * np.power(u, p) * np.power(np.log(big_a + u), q) + off
            if k == "exp":
                a, b, p, off, q, big_a = c
                return a * np.exp(b * np.power(u, p) * np.power(np.log(big_a + u), q)) + off
            return self._tabulated(u)

    def _tabulated(self, u: np.ndarray) -> np.ndarray:
        xs = np.array([k[0] for k in self.knots])
        ys = np.array([k[1] for k in self.knots])
        out = np.interp(u, xs, ys)
        lo_slope = (ys[1] - ys[0]) / (xs[1] - xs[0])
        hi_slope = (ys[-1] - ys[-2]) / (xs[-1] - xs[-2])
        out = np.where(u < xs[0], ys[0] + lo_slope * (u - xs[0]), out)
        return np.where(u > xs[-1], ys[-1] + hi_slope * (u - xs[-1]), out)

    def _base_derivative(self, u: np.ndarray) -> np.ndarray:
        k, c = self.kind, self.coeffs
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            if k == "slope_integral":
                return self._slope(u)
            if k == "composed":
                return np.power(self.source.derivatives(self._invert_cumulative(u)), 1.0 - c[0])
            if k == "constant":
                return np.zeros_like(u)
            if k == "linear":
                return np.full_like(u, c[0])
            if k == "power":
                a, p, s, _ = c
                if p == 0.0 or a == 0.0:
                    return np.zeros_like(u)
                if p == 1.0:
                    return np.where(u >= s, a, 0.0)
                d = a * p * np.power(np.maximum(u - s, 0.0), p - 1.0)
                return np.where(u >= s, d, 0.0)
            if k == "logpow":
                a, p, q, big_a, _ = c
                log_u = np.log(big_a + u)
                return a * (p * np.power(u, p - 1.0) * np.power(log_u, q)
                            + np.power(u, p) * q * np.power(log_u, q - 1.0) / (big_a + u))
            if k == "exp":
                a, b, p, _, q, big_a = c
                log_u = np.log(big_a + u)
                inner = b * np.power(u, p) * np.power(log_u, q)
                d_inner = b * (p * np.power(u, p - 1.0) * np.power(log_u, q)
                               + np.power(u, p) * q * np.power(log_u, q - 1.0) / (big_a + u))
                return a * np.exp(inner) * d_inner
            xs = np.array([kn[0] for kn in self.knots])
            ys = np.array([kn[1] for kn in self.knots])
            slopes = np.diff(ys) / np.diff(xs)
            idx = np.clip(np.searchsorted(xs, u, side="right") - 1, 0, len(slopes) - 1)
            return slopes[idx]

    # Cumulative-table kinds: F(t) = level + int_start^t source'(u)^lam du
    def _slope(self, t: np.ndarray) -> np.ndarray:
        with np.errstate(over="ignore", invalid="ignore"):
            return np.power(self.source.derivatives(t), self.coeffs[0])

    def _table(self) -> Tuple[np.ndarray, np.ndarray]:
        table = np.array(self.knots, dtype=float)
        return table[:, 0], table[:, 1]

    def _cumulative(self, t: np.ndarray) -> np.ndarray:
        xs, fs = self._table()
        t = np.asarray(t, dtype=float)
        idx = np.clip(np.searchsorted(xs, t, side="right") - 1, 0, len(xs) - 1)
        return fs[idx] + gauss_cells(self._slope, xs[idx], t)

    def _invert_cumulative(self, s: np.ndarray) -> np.ndarray:
        """t with F(t) = s; safeguarded Newton inside one table cell"""
        xs, fs = self._table()
        s = np.asarray(s, dtype=float)
        out = np.full(s.shape, xs[0])
        beyond = s > fs[-1]
        out[beyond] = INF
        inside = (s > fs[0]) & ~beyond
        if not np.any(inside):
            return out
        target = s[inside]
        idx = np.clip(np.searchsorted(fs, target, side="right") - 1, 0, len(xs) - 2)
        lo, hi = xs[idx], xs[idx + 1]
        t = lo + (target - fs[idx]) * (hi - lo) / (fs[idx + 1] - fs[idx])
        eps = np.finfo(float).eps
        for _ in range(120):
            f = self._cumulative(t) - target
            lo = np.where(f < 0, t, lo)
            hi = np.where(f > 0, t, hi)
            with np.errstate(divide="ignore", invalid="ignore"):
                step = t - f / self._slope(t)
            bisect = (f != 0) & (~np.isfinite(step) | (step <= lo) | (step >= hi))
            step = np.where(bisect, 0.5 * (lo + hi), step)
            done = (f == 0) | (np.abs(step - t) <= 4.0 * eps * np.abs(t))
            t = step
            if np.all(done):
                break
        out[inside] = t
        return out

    def values(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        u = t if self.inner == 1.0 else np.power(t, self.inner)
        return self._base(u)

    def derivatives(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.inner == 1.0:
            return self._base_derivative(t)
        with np.errstate(divide="ignore", invalid="ignore"):
            u = np.power(t, self.inner)
            chain = self.inner * np.power(t, self.inner - 1.0)
            out = self._base_derivative(u) * chain
        return np.where(np.isnan(out), INF, out)

    def value(self, t: float) -> float:
        return float(self.values(np.array([t]))[0])

    def derivative(self, t: float) -> float:
        return float(self.derivatives(np.array([t]))[0])

    def limit_at_end(self) -> float:
        """Left limit of the piece at its right end"""
        if math.isinf(self.end):
            return self.limit_at_infinity()
        return self.value(self.end)

    def limit_at_infinity(self) -> float:
        growth = self.asymptotic()
        if growth[0] == "exp" or (growth[0] == "power" and (growth[1] > 0 or (growth[1] == 0 and growth[2] > 0))):
            return INF
        if self.kind == "tabulated":
            ys = [k[1] for k in self.knots]
            return INF if ys[-1] > ys[-2] else ys[-1]
        with np.errstate(all="ignore"):
            value = self.value(1e300)
        return value if math.isfinite(value) else INF

    def flat_until(self) -> float:
        """End of the constant stretch the piece starts with (start if none)"""
        k, c = self.kind, self.coeffs
        if k == "constant":
            return self.end
        if k == "linear" and c[0] == 0.0:
            return self.end
        if k in ("power", "logpow", "exp"):
            if c[0] == 0.0 or (k == "power" and c[1] == 0.0) or (k == "exp" and c[1] == 0.0):
                return self.end
        if k == "power" and c[2] > 0.0:
            knee = c[2] ** (1.0 / self.inner)
            return min(max(knee, self.start), self.end)
        return self.start

    def is_flat(self) -> bool:
        return self.flat_until() >= self.end

    def shifted(self, delta: float) -> "Piece":
        """Same piece plus a constant"""
        if delta == 0.0:
            return self
        if self.kind == "tabulated":
            knots = tuple((x, y + delta) for x, y in self.knots)
            return self.model_copy(update={"knots": knots})
        if self.kind == "slope_integral":
            knots = tuple((x, y + delta) for x, y in self.knots)
            return self.model_copy(update={"knots": knots, "coeffs": (self.coeffs[0], self.coeffs[1] + delta)})
        if self.kind == "composed":
            return self.model_copy(update={"source": self.source.shifted(delta)})
        coeffs = list(self.coeffs)
        slot = {"constant": 0, "linear": 1, "power": 3, "logpow": 4, "exp": 3}[self.kind]
        coeffs[slot] += delta
        return self.model_copy(update={"coeffs": tuple(coeffs)})

    def restricted(self, start: float, end: float) -> "Piece":
        return self.model_copy(update={"start": start, "end": end})

    def asymptotic(self) -> Tuple:
        """
        Growth class of the piece as t -> inf

        Returns:
            ("power", P, Q) for ~ t^P log(t)^Q, ("exp",) for faster than every
            power, ("decay",) for bounded increasing exp tails, ("unknown",)
            for tabulated pieces
        """
        k, c, m = self.kind, self.coeffs, self.inner
        if k == "constant" or self.is_flat():
            return ("power", 0.0, 0.0)
        if k == "linear":
            return ("power", m, 0.0)
        if k == "power":
            return ("power", c[1] * m, 0.0)
        if k == "logpow":
            return ("power", c[1] * m, c[2])
        if k == "exp":
            a, b, p, _, q, _ = c
            if b < 0:
                return ("decay",)
            if p > 0 or q > 1:
                return ("exp",)
            if p == 0 and q == 1:
                return ("power", b * m, 0.0)
            return ("unknown",)
        if k in TABLE_KINDS:
            growth = self.source.asymptotic()
            if growth[0] != "power" or growth[1] <= 0:
                return ("exp",) if growth[0] == "exp" and k == "slope_integral" else ("unknown",)
            lam, (_, P, Q) = c[0], growth
            P_tilde, Q_tilde = lam * (P - 1.0) + 1.0, lam * Q
            if k == "slope_integral":
                return ("power", P_tilde, Q_tilde)
            return ("power", P / P_tilde, Q - Q_tilde * P / P_tilde)
        return ("unknown",)

    def inverse(self, tau: float) -> Optional[float]:
        """Closed-form t with value(t) = tau inside the piece, None if not available"""
        k, c = self.kind, self.coeffs
        u: Optional[float] = None
        if k == "linear" and c[0] > 0:
            u = (tau - c[1]) / c[0]
        elif k == "power" and c[0] > 0 and c[1] > 0:
            u = c[2] + ((tau - c[3]) / c[0]) ** (1.0 / c[1]) if tau >= c[3] else c[2]
        elif k == "tabulated":
            xs = [kn[0] for kn in self.knots]
            ys = [kn[1] for kn in self.knots]
            for i in range(len(xs) - 1):
                if ys[i + 1] >= tau and ys[i + 1] > ys[i]:
                    u = xs[i] + (tau - ys[i]) * (xs[i + 1] - xs[i]) / (ys[i + 1] - ys[i])
                    break
        if u is None:
            return None
        u = max(u, 0.0)
        return u if self.inner == 1.0 else u ** (1.0 / self.inner)


Piece.model_rebuild()


def gauss_cells(fn, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """int_lo^hi fn for each cell with a 48-point Gauss-Legendre rule"""
    lo, hi = np.broadcast_arrays(np.asarray(lo, dtype=float), np.asarray(hi, dtype=float))
    half = 0.5 * (hi - lo)
    nodes = lo[..., None] + half[..., None] * (_GAUSS_X + 1.0)
    with np.errstate(over="ignore", invalid="ignore"):
        sums = fn(nodes.ravel()).reshape(nodes.shape) @ _GAUSS_W
        return np.where(half == 0.0, 0.0, half * sums)


def slope_integral_piece(source: Piece, lam: float, level: float) -> Piece:
    """
    level + int_start^t source'(u)^lam du on the interval of source

    The table holds the integral at start + h 2^k (h = 1e-3 max(1, start)),
    cut before the first overflow; evaluation adds one Gauss rule on the
    partial cell.
    """
    a, b = source.start, source.end
    h = 1e-3 * max(1.0, a)
    span = b - a if math.isfinite(b) else 1e300
    count = int(math.floor(math.log2(span / h))) + 1 if span > h else 0
    offsets = h * 2.0 ** np.arange(count)
    offsets = offsets[offsets < span]
    tail = [span] if math.isfinite(b) else []
    xs = a + np.concatenate(([0.0], offsets, tail))
    xs = np.unique(xs)
    slope = lambda t: np.power(source.derivatives(t), lam)
    fs = level + np.concatenate(([0.0], np.cumsum(gauss_cells(slope, xs[:-1], xs[1:]))))
    finite = np.isfinite(fs)
    keep = len(fs) if finite.all() else int(np.argmin(finite))
    if keep < 2:
        raise PreconditionFailed(f"(phi')^lambda is not integrable near t={a}", start=a)
    return Piece(start=a, end=b, kind="slope_integral", coeffs=(lam, level), source=source,
                 knots=tuple(zip(xs[:keep].tolist(), fs[:keep].tolist())))


def composed_piece(tilde: Piece) -> Piece:
    """source o F^{-1} on [F(start), F(end)) for a slope_integral piece F"""
    return Piece(start=tilde.coeffs[1], end=tilde.limit_at_end(), kind="composed", coeffs=tilde.coeffs,
                 source=tilde.source, knots=tilde.knots)


class GrowthFunction:
    """Nondecreasing piecewise function [0, inf] -> [0, inf]"""

    def __init__(
        self,
        pieces: Sequence[Piece],
        T0: float = INF,
        label: str = "",
        at_zero: Optional[float] = None,
        at_T0: Optional[float] = None,
        at_inf: Optional[float] = None,
        check_monotone: bool = True,
    ):
        if not pieces:
            raise GrowthSpecError("at least one piece is required", field="pieces")
        if not T0 > 0:
            raise GrowthSpecError("T0 must be positive", field="T0")
        if pieces[0].start != 0.0:
            raise GrowthSpecError("first piece must start at 0", field="pieces[0].from")
        for i in range(len(pieces) - 1):
            if pieces[i].end != pieces[i + 1].start:
                raise GrowthSpecError(
                    f"gap or overlap between {pieces[i].end} and {pieces[i + 1].start}",
                    field=f"pieces[{i + 1}].from",
                )
        if pieces[-1].end < T0:
            raise GrowthSpecError("pieces must cover [0, T0)", field=f"pieces[{len(pieces) - 1}].to")

        # Cut the tiling at T0
        kept: List[Piece] = []
        for piece in pieces:
            if piece.start >= T0:
                break
            kept.append(piece.restricted(piece.start, min(piece.end, T0)) if piece.end > T0 else piece)

        self.pieces: Tuple[Piece, ...] = tuple(kept)
        self.starts = np.array([p.start for p in self.pieces])
        self.T0 = float(T0)
        self.label = label
        self.at_zero = at_zero
        self.at_T0 = at_T0
        self.at_inf = at_inf
        self.monotone_checked = check_monotone
        self._check_values(check_monotone)

    def __repr__(self) -> str:
        return f"GrowthFunction({self.label or '<unnamed>'}, pieces={len(self.pieces)}, T0={self.T0})"

    # Sampling used by the constructor checks
    def _piece_samples(self, piece: Piece) -> np.ndarray:
        if math.isinf(piece.end):
            return piece.start + np.concatenate(([0.0], np.geomspace(1e-6, 1e6, 97)))
        return np.linspace(piece.start, piece.end, 65)[:-1]

    def _check_values(self, check_monotone: bool) -> None:
        previous_end: Optional[float] = None
        for i, piece in enumerate(self.pieces):
            ts = self._piece_samples(piece)
            vals = piece.values(ts)
            end_value = piece.limit_at_end()
            if np.any(vals < -1e-12) or np.any(np.isnan(vals)):
                raise GrowthSpecError("values must lie in [0, inf]", field=f"pieces[{i}]")
            if check_monotone:
                seq = np.append(vals, end_value)
                if previous_end is not None:
                    seq = np.insert(seq, 0, previous_end)
                infinite = np.isinf(seq)
                # once +inf (overflow), stays +inf
                if np.any(infinite) and not np.all(infinite[int(np.argmax(infinite)):]):
                    raise GrowthSpecError("function must be nondecreasing", field=f"pieces[{i}]")
                finite = seq[~infinite]
                tol = 1e-12 * np.maximum(1.0, np.abs(finite[:-1]))
                if np.any(np.diff(finite) < -tol):
                    raise GrowthSpecError("function must be nondecreasing", field=f"pieces[{i}]")
            previous_end = end_value

        first = self.pieces[0].value(0.0)
        if self.at_zero is not None:
            if self.at_zero < 0 or (check_monotone and self.at_zero > first + 1e-12 * max(1.0, first)):
                raise GrowthSpecError("at_zero must lie in [0, g(0+)]", field="at_zero")
        last = self.pieces[-1].limit_at_end()
        if self.at_T0 is not None:
            if math.isinf(self.T0):
                raise GrowthSpecError("at_T0 requires a finite T0", field="at_T0")
            if check_monotone and self.at_T0 < last - 1e-12 * max(1.0, abs(last)):
                raise GrowthSpecError("at_T0 below the left limit", field="at_T0")
        if self.at_inf is not None and check_monotone and math.isinf(self.T0):
            if self.at_inf < last - 1e-12 * max(1.0, abs(last)):
                raise GrowthSpecError("at_inf below the limit of the last piece", field="at_inf")

    # Evaluation
    def piece_index(self, t: float) -> int:
        return int(min(max(np.searchsorted(self.starts, t, side="right") - 1, 0), len(self.pieces) - 1))

    def left_limit(self, t: float) -> float:
        """g(t-) for t > 0"""
        if t > self.T0:
            return INF
        if math.isinf(t):
            return self.value_at_infinity()
        idx = int(np.searchsorted(self.starts, t, side="left") - 1)
        return self.pieces[max(idx, 0)].value(t)

    def value_at_T0(self) -> float:
        if math.isinf(self.T0):
            return self.value_at_infinity()
        return self.at_T0 if self.at_T0 is not None else self.pieces[-1].limit_at_end()

    def value_at_infinity(self) -> float:
        if self.at_inf is not None:
            return self.at_inf
        if math.isfinite(self.T0):
            return INF
        return self.pieces[-1].limit_at_infinity()

    def __call__(self, t: float) -> float:
        t = float(t)
        if math.isinf(t):
            return self.value_at_infinity()
        if t == 0.0 and self.at_zero is not None:
            return self.at_zero
        if t > self.T0:
            return INF
        if t == self.T0:
            return self.value_at_T0()
        return self.pieces[self.piece_index(t)].value(t)

    def evaluate_many(self, ts) -> np.ndarray:
        ts = np.asarray(ts, dtype=float)
        flat = ts.ravel()
        out = np.empty_like(flat)
        idx = np.clip(np.searchsorted(self.starts, flat, side="right") - 1, 0, len(self.pieces) - 1)
        for i, piece in enumerate(self.pieces):
            mask = idx == i
            if np.any(mask):
                out[mask] = piece.values(flat[mask])
        if math.isfinite(self.T0):
            out[flat > self.T0] = INF
            out[flat == self.T0] = self.value_at_T0()
        out[np.isinf(flat)] = self.value_at_infinity()
        if self.at_zero is not None:
            out[flat == 0.0] = self.at_zero
        return out.reshape(ts.shape)

    def derivative_many(self, ts) -> np.ndarray:
        """Analytic right derivatives (no convexity check)"""
        ts = np.asarray(ts, dtype=float)
        flat = ts.ravel()
        out = np.empty_like(flat)
        idx = np.clip(np.searchsorted(self.starts, flat, side="right") - 1, 0, len(self.pieces) - 1)
        for i, piece in enumerate(self.pieces):
            mask = idx == i
            if np.any(mask):
                out[mask] = piece.derivatives(flat[mask])
        out[flat >= self.T0] = INF
        return out.reshape(ts.shape)

    def breakpoints(self) -> List[float]:
        points = [p.start for p in self.pieces[1:]]
        if math.isfinite(self.T0):
            points.append(self.T0)
        return points

    def is_constant(self) -> bool:
        if math.isfinite(self.T0):
            return False
        first = self.pieces[0].value(0.0)
        return all(p.is_flat() and _close(p.value(p.start), first) for p in self.pieces)

    def replace(self, **changes) -> "GrowthFunction":
        params = {
            "pieces": self.pieces, "T0": self.T0, "label": self.label, "at_zero": self.at_zero,
            "at_T0": self.at_T0, "at_inf": self.at_inf, "check_monotone": self.monotone_checked,
        }
        params.update(changes)
        return GrowthFunction(**params)


# Builders
def power_function(p: float, a: float = 1.0, label: Optional[str] = None) -> GrowthFunction:
    return GrowthFunction([Piece(start=0.0, end=INF, kind="power", coeffs=(a, p))], label=label or f"t^{p:g}")


def linear_function(b: float = 1.0, c: float = 0.0, label: Optional[str] = None) -> GrowthFunction:
    return GrowthFunction([Piece(start=0.0, end=INF, kind="linear", coeffs=(b, c))], label=label or "linear")


def constant_function(c: float, at_inf: Optional[float] = None, label: Optional[str] = None) -> GrowthFunction:
    return GrowthFunction([Piece(start=0.0, end=INF, kind="constant", coeffs=(c,))],
                          at_inf=at_inf, label=label or f"const {c:g}")


def piecewise_linear(breaks: Sequence[float], slopes: Sequence[float], value0: float = 0.0,
                     label: str = "piecewise-linear", check_monotone: bool = True) -> GrowthFunction:
    """Continuous piecewise-linear function with given slopes between breaks (breaks[0] = 0)"""
    edges = list(breaks) + [INF]
    pieces = []
    value = value0
    for i, slope in enumerate(slopes):
        a = edges[i]
        pieces.append(Piece(start=a, end=edges[i + 1], kind="linear", coeffs=(slope, value - slope * a)))
        if math.isfinite(edges[i + 1]):
            value += slope * (edges[i + 1] - a)
    return GrowthFunction(pieces, label=label, check_monotone=check_monotone)


def exp_power(alpha: float, beta: float, label: Optional[str] = None) -> GrowthFunction:
    """e^{alpha t^beta} - e^alpha on [1, inf), 0 below"""
    pieces = [
        Piece(start=0.0, end=1.0, kind="constant", coeffs=(0.0,)),
        Piece(start=1.0, end=INF, kind="exp", coeffs=(1.0, alpha, beta, -math.exp(alpha))),
    ]
    return GrowthFunction(pieces, label=label or f"exp({alpha:g} t^{beta:g})")


def evaluate(g: GrowthFunction, t: float) -> float:
    """g(t) with extended-real semantics (+inf beyond T0)"""
    return g(t)


def evaluate_many(g: GrowthFunction, ts) -> np.ndarray:
    return g.evaluate_many(ts)


def zero_threshold(g: GrowthFunction) -> float:
    """t0 = sup{t : g(t) = 0}"""
    if g(0.0) > 0:
        return 0.0
    return generalized_inverse_open(g, 0.0)


def infinity_threshold(g: GrowthFunction) -> float:
    """T0 = inf{t : g(t) = inf}"""
    return g.T0


def right_derivative(g: GrowthFunction, t: float, check: bool = True) -> float:
    """
    Right derivative g'_+(t)

    Args:
        g: growth function
        t: point in [0, inf)
        check: compare left and right difference quotients around t

    Returns:
        g'_+(t), +inf for t >= T0
    """
    if t >= g.T0:
        return INF
    if t == 0.0 and g.at_zero is not None and g.at_zero < g.pieces[0].value(0.0):
        return INF
    d = float(g.derivative_many(np.array([t]))[0])

    if check:
        tol = get_settings().growth.derivative_tolerance
        h = 1e-3 * max(1.0, t)
        if t + 2 * h >= g.T0:
            h = (g.T0 - t) / 4.0
        h_left = min(h, t)
        if h_left > 0 and h > 0:
            center = g(t)
            left = (center - g(t - h_left)) / h_left
            right = (g(t + h) - center) / h
            if left > right + tol * max(1.0, abs(right)):
                raise NotConvex(
                    f"difference quotients decrease at t={t}: left {left:.6g} > right {right:.6g}",
                    t=t, left=left, right=right,
                )
    return d


class ConvexityReport(BaseModel):
    """Evidence trail of is_strictly_convex"""

    convex: bool
    strictly_convex: bool
    inconclusive: bool
    tail: str
    slopes: List[Tuple[float, float]]
    violation: Optional[Tuple[float, float, float, float]] = None


def _tail_superlinear(piece: Piece) -> Optional[bool]:
    growth = piece.asymptotic()
    if growth[0] == "exp":
        return True
    if growth[0] == "power":
        _, p, q = growth
        return p > 1.0 + 1e-12 or (_close(p, 1.0) and q > 0)
    if growth[0] == "decay":
        return False
    return None


def convexity_grid(g: GrowthFunction) -> np.ndarray:
    settings = get_settings().growth
    decades = settings.convexity_decades
    count = decades * settings.convexity_points_per_decade + 1
    if math.isfinite(g.T0):
        ts = g.T0 * np.geomspace(10.0 ** -decades, 1.0, count)[:-1]
    else:
        ts = np.geomspace(1e-2, 10.0 ** (decades - 2), count)
    extra = [b for b in g.breakpoints() if b < g.T0]
    return np.unique(np.concatenate(([0.0], ts, extra)))


def convexity_violation(g: GrowthFunction, ts: np.ndarray, spans: Sequence[int] = (1, 4, 16, 64, 256, 1024)
                        ) -> Optional[Tuple[float, float, float, float]]:
    """Largest chord violation over the grid as (t_left, t_mid, t_right, excess)"""
    tol = get_settings().growth.convexity_tolerance
    vals = g.evaluate_many(ts)
    worst: Optional[Tuple[float, float, float, float]] = None
    for k in spans:
        if 2 * k >= len(ts):
            break
        t_l, t_m, t_r = ts[:-2 * k], ts[k:-k], ts[2 * k:]
        v_l, v_m, v_r = vals[:-2 * k], vals[k:-k], vals[2 * k:]
        ok = np.isfinite(v_l) & np.isfinite(v_m) & np.isfinite(v_r)
        lam = (t_r - t_m) / (t_r - t_l)
        with np.errstate(invalid="ignore"):
            chord = lam * v_l + (1.0 - lam) * v_r
            excess = np.where(ok, v_m - chord - tol * np.maximum(1.0, np.abs(chord)), -INF)
        i = int(np.argmax(excess))
        if excess[i] > 0 and (worst is None or excess[i] > worst[3]):
            worst = (float(t_l[i]), float(t_m[i]), float(t_r[i]), float(excess[i]))
    return worst


def is_strictly_convex(g: GrowthFunction) -> ConvexityReport:
    """
    Midpoint convexity on a geometric grid plus growth of g(t)/t

    Returns:
        ConvexityReport; strictly_convex is only True when both parts pass
    """
    ts = convexity_grid(g)
    violation = convexity_violation(g, ts)
    convex = violation is None

    g0 = g(0.0)
    if math.isfinite(g.T0):
        marks = g.T0 * 10.0 ** -np.arange(get_settings().growth.convexity_decades, 0, -1, dtype=float)
    else:
        marks = 10.0 ** np.arange(-1, get_settings().growth.convexity_decades - 1, dtype=float)
    slopes = [(float(t), float((g(t) - g0) / t)) for t in marks]

    if math.isfinite(g.T0):
        tail, verdict = "finite T0", True
    else:
        verdict = _tail_superlinear(g.pieces[-1])
        tail = {True: "superlinear", False: "linear or bounded", None: "uncertified"}[verdict]
        finite = [s for _, s in slopes if math.isfinite(s)]
        supported = all(b >= a - 1e-12 * max(1.0, abs(a)) for a, b in zip(finite, finite[1:]))
        if verdict and not supported:
            logger.warning(f"{g.label}: symbolic tail is superlinear but sampled slopes are not monotone")
            verdict = None
            tail = "unsupported by samples"

    inconclusive = convex and verdict is None
    report = ConvexityReport(
        convex=convex,
        strictly_convex=bool(convex and verdict),
        inconclusive=inconclusive,
        tail=tail,
        slopes=slopes,
        violation=violation,
    )
    logger.debug(f"Convexity of {g.label}: convex={convex}, tail={tail}")
    return report


def _quad(f, a: float, b: float) -> float:
    settings = get_settings().growth
    value, _ = integrate.quad(f, a, b, epsabs=settings.quad_epsabs, epsrel=settings.quad_epsrel,
                              limit=settings.quad_limit)
    return value


def _tail_converges(piece: Piece, alpha: float) -> bool:
    """Convergence of int^inf (t/g)^alpha (equivalently dt/g'^alpha) for the last piece"""
    growth = piece.asymptotic()
    if growth[0] == "exp":
        return True
    if growth[0] == "decay":
        return False
    if growth[0] == "unknown":
        raise Inconclusive(f"cannot certify the tail of a {piece.kind} piece")
    _, p, q = growth
    rate = alpha * (p - 1.0)
    if _close(rate, 1.0):
        return alpha * q > 1.0 + 1e-12
    return rate > 1.0


def _power_integral(coef: float, expo: float, a: float, b: float) -> float:
    """coef * int_a^b t^expo dt for expo != -1 (b may be inf when expo < -1)"""
    upper = 0.0 if math.isinf(b) else b ** (expo + 1.0)
    return coef * (upper - a ** (expo + 1.0)) / (expo + 1.0)


def _piecewise_integral(g: GrowthFunction, t_star: float, integrand_for, closed_form=None) -> float:
    """Sum over the pieces of g restricted to [t_star, T0), closed form where available"""
    terms = []
    for piece in g.pieces:
        a = max(piece.start, t_star)
        b = piece.end
        if b <= a:
            continue
        exact = closed_form(piece, a, b) if closed_form else None
        terms.append(exact if exact is not None else _quad(integrand_for(piece), a, b))
    return math.fsum(terms)


def calderon_integral(g: GrowthFunction, alpha: float, t_star: float) -> float:
    """
    int_{t_star}^inf (t / g(t))^alpha dt

    Returns +inf when the symbolic tail diverges; raises Inconclusive for tabulated tails.
    """
    if alpha <= 0:
        raise PreconditionFailed("alpha must be positive", alpha=alpha)
    if not g(t_star) > 0:
        raise PreconditionFailed(f"g(t_star) must be positive at t_star={t_star}", t_star=t_star)
    if t_star >= g.T0:
        return 0.0
    if math.isinf(g.T0) and not _tail_converges(g.pieces[-1], alpha):
        return INF

    def integrand_for(piece: Piece):
        return lambda t: (t / piece.value(t)) ** alpha

    def closed_form(piece: Piece, a: float, b: float) -> Optional[float]:
        # (t / (A t^P))^alpha for pure powers
        power = _normalized_power(piece)
        if power is None or power[2] != 0.0 or power[3] != 0.0 or a <= 0:
            return None
        coef, p = power[0], power[1]
        expo = alpha * (1.0 - p)
        if _close(expo, -1.0):
            return None
        return _power_integral(coef ** -alpha, expo, a, b)

    value = _piecewise_integral(g, t_star, integrand_for, closed_form)
    logger.debug(f"Calderon integral of {g.label} at alpha={alpha}, t*={t_star}: {value}")
    return value


def derivative_integral(g: GrowthFunction, alpha: float, t_star: float) -> float:
    """int_{t_star}^inf dt / [g'_+(t)]^alpha (the equivalent Calderon form)"""
    if alpha <= 0:
        raise PreconditionFailed("alpha must be positive", alpha=alpha)
    if t_star >= g.T0:
        return 0.0
    for piece in g.pieces:
        if piece.end > t_star and piece.flat_until() > max(piece.start, t_star):
            return INF
    if math.isinf(g.T0) and not _tail_converges(g.pieces[-1], alpha):
        return INF

    def integrand_for(piece: Piece):
        return lambda t: piece.derivative(t) ** -alpha

    def closed_form(piece: Piece, a: float, b: float) -> Optional[float]:
        # g' = A P (t - s)^{P-1} for shifted powers
        power = _normalized_power(piece)
        if power is None or a <= power[2]:
            return None
        coef, p, s, _ = power
        expo = -alpha * (p - 1.0)
        if _close(expo, -1.0):
            return None
        shift = lambda x: x - s if math.isfinite(x) else x
        return _power_integral((coef * p) ** -alpha, expo, shift(a), shift(b))

    return _piecewise_integral(g, t_star, integrand_for, closed_form)


def calderon_constant(g: GrowthFunction, k: int, t_star: float) -> float:
    """A_* = g(t_star)^{-1/(k-1)} + Calderon integral at alpha = 1/(k-1)"""
    if k < 2:
        raise PreconditionFailed("k must be at least 2", k=k)
    value = g(t_star)
    if not value > 0:
        raise PreconditionFailed(f"g(t_star) must be positive at t_star={t_star}", t_star=t_star)
    alpha = 1.0 / (k - 1)
    return (1.0 / value) ** alpha + calderon_integral(g, alpha, t_star)


def calderon_alpha_window(p: float, n: int) -> Optional[Tuple[float, float]]:
    """Calderon exponents alpha in (1/(p-1), 1/(n-1)) admissible for t^p; None when empty"""
    if p <= n:
        return None
    return (1.0 / (p - 1.0), 1.0 / (n - 1.0))


class SlopeBoundReport(BaseModel):
    holds: bool
    samples: List[Tuple[float, float, float, float]]


def check_slope_bounds(g: GrowthFunction, ts: Sequence[float]) -> SlopeBoundReport:
    """Two-sided estimate g'_+(t/2)/2 <= (g(t) - g(0))/t <= g'_+(t) on the sample"""
    samples = []
    holds = True
    g0 = g(0.0)
    for t in ts:
        if not 0 < t < g.T0:
            continue
        lower = 0.5 * right_derivative(g, t / 2.0, check=False)
        mid = (g(t) - g0) / t
        upper = right_derivative(g, t, check=False)
        samples.append((float(t), lower, mid, upper))
        tol = 1e-9 * max(1.0, abs(mid))
        if lower > mid + tol or mid > upper + tol:
            holds = False
    return SlopeBoundReport(holds=holds, samples=samples)


def generalized_inverse_open(g: GrowthFunction, tau: float) -> float:
    """sup{t : g(t) <= tau}, used for the zero threshold"""
    for piece in reversed(g.pieces):
        if piece.value(piece.start) <= tau:
            if piece.limit_at_end() <= tau:
                return piece.end
            t = piece.inverse(tau)
            if t is not None and piece.start <= t < piece.end:
                return t
            hi = piece.end if math.isfinite(piece.end) else _bracket_end(piece, tau + 1.0)
            return _bisect(lambda s: piece.value(s) > tau, piece.start, hi)
    return 0.0


def _bracket_end(piece: Piece, tau: float) -> float:
    """Finite t >= piece.start with piece(t) >= tau (inf if none found)"""
    t = max(1.0, 2.0 * piece.start)
    for _ in range(2100):
        if piece.value(t) >= tau:
            return t
        t *= 2.0
        if math.isinf(t):
            break
    return INF


def _bisect(pred, lo: float, hi: float) -> float:
    """Smallest t in [lo, hi] with pred(t) for a monotone predicate"""
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if pred(mid):
            hi = mid
        else:
            lo = mid
    return hi


def generalized_inverse(g: GrowthFunction, tau: float) -> float:
    """
    inf{t : g(t) >= tau}, +inf for the empty set

    Args:
        g: nondecreasing growth function
        tau: level in [-inf, inf]
    """
    if tau <= g(0.0):
        return 0.0
    if math.isinf(tau):
        return g.T0
    for piece in g.pieces:
        if piece.value(piece.start) >= tau:
            return piece.start
        end_value = piece.limit_at_end()
        if end_value < tau:
            continue
        end = piece.end if math.isfinite(piece.end) else _bracket_end(piece, tau)
        if math.isinf(end):
            continue
        t = piece.inverse(tau)
        if t is None or not piece.start <= t <= end:
            t = _bisect(lambda s: piece.value(s) >= tau, piece.start, end)
        # nudge up so that g(t) >= tau holds in floating point
        for _ in range(8):
            if t >= end or piece.value(t) >= tau:
                break
            t = float(np.nextafter(t, INF))
        return min(t, end)
    # not reached below T0; the value at T0 or beyond is at least tau or inf
    return g.T0


def _split_pieces(g: GrowthFunction, t: float) -> Tuple[List[Piece], List[Piece]]:
    below, above = [], []
    for piece in g.pieces:
        if piece.end <= t:
            below.append(piece)
        elif piece.start >= t:
            above.append(piece)
        else:
            below.append(piece.restricted(piece.start, t))
            above.append(piece.restricted(t, piece.end))
    return below, above


class DecompositionResult(BaseModel):
    """phi = psi o phi_tilde with phi_tilde <= phi"""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    psi: GrowthFunction
    phi_tilde: GrowthFunction
    lam: float
    T_star: float
    S_star: float
    I: float
    t_star: float


def _normalized_power(piece: Piece) -> Optional[Tuple[float, float, float, float]]:
    """(a, p, s, c) with inner 1 when the piece is a shifted power in t"""
    if piece.kind != "power":
        return None
    a, p, s, c = piece.coeffs
    if piece.inner == 1.0:
        return a, p, s, c
    if s == 0.0:
        return a, p * piece.inner, 0.0, c
    return None


def decompose(g: GrowthFunction, alpha: float, alpha_tilde: float) -> DecompositionResult:
    """
    Split a convex growth function as psi o phi_tilde

    phi_tilde follows phi below T_* and has derivative (phi'_+)^lam above it,
    lam = alpha / alpha_tilde; psi is the identity below S_* = phi(T_*).

    Raises:
        PreconditionFailed: constant g, or divergent Calderon integral at alpha
    """
    if not 0 < alpha < alpha_tilde:
        raise PreconditionFailed("need 0 < alpha < alpha_tilde", alpha=alpha, alpha_tilde=alpha_tilde)
    if g.is_constant():
        raise PreconditionFailed("nonconstant required")
    lam = alpha / alpha_tilde

    # T_* = inf{t : phi'_+(t) >= 1}
    if g.derivative_many(np.array([0.0]))[0] >= 1.0:
        T_star = 0.0
    else:
        hi = 1.0
        while g.derivative_many(np.array([hi]))[0] < 1.0:
            hi *= 2.0
            if hi > 1e300:
                raise PreconditionFailed("phi'_+ never reaches 1; the Calderon integral diverges")
        T_star = _bisect(lambda t: g.derivative_many(np.array([t]))[0] >= 1.0, 0.0, hi)

    I = derivative_integral(g, alpha, T_star)
    if math.isinf(I):
        raise PreconditionFailed(f"Calderon integral of {g.label} diverges at alpha={alpha}", alpha=alpha)

    below, above = _split_pieces(g, T_star)
    S_star = g(T_star) if T_star > 0 else g.pieces[0].value(0.0)

    tilde_pieces: List[Piece] = list(below)
    psi_pieces: List[Piece] = []
    level = S_star
    for piece in above:
        a_t, b_t = piece.start, piece.end
        power = _normalized_power(piece)
        if power is not None:
            a, p, s, c = power
            P = lam * (p - 1.0) + 1.0
            A = (a * p) ** lam / P
            C = level - A * (a_t - s) ** P
            tilde = Piece(start=a_t, end=b_t, kind="power", coeffs=(A, P, s, C))
            end_level = tilde.limit_at_end()
            psi = Piece(start=level, end=end_level, kind="power",
                        coeffs=(a * A ** (-p / P), p / P, C, c)) if end_level > level else None
        elif piece.kind == "linear" and piece.inner == 1.0:
            b, c = piece.coeffs
            B = b ** lam
            C = level - B * a_t
            tilde = Piece(start=a_t, end=b_t, kind="linear", coeffs=(B, C))
            end_level = tilde.limit_at_end()
            psi = Piece(start=level, end=end_level, kind="linear", coeffs=(b / B, c - b * C / B))
        elif piece.kind == "tabulated" and piece.inner == 1.0:
            tilde, psi = _tabulated_decomposition(piece, lam, level)
            end_level = tilde.limit_at_end()
        elif piece.is_flat():
            tilde = Piece(start=a_t, end=b_t, kind="constant", coeffs=(level,))
            psi, end_level = None, level
        else:
            # phi_tilde = level + int (phi')^lam, psi = phi o phi_tilde^-1
            tilde = slope_integral_piece(piece, lam, level)
            end_level = tilde.limit_at_end()
            psi = composed_piece(tilde) if end_level > level else None
        tilde_pieces.append(tilde)
        if psi is not None:
            psi_pieces.append(psi)
        level = end_level

    phi_tilde = GrowthFunction(tilde_pieces, T0=g.T0, label=f"{g.label} tilde", at_zero=g.at_zero)
    S0 = phi_tilde.pieces[-1].limit_at_end()
    identity_end = S_star if psi_pieces else INF
    first = [Piece(start=0.0, end=identity_end, kind="linear", coeffs=(1.0, 0.0))] if identity_end > 0 else []
    psi_pieces = first + psi_pieces
    psi_T0 = S0 if math.isfinite(g.T0) and math.isfinite(S0) else INF
    psi_g = GrowthFunction(psi_pieces, T0=psi_T0, label=f"psi for {g.label}",
                           at_T0=g.value_at_T0() if math.isfinite(psi_T0) else None,
                           at_inf=g.value_at_infinity() if math.isinf(psi_T0) else None)

    logger.info(f"Decomposed {g.label}: lambda={lam:.6g}, T*={T_star:.6g}, S*={S_star:.6g}, I={I:.10g}")
    return DecompositionResult(psi=psi_g, phi_tilde=phi_tilde, lam=lam, T_star=T_star,
                               S_star=S_star, I=I, t_star=T_star)


def _tabulated_decomposition(piece: Piece, lam: float, level: float) -> Tuple[Piece, Optional[Piece]]:
    """Exact split of a piecewise-linear piece: slopes s become s^lam in phi_tilde and s^(1-lam) in psi"""
    inside = [x for x, _ in piece.knots if piece.start < x < piece.end]
    xs = [piece.start] + inside
    if math.isfinite(piece.end):
        xs.append(piece.end)
    elif len(xs) == 1:
        xs.append(piece.start + max(1.0, piece.start))
    xs = np.array(xs)
    ys = piece.values(xs)
    slopes = np.diff(ys) / np.diff(xs)
    tilde_vals = level + np.concatenate(([0.0], np.cumsum(np.power(slopes, lam) * np.diff(xs))))
    tilde = Piece(start=piece.start, end=piece.end, kind="tabulated",
                  knots=tuple(zip(xs.tolist(), tilde_vals.tolist())))
    keep = np.concatenate(([True], np.diff(tilde_vals) > 0))
    end_level = tilde.limit_at_end()
    if end_level <= level or keep.sum() < 2:
        return tilde, None
    psi = Piece(start=level, end=end_level, kind="tabulated",
                knots=tuple(zip(tilde_vals[keep].tolist(), ys[keep].tolist())))
    return tilde, psi


def _split_at_knees(pieces: Sequence[Piece]) -> List[Piece]:
    """Pieces with a leading constant stretch, such as (t - s)_+^p, split into constant + rest"""
    out: List[Piece] = []
    for piece in pieces:
        knee = piece.flat_until()
        if piece.start < knee < piece.end:
            out.append(Piece(start=piece.start, end=knee, kind="constant", coeffs=(piece.value(piece.start),)))
            out.append(piece.restricted(knee, piece.end))
        else:
            out.append(piece)
    return out


def regularize(g: GrowthFunction, epsilon: float) -> GrowthFunction:
    """
    Strictly increasing g_eps with g <= g_eps <= g + epsilon

    The i-th constancy interval (a_i, b_i) gets eps 2^-i (t - a_i)/(b_i - a_i),
    saturated after b_i; an unbounded one gets eps 2^-i (1 - e^{a_i - t}).
    """
    if epsilon <= 0:
        raise PreconditionFailed("epsilon must be positive", epsilon=epsilon)
    pieces: List[Piece] = []
    offset = 0.0
    i = 0
    for piece in _split_at_knees(g.pieces):
        if piece.kind == "tabulated":
            knots = []
            xs = [k[0] for k in piece.knots]
            ys = [k[1] for k in piece.knots]
            for j in range(len(xs)):
                knots.append((xs[j], ys[j] + offset))
                if j + 1 < len(xs) and ys[j + 1] == ys[j]:
                    i += 1
                    offset += epsilon * 2.0 ** -i
            pieces.append(piece.model_copy(update={"knots": tuple(knots)}))
            continue
        if not piece.is_flat():
            pieces.append(piece.shifted(offset))
            continue
        i += 1
        bump = epsilon * 2.0 ** -i
        c = piece.value(piece.start) + offset
        a, b = piece.start, piece.end
        if math.isfinite(b):
            if piece.inner != 1.0:
                logger.debug("Flat piece with inner exponent treated in t")
            slope = bump / (b - a)
            pieces.append(Piece(start=a, end=b, kind="linear", coeffs=(slope, c - slope * a)))
        else:
            pieces.append(Piece(start=a, end=b, kind="exp", coeffs=(-bump * math.exp(a), -1.0, 1.0, c + bump)))
        offset += bump

    if i == 0:
        return g
    at_T0 = None if g.at_T0 is None else g.at_T0 + offset
    at_inf = None if g.at_inf is None else g.at_inf + offset
    return g.replace(pieces=pieces, label=f"{g.label} regularized", at_T0=at_T0, at_inf=at_inf)


def truncate_below(g: GrowthFunction, t_star: float) -> GrowthFunction:
    """phi_* = 0 at 0, g(t_star) on (0, t_star), g on [t_star, inf]"""
    level = g(t_star)
    if not level > 0:
        raise PreconditionFailed(f"g(t_star) must be positive at t_star={t_star}", t_star=t_star)
    if t_star >= g.T0:
        raise PreconditionFailed("t_star must lie below T0", t_star=t_star)
    if t_star <= 0:
        return g.replace(at_zero=0.0, label=f"{g.label} truncated")
    _, above = _split_pieces(g, t_star)
    pieces = [Piece(start=0.0, end=t_star, kind="constant", coeffs=(level,))] + above
    return g.replace(pieces=pieces, at_zero=0.0, label=f"{g.label} truncated at {t_star:g}")


def convex_minorant(g: GrowthFunction, t_star: float) -> GrowthFunction:
    """
    0 up to t_star, the tangent from (t_star, 0) up to its touching point T_*, g after

    Raises:
        NoTangent: no touching point on the sample range
    """
    level = g(t_star)
    if level == 0.0:
        T_star = t_star
    else:
        def gap(T: float) -> float:
            return right_derivative(g, T, check=False) * (T - t_star) - g(T)

        t_max = min(g.T0, get_settings().construction.dispatcher_t_max * max(1.0, t_star))
        lo = t_star * (1.0 + 1e-9) + 1e-12
        hi = None
        T = lo
        while T < t_max:
            T = min(t_star + 2.0 * (T - t_star) + 1e-3, t_max)
            value = gap(T)
            if not math.isfinite(value) or value >= 0:
                hi = T
                break
            lo = T
        if hi is None:
            raise NoTangent(f"no tangent from ({t_star}, 0) touches {g.label} below {t_max:g}", t_star=t_star)
        if math.isfinite(gap(hi)) and math.isfinite(g(hi)):
            T_star = optimize.brentq(gap, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps)
        else:
            T_star = _bisect(lambda s: not math.isfinite(gap(s)) or gap(s) >= 0, lo, hi)

    slope = right_derivative(g, T_star, check=False) if T_star > t_star else 0.0
    if T_star > t_star:
        slope = g(T_star) / (T_star - t_star)
    _, above = _split_pieces(g, T_star)
    pieces = [Piece(start=0.0, end=t_star, kind="constant", coeffs=(0.0,))]
    if T_star > t_star:
        pieces.append(Piece(start=t_star, end=T_star, kind="linear", coeffs=(slope, -slope * t_star)))
    pieces += above
    logger.debug(f"Convex minorant of {g.label}: T*={T_star}, slope={slope}")
    return GrowthFunction(pieces, T0=g.T0, label=f"{g.label} minorant", at_T0=g.at_T0, at_inf=g.at_inf)


def power_transform(g: GrowthFunction, n: int, direction: str) -> GrowthFunction:
    """
    Compose with t -> t^{n-1} ("to_phi": phi(t) = Phi(t^{n-1})) or its
    inverse ("to_Phi": Phi(t) = phi(t^{1/(n-1)}))
    """
    if n < 2:
        raise PreconditionFailed("n must be at least 2", n=n)
    if direction not in ("to_phi", "to_Phi"):
        raise ValueError(f"unknown direction {direction!r}")
    m = float(n - 1) if direction == "to_phi" else 1.0 / (n - 1)
    if m == 1.0:
        return g

    def move(x: float) -> float:
        # endpoint x of the old variable becomes x^{1/m}
        return x if x in (0.0, INF) else x ** (1.0 / m)

    pieces = [p.model_copy(update={"start": move(p.start), "end": move(p.end), "inner": p.inner * m})
              for p in g.pieces]
    for i in range(len(pieces) - 1):
        if pieces[i].end != pieces[i + 1].start:
            pieces[i + 1] = pieces[i + 1].model_copy(update={"start": pieces[i].end})
    label = f"{g.label} o t^{m:g}"
    return g.replace(pieces=pieces, T0=move(g.T0), label=label)
