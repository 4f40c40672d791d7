"""Rotationally symmetric surface metrics ``g = dr^2 + G(r)^2 dtheta^2``.

A :class:`SurfaceMetric` is an immutable description of the warping function
``G``.  Three closed-form kinds are built in (flat plane, curvature -1 and
curvature -kappa); a fourth kind interpolates user samples.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import PchipInterpolator

from .errors import DomainError, ExtrapolationError, InsufficientDataError

KINDS = ("euclidean", "hyperbolic_sinh", "scaled_hyperbolic", "tabulated")
TAILS = ("divergent", "convergent", "unknown")

ORIGIN_PROBE = 1e-3
ORIGIN_TOL = 1e-3
CURVATURE_TOL = 1e-9
QUAD_EPSABS = 1e-10


@dataclass(frozen=True, eq=False)
class SurfaceMetric:
    kind: str
    kappa: Optional[float] = None
    r_samples: Optional[np.ndarray] = field(default=None, repr=False)
    G_samples: Optional[np.ndarray] = field(default=None, repr=False)
    tail: Optional[str] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown metric kind {self.kind!r}")
        if self.tail is not None and self.tail not in TAILS:
            raise ValueError(f"unknown tail model {self.tail!r}")
        if self.kind == "scaled_hyperbolic":
            if self.kappa is None or not self.kappa > 0:
                raise ValueError("scaled_hyperbolic needs kappa > 0")
        if self.kind == "tabulated":
            if self.r_samples is None or self.G_samples is None:
                raise ValueError("tabulated metric needs r and G samples")
            r = np.asarray(self.r_samples, dtype=float)
            g = np.asarray(self.G_samples, dtype=float)
            if r.ndim != 1 or r.shape != g.shape or r.size == 0:
                raise ValueError("r and G samples must be 1-D arrays of equal length")
            if np.any(np.diff(r) <= 0) or r[0] < 0:
                raise ValueError("r samples must be nonnegative and strictly increasing")
            object.__setattr__(self, "_n_data", int(r.size))
            if r[0] > 0:
                r = np.concatenate([[0.0], r])
                g = np.concatenate([[0.0], g])
            r.setflags(write=False)
            g.setflags(write=False)
            object.__setattr__(self, "r_samples", r)
            object.__setattr__(self, "G_samples", g)

    # -- constructors -----------------------------------------------------

    @classmethod
    def euclidean(cls):
        return cls("euclidean")

    @classmethod
    def hyperbolic(cls):
        return cls("hyperbolic_sinh")

    @classmethod
    def scaled_hyperbolic(cls, kappa: float):
        return cls("scaled_hyperbolic", kappa=float(kappa))

    @classmethod
    def tabulated(cls, r: Sequence[float], G: Sequence[float], tail: Optional[str] = None):
        return cls("tabulated", r_samples=np.asarray(r, float), G_samples=np.asarray(G, float), tail=tail)

    @classmethod
    def from_csv(cls, path, tail: Optional[str] = None):
        """Read a two-column ``r,G`` table; a non-numeric first row is treated as a header."""
        text = Path(path).read_text().splitlines()
        rows = []
        for line in text:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            try:
                rows.append((float(parts[0]), float(parts[1])))
            except (ValueError, IndexError):
                if rows:
                    raise ValueError(f"malformed row in {path}: {line!r}")
        return cls.tabulated([a for a, _ in rows], [b for _, b in rows], tail=tail)

    # -- tail model -------------------------------------------------------

    @property
    def tail_model(self) -> str:
        if self.kind == "euclidean":
            return "divergent"
        if self.kind in ("hyperbolic_sinh", "scaled_hyperbolic"):
            return "convergent"
        return self.tail or "unknown"

    @property
    def has_closed_form_distance(self) -> bool:
        return self.kind != "tabulated"

    @property
    def r_limit(self) -> float:
        """Largest radius at which G may be evaluated."""
        if self.kind == "tabulated" and self.tail_model == "unknown":
            return float(self.r_samples[-1])
        return math.inf

    # -- tabulated internals ----------------------------------------------

    @cached_property
    def _pchip(self):
        return PchipInterpolator(self.r_samples, self.G_samples, extrapolate=False)

    @cached_property
    def _second_diff(self):
        r, g = self.r_samples, self.G_samples
        if r.size < 3:
            return None
        h0 = r[1:-1] - r[:-2]
        h1 = r[2:] - r[1:-1]
        d2 = 2.0 * (h0 * g[2:] - (h0 + h1) * g[1:-1] + h1 * g[:-2]) / (h0 * h1 * (h0 + h1))
        # endpoints copy their neighbour
        return np.concatenate([[d2[0]], d2, [d2[-1]]])

    @cached_property
    def _tail_params(self):
        r, g = self.r_samples, self.G_samples
        if r.size < 2:
            raise InsufficientDataError("tail extrapolation needs at least two samples")
        dr = r[-1] - r[-2]
        if self.tail_model == "divergent":
            return (g[-1] - g[-2]) / dr
        if self.tail_model == "convergent":
            if g[-2] <= 0:
                raise InsufficientDataError("cannot fit an exponential tail through G <= 0")
            c = math.log(g[-1] / g[-2]) / dr
            if c <= 0:
                raise InsufficientDataError("convergent tail requires G increasing at the last sample")
            return c
        return None

    def _tab_eval(self, r: np.ndarray, deriv: int) -> np.ndarray:
        r_last = self.r_samples[-1]
        out = np.empty_like(r)
        inside = r <= r_last
        if np.any(inside):
            if deriv < 2:
                out[inside] = self._pchip(r[inside], nu=deriv)
            else:
                d2 = self._second_diff
                if d2 is None:
                    raise InsufficientDataError("curvature needs at least 3 samples")
                out[inside] = np.interp(r[inside], self.r_samples, d2)
        beyond = ~inside
        if np.any(beyond):
            tail = self.tail_model
            if tail == "unknown":
                raise ExtrapolationError(
                    f"r={float(r[beyond].max())!r} beyond last sample {float(r_last)!r} and no tail model declared"
                )
            g_last = self.G_samples[-1]
            s = r[beyond] - r_last
            p = self._tail_params
            if tail == "divergent":
                vals = (g_last + p * s, np.full_like(s, p), np.zeros_like(s))
            else:
                e = g_last * np.exp(p * s)
                vals = (e, p * e, p * p * e)
            out[beyond] = vals[deriv]
        return out

    # -- evaluation ---------------------------------------------------------

    def _eval(self, r, deriv: int):
        arr = np.asarray(r, dtype=float)
        scalar = arr.ndim == 0
        arr = np.atleast_1d(arr)
        if np.any(arr < 0) or np.any(np.isnan(arr)):
            raise DomainError("G is defined only for r >= 0")
        if self.kind == "euclidean":
            out = (arr, np.ones_like(arr), np.zeros_like(arr))[deriv]
        elif self.kind in ("hyperbolic_sinh", "scaled_hyperbolic"):
            s = 1.0 if self.kind == "hyperbolic_sinh" else math.sqrt(self.kappa)
            # sinh overflows to inf far out; 1/G -> 0 there, which is what the integrals want
            with np.errstate(over="ignore"):
                if deriv == 0:
                    out = np.sinh(s * arr) / s
                elif deriv == 1:
                    out = np.cosh(s * arr)
                else:
                    out = s * np.sinh(s * arr)
        else:
            out = self._tab_eval(arr, deriv)
        return float(out[0]) if scalar else out

    def G(self, r):
        return self._eval(r, 0)

    def G_prime(self, r):
        return self._eval(r, 1)

    def G_double_prime(self, r):
        return self._eval(r, 2)

    def curvature(self, r):
        """Gaussian curvature ``-G''/G``."""
        return -np.asarray(self.G_double_prime(r)) / np.asarray(self.G(r))

    # -- 1/G integrals --------------------------------------------------------

    def inverse_G_integral(self, a: float, b: float) -> float:
        """Integral of 1/G over [a, b]; ``b`` may be ``inf``."""
        if a <= 0:
            raise DomainError("1/G is singular at r=0; lower limit must be positive")
        if b < a:
            return -self.inverse_G_integral(b, a)
        if b == a:
            return 0.0
        if b > self.r_limit:
            raise ExtrapolationError(f"integral to r={b} exceeds the tabulated range")
        val, _ = quad(lambda s: 1.0 / self.G(s), a, b, epsabs=QUAD_EPSABS, epsrel=1e-12, limit=400)
        return val


def eval_G(metric: SurfaceMetric, r):
    return metric.G(r)


@dataclass(frozen=True)
class AssumptionReport:
    positivity_ok: bool
    origin_limit_ok: bool
    nonpositive_curvature_ok: bool
    max_curvature: float

    @property
    def all_ok(self) -> bool:
        return self.positivity_ok and self.origin_limit_ok and self.nonpositive_curvature_ok


def check_assumptions(metric: SurfaceMetric, r_probe) -> AssumptionReport:
    probe = np.asarray(r_probe, dtype=float)
    if probe.size == 0:
        raise ValueError("r_probe must be nonempty")
    if np.any(probe <= 0) or np.any(np.diff(probe) < 0):
        raise ValueError("r_probe must be positive and sorted")
    if metric.kind == "tabulated" and metric._n_data < 3:
        raise InsufficientDataError("curvature check needs at least 3 samples")
    g = metric.G(probe)
    positivity_ok = bool(np.all(g > 0))
    origin_ratio = metric.G(ORIGIN_PROBE) / ORIGIN_PROBE
    origin_ok = abs(origin_ratio - 1.0) <= ORIGIN_TOL
    K = metric.curvature(probe)
    kmax = float(np.max(K))
    return AssumptionReport(positivity_ok, bool(origin_ok), bool(kmax <= CURVATURE_TOL), kmax)


@dataclass(frozen=True)
class ConformalReport:
    I_partial: float
    R_cut: float
    tail_model: str
    classification: str


def _breakpoints(R_cut: float):
    pts = [1.0]
    while pts[-1] * 2 < R_cut:
        pts.append(pts[-1] * 2)
    pts.append(R_cut)
    return pts


def conformal_classify(metric: SurfaceMetric, R_cut: float) -> ConformalReport:
    """Partial tail integral of 1/G on [1, R_cut] plus the declared conformal type.

    Finite data cannot decide convergence of the full integral, so the
    classification comes from the tail model alone.
    """
    if not R_cut >= 1:
        raise DomainError("R_cut must be >= 1")
    # fixed dyadic pieces keep the partial sum monotone in R_cut
    pts = _breakpoints(R_cut)
    total = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        total += metric.inverse_G_integral(a, b)
    tail = metric.tail_model
    cls = {"divergent": "parabolic", "convergent": "hyperbolic"}.get(tail, "inconclusive")
    return ConformalReport(total, float(R_cut), tail, cls)
