"""Closed-form and quadrature-based shapes for the two-set competition.

Conventions: the slow seed ``p`` sits at the pole r=0 and the fast seed ``q``
at ``(ell, theta=0)``.  Every routine is a pure function of its inputs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

from .errors import (
    DomainError,
    NumericError,
    SingularMetricError,
    UnreachableError,
    UnsupportedMetricError,
)
from .metric import SurfaceMetric, check_assumptions

DEFAULT_ANGLE_STEP = 2 * math.pi / 720

DistanceOracle = Callable[[float, float], float]


@dataclass(frozen=True)
class Scenario:
    lam: float
    ell: float

    def __post_init__(self):
        if not self.lam > 1:
            raise DomainError("lambda must exceed 1")
        if not self.ell > 0:
            raise DomainError("ell must be positive")

    @property
    def spiral_rate(self) -> float:
        return math.sqrt(self.lam * self.lam - 1.0)


@dataclass(frozen=True)
class Circle2D:
    center: tuple
    radius: float


@dataclass(frozen=True)
class SpiralCurve:
    """Samples ``(r, theta)`` of a radial-speed-1, total-speed-lambda curve.

    ``sweep`` is the total angle swept between ``r_start`` and ``r_end``;
    when ``r_end`` is infinite the samples stop short of it.
    """

    samples: np.ndarray
    chirality: int
    r_start: float
    r_end: float
    sweep: float

    @property
    def r(self):
        return self.samples[:, 0]

    @property
    def theta(self):
        return self.samples[:, 1]


@dataclass(frozen=True)
class EscapePath:
    T: float
    path: SpiralCurve


@dataclass(frozen=True)
class PredictedBoundary:
    a: float
    visible_arc: np.ndarray
    spirals: tuple
    spiral_start: float
    closure_radius: Optional[float]
    total_sweep: float

    @property
    def bounded(self) -> bool:
        return self.closure_radius is not None

    def polyline(self) -> np.ndarray:
        """Whole boundary ordered by theta from -pi to pi."""
        upper, lower = self.spirals
        low = lower.samples[::-1]
        return np.vstack([low, self.visible_arc, upper.samples])


# -- distance backends -------------------------------------------------------


def _curvature_scale(metric: SurfaceMetric) -> Optional[float]:
    if metric.kind == "euclidean":
        return None
    if metric.kind == "hyperbolic_sinh":
        return 1.0
    if metric.kind == "scaled_hyperbolic":
        return math.sqrt(metric.kappa)
    raise UnsupportedMetricError(f"no closed-form distance for metric kind {metric.kind!r}")


def geodesic_distance(metric: SurfaceMetric, r1, th1, r2, th2):
    """Distance between two points given in polar normal coordinates.

    Law of cosines written in haversine form so that nearby points do not
    lose precision.
    """
    s = _curvature_scale(metric)
    hav = np.sin(0.5 * (np.asarray(th1) - np.asarray(th2))) ** 2
    r1 = np.asarray(r1, float)
    r2 = np.asarray(r2, float)
    if s is None:
        return np.sqrt((r1 - r2) ** 2 + 4.0 * r1 * r2 * hav)
    y = 2.0 * np.sinh(0.5 * s * (r1 - r2)) ** 2 + 2.0 * np.sinh(s * r1) * np.sinh(s * r2) * hav
    return np.log1p(y + np.sqrt(y * (2.0 + y))) / s


def distance_to_q(metric: SurfaceMetric, scn: Scenario) -> DistanceOracle:
    _curvature_scale(metric)
    ell = scn.ell

    def oracle(r, theta):
        return geodesic_distance(metric, r, theta, ell, 0.0)

    return oracle


def radial_derivative_to_q(metric: SurfaceMetric, scn: Scenario, r, theta):
    """d/dr of the distance to q, i.e. the cosine between grad d_q and the radial field."""
    s = _curvature_scale(metric)
    ell = scn.ell
    hav = math.sin(0.5 * theta) ** 2
    d = geodesic_distance(metric, r, theta, ell, 0.0)
    if s is None:
        return (r - ell * math.cos(theta)) / d
    num = math.sinh(s * (r - ell)) + 2.0 * math.cosh(s * r) * math.sinh(s * ell) * hav
    return num / math.sinh(s * d)


def angle_at_q(metric: SurfaceMetric, scn: Scenario, r, theta):
    """Angle at q between the geodesics towards p and towards (r, theta)."""
    s = _curvature_scale(metric)
    ell = scn.ell
    d = geodesic_distance(metric, r, theta, ell, 0.0)
    if s is None:
        c = (ell * ell + d * d - r * r) / (2.0 * ell * d)
    else:
        c = (math.cosh(s * ell) * math.cosh(s * d) - math.cosh(s * r)) / (
            math.sinh(s * ell) * math.sinh(s * d)
        )
    return math.acos(min(1.0, max(-1.0, c)))


# -- the Apollonius set --------------------------------------------------------


def apollonius_omega1(scn: Scenario, metric: Optional[SurfaceMetric] = None) -> Circle2D:
    """Boundary circle of {x : |x - q| > lam |x - p|} in the flat plane."""
    if metric is not None and metric.kind != "euclidean":
        raise UnsupportedMetricError("the Apollonius circle exists only for the euclidean metric; use omega1_profile")
    k = scn.lam * scn.lam - 1.0
    return Circle2D(center=(-scn.ell / k, 0.0), radius=scn.lam * scn.ell / k)


def omega1_profile(
    scn: Scenario,
    metric: SurfaceMetric,
    theta: float,
    dist_oracle: Optional[DistanceOracle] = None,
    r_max: Optional[float] = None,
) -> float:
    """Radius where the ray at angle ``theta`` leaves the first-step set.

    Solves d((r, theta), q) = lam * r by bracketing on a geometric ladder
    and bisecting.  Returns ``inf`` when no sign change occurs before
    ``r_max``.
    """
    if dist_oracle is None:
        dist_oracle = distance_to_q(metric, scn)
    lam, ell = scn.lam, scn.ell
    if r_max is None:
        # triangle inequality puts the root below ell / (lam - 1)
        r_max = 2.0 * ell / (lam - 1.0) + ell

    def h(r):
        return dist_oracle(r, theta) - lam * r

    lo = 0.0
    hi = ell / (lam + 1.0)
    while h(hi) > 0:
        lo = hi
        hi *= 2.0
        if lo > r_max:
            return math.inf
    tol = 1e-10 * max(1.0, ell)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if h(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def inner_ball_radius(scn: Scenario) -> float:
    return scn.ell / (scn.lam + 1.0)


def visibility_angle_bound(lam: float) -> float:
    if not lam > 1:
        raise DomainError("lambda must exceed 1")
    return math.pi - math.acos(1.0 / lam)


# -- spirals ---------------------------------------------------------------------


def spiral_sweep(metric: SurfaceMetric, lam: float, r_start: float, r_end: float) -> float:
    """Angle swept by a speed-lam curve whose radius grows at unit rate."""
    if r_start <= 0:
        raise SingularMetricError("spirals must start away from the pole")
    if r_end == r_start:
        return 0.0
    try:
        integral = metric.inverse_G_integral(r_start, r_end)
    except ZeroDivisionError as exc:  # pragma: no cover - defensive
        raise SingularMetricError(str(exc)) from exc
    if not math.isfinite(integral):
        raise SingularMetricError("1/G is not integrable on the requested range")
    return math.sqrt(lam * lam - 1.0) * integral


def _radius_at_sweep(metric, lam, r0, target, r_hi_guess):
    """Smallest r > r0 whose sweep from r0 equals ``target`` (target > 0)."""
    hi = max(r_hi_guess, r0 * 1.0001 + 1e-12)
    f = lambda r: spiral_sweep(metric, lam, r0, r) - target
    while f(hi) < 0:
        hi = r0 + 2.0 * (hi - r0)
        if hi > 1e12:
            raise NumericError("spiral radius search diverged")
    return brentq(f, r0, hi, xtol=1e-13, rtol=1e-15)


def spiral_curve(
    metric: SurfaceMetric,
    scn: Scenario,
    r_start: float,
    theta_start: float,
    chirality: int,
    r_end: float,
    max_step: float = DEFAULT_ANGLE_STEP,
    max_theta: Optional[float] = None,
) -> SpiralCurve:
    """Sample theta(r) = theta_start + chirality * sqrt(lam^2-1) * int 1/G.

    Samples are uniform in theta with spacing at most ``max_step``.  If
    ``max_theta`` is given the curve stops once |theta - theta_start|
    reaches it, and ``r_end`` is reduced accordingly.
    """
    if chirality not in (1, -1):
        raise ValueError("chirality must be +1 or -1")
    if not 0 < r_start <= r_end:
        raise DomainError("need 0 < r_start <= r_end")
    lam = scn.lam
    total = spiral_sweep(metric, lam, r_start, r_end)
    if max_theta is not None and total >= max_theta:
        r_end = r_start if max_theta == 0 else _radius_at_sweep(metric, lam, r_start, max_theta, r_start * 2)
        total = max_theta
    if total == 0.0:
        pts = np.array([[r_start, theta_start]])
        return SpiralCurve(pts, chirality, r_start, r_end, 0.0)
    n = max(2, int(math.ceil(total / max_step)) + 1)
    levels = np.linspace(0.0, total, n)
    rs = [r_start]
    prev_r, prev_level = r_start, 0.0
    for lev in levels[1:]:
        if lev == total and math.isfinite(r_end):
            r = r_end
        elif lev == total:
            break
        else:
            guess = prev_r + max(prev_r - rs[-2], 1e-9) if len(rs) > 1 else prev_r * 1.01 + 1e-9
            r = _radius_at_sweep(metric, lam, prev_r, lev - prev_level, guess)
        rs.append(r)
        prev_r, prev_level = r, lev
    rs = np.asarray(rs)
    th = theta_start + chirality * levels[: rs.size]
    return SpiralCurve(np.column_stack([rs, th]), chirality, r_start, r_end, total)


# -- escape path and trapping bound -------------------------------------------------


def _escape_radius(metric: SurfaceMetric, scn: Scenario, tau: float) -> float:
    if not 0 < tau <= math.pi:
        raise DomainError("tau must lie in (0, pi]")
    lam, ell = scn.lam, scn.ell
    if metric.tail_model == "divergent":
        sup = math.inf
    else:
        try:
            sup = spiral_sweep(metric, lam, ell, metric.r_limit)
        except Exception as exc:
            raise NumericError(f"cannot evaluate the sweep tail: {exc}") from exc
    if sup < tau:
        raise UnreachableError(f"escape angle saturates at {sup:.6g} < tau={tau:.6g}", sup)
    return _radius_at_sweep(metric, lam, ell, tau, 2.0 * ell)


def escape_path(metric: SurfaceMetric, scn: Scenario, tau: float, max_step: float = DEFAULT_ANGLE_STEP) -> EscapePath:
    """Speed-lam path from q that winds to angle ``tau`` while its radius grows at unit rate."""
    R = _escape_radius(metric, scn, tau)
    path = spiral_curve(metric, scn, scn.ell, 0.0, 1, R, max_step=max_step)
    return EscapePath(T=R - scn.ell, path=path)


def trapping_radius_bound(metric: SurfaceMetric, scn: Scenario) -> float:
    """Radius T with B_inf inside the ball B(p, T), or ``inf`` if the construction fails."""
    try:
        return _escape_radius(metric, scn, math.pi) - scn.ell
    except UnreachableError:
        return math.inf


# -- predicted boundary --------------------------------------------------------------


def tangency_angle(metric: SurfaceMetric, scn: Scenario, dist_oracle: Optional[DistanceOracle] = None) -> float:
    """Angle a at which the geodesic from q grazes the first-step boundary.

    Located as the sign change of  d/dr dist_q - 1/lam  along the boundary
    curve (f1(theta), theta): negative on the visible side, positive beyond.
    """
    inv = 1.0 / scn.lam

    def g(th):
        r = omega1_profile(scn, metric, th, dist_oracle)
        return radial_derivative_to_q(metric, scn, r, th) - inv

    lo, hi = 0.0, math.pi
    if not (g(lo) < 0 < g(hi)):
        raise NumericError("tangency search failed to bracket")
    while hi - lo > 1e-13:
        mid = 0.5 * (lo + hi)
        if g(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def predicted_boundary(
    metric: SurfaceMetric,
    scn: Scenario,
    dist_oracle: Optional[DistanceOracle] = None,
    r_end: Optional[float] = None,
    max_step: float = DEFAULT_ANGLE_STEP,
) -> PredictedBoundary:
    """Visible arc of the first-step boundary plus the two continuing spirals."""
    r_top = min(max(10.0, 4 * scn.ell), metric.r_limit)
    report = check_assumptions(metric, np.geomspace(1e-3, r_top, 64))
    if not report.nonpositive_curvature_ok:
        raise UnsupportedMetricError("boundary shape is only known for nonpositively curved surfaces")
    if dist_oracle is None:
        dist_oracle = distance_to_q(metric, scn)
    a = tangency_angle(metric, scn, dist_oracle)
    n = max(2, int(math.ceil(2 * a / max_step)) + 1)
    thetas = np.linspace(-a, a, n)
    arc = np.array([[omega1_profile(scn, metric, th, dist_oracle), th] for th in thetas])
    # the arc is mirror symmetric; copy to make it exact
    half = n // 2
    arc[:half, 0] = arc[::-1][:half, 0]
    r0 = float(arc[-1, 0])
    remaining = math.pi - a
    if metric.tail_model == "divergent":
        total = math.inf
    else:
        total = spiral_sweep(metric, scn.lam, r0, metric.r_limit)
    closure = None
    if total >= remaining:
        closure = _radius_at_sweep(metric, scn.lam, r0, remaining, 2 * r0)
    if r_end is None:
        r_end = closure if closure is not None else r0 + 10.0 * max(1.0, scn.ell)
    upper = spiral_curve(metric, scn, r0, a, 1, r_end, max_step, max_theta=remaining)
    lower = spiral_curve(metric, scn, r0, -a, -1, r_end, max_step, max_theta=remaining)
    return PredictedBoundary(
        a=a,
        visible_arc=arc,
        spirals=(upper, lower),
        spiral_start=r0,
        closure_radius=closure,
        total_sweep=a + total,
    )
