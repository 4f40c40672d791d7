"""Fixed-point construction of the slow set's final region on a polar grid.

Region masks are flat boolean arrays over grid nodes (pole first), the same
layout as distance fields.  A mask is *column star-shaped* when every
angular column is a prefix of rows starting next to the pole, with the
pole itself included whenever the mask is nonempty.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .analytic import Scenario, trapping_radius_bound
from .errors import ContractViolation, InvalidStateError, PreconditionError
from .grid import PolarGrid, build_grid
from .metric import SurfaceMetric

log = logging.getLogger(__name__)

BOUNDARY_MARGIN_CELLS = 5


class NonConvergenceWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class DistanceField:
    values: np.ndarray
    source: int
    obstacle: np.ndarray


def distance_field(grid: PolarGrid, source: int, obstacle=None) -> DistanceField:
    obstacle = grid.empty_mask() if obstacle is None else np.asarray(obstacle, bool)
    return DistanceField(grid.distances(source, obstacle), source, obstacle)


# -- masks -----------------------------------------------------------------------


def exit_rows(grid: PolarGrid, mask) -> np.ndarray:
    """Row index of the first non-member node along each column (0 = pole, n_r+1 = none)."""
    mask = np.asarray(mask, bool)
    if not mask[0]:
        return np.zeros(grid.n_theta, dtype=np.int64)
    m2 = grid.as_2d(mask)
    full = m2.all(axis=0)
    first_out = np.argmin(m2, axis=0) + 1
    return np.where(full, grid.n_r + 1, first_out)


def mask_from_exit_rows(grid: PolarGrid, exits) -> np.ndarray:
    exits = np.asarray(exits)
    mask = grid.empty_mask()
    if np.all(exits == 0):
        return mask
    mask[0] = True
    rows = np.arange(1, grid.n_r + 1)[:, None]
    mask[1:] = (rows < exits[None, :]).ravel()
    return mask


def is_star_shaped(grid: PolarGrid, mask) -> bool:
    mask = np.asarray(mask, bool)
    if not mask[0]:
        return not mask.any()
    return bool(np.array_equal(mask, mask_from_exit_rows(grid, exit_rows(grid, mask))))


def rectify(grid: PolarGrid, mask) -> np.ndarray:
    """Clamp every column to its maximal prefix, restoring star-shapedness."""
    return mask_from_exit_rows(grid, exit_rows(grid, mask))


# -- the recursion -----------------------------------------------------------------


def _threshold(grid: PolarGrid, omega, scn: Scenario):
    dist = grid.distances(grid.q_node, omega)
    # ties go to "not in Omega": the defining inequality is strict
    cand = ~omega & (dist > scn.lam * grid.radii)
    return cand, dist


def omega_step(grid: PolarGrid, omega, scn: Scenario) -> np.ndarray:
    omega = np.asarray(omega, bool)
    if omega[grid.q_node]:
        raise PreconditionError("q lies inside the current region")
    new, _ = _step(grid, omega, scn)
    return new


def _step(grid, omega, scn):
    cand, dist = _threshold(grid, omega, scn)
    if cand[grid.q_node]:
        raise InvalidStateError("q was engulfed by the region")
    return rectify(grid, omega | cand), dist


@dataclass
class FixedPoint:
    omega: np.ndarray
    distance: np.ndarray
    iterations: int
    added: List[int]
    converged: bool
    chain: Optional[List[np.ndarray]] = field(default=None, repr=False)


def omega_fixed_point(grid: PolarGrid, scn: Scenario, max_iter: Optional[int] = None, keep_chain: bool = False) -> FixedPoint:
    """Iterate the obstacle-distance step from the empty set until nothing is added.

    ``distance`` is the field d_Omega(., q) for the returned region (exact
    when converged).  Monotonicity bounds the iteration count by the node
    count, which is the default cap.
    """
    if max_iter is None:
        max_iter = grid.n_nodes
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    omega = grid.empty_mask()
    added = []
    chain = [omega] if keep_chain else None
    converged = False
    dist = None
    for it in range(1, max_iter + 1):
        new, dist = _step(grid, omega, scn)
        n_new = int(new.sum() - omega.sum())
        added.append(n_new)
        omega = new
        if keep_chain:
            chain.append(omega)
        log.debug("iteration %d added %d nodes", it, n_new)
        if n_new == 0:
            converged = True
            break
    if not converged:
        warnings.warn(f"fixed point not reached after {max_iter} iterations", NonConvergenceWarning, stacklevel=2)
        dist = grid.distances(grid.q_node, omega)
    iterations = len(added)
    return FixedPoint(omega, dist, iterations, added, converged, chain)


# -- post-processing ------------------------------------------------------------------


@dataclass(frozen=True)
class RadialProfile:
    f: np.ndarray
    exit_row: np.ndarray
    theta: np.ndarray
    dr: float

    @property
    def finite(self) -> np.ndarray:
        return np.isfinite(self.f)

    @property
    def max_finite(self) -> float:
        fin = self.f[self.finite]
        return float(fin.max()) if fin.size else math.nan

    @property
    def escape_directions(self) -> np.ndarray:
        return self.theta[~self.finite]

    def mirror_defect(self) -> float:
        """max_j |f_j - f_{-j}| (inf when exactly one side escapes)."""
        g = self.f[(-np.arange(self.f.size)) % self.f.size]
        both_inf = np.isinf(self.f) & np.isinf(g)
        diff = np.where(both_inf, 0.0, np.abs(np.where(both_inf, 0.0, self.f) - np.where(both_inf, 0.0, g)))
        return float(diff.max())

    def at(self, theta: float) -> float:
        n = self.f.size
        return float(self.f[int(round(theta / (2 * math.pi / n))) % n])


def extract_profile(grid: PolarGrid, omega) -> RadialProfile:
    if not is_star_shaped(grid, omega):
        raise ContractViolation("region mask is not column star-shaped")
    exits = exit_rows(grid, omega)
    f = np.where(exits > grid.n_r, math.inf, exits * grid.dr)
    return RadialProfile(f.astype(float), exits, grid.thetas, grid.dr)


def time_slices(grid: PolarGrid, fp: FixedPoint, scn: Scenario, times):
    """(A_t, B_t) masks for each time: the complement's closed ball and Omega's open ball."""
    r = grid.radii
    out = []
    for t in times:
        if t < 0:
            raise ValueError("times must be nonnegative")
        if t == 0:
            A = grid.empty_mask()
            A[grid.q_node] = True
            B = grid.empty_mask()
            B[0] = True
        else:
            B = fp.omega & (r < t)
            A = ~fp.omega & (fp.distance <= scn.lam * t)
        out.append((A, B))
    return out


@dataclass(frozen=True)
class Verdict:
    kind: str  # "bounded" | "escaping" | "inconclusive"
    margin: float
    sector: Optional[tuple] = None

    def __str__(self):
        return self.kind


def _pi_column(grid: PolarGrid) -> int:
    return grid.theta_index(math.pi)


def classify_boundedness(grid: PolarGrid, profile: RadialProfile) -> Verdict:
    margin = BOUNDARY_MARGIN_CELLS * grid.dr
    inf = ~profile.finite
    if not inf.any():
        if profile.max_finite <= grid.r_max - margin:
            return Verdict("bounded", grid.r_max - profile.max_finite)
        return Verdict("inconclusive", grid.r_max - profile.max_finite)
    jpi = _pi_column(grid)
    if inf[jpi]:
        n = grid.n_theta
        if inf.all():
            return Verdict("escaping", 0.0, (0.0, 2 * math.pi))
        lo = jpi
        while inf[(lo - 1) % n]:
            lo -= 1
        hi = jpi
        while inf[(hi + 1) % n]:
            hi += 1
        return Verdict("escaping", 0.0, (lo * grid.dtheta, hi * grid.dtheta))
    return Verdict("inconclusive", 0.0)


def boundary_nodes(grid: PolarGrid, omega) -> np.ndarray:
    """Non-member nodes with a radial or angular neighbour (or pole link) in the region."""
    omega = np.asarray(omega, bool)
    m2 = grid.as_2d(omega)
    near = np.zeros_like(m2)
    near[1:] |= m2[:-1]
    near[:-1] |= m2[1:]
    near |= np.roll(m2, 1, axis=1) | np.roll(m2, -1, axis=1)
    if omega[0]:
        near[0] = True
    out = np.zeros(grid.n_nodes, bool)
    out[1:] = (near & ~m2).ravel()
    if not omega[0] and m2[0].any():
        out[0] = True
    return out


def boundary_residual(grid: PolarGrid, fp: FixedPoint, scn: Scenario) -> float:
    """max over boundary nodes of |d_Omega(x, q) - lam r(x)| / max(1, lam r(x))."""
    nodes = boundary_nodes(grid, fp.omega)
    if not nodes.any():
        return 0.0
    lr = scn.lam * grid.radii[nodes]
    return float(np.max(np.abs(fp.distance[nodes] - lr) / np.maximum(1.0, lr)))


# -- end-to-end ----------------------------------------------------------------------


def default_r_max(metric: SurfaceMetric, scn: Scenario) -> float:
    T = trapping_radius_bound(metric, scn)
    r = 3.0 * scn.ell
    if math.isfinite(T):
        r = max(r, 1.2 * T)
    return r


@dataclass
class Solution:
    grid: PolarGrid
    scenario: Scenario
    fixed_point: FixedPoint
    profile: RadialProfile
    verdict: Verdict
    residual: float

    @property
    def omega(self):
        return self.fixed_point.omega


def solve(
    metric: SurfaceMetric,
    scn: Scenario,
    r_max: Optional[float] = None,
    n_r: int = 400,
    n_theta: int = 720,
    stencil_order: int = 2,
    max_iter: Optional[int] = None,
    keep_chain: bool = False,
    node_cap: Optional[int] = None,
) -> Solution:
    if r_max is None:
        r_max = default_r_max(metric, scn)
    kw = {} if node_cap is None else {"node_cap": node_cap}
    grid = build_grid(metric, scn, r_max, n_r, n_theta, stencil_order, **kw)
    fp = omega_fixed_point(grid, scn, max_iter=max_iter, keep_chain=keep_chain)
    profile = extract_profile(grid, fp.omega)
    verdict = classify_boundedness(grid, profile)
    residual = boundary_residual(grid, fp, scn)
    return Solution(grid, scn, fp, profile, verdict, residual)


def solve_with_doubling(metric: SurfaceMetric, scn: Scenario, r_max: Optional[float] = None, max_doublings: int = 3, **kw):
    """Re-run at 2*r_max until two consecutive runs agree on a definite verdict.

    Returns the list of solutions; the last one carries the final verdict.
    """
    if r_max is None:
        r_max = default_r_max(metric, scn)
    runs = [solve(metric, scn, r_max=r_max, **kw)]
    for _ in range(max_doublings):
        r_max *= 2.0
        runs.append(solve(metric, scn, r_max=r_max, **kw))
        prev, cur = runs[-2].verdict.kind, runs[-1].verdict.kind
        if prev == cur and cur != "inconclusive":
            break
    return runs
