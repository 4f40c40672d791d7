"""Polar discretization of a rotationally symmetric surface.

Nodes sit at ``(i * dr, j * dtheta)`` for ``1 <= i <= n_r`` plus a single
pole node.  Each row carries a neighbour stencil chosen so that the
*physical* directions of its edges are close to uniformly spaced angles;
an order-k stencil targets spacing ``90 / 2**k`` degrees per quadrant.
Because the metric does not depend on theta, a row's offsets and edge
lengths are shared by all nodes of that row.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._kernels import dijkstra
from .errors import DomainError, PreconditionError, ResourceError
from .metric import SurfaceMetric

DEFAULT_NODE_CAP = 4_000_000
RADIAL_REACH = 12
_GAUSS = (0.5 - 0.5 / math.sqrt(3.0), 0.5 + 0.5 / math.sqrt(3.0))
_TIE_ANGLE = math.radians(0.5)


def nominal_stencil_factor(order: int) -> float:
    """Worst-case length overestimate of an ideal order-k direction set."""
    return 1.0 / math.cos(math.pi / 2 ** (order + 2))


def segment_length(metric: SurfaceMetric, r0, d_r, d_theta, panels=1):
    """Metric length of the coordinate-straight segment from (r0, .) to (r0+d_r, .+d_theta).

    Composite 2-point Gauss-Legendre with ``panels`` equal panels.
    """
    r0 = np.asarray(r0, float)
    d_r = np.asarray(d_r, float)
    d_theta = np.asarray(d_theta, float)
    total = np.zeros(np.broadcast(r0, d_r, d_theta).shape)
    for p in range(panels):
        for g in _GAUSS:
            s = (p + g) / panels
            G = metric.G(r0 + s * d_r)
            total = total + np.sqrt(d_r * d_r + (G * d_theta) ** 2)
    return total / (2 * panels)


def _round_away(x):
    return int(math.copysign(math.floor(abs(x) + 0.5), x))


def _intermediates(a, b):
    m = max(abs(a), abs(b))
    out = []
    for k in range(1, m):
        c = (_round_away(k * a / m), _round_away(k * b / m))
        if c != (0, 0) and c != (a, b) and c not in out:
            out.append(c)
    return out


def _choose_offset(phi, rho, b_max):
    """Integer offset (a, b) whose local physical angle atan(b*rho/a) is close to phi."""
    t = math.tan(phi)
    cands = []
    for a in range(1, RADIAL_REACH + 1):
        b = int(round(a * t / rho))
        for bb in {max(1, min(b_max, b)), max(1, min(b_max, b + 1)), max(1, min(b_max, b - 1))}:
            err = abs(math.atan2(bb * rho, a) - phi)
            cands.append((err, math.hypot(a, bb * rho), a, bb))
    best = min(c[0] for c in cands)
    err, _, a, b = min((c for c in cands if c[0] <= best + _TIE_ANGLE), key=lambda c: c[1])
    g = math.gcd(a, b)
    return a // g, b // g


@dataclass(frozen=True, eq=False)
class PolarGrid:
    metric: SurfaceMetric
    r_max: float
    n_r: int
    n_theta: int
    stencil_order: int
    dr: float
    dtheta: float
    q_row: int
    row_ptr: np.ndarray = field(repr=False)
    nb_di: np.ndarray = field(repr=False)
    nb_dj: np.ndarray = field(repr=False)
    nb_len: np.ndarray = field(repr=False)
    mid_ptr: np.ndarray = field(repr=False)
    mid_di: np.ndarray = field(repr=False)
    mid_dj: np.ndarray = field(repr=False)

    # -- indexing -------------------------------------------------------------

    @property
    def n_nodes(self) -> int:
        return 1 + self.n_r * self.n_theta

    def node(self, i: int, j: int) -> int:
        if i == 0:
            return 0
        return 1 + (i - 1) * self.n_theta + (j % self.n_theta)

    def row_col(self, node: int):
        if node == 0:
            return 0, 0
        return (node - 1) // self.n_theta + 1, (node - 1) % self.n_theta

    @property
    def q_node(self) -> int:
        return self.node(self.q_row, 0)

    @property
    def pole_length(self) -> float:
        return self.dr

    @property
    def radii(self) -> np.ndarray:
        """Radial coordinate of every node (flat, pole first)."""
        r = np.repeat(np.arange(1, self.n_r + 1) * self.dr, self.n_theta)
        return np.concatenate([[0.0], r])

    @property
    def thetas(self) -> np.ndarray:
        return np.arange(self.n_theta) * self.dtheta

    def as_2d(self, flat):
        """View of a per-node array as (n_r, n_theta), dropping the pole."""
        return np.asarray(flat)[1:].reshape(self.n_r, self.n_theta)

    def empty_mask(self):
        return np.zeros(self.n_nodes, dtype=bool)

    def theta_index(self, theta: float) -> int:
        return int(round(theta / self.dtheta)) % self.n_theta

    # -- graph --------------------------------------------------------------------

    def neighbours(self, i: int):
        """(di, dj, length, intermediates) for every stencil entry of row i."""
        out = []
        for e in range(self.row_ptr[i], self.row_ptr[i + 1]):
            mids = [(int(self.mid_di[m]), int(self.mid_dj[m])) for m in range(self.mid_ptr[e], self.mid_ptr[e + 1])]
            out.append((int(self.nb_di[e]), int(self.nb_dj[e]), float(self.nb_len[e]), mids))
        return out

    def edges(self):
        """Explicit undirected edge list ``(u, v, length, intermediate_nodes)``.

        Meant for small grids and cross-checks; the solver never builds it.
        """
        seen = {}
        for j in range(self.n_theta):
            seen[(0, self.node(1, j))] = (self.pole_length, ())
        for i in range(1, self.n_r + 1):
            for di, dj, length, mids in self.neighbours(i):
                for j in range(self.n_theta):
                    u = self.node(i, j)
                    v = self.node(i + di, j + dj)
                    key = (min(u, v), max(u, v))
                    if key not in seen:
                        seen[key] = (length, tuple(self.node(i + mi, j + mj) for mi, mj in mids))
        return [(u, v, w, mids) for (u, v), (w, mids) in seen.items()]

    def stencil_factor(self) -> np.ndarray:
        """Per-row worst-case overestimate from the largest gap between edge directions."""
        out = np.empty(self.n_r)
        for i in range(1, self.n_r + 1):
            rho = float(self.metric.G(i * self.dr)) * self.dtheta / self.dr
            ang = np.sort(
                np.mod(
                    np.arctan2(self.nb_dj[self.row_ptr[i] : self.row_ptr[i + 1]] * rho, self.nb_di[self.row_ptr[i] : self.row_ptr[i + 1]]),
                    2 * math.pi,
                )
            )
            gaps = np.diff(np.concatenate([ang, [ang[0] + 2 * math.pi]]))
            beta = float(gaps.max())
            out[i - 1] = math.inf if beta >= math.pi else 1.0 / math.cos(beta / 2)
        return out

    def distances(self, source: int, obstacle=None) -> np.ndarray:
        blocked = self.empty_mask() if obstacle is None else np.asarray(obstacle, dtype=bool)
        if blocked.shape != (self.n_nodes,):
            raise ValueError("obstacle mask has the wrong shape")
        if blocked[source]:
            raise PreconditionError("source node lies inside the obstacle")
        return dijkstra(
            self.n_r, self.n_theta, self.row_ptr, self.nb_di, self.nb_dj, self.nb_len,
            self.mid_ptr, self.mid_di, self.mid_dj, self.pole_length, int(source), blocked,
        )


def _row_edges(metric, n_r, n_theta, dr, dtheta, order):
    """Canonical undirected edge types keyed by (lower row, a >= 0, b)."""
    b_max = max(1, n_theta // 8)
    targets = [k * (math.pi / 2) / 2**order for k in range(1, 2**order)]
    edges = set()
    for i in range(1, n_r + 1):
        rho = float(metric.G(i * dr)) * dtheta / dr
        quad = {(1, 0), (0, 1), (1, 1)}
        for phi in targets:
            quad.add(_choose_offset(phi, rho, b_max))
        for a, b in quad:
            for sa, sb in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
                da, db = sa * a, sb * b
                ti = i + da
                if ti < 1 or ti > n_r:
                    continue
                if any(i + mi < 1 for mi, _ in _intermediates(da, db)):
                    continue
                if da < 0 or (da == 0 and db < 0):
                    edges.add((ti, -da, -db))
                else:
                    edges.add((i, da, db))
    return sorted(edges)


def build_grid(
    metric: SurfaceMetric,
    scn,
    r_max: float,
    n_r: int,
    n_theta: int,
    stencil_order: int = 2,
    node_cap: int = DEFAULT_NODE_CAP,
) -> PolarGrid:
    """Discretize the surface; dr is nudged so that q falls exactly on a node.

    The returned grid's ``r_max`` is ``n_r * dr`` after that adjustment.
    """
    if n_r < 16 or n_theta < 16:
        raise DomainError("n_r and n_theta must both be at least 16")
    if stencil_order not in (1, 2, 3):
        raise DomainError("stencil_order must be 1, 2 or 3")
    if not r_max > scn.ell:
        raise DomainError("r_max must exceed ell")
    if 1 + n_r * n_theta > node_cap:
        raise ResourceError(f"grid of {1 + n_r * n_theta} nodes exceeds the cap of {node_cap}")
    if r_max > metric.r_limit:
        raise DomainError(f"r_max={r_max} exceeds the range where G is known ({metric.r_limit})")
    q_row = max(1, int(round(scn.ell * n_r / r_max)))
    if q_row >= n_r:
        q_row = n_r - 1
    dr = scn.ell / q_row
    dtheta = 2 * math.pi / n_theta

    canon = _row_edges(metric, n_r, n_theta, dr, dtheta, stencil_order)
    lengths = {}
    mids = {}
    for i, a, b in canon:
        panels = min(64, max(1, a, b))
        lengths[(i, a, b)] = float(segment_length(metric, i * dr, a * dr, b * dtheta, panels))
        mids[(i, a, b)] = _intermediates(a, b)

    per_row = [[] for _ in range(n_r + 2)]
    for i, a, b in canon:
        w = lengths[(i, a, b)]
        m = mids[(i, a, b)]
        per_row[i].append((a, b, w, m))
        per_row[i + a].append((-a, -b, w, [(mi - a, mj - b) for mi, mj in m]))

    row_ptr = np.zeros(n_r + 2, np.int64)
    di, dj, ln, mptr, mdi, mdj = [], [], [], [0], [], []
    for i in range(n_r + 1):
        row_ptr[i] = len(di)
        for a, b, w, m in sorted(per_row[i], key=lambda t: (t[0], t[1])):
            di.append(a)
            dj.append(b)
            ln.append(w)
            for mi, mj in m:
                mdi.append(mi)
                mdj.append(mj)
            mptr.append(len(mdi))
    row_ptr[n_r + 1] = len(di)
    return PolarGrid(
        metric=metric,
        r_max=n_r * dr,
        n_r=n_r,
        n_theta=n_theta,
        stencil_order=stencil_order,
        dr=dr,
        dtheta=dtheta,
        q_row=q_row,
        row_ptr=row_ptr,
        nb_di=np.asarray(di, np.int64),
        nb_dj=np.asarray(dj, np.int64),
        nb_len=np.asarray(ln, np.float64),
        mid_ptr=np.asarray(mptr, np.int64),
        mid_di=np.asarray(mdi, np.int64),
        mid_dj=np.asarray(mdj, np.int64),
    )
