import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from growthfront.analytic import Scenario
from growthfront.errors import DomainError, PreconditionError, ResourceError
from growthfront.grid import build_grid, nominal_stencil_factor, segment_length
from growthfront.metric import SurfaceMetric

EUC = SurfaceMetric.euclidean()
HYP = SurfaceMetric.hyperbolic()


def floyd_warshall(n, edges, blocked):
    """All-pairs shortest paths over the explicit edge list, honouring intermediate-node blocking."""
    d = np.full((n, n), np.inf)
    np.fill_diagonal(d, 0.0)
    for u, v, w, mids in edges:
        if blocked[u] or blocked[v] or any(blocked[m] for m in mids):
            continue
        d[u, v] = min(d[u, v], w)
        d[v, u] = min(d[v, u], w)
    for k in range(n):
        if blocked[k]:
            continue
        d = np.minimum(d, d[:, k : k + 1] + d[k : k + 1, :])
    return d


# -- edge lengths -------------------------------------------------------------------


def test_arc_segment_two_point_gauss():
    # G(r) = r is constant along an arc at r = 1, so both Gauss nodes see the same integrand
    got = float(segment_length(EUC, 1.0, 0.0, math.pi / 2))
    assert got == pytest.approx(math.pi / 2, rel=1e-15)
    # hand evaluation of the rule on a slanted segment
    g = (0.5 - 0.5 / math.sqrt(3), 0.5 + 0.5 / math.sqrt(3))
    hand = 0.5 * sum(math.sqrt(1 + ((1 + s) * 0.3) ** 2) for s in g)
    assert float(segment_length(EUC, 1.0, 1.0, 0.3)) == pytest.approx(hand, rel=1e-15)


def test_composite_panels_converge():
    # r = 1 + s, theta = 0.3 s in the plane
    exact = float(mpmath.quad(lambda s: mpmath.sqrt(1 + (0.3 * (1 + s)) ** 2), [0, 1]))
    assert float(segment_length(EUC, 1.0, 1.0, 0.3, panels=64)) == pytest.approx(exact, rel=1e-10)
    assert abs(float(segment_length(EUC, 1.0, 1.0, 0.3, panels=4)) - exact) < 1e-5


def test_radial_and_pole_edges():
    scn = Scenario(2, 1)
    g = build_grid(EUC, scn, 4.0, 16, 16, stencil_order=1)
    assert g.pole_length == g.dr
    for i in range(1, g.n_r):
        radial = [w for di, dj, w, _ in g.neighbours(i) if (di, dj) == (1, 0)]
        assert radial == [pytest.approx(g.dr, rel=1e-15)]


def test_edges_strictly_positive():
    g = build_grid(HYP, Scenario(2, 1), 3.0, 32, 64, stencil_order=3)
    assert np.all(g.nb_len > 0)


def test_dr_snaps_to_q():
    g = build_grid(EUC, Scenario(2, 1.3), 4.0, 50, 64)
    assert g.q_row * g.dr == pytest.approx(1.3, rel=1e-15)
    assert g.r_max == pytest.approx(g.n_r * g.dr)


def test_build_grid_rejects_bad_parameters():
    scn = Scenario(2, 1)
    with pytest.raises(DomainError):
        build_grid(EUC, scn, 3.0, 8, 64)
    with pytest.raises(DomainError):
        build_grid(EUC, scn, 3.0, 64, 64, stencil_order=4)
    with pytest.raises(DomainError):
        build_grid(EUC, scn, 0.5, 64, 64)
    with pytest.raises(ResourceError):
        build_grid(EUC, scn, 3.0, 400, 720, node_cap=10_000)


def test_nominal_stencil_factors():
    assert nominal_stencil_factor(1) == pytest.approx(1 / math.cos(math.pi / 8))
    assert nominal_stencil_factor(1) < 1.083
    assert nominal_stencil_factor(2) < 1.02
    assert nominal_stencil_factor(3) < nominal_stencil_factor(2)


@pytest.mark.parametrize("order", [1, 2, 3])
def test_row_stencil_factor_near_nominal(order):
    g = build_grid(EUC, Scenario(2, 1), 3.0, 200, 360, stencil_order=order)
    f = g.stencil_factor()
    # away from the pole the realised directions track the targets
    far = f[40:-12]
    assert np.all(far <= nominal_stencil_factor(order) * 1.02)


# -- distance fields -------------------------------------------------------------------


def test_distance_to_pole_is_ell():
    g = build_grid(EUC, Scenario(2, 1), 3.0, 120, 240)
    d = g.distances(g.q_node)
    assert d[g.q_node] == 0.0
    assert d[0] == pytest.approx(1.0, rel=1e-13)


@pytest.mark.parametrize("order, bound", [(1, 1.083), (2, 1.02)])
def test_sqrt2_node_within_stencil_bound(order, bound):
    g = build_grid(EUC, Scenario(2, 1), 3.0, 300, 720, stencil_order=order)
    d = g.distances(g.q_node)
    node = g.node(g.q_row, 720 // 4)
    exact = math.sqrt(2.0)
    assert exact <= d[node] <= bound * exact


def test_far_field_overestimate_bounded_order2():
    g = build_grid(EUC, Scenario(2, 1), 3.0, 300, 720, stencil_order=2)
    d = g.distances(g.q_node)
    r = g.radii
    th = np.concatenate([[0.0], np.tile(g.thetas, g.n_r)])
    exact = np.sqrt(r * r + 1 - 2 * r * np.cos(th))
    far = exact > 0.5
    ratio = d[far] / exact[far]
    assert ratio.min() >= 1 - 1e-12
    assert ratio.max() <= 1.02


def test_everything_blocked():
    g = build_grid(EUC, Scenario(2, 1), 3.0, 16, 16)
    blocked = np.ones(g.n_nodes, bool)
    blocked[g.q_node] = False
    d = g.distances(g.q_node, blocked)
    assert d[g.q_node] == 0.0
    assert np.all(np.isinf(np.delete(d, g.q_node)))


def test_source_in_obstacle_rejected():
    g = build_grid(EUC, Scenario(2, 1), 3.0, 16, 16)
    blocked = g.empty_mask()
    blocked[g.q_node] = True
    with pytest.raises(PreconditionError):
        g.distances(g.q_node, blocked)


def test_distance_is_lipschitz_along_edges():
    g = build_grid(HYP, Scenario(2, 1), 2.5, 24, 32, stencil_order=2)
    rng = np.random.default_rng(3)
    blocked = rng.random(g.n_nodes) < 0.2
    blocked[g.q_node] = False
    d = g.distances(g.q_node, blocked)
    for u, v, w, mids in g.edges():
        if blocked[u] or blocked[v] or any(blocked[m] for m in mids):
            continue
        if np.isfinite(d[u]) or np.isfinite(d[v]):
            assert abs(d[u] - d[v]) <= w * (1 + 1e-12)


def test_obstacle_cannot_be_tunnelled():
    g = build_grid(EUC, Scenario(2, 1), 4.0, 32, 64, stencil_order=3)
    # a full ring of blocked nodes separates the inside from the outside
    blocked = g.empty_mask()
    ring = 20
    for j in range(g.n_theta):
        blocked[g.node(ring, j)] = True
    d = g.distances(g.q_node, blocked)
    outside = g.radii > ring * g.dr
    assert np.all(np.isinf(d[outside]))


@pytest.mark.parametrize("seed", range(20))
def test_matches_brute_force(seed):
    metric = EUC if seed % 2 == 0 else HYP
    g = build_grid(metric, Scenario(2, 1), 2.0, 16, 16, stencil_order=1 + seed % 3)
    rng = np.random.default_rng(seed)
    blocked = rng.random(g.n_nodes) < 0.25
    source = int(rng.integers(g.n_nodes))
    blocked[source] = False
    ref = floyd_warshall(g.n_nodes, g.edges(), blocked)[source]
    ref[blocked] = np.inf
    got = g.distances(source, blocked)
    np.testing.assert_array_equal(np.isinf(got), np.isinf(ref))
    fin = np.isfinite(ref)
    np.testing.assert_allclose(got[fin], ref[fin], rtol=1e-12, atol=0)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.0, 0.4))
def test_blocking_never_shortens(seed, density):
    g = build_grid(EUC, Scenario(2, 1), 2.0, 16, 24)
    rng = np.random.default_rng(seed)
    blocked = rng.random(g.n_nodes) < density
    blocked[g.q_node] = False
    free = g.distances(g.q_node)
    obst = g.distances(g.q_node, blocked)
    ok = ~blocked
    assert np.all(obst[ok] >= free[ok] - 1e-12)
