"""Numba kernels for label-setting shortest paths on the polar stencil graph.

Node numbering: 0 is the pole, node (i, j) with 1 <= i <= n_r and
0 <= j < n_theta is ``1 + (i - 1) * n_theta + j``.  Neighbour offsets are
stored per row (rotational symmetry makes them independent of j).
"""
import numpy as np
from numba import njit


@njit(cache=True)
def _push(keys, vals, size, key, val):
    if size == keys.shape[0]:
        nk = np.empty(2 * size, np.float64)
        nv = np.empty(2 * size, np.int64)
        nk[:size] = keys
        nv[:size] = vals
        keys = nk
        vals = nv
    pos = size
    keys[pos] = key
    vals[pos] = val
    while pos > 0:
        parent = (pos - 1) >> 1
        if keys[parent] <= keys[pos]:
            break
        keys[parent], keys[pos] = keys[pos], keys[parent]
        vals[parent], vals[pos] = vals[pos], vals[parent]
        pos = parent
    return keys, vals, size + 1


@njit(cache=True)
def _pop(keys, vals, size):
    key = keys[0]
    val = vals[0]
    size -= 1
    keys[0] = keys[size]
    vals[0] = vals[size]
    pos = 0
    while True:
        left = 2 * pos + 1
        if left >= size:
            break
        child = left
        if left + 1 < size and keys[left + 1] < keys[left]:
            child = left + 1
        if keys[pos] <= keys[child]:
            break
        keys[pos], keys[child] = keys[child], keys[pos]
        vals[pos], vals[child] = vals[child], vals[pos]
        pos = child
    return key, val, size


@njit(cache=True)
def dijkstra(n_r, n_th, row_ptr, nb_di, nb_dj, nb_len, mid_ptr, mid_di, mid_dj, pole_len, source, blocked):
    n_nodes = 1 + n_r * n_th
    dist = np.full(n_nodes, np.inf)
    done = np.zeros(n_nodes, np.bool_)
    keys = np.empty(1024, np.float64)
    vals = np.empty(1024, np.int64)
    size = 0
    dist[source] = 0.0
    keys, vals, size = _push(keys, vals, size, 0.0, source)
    while size > 0:
        d, u, size = _pop(keys, vals, size)
        if done[u]:
            continue
        done[u] = True
        if u == 0:
            for j in range(n_th):
                v = 1 + j
                if blocked[v] or done[v]:
                    continue
                nd = d + pole_len
                if nd < dist[v]:
                    dist[v] = nd
                    keys, vals, size = _push(keys, vals, size, nd, v)
            continue
        i = (u - 1) // n_th + 1
        j = (u - 1) % n_th
        if i == 1 and not blocked[0] and not done[0]:
            nd = d + pole_len
            if nd < dist[0]:
                dist[0] = nd
                keys, vals, size = _push(keys, vals, size, nd, 0)
        for e in range(row_ptr[i], row_ptr[i + 1]):
            ti = i + nb_di[e]
            tj = (j + nb_dj[e]) % n_th
            v = 1 + (ti - 1) * n_th + tj
            if blocked[v] or done[v]:
                continue
            nd = d + nb_len[e]
            if nd >= dist[v]:
                continue
            ok = True
            for m in range(mid_ptr[e], mid_ptr[e + 1]):
                mi = i + mid_di[m]
                mj = (j + mid_dj[m]) % n_th
                if blocked[1 + (mi - 1) * n_th + mj]:
                    ok = False
                    break
            if ok:
                dist[v] = nd
                keys, vals, size = _push(keys, vals, size, nd, v)
    return dist
