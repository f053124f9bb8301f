"""Compiled inner loops: heat-bath site updates and FK sign resampling.

Uniform variates are drawn by the caller and passed in, so the kernels are
deterministic functions of their inputs.
"""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def conditional_weights(h, i, nbr, sgn, off, vals, W, beta, M, w):
    """Unnormalised conditional weights of site ``i`` written into ``w``; returns their sum."""
    K = 2 * M + 1
    deg = nbr.shape[1]
    emin = np.inf
    for a in range(K):
        k = a - M
        e = 0.0
        for j in range(deg):
            y = nbr[i, j]
            if y < 0:
                break
            e += vals[W + sgn[i, j] * (k - h[y]) + off[i, j]]
        w[a] = e
        if e < emin:
            emin = e
    tot = 0.0
    for a in range(K):
        w[a] = np.exp(-beta * (w[a] - emin))
        tot += w[a]
    return tot


@njit(cache=True, nogil=True)
def heat_bath_sweep(h, nbr, sgn, off, vals, W, beta, M, u, w):
    """One ordered sweep over the sites, resampling each from its conditional."""
    n = nbr.shape[0]
    K = 2 * M + 1
    for i in range(n):
        tot = conditional_weights(h, i, nbr, sgn, off, vals, W, beta, M, w)
        target = u[i] * tot
        acc = 0.0
        pick = K - 1
        for a in range(K):
            acc += w[a]
            if acc > target:
                pick = a
                break
        h[i] = pick - M


@njit(cache=True, nogil=True)
def _find(parent, x):
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


@njit(cache=True, nogil=True)
def fk_signs(n_sites, edge_index, K, u_edges, u_signs, sigma):
    """Swendsen-Wang update of ``sigma`` (in place) with boundary spins wired to ``+``.

    A bond whose endpoint spins agree is opened with probability
    1 - exp(-2 K[e]); disagreeing bonds stay closed. Node ``n_sites`` is the
    wired boundary: its cluster gets +1, every other cluster a fair sign from
    ``u_signs`` at the cluster root. Returns the number of open edges.
    """
    parent = np.arange(n_sites + 1)
    n_open = 0
    for e in range(edge_index.shape[0]):
        t = edge_index[e, 0]
        hd = edge_index[e, 1]
        if t > n_sites:
            t = n_sites
        if hd > n_sites:
            hd = n_sites
        st = 1 if t == n_sites else sigma[t]
        sh = 1 if hd == n_sites else sigma[hd]
        if st == sh and K[e] > 0.0 and u_edges[e] < -np.expm1(-2.0 * K[e]):
            n_open += 1
            a = _find(parent, t)
            b = _find(parent, hd)
            if a != b:
                # keep the wired node as a root so its sign is fixed
                if a == n_sites:
                    parent[b] = a
                elif b == n_sites:
                    parent[a] = b
                elif a < b:
                    parent[b] = a
                else:
                    parent[a] = b
    wired = _find(parent, n_sites)
    for x in range(n_sites):
        r = _find(parent, x)
        if r == wired:
            sigma[x] = 1
        elif u_signs[r] < 0.5:
            sigma[x] = 1
        else:
            sigma[x] = -1
    return n_open


@njit(cache=True, nogil=True)
def abs_couplings(h, n_sites, edge_index, vals, W, beta, K):
    """K_xy = -(β/2)(V(|φ_y| - |φ_x|) - V(|φ_y| + |φ_x|)) for the current heights."""
    for e in range(edge_index.shape[0]):
        a = abs(h[edge_index[e, 0]])
        b = abs(h[edge_index[e, 1]])
        K[e] = -0.5 * beta * (vals[W + b - a] - vals[W + b + a])


@njit(cache=True, nogil=True)
def sign_cluster_move(h, n_sites, edge_index, vals, W, beta, u_edges, u_signs, K, sigma):
    abs_couplings(h, n_sites, edge_index, vals, W, beta, K)
    for x in range(n_sites):
        sigma[x] = -1 if h[x] < 0 else 1
    fk_signs(n_sites, edge_index, K, u_edges, u_signs, sigma)
    for x in range(n_sites):
        h[x] = sigma[x] * abs(h[x])


@njit(cache=True, nogil=True)
def run_block(
    h, nbr, sgn, off, vals, W, beta, M, edge_index, root, cluster_every,
    u_hb, u_edges, u_signs, sweep0, out_root, out_edge_hits,
):
    """Run ``u_hb.shape[0]`` hybrid sweeps, recording φ_r and window-edge hits per sweep."""
    n = nbr.shape[0]
    w = np.empty(2 * M + 1)
    K = np.empty(edge_index.shape[0])
    sigma = np.empty(n, dtype=np.int64)
    for s in range(u_hb.shape[0]):
        heat_bath_sweep(h, nbr, sgn, off, vals, W, beta, M, u_hb[s], w)
        if cluster_every > 0 and (sweep0 + s + 1) % cluster_every == 0:
            sign_cluster_move(h, n, edge_index, vals, W, beta, u_edges[s], u_signs[s], K, sigma)
        out_root[s] = h[root]
        hits = 0
        for i in range(n):
            if h[i] == M or h[i] == -M:
                hits += 1
        out_edge_hits[s] = hits
