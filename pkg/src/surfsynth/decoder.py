"""Minimum-weight matching over a detector graph.

Flag detectors are not matched.  A fired flag instead switches on the edges of
the faults that fire it, which are relaxed into the per-shot distances between
syndrome defects.  Defects are then split into clusters that can never profit
from being paired across.  A shot or cluster that is exactly the signature of
a known multi-detector fault takes that fault's observable, provided the
defects that fault leaves in the other error sector are present too; any other
cluster is matched exactly by a subset recursion when small and greedily
otherwise.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

EXACT_LIMIT = 14


class MatchingGraph:
    """Detector graph with a boundary node and all-pairs path data."""

    def __init__(self, n_det: int, edges: dict[tuple[int, ...], tuple[float, int]],
                 hyper: dict[tuple[int, ...], int] | None = None,
                 partners: dict[tuple[int, ...], list[tuple[int, ...]]] | None = None,
                 flags=(), conditional: dict[tuple[int, ...], list[tuple[tuple[int, ...], float, int]]] | None = None):
        """hyper maps multi-detector signatures to observables; partners lists,
        per signature, the other-sector defects its faults leave (any one must
        be present for the signature to be trusted; absent means always).

        flags are detectors never matched.  conditional maps a sorted tuple of
        flags to (dets, cost, obs) edges usable only when all of them fired.
        """
        self.n_det = n_det
        self.boundary = n_det
        n = n_det + 1
        best: dict[tuple[int, int], tuple[float, int]] = {}
        for dets, (p, obs) in edges.items():
            if len(dets) == 1:
                a, b = dets[0], self.boundary
            elif len(dets) == 2:
                a, b = dets
            else:
                raise ValueError("matching graph edges touch at most two detectors")
            p = min(max(p, 1e-15), 0.5 - 1e-12)
            w = math.log((1 - p) / p)
            key = (min(a, b), max(a, b))
            if key not in best or w < best[key][0]:
                best[key] = (w, obs)
        self.edges = best
        rows, cols, ws = [], [], []
        for (a, b), (w, _) in best.items():
            rows += [a, b]
            cols += [b, a]
            ws += [w, w]
        mat = csr_matrix((np.array(ws, dtype=float), (rows, cols)), shape=(n, n))
        dist, pred = dijkstra(mat, directed=False, return_predecessors=True)
        self.dist = dist
        obs = np.zeros((n, n), dtype=np.int64)
        edge_obs = {}
        for (a, b), (_, o) in best.items():
            edge_obs[(a, b)] = o
            edge_obs[(b, a)] = o
        for s in range(n):
            order = np.argsort(dist[s])
            for v in order:
                p = pred[s, v]
                if p < 0:
                    continue
                obs[s, v] = obs[s, p] ^ edge_obs[(p, v)]
        self.obs = obs
        # unreachable pairs get a large finite cost so the recursion stays numeric
        big = np.nanmax(np.where(np.isfinite(dist), dist, np.nan)) if np.isfinite(dist).any() else 1.0
        self.cost = np.where(np.isfinite(dist), dist, 1e6 * (big + 1))
        hyper = hyper or {}
        partners = partners or {}
        rows = []
        for k, o in hyper.items():
            h = signature_hash(np.array(sorted(k), dtype=np.int64))
            for part in partners.get(k, [()]):
                rows.append((h, o, tuple(sorted(part))))
        rows.sort()
        self.hyper_keys = np.array([h for h, _, _ in rows], dtype=np.int64)
        self.hyper_obs = np.array([o for _, o, _ in rows], dtype=np.int64)
        self.partner_ptr = np.zeros(len(rows) + 1, dtype=np.int64)
        np.cumsum([len(r[2]) for r in rows], out=self.partner_ptr[1:])
        self.partner_flat = np.array([q for r in rows for q in r[2]], dtype=np.int64)
        self.is_flag = np.zeros(n, dtype=np.bool_)
        self.is_flag[list(flags)] = True
        cond = []
        for req, items in (conditional or {}).items():
            for dets, c, o in items:
                a = dets[0]
                b = dets[1] if len(dets) > 1 else self.boundary
                cond.append((req[0], req, a, b, c, o))
        cond.sort()
        self.cond_ptr = np.zeros(n + 1, dtype=np.int64)
        for f, *_ in cond:
            self.cond_ptr[f + 1] += 1
        np.cumsum(self.cond_ptr, out=self.cond_ptr)
        self.req_ptr = np.zeros(len(cond) + 1, dtype=np.int64)
        np.cumsum([len(c[1]) for c in cond], out=self.req_ptr[1:])
        self.req_flat = np.array([f for c in cond for f in c[1]], dtype=np.int64)
        self.cond_a = np.array([c[2] for c in cond], dtype=np.int64)
        self.cond_b = np.array([c[3] for c in cond], dtype=np.int64)
        self.cond_cost = np.array([c[4] for c in cond], dtype=float)
        self.cond_obs = np.array([c[5] for c in cond], dtype=np.int64)

    def decode(self, defects_per_shot: list[np.ndarray] | tuple, exact_limit: int = EXACT_LIMIT) -> np.ndarray:
        lens = np.array([len(d) for d in defects_per_shot], dtype=np.int64)
        indptr = np.zeros(len(lens) + 1, dtype=np.int64)
        np.cumsum(lens, out=indptr[1:])
        flat = np.concatenate([np.asarray(d, dtype=np.int64) for d in defects_per_shot]) if len(lens) else np.zeros(0, np.int64)
        return self.decode_sparse(indptr, flat, exact_limit)

    def decode_sparse(self, indptr: np.ndarray, flat: np.ndarray, exact_limit: int = EXACT_LIMIT,
                      other_indptr: np.ndarray | None = None, other_flat: np.ndarray | None = None) -> np.ndarray:
        """Decode shots given as CSR defect lists; the other sector's sorted
        defects, when given, gate the hyperedge lookups."""
        if other_indptr is None:
            other_indptr = np.zeros(len(indptr), dtype=np.int64)
            other_flat = np.zeros(0, dtype=np.int64)
            check = False
        else:
            check = True
        return decode_batch(self.cost, self.obs, indptr, flat, self.boundary, exact_limit,
                            self.hyper_keys, self.hyper_obs, self.partner_ptr, self.partner_flat,
                            other_indptr, other_flat, check, self.is_flag, self.cond_ptr, self.req_ptr,
                            self.req_flat, self.cond_a, self.cond_b, self.cond_cost, self.cond_obs)


@njit(cache=True)
def signature_hash(nodes):
    """64-bit FNV-style hash of an ascending detector list."""
    h = np.int64(-3750763034362895579)
    for v in nodes:
        h = (h ^ np.int64(v + 1)) * np.int64(1099511628211)
        h ^= h >> np.int64(29)
    return h


@njit(cache=True)
def _find(parent, i):
    while parent[i] != i:
        parent[i] = parent[parent[i]]
        i = parent[i]
    return i


@njit(cache=True)
def _exact(cost, obs, nodes, boundary):
    n = len(nodes)
    size = 1 << n
    f = np.full(size, np.inf)
    pick = np.zeros(size, dtype=np.int64)
    f[0] = 0.0
    for mask in range(1, size):
        i = 0
        while not (mask >> i) & 1:
            i += 1
        rest = mask ^ (1 << i)
        best = f[rest] + cost[nodes[i], boundary]
        choice = i
        for j in range(i + 1, n):
            if (rest >> j) & 1:
                c = f[rest ^ (1 << j)] + cost[nodes[i], nodes[j]]
                if c < best:
                    best = c
                    choice = j
        f[mask] = best
        pick[mask] = choice
    out = 0
    mask = size - 1
    while mask:
        i = 0
        while not (mask >> i) & 1:
            i += 1
        j = pick[mask]
        if j == i:
            out ^= obs[nodes[i], boundary]
            mask ^= 1 << i
        else:
            out ^= obs[nodes[i], nodes[j]]
            mask ^= (1 << i) | (1 << j)
    return out


@njit(cache=True)
def _unit_cost(cost, nodes, boundary, a, b):
    # -1 stands for the boundary
    if a < 0 and b < 0:
        return 0.0
    if a < 0:
        return cost[nodes[b], boundary]
    if b < 0:
        return cost[nodes[a], boundary]
    return cost[nodes[a], nodes[b]]


@njit(cache=True)
def _greedy(cost, obs, nodes, boundary):
    """Nearest-first matching polished by pairwise re-pairing moves."""
    n = len(nodes)
    mate = np.full(n, -2, dtype=np.int64)  # -1 boundary, -2 unmatched
    left = n
    while left > 0:
        best = np.inf
        bi = -1
        bj = -1
        for i in range(n):
            if mate[i] != -2:
                continue
            c = cost[nodes[i], boundary]
            if c < best:
                best = c
                bi = i
                bj = -1
            for j in range(i + 1, n):
                if mate[j] == -2:
                    c = cost[nodes[i], nodes[j]]
                    if c < best:
                        best = c
                        bi = i
                        bj = j
        if bj < 0:
            mate[bi] = -1
            left -= 1
        else:
            mate[bi] = bj
            mate[bj] = bi
            left -= 2
    improved = True
    rounds = 0
    while improved and rounds < 50:
        improved = False
        rounds += 1
        for a in range(n):
            b = mate[a]
            if b >= 0 and b < a:
                continue
            # split a pair onto the boundary
            if b >= 0:
                if cost[nodes[a], boundary] + cost[nodes[b], boundary] < cost[nodes[a], nodes[b]] - 1e-12:
                    mate[a] = -1
                    mate[b] = -1
                    improved = True
                    continue
            for c in range(n):
                if c == a or c == b:
                    continue
                d = mate[c]
                if d >= 0 and d < c:
                    continue
                if d == a:
                    continue
                now = _unit_cost(cost, nodes, boundary, a, b) + _unit_cost(cost, nodes, boundary, c, d)
                alt1 = _unit_cost(cost, nodes, boundary, a, c) + _unit_cost(cost, nodes, boundary, b, d)
                alt2 = _unit_cost(cost, nodes, boundary, a, d) + _unit_cost(cost, nodes, boundary, b, c)
                if alt1 < now - 1e-12 and alt1 <= alt2:
                    mate[a] = c
                    mate[c] = a
                    if b >= 0:
                        mate[b] = d
                    if d >= 0:
                        mate[d] = b
                    improved = True
                    break
                if alt2 < now - 1e-12:
                    if d >= 0:
                        mate[a] = d
                        mate[d] = a
                    else:
                        mate[a] = -1
                    if b >= 0:
                        mate[b] = c
                        mate[c] = b
                    else:
                        mate[c] = -1
                    improved = True
                    break
    out = 0
    for i in range(n):
        j = mate[i]
        if j == -1:
            out ^= obs[nodes[i], boundary]
        elif j > i:
            out ^= obs[nodes[i], nodes[j]]
    return out


@njit(cache=True)
def _lookup(nodes, hyper_keys, hyper_obs, partner_ptr, partner_flat, other, check):
    """Observable of a known signature whose partner defects are all in other; -1 if none."""
    h = signature_hash(np.sort(nodes))
    pos = np.searchsorted(hyper_keys, h)
    while pos < len(hyper_keys) and hyper_keys[pos] == h:
        ok = True
        if check:
            for j in range(partner_ptr[pos], partner_ptr[pos + 1]):
                k = np.searchsorted(other, partner_flat[j])
                if k >= len(other) or other[k] != partner_flat[j]:
                    ok = False
                    break
        if ok:
            return hyper_obs[pos]
        pos += 1
    return -1


@njit(cache=True)
def _local_costs(cost, obs, syn, boundary, fired, is_fired, cond_ptr, req_ptr, req_flat, cond_a, cond_b,
                 cond_cost, cond_obs):
    """Distances among syndrome defects (boundary last) with fired flags' edges relaxed in."""
    n = len(syn)
    ids = np.empty(n + 1, dtype=np.int64)
    ids[:n] = syn
    ids[n] = boundary
    c = np.empty((n + 1, n + 1))
    o = np.zeros((n + 1, n + 1), dtype=np.int64)
    for i in range(n + 1):
        for j in range(n + 1):
            c[i, j] = cost[ids[i], ids[j]]
            o[i, j] = obs[ids[i], ids[j]]
    for f in fired:
        for e in range(cond_ptr[f], cond_ptr[f + 1]):
            ok = True
            for r in range(req_ptr[e], req_ptr[e + 1]):
                if not is_fired[req_flat[r]]:
                    ok = False
                    break
            if not ok:
                continue
            a, b, w, eo = cond_a[e], cond_b[e], cond_cost[e], cond_obs[e]
            for i in range(n + 1):
                u = ids[i]
                for j in range(i + 1, n + 1):
                    v = ids[j]
                    x = cost[u, a] + w + cost[b, v]
                    y = cost[u, b] + w + cost[a, v]
                    if x <= y and x < c[i, j]:
                        c[i, j] = x
                        c[j, i] = x
                        o[i, j] = obs[u, a] ^ eo ^ obs[b, v]
                        o[j, i] = o[i, j]
                    elif y < x and y < c[i, j]:
                        c[i, j] = y
                        c[j, i] = y
                        o[i, j] = obs[u, b] ^ eo ^ obs[a, v]
                        o[j, i] = o[i, j]
    return c, o


@njit(cache=True)
def decode_batch(cost, obs, indptr, flat, boundary, exact_limit, hyper_keys, hyper_obs,
                 partner_ptr, partner_flat, other_indptr, other_flat, check, is_flag, cond_ptr, req_ptr,
                 req_flat, cond_a, cond_b, cond_cost, cond_obs):
    shots = len(indptr) - 1
    out = np.zeros(shots, dtype=np.int64)
    is_fired = np.zeros(len(is_flag), dtype=np.bool_)
    for s in range(shots):
        a = indptr[s]
        b = indptr[s + 1]
        if b == a:
            continue
        nodes = flat[a:b]
        other = np.sort(other_flat[other_indptr[s]:other_indptr[s + 1]])
        if b - a >= 3 and len(hyper_keys):
            o = _lookup(nodes, hyper_keys, hyper_obs, partner_ptr, partner_flat, other, check)
            if o >= 0:
                out[s] = o
                continue
        n_f = 0
        for v in nodes:
            if is_flag[v]:
                n_f += 1
        n = len(nodes) - n_f
        if n == 0:
            continue
        syn = np.empty(n, dtype=np.int64)
        fired = np.empty(n_f, dtype=np.int64)
        i_s = 0
        i_f = 0
        for v in nodes:
            if is_flag[v]:
                fired[i_f] = v
                i_f += 1
                is_fired[v] = True
            else:
                syn[i_s] = v
                i_s += 1
        c, oo = _local_costs(cost, obs, syn, boundary, fired, is_fired, cond_ptr, req_ptr, req_flat,
                             cond_a, cond_b, cond_cost, cond_obs)
        for v in fired:
            is_fired[v] = False
        parent = np.arange(n)
        for i in range(n):
            for j in range(i + 1, n):
                if c[i, j] <= c[i, n] + c[j, n]:
                    ri = _find(parent, i)
                    rj = _find(parent, j)
                    if ri != rj:
                        parent[ri] = rj
        roots = np.empty(n, dtype=np.int64)
        for i in range(n):
            roots[i] = _find(parent, i)
        acc = 0
        for r in range(n):
            cnt = 0
            for i in range(n):
                if roots[i] == r:
                    cnt += 1
            if cnt == 0:
                continue
            members = np.empty(cnt, dtype=np.int64)
            k = 0
            for i in range(n):
                if roots[i] == r:
                    members[k] = i
                    k += 1
            if cnt >= 3 and len(hyper_keys):
                o = _lookup(syn[members], hyper_keys, hyper_obs, partner_ptr, partner_flat, other, check)
                if o >= 0:
                    acc ^= o
                    continue
            if cnt <= exact_limit:
                acc ^= _exact(c, oo, members, n)
            else:
                acc ^= _greedy(c, oo, members, n)
        out[s] = acc
    return out
