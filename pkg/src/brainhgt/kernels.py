"""Hot inner loops, each in two flavours: a numba ``@njit`` kernel and a
vectorised numpy fallback.

The numba path is used when numba imports cleanly and the environment
variable ``BRAINHGT_DISABLE_JIT`` is unset (or ``0``).  Both paths return
identical integer results; floating results agree to rounding.
"""

import contextlib
import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None


def _env_disables_jit():
    return os.environ.get("BRAINHGT_DISABLE_JIT", "0").strip().lower() not in ("", "0", "false", "no")


HAVE_NUMBA = numba is not None
_use_numba = HAVE_NUMBA and not _env_disables_jit()


def numba_enabled():
    return _use_numba


def set_backend(name):
    """Select ``"numba"`` or ``"numpy"`` kernels for this process."""
    global _use_numba
    if name == "numba":
        if not HAVE_NUMBA:
            raise RuntimeError("numba is not installed")
        _use_numba = True
    elif name == "numpy":
        _use_numba = False
    else:
        raise ValueError(f"unknown backend {name!r}")


@contextlib.contextmanager
def backend(name):
    prev = _use_numba
    set_backend(name)
    try:
        yield
    finally:
        set_backend("numba" if prev else "numpy")


def _njit(fn):
    if numba is None:
        return fn
    return numba.njit(cache=True, nogil=True)(fn)


# ---------------------------------------------------------------------------
# all-pairs hop counts
# ---------------------------------------------------------------------------

@_njit
def _bfs_hops_nb(adj):
    n = adj.shape[0]
    out = np.full((n, n), n, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    for s in range(n):
        out[s, s] = 0
        head = 0
        tail = 1
        queue[0] = s
        while head < tail:
            u = queue[head]
            head += 1
            du = out[s, u]
            for v in range(n):
                if adj[u, v] and out[s, v] == n and v != s:
                    out[s, v] = du + 1
                    queue[tail] = v
                    tail += 1
    return out


def _bfs_hops_np(adj):
    n = adj.shape[0]
    a = adj.astype(np.int64)
    out = np.full((n, n), n, dtype=np.int64)
    np.fill_diagonal(out, 0)
    reached = np.eye(n, dtype=bool)
    frontier = np.eye(n, dtype=np.int64)
    for k in range(1, n):
        nxt = ((frontier @ a) > 0) & ~reached
        if not nxt.any():
            break
        out[nxt] = k
        reached |= nxt
        frontier = nxt.astype(np.int64)
    return out


def bfs_hops(adj):
    """Hop-count distance between every pair of nodes of an unweighted graph.

    Unreachable pairs get the sentinel ``n`` (one more than any real hop count).
    """
    adj = np.ascontiguousarray(np.asarray(adj) != 0)
    if _use_numba:
        return _bfs_hops_nb(adj)
    return _bfs_hops_np(adj)


# ---------------------------------------------------------------------------
# Kruskal spanning forest
# ---------------------------------------------------------------------------

@_njit
def _kruskal_nb(n, ei, ej, order, active):
    parent = np.arange(n)
    rank = np.zeros(n, dtype=np.int64)
    chosen = np.zeros(ei.shape[0], dtype=np.bool_)
    picked = 0
    for t in range(order.shape[0]):
        e = order[t]
        if not active[e]:
            continue
        a = ei[e]
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        b = ej[e]
        while parent[b] != b:
            parent[b] = parent[parent[b]]
            b = parent[b]
        if a == b:
            continue
        if rank[a] < rank[b]:
            a, b = b, a
        parent[b] = a
        if rank[a] == rank[b]:
            rank[a] += 1
        chosen[e] = True
        picked += 1
        if picked == n - 1:
            break
    return chosen


def _kruskal_py(n, ei, ej, order, active):
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    chosen = np.zeros(len(ei), dtype=bool)
    picked = 0
    for e in order[active[order]]:
        a, b = find(int(ei[e])), find(int(ej[e]))
        if a == b:
            continue
        parent[b] = a
        chosen[e] = True
        picked += 1
        if picked == n - 1:
            break
    return chosen


def kruskal_forest(n, ei, ej, order, active):
    """Minimum spanning forest over the ``active`` edges.

    ``order`` lists edge indices in ascending (weight, i, j) order; the
    returned boolean mask marks the chosen edges.
    """
    ei = np.ascontiguousarray(ei, dtype=np.int64)
    ej = np.ascontiguousarray(ej, dtype=np.int64)
    order = np.ascontiguousarray(order, dtype=np.int64)
    active = np.ascontiguousarray(active, dtype=bool)
    if _use_numba:
        return _kruskal_nb(n, ei, ej, order, active)
    return _kruskal_py(n, ei, ej, order, active)


# ---------------------------------------------------------------------------
# prefix scan of global efficiency / wiring cost
# ---------------------------------------------------------------------------

@_njit
def _prefix_scan_nb(n, ei, ej, absr, total):
    m = ei.shape[0]
    inf = n
    dist = np.full((n, n), inf, dtype=np.int64)
    for i in range(n):
        dist[i, i] = 0
    inv = np.zeros(n + 1)
    for k in range(1, n):
        inv[k] = 1.0 / k
    ge = np.empty(m)
    cost = np.empty(m)
    acc = 0.0
    du = np.empty(n, dtype=np.int64)
    dv = np.empty(n, dtype=np.int64)
    for t in range(m):
        u = ei[t]
        v = ej[t]
        for i in range(n):
            du[i] = dist[i, u]
            dv[i] = dist[i, v]
        if du[v] > 1:
            for i in range(n):
                for j in range(n):
                    c1 = du[i] + 1 + dv[j]
                    c2 = dv[i] + 1 + du[j]
                    c = c1 if c1 < c2 else c2
                    if c < dist[i, j]:
                        dist[i, j] = c
        s = 0.0
        for i in range(n):
            for j in range(n):
                s += inv[dist[i, j]]
        ge[t] = s / (n * (n - 1))
        acc += absr[t]
        cost[t] = acc / total
    return ge, cost


def _prefix_scan_np(n, ei, ej, absr, total):
    m = len(ei)
    dist = np.full((n, n), n, dtype=np.int64)
    np.fill_diagonal(dist, 0)
    inv = np.zeros(n + 1)
    inv[1:n] = 1.0 / np.arange(1, n)
    ge = np.empty(m)
    cost = np.empty(m)
    acc = 0.0
    for t in range(m):
        u, v = ei[t], ej[t]
        if dist[u, v] > 1:
            du = dist[:, u]
            dv = dist[:, v]
            cand = np.minimum(du[:, None] + 1 + dv[None, :], dv[:, None] + 1 + du[None, :])
            np.minimum(dist, cand, out=dist)
        ge[t] = inv[dist].sum() / (n * (n - 1))
        acc += absr[t]
        cost[t] = acc / total
    return ge, cost


def prefix_scan(n, ei, ej, absr, total):
    """Global efficiency and wiring cost of every edge prefix.

    Edges are added one at a time in the given order; entry ``t`` of each
    returned array describes the graph holding edges ``0..t``.  Hop
    distances are maintained incrementally, O(n^2) per edge.
    """
    ei = np.ascontiguousarray(ei, dtype=np.int64)
    ej = np.ascontiguousarray(ej, dtype=np.int64)
    absr = np.ascontiguousarray(absr, dtype=np.float64)
    if _use_numba:
        return _prefix_scan_nb(n, ei, ej, absr, float(total))
    return _prefix_scan_np(n, ei, ej, absr, float(total))


# ---------------------------------------------------------------------------
# 1.5-entmax threshold
# ---------------------------------------------------------------------------

@_njit
def _entmax_tau_nb(x):
    rows, n = x.shape
    tau = np.empty(rows)
    for r in range(rows):
        srt = np.sort(x[r])[::-1]
        csum = 0.0
        csq = 0.0
        best = srt[0] - 1.0
        for k in range(1, n + 1):
            z = srt[k - 1]
            csum += z
            csq += z * z
            mean = csum / k
            ss = k * (csq / k - mean * mean)
            delta = (1.0 - ss) / k
            if delta < 0.0:
                delta = 0.0
            t = mean - np.sqrt(delta)
            if t <= z:
                best = t
            else:
                break
        tau[r] = best
    return tau


def _entmax_tau_np(x):
    n = x.shape[1]
    srt = -np.sort(-x, axis=1)
    k = np.arange(1, n + 1, dtype=np.float64)
    mean = np.cumsum(srt, axis=1) / k
    mean_sq = np.cumsum(srt * srt, axis=1) / k
    ss = k * (mean_sq - mean * mean)
    delta = np.clip((1.0 - ss) / k, 0.0, None)
    tau = mean - np.sqrt(delta)
    support = (tau <= srt).sum(axis=1)
    return tau[np.arange(x.shape[0]), support - 1]


def entmax15_threshold(x):
    """Threshold ``tau`` per row such that ``sum(max(0, x - tau)**2) == 1``.

    ``x`` is the already-halved, max-shifted score matrix (rows x classes).
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    if _use_numba:
        return _entmax_tau_nb(x)
    return _entmax_tau_np(x)
