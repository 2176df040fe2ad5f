"""Compiled inner loops for binary-feature trees.

Trees are flat arrays: ``feature[i] < 0`` marks a leaf, otherwise rows with
feature value 0 go to ``left[i]`` and value 1 to ``right[i]``. Ensembles are
stored as concatenated trees with per-tree ``roots``.
"""

import numba
import numpy as np
from numba import njit, prange

# the bundled TBB is too old; skip it instead of warning on every launch
numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]

_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)

GAIN_EPS = 1e-12
MIN_HESSIAN = 1e-3


@njit(cache=True, nogil=True)
def _mix(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit(cache=True, nogil=True)
def _uniform_below(state, bound):
    """Advance a splitmix64 ``state`` (1-element array); return int in [0, bound)."""
    state[0] += _GAMMA
    r = _mix(state[0]) >> _S11
    return np.int64(r % np.uint64(bound))


@njit(cache=True, nogil=True)
def _gini_mass(w, p):
    # w * gini(p / w) for two classes, gini(q) = 2q(1-q)
    if w <= 0.0:
        return 0.0
    return 2.0 * p * (w - p) / w


@njit(cache=True, nogil=True)
def grow_gini_tree(X, y, w, max_depth, min_leaf, max_features, seed):
    """CART classification tree on weighted rows (weights are bootstrap counts).

    Per node, features are visited in a fresh random order and the first
    ``max_features`` non-constant ones are scored; constant features do not
    count towards the budget.
    """
    n_feat = X.shape[1]
    rows = np.flatnonzero(w > 0.0)
    n = rows.shape[0]
    cap = 2 * n + 1
    feature = np.full(cap, -1, np.int64)
    left = np.full(cap, -1, np.int64)
    right = np.full(cap, -1, np.int64)
    value = np.zeros(cap, np.float64)
    cover = np.zeros(cap, np.float64)

    st_node = np.empty(cap, np.int64)
    st_lo = np.empty(cap, np.int64)
    st_hi = np.empty(cap, np.int64)
    st_depth = np.empty(cap, np.int64)
    order = np.arange(n_feat)
    rng = np.empty(1, np.uint64)
    rng[0] = np.uint64(seed)

    n_nodes = 1
    st_node[0] = 0
    st_lo[0] = 0
    st_hi[0] = n
    st_depth[0] = 0
    sp = 1
    while sp > 0:
        sp -= 1
        node = st_node[sp]
        lo = st_lo[sp]
        hi = st_hi[sp]
        depth = st_depth[sp]

        W = 0.0
        P = 0.0
        for t in range(lo, hi):
            r = rows[t]
            W += w[r]
            P += w[r] * y[r]
        value[node] = P / W
        cover[node] = W

        if (max_depth >= 0 and depth >= max_depth) or P <= 0.0 or P >= W or W < 2 * min_leaf:
            continue

        parent = _gini_mass(W, P)
        best_gain = GAIN_EPS
        best_f = -1
        visited = 0
        for j in range(n_feat):
            if visited >= max_features:
                break
            # partial Fisher-Yates: next random feature
            s = j + _uniform_below(rng, n_feat - j)
            tmp = order[j]
            order[j] = order[s]
            order[s] = tmp
            f = order[j]
            W1 = 0.0
            P1 = 0.0
            for t in range(lo, hi):
                r = rows[t]
                if X[r, f]:
                    W1 += w[r]
                    P1 += w[r] * y[r]
            if W1 <= 0.0 or W1 >= W:
                continue
            visited += 1
            W0 = W - W1
            if W1 < min_leaf or W0 < min_leaf:
                continue
            gain = parent - _gini_mass(W1, P1) - _gini_mass(W0, P - P1)
            if gain > best_gain:
                best_gain = gain
                best_f = f
        if best_f < 0:
            continue

        # partition rows[lo:hi]: feature value 0 first
        i = lo
        k = hi - 1
        while i <= k:
            if X[rows[i], best_f]:
                tmp = rows[i]
                rows[i] = rows[k]
                rows[k] = tmp
                k -= 1
            else:
                i += 1
        feature[node] = best_f
        left[node] = n_nodes
        right[node] = n_nodes + 1
        st_node[sp] = n_nodes + 1
        st_lo[sp] = i
        st_hi[sp] = hi
        st_depth[sp] = depth + 1
        st_node[sp + 1] = n_nodes
        st_lo[sp + 1] = lo
        st_hi[sp + 1] = i
        st_depth[sp + 1] = depth + 1
        sp += 2
        n_nodes += 2

    return feature[:n_nodes], left[:n_nodes], right[:n_nodes], value[:n_nodes], cover[:n_nodes]


@njit(cache=True, nogil=True)
def grow_newton_tree(X, g, h, max_depth, min_leaf, learning_rate):
    """Regression tree on logistic-loss gradients/hessians.

    Split gain is G_L^2/H_L + G_R^2/H_R - G^2/H; leaves hold the Newton step
    -G/H scaled by ``learning_rate``. Every feature is scanned at every node.
    """
    n, n_feat = X.shape
    rows = np.arange(n)
    cap = 2 * n + 1
    feature = np.full(cap, -1, np.int64)
    left = np.full(cap, -1, np.int64)
    right = np.full(cap, -1, np.int64)
    value = np.zeros(cap, np.float64)
    cover = np.zeros(cap, np.float64)

    st_node = np.empty(cap, np.int64)
    st_lo = np.empty(cap, np.int64)
    st_hi = np.empty(cap, np.int64)
    st_depth = np.empty(cap, np.int64)
    G1 = np.empty(n_feat, np.float64)
    H1 = np.empty(n_feat, np.float64)
    C1 = np.empty(n_feat, np.int64)

    n_nodes = 1
    st_node[0] = 0
    st_lo[0] = 0
    st_hi[0] = n
    st_depth[0] = 0
    sp = 1
    while sp > 0:
        sp -= 1
        node = st_node[sp]
        lo = st_lo[sp]
        hi = st_hi[sp]
        depth = st_depth[sp]
        cnt = hi - lo

        G = 0.0
        H = 0.0
        G1[:] = 0.0
        H1[:] = 0.0
        C1[:] = 0
        for t in range(lo, hi):
            r = rows[t]
            G += g[r]
            H += h[r]
            for f in range(n_feat):
                if X[r, f]:
                    G1[f] += g[r]
                    H1[f] += h[r]
                    C1[f] += 1
        value[node] = -learning_rate * G / H if H > 0.0 else 0.0
        cover[node] = cnt

        if (max_depth >= 0 and depth >= max_depth) or cnt < 2 * min_leaf or H <= 0.0:
            continue

        parent = G * G / H
        best_gain = GAIN_EPS
        best_f = -1
        for f in range(n_feat):
            c1 = C1[f]
            c0 = cnt - c1
            if c1 < min_leaf or c0 < min_leaf:
                continue
            hr = H1[f]
            hl = H - hr
            if hr < MIN_HESSIAN or hl < MIN_HESSIAN:
                continue
            gr = G1[f]
            gl = G - gr
            gain = gl * gl / hl + gr * gr / hr - parent
            if gain > best_gain:
                best_gain = gain
                best_f = f
        if best_f < 0:
            continue

        i = lo
        k = hi - 1
        while i <= k:
            if X[rows[i], best_f]:
                tmp = rows[i]
                rows[i] = rows[k]
                rows[k] = tmp
                k -= 1
            else:
                i += 1
        feature[node] = best_f
        left[node] = n_nodes
        right[node] = n_nodes + 1
        st_node[sp] = n_nodes + 1
        st_lo[sp] = i
        st_hi[sp] = hi
        st_depth[sp] = depth + 1
        st_node[sp + 1] = n_nodes
        st_lo[sp + 1] = lo
        st_hi[sp + 1] = i
        st_depth[sp + 1] = depth + 1
        sp += 2
        n_nodes += 2

    return feature[:n_nodes], left[:n_nodes], right[:n_nodes], value[:n_nodes], cover[:n_nodes]


@njit(cache=True, nogil=True)
def predict_trees(X, feature, left, right, value, roots):
    """Leaf value of every tree for every row: array (n_rows, n_trees)."""
    n = X.shape[0]
    T = roots.shape[0]
    out = np.empty((n, T), np.float64)
    for i in range(n):
        for t in range(T):
            node = roots[t]
            while feature[node] >= 0:
                if X[i, feature[node]]:
                    node = right[node]
                else:
                    node = left[node]
            out[i, t] = value[node]
    return out


@njit(cache=True, nogil=True)
def shapley_weights(max_len):
    """W[a, b] = a! b! / (a + b + 1)!, the Shapley weight of one ordering class."""
    W = np.zeros((max_len + 1, max_len + 1), np.float64)
    for a in range(max_len + 1):
        W[a, 0] = 1.0 / (a + 1)
        for b in range(1, max_len + 1 - a):
            W[a, b] = W[a, b - 1] * b / (a + b + 1)
    return W


@njit(cache=True, nogil=True)
def _partition(M, perm, lo, hi, f):
    """Reorder perm[lo:hi] so rows with M[row, f] == 0 come first; return the split."""
    i = lo
    j = hi - 1
    while i <= j:
        if M[perm[i], f] == 0:
            i += 1
        else:
            t = perm[i]
            perm[i] = perm[j]
            perm[j] = t
            j -= 1
    return i


@njit(cache=True, nogil=True)
def _push(st, sp, node, k, a, b, f, side, xlo, xhi, zlo, zhi):
    st[sp, 0] = node
    st[sp, 1] = k
    st[sp, 2] = a
    st[sp, 3] = b
    st[sp, 4] = f
    st[sp, 5] = side
    st[sp, 6] = xlo
    st[sp, 7] = xhi
    st[sp, 8] = zlo
    st[sp, 9] = zhi
    return sp + 1


@njit(cache=True, nogil=True)
def _tree_shap_block(X, Z, xperm, zperm, feature, left, right, value, root, scale, Wt, phi,
                     st, path_f, path_s, contrib):
    """Add one tree's interventional Shapley values for every row of ``X``.

    Instances and background rows travel the tree together in groups. At a
    split on a feature not yet on the path, both groups are partitioned by
    their value. Pairs that agree follow their common child unchanged; pairs
    that disagree fork into an "instance controls f" state (instance's child)
    and a "background controls f" state (background row's child). A leaf
    reached with ``a`` instance-controlled and ``b`` background-controlled
    features pays ``+v W[a-1,b]`` to each instance-controlled and
    ``-v W[a,b-1]`` to each background-controlled feature, once per
    background row in the group. Results are summed over background rows.
    """
    for i in range(X.shape[0]):
        xperm[i] = i
    for i in range(Z.shape[0]):
        zperm[i] = i
    # stack entry: node, k, a, b, pending feature, pending side, x range, z range
    sp = _push(st, 0, root, 0, 0, 0, -1, -1, 0, X.shape[0], 0, Z.shape[0])
    while sp > 0:
        sp -= 1
        node = st[sp, 0]
        k = st[sp, 1]
        a = st[sp, 2]
        b = st[sp, 3]
        xlo = st[sp, 6]
        xhi = st[sp, 7]
        zlo = st[sp, 8]
        zhi = st[sp, 9]
        if st[sp, 4] >= 0:
            path_f[k - 1] = st[sp, 4]
            path_s[k - 1] = st[sp, 5]

        f = feature[node]
        if f < 0:
            if a + b == 0:
                continue
            v = scale * value[node] * (zhi - zlo)
            for j in range(k):
                if path_s[j] == 1:
                    contrib[j] = v * Wt[a - 1, b]
                else:
                    contrib[j] = -v * Wt[a, b - 1]
            for i in range(xlo, xhi):
                r = xperm[i]
                for j in range(k):
                    phi[r, path_f[j]] += contrib[j]
            continue

        side = -1
        for j in range(k):
            if path_f[j] == f:
                side = path_s[j]
                break
        if side >= 0:
            # all pairs here disagree on f, and each group is constant on it
            if side == 1:
                go = X[xperm[xlo], f]
            else:
                go = Z[zperm[zlo], f]
            sp = _push(st, sp, right[node] if go else left[node], k, a, b, -1, -1,
                       xlo, xhi, zlo, zhi)
            continue

        xmid = _partition(X, xperm, xlo, xhi, f)
        zmid = _partition(Z, zperm, zlo, zhi, f)
        l = left[node]
        r = right[node]
        # instance 0, background 1: instance sends left, background sends right
        if xmid > xlo and zhi > zmid:
            sp = _push(st, sp, r, k + 1, a, b + 1, f, 0, xlo, xmid, zmid, zhi)
            sp = _push(st, sp, l, k + 1, a + 1, b, f, 1, xlo, xmid, zmid, zhi)
        if xhi > xmid and zmid > zlo:
            sp = _push(st, sp, l, k + 1, a, b + 1, f, 0, xmid, xhi, zlo, zmid)
            sp = _push(st, sp, r, k + 1, a + 1, b, f, 1, xmid, xhi, zlo, zmid)
        if xhi > xmid and zhi > zmid:
            sp = _push(st, sp, r, k, a, b, -1, -1, xmid, xhi, zmid, zhi)
        if xmid > xlo and zmid > zlo:
            sp = _push(st, sp, l, k, a, b, -1, -1, xlo, xmid, zlo, zmid)


SHAP_BLOCK = 64
MASK_BITS = 63
LEAF_BLOCK = 1024


@njit(cache=True, nogil=True, parallel=True)
def tree_shap_batch(Xe, Z, feature, left, right, value, roots, scale, max_path):
    """Interventional Shapley values for each row of ``Xe``, averaged over ``Z``.

    General grouped traversal; rows are processed in fixed blocks so the
    floating-point summation order does not depend on the number of threads.
    """
    m, n_feat = Xe.shape
    nb = Z.shape[0]
    Wt = shapley_weights(max_path + 1)
    out = np.zeros((m, n_feat), np.float64)
    cap = 6 * (max_path + 2)
    n_blocks = (m + SHAP_BLOCK - 1) // SHAP_BLOCK
    for blk in prange(n_blocks):
        lo = blk * SHAP_BLOCK
        hi = min(m, lo + SHAP_BLOCK)
        Xb = Xe[lo:hi]
        xperm = np.empty(hi - lo, np.int64)
        zperm = np.empty(nb, np.int64)
        st = np.empty((cap, 10), np.int64)
        path_f = np.empty(max_path + 1, np.int64)
        path_s = np.empty(max_path + 1, np.int64)
        contrib = np.empty(max_path + 1, np.float64)
        phi = np.zeros((hi - lo, n_feat), np.float64)
        for t in range(roots.shape[0]):
            _tree_shap_block(Xb, Z, xperm, zperm, feature, left, right, value, roots[t], scale,
                             Wt, phi, st, path_f, path_s, contrib)
        for i in range(hi - lo):
            for f in range(n_feat):
                out[lo + i, f] = phi[i, f] / nb
    return out


@njit(cache=True, nogil=True)
def leaf_paths(feature, left, right, value, roots):
    """Every reachable leaf with its path conditions, duplicates merged.

    Returns (leaf value, offsets, path feature, required value). A leaf whose
    path asks for both values of one feature is unreachable and dropped.
    """
    n = feature.shape[0]
    out_val = np.empty(n, np.float64)
    off = np.zeros(n + 1, np.int64)
    pf = np.empty(n * 8 + 64, np.int64)
    pv = np.empty(n * 8 + 64, np.uint8)
    n_leaves = 0
    used = 0
    parent = np.full(n, -1, np.int64)
    for t in range(roots.shape[0]):
        stack = [roots[t]]
        parent[roots[t]] = -1
        while len(stack) > 0:
            node = stack.pop()
            f = feature[node]
            if f >= 0:
                parent[left[node]] = node
                parent[right[node]] = node
                stack.append(right[node])
                stack.append(left[node])
                continue
            start = used
            ok = True
            child = node
            p = parent[node]
            while p >= 0:
                g = feature[p]
                want = 1 if right[p] == child else 0
                dup = False
                for j in range(start, used):
                    if pf[j] == g:
                        dup = True
                        if pv[j] != want:
                            ok = False
                        break
                if not dup:
                    if used == pf.shape[0]:
                        grow = pf.shape[0] * 2
                        pf2 = np.empty(grow, np.int64)
                        pv2 = np.empty(grow, np.uint8)
                        pf2[:used] = pf[:used]
                        pv2[:used] = pv[:used]
                        pf = pf2
                        pv = pv2
                    pf[used] = g
                    pv[used] = want
                    used += 1
                child = p
                p = parent[p]
            if not ok:
                used = start
                continue
            out_val[n_leaves] = value[node]
            off[n_leaves + 1] = used
            n_leaves += 1
    return out_val[:n_leaves], off[: n_leaves + 1], pf[:used], pv[:used]


@njit(cache=True, nogil=True)
def leaf_background_masks(off, pf, pv, Z):
    """Per leaf: distinct background mismatch bitmasks and their counts.

    Bit j of a mask is set when the background row differs from the leaf's
    j-th path condition.
    """
    n_leaves = off.shape[0] - 1
    nb = Z.shape[0]
    moff = np.zeros(n_leaves + 1, np.int64)
    masks = np.empty(n_leaves * nb, np.uint64)
    counts = np.empty(n_leaves * nb, np.int64)
    buf = np.empty(nb, np.uint64)
    used = 0
    for L in range(n_leaves):
        for z in range(nb):
            mk = np.uint64(0)
            for j in range(off[L + 1] - off[L]):
                if Z[z, pf[off[L] + j]] != pv[off[L] + j]:
                    mk |= np.uint64(1) << np.uint64(j)
            buf[z] = mk
        buf.sort()
        i = 0
        while i < nb:
            j = i
            while j < nb and buf[j] == buf[i]:
                j += 1
            masks[used] = buf[i]
            counts[used] = j - i
            used += 1
            i = j
        moff[L + 1] = used
    return moff, masks[:used], counts[:used]


@njit(cache=True, nogil=True)
def _umask_contrib(u, nu, d, v, masks, counts, q0, q1, Wt, c):
    """Per-path-position contribution for an instance whose missed conditions are ``u``.

    Background rows whose mismatches avoid ``u`` are compatible; each pays
    ``+v W[|A|-1,|U|]`` to its own mismatches A and ``-v W[|A|,|U|-1]`` to U.
    Returns False when nothing is paid.
    """
    for j in range(d):
        c[j] = 0.0
    s_u = 0.0
    hit = False
    for q in range(q0, q1):
        mk = masks[q]
        if mk & u:
            continue
        na = 0
        t = mk
        while t:
            t &= t - np.uint64(1)
            na += 1
        if na + nu == 0:
            continue
        hit = True
        n = counts[q]
        if nu > 0:
            s_u += n * Wt[na, nu - 1]
        if na > 0:
            w = v * n * Wt[na - 1, nu]
            for j in range(d):
                if (mk >> np.uint64(j)) & np.uint64(1):
                    c[j] += w
    if nu > 0:
        for j in range(d):
            if (u >> np.uint64(j)) & np.uint64(1):
                c[j] -= v * s_u
    return hit


@njit(cache=True, nogil=True, parallel=True)
def tree_shap_leaves(Xe, nb, leaf_value, off, pf, pv, moff, masks, counts, scale, max_path, n_feat):
    """Interventional Shapley values from precomputed leaf tables (paths <= 63).

    For an instance and a leaf, the path conditions the instance misses must
    be background-controlled, so only background rows matching the leaf
    there contribute. Rows in a block that miss the same conditions share one
    contribution vector. Each row accumulates leaves in a fixed order, so the
    result does not depend on blocking or threads.
    """
    m = Xe.shape[0]
    Wt = shapley_weights(max_path + 1)
    out = np.zeros((m, n_feat), np.float64)
    n_leaves = leaf_value.shape[0]
    n_blocks = (m + LEAF_BLOCK - 1) // (LEAF_BLOCK)
    for blk in prange(n_blocks):
        lo = blk * LEAF_BLOCK
        hi = min(m, lo + LEAF_BLOCK)
        um = np.empty(hi - lo, np.uint64)
        nus = np.empty(hi - lo, np.int64)
        c = np.empty(max_path + 1, np.float64)
        for L in range(n_leaves):
            o = off[L]
            d = off[L + 1] - o
            for r in range(hi - lo):
                u = np.uint64(0)
                nu = 0
                for j in range(d):
                    if Xe[lo + r, pf[o + j]] != pv[o + j]:
                        u |= np.uint64(1) << np.uint64(j)
                        nu += 1
                um[r] = u
                nus[r] = nu
            order = np.argsort(um)
            v = scale * leaf_value[L]
            g = 0
            while g < hi - lo:
                u = um[order[g]]
                e = g
                while e < hi - lo and um[order[e]] == u:
                    e += 1
                if _umask_contrib(u, nus[order[g]], d, v, masks, counts, moff[L], moff[L + 1], Wt, c):
                    for q in range(g, e):
                        row = lo + order[q]
                        for j in range(d):
                            if c[j] != 0.0:
                                out[row, pf[o + j]] += c[j]
                g = e
    for i in range(m):
        for f in range(n_feat):
            out[i, f] /= nb
    return out


@njit(cache=True, nogil=True)
def max_path_length(left, right, feature, roots):
    """Longest root-to-leaf path (in internal nodes) over all trees."""
    best = 0
    depth = np.zeros(feature.shape[0], np.int64)
    for t in range(roots.shape[0]):
        stack = [roots[t]]
        depth[roots[t]] = 0
        while len(stack) > 0:
            node = stack.pop()
            if feature[node] < 0:
                if depth[node] > best:
                    best = depth[node]
                continue
            depth[left[node]] = depth[node] + 1
            depth[right[node]] = depth[node] + 1
            stack.append(left[node])
            stack.append(right[node])
    return best
