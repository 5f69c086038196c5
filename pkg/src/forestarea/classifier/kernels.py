"""Compiled CART growth and forest voting.

A tree is stored as parallel node arrays.  ``feature[k] == -1`` marks a leaf
whose class index is ``value[k]``; otherwise samples with
``x[feature[k]] <= threshold[k]`` go to ``left[k]`` and the rest to
``right[k]``.  Split candidates are the midpoints between consecutive
distinct sorted values, so the chosen partition of the training data
depends only on the order of feature values.
"""

import numpy as np
from numba import njit, prange

from .rng import nb_below

# Relative tolerance for treating two split scores as tied.
SCORE_RTOL = 1e-12

VOTE_BLOCK = 256


@njit(nogil=True, cache=True)
def bootstrap_counts(n, state):
    counts = np.zeros(n, np.int64)
    for _ in range(n):
        counts[nb_below(state, n)] += 1
    return counts


@njit(nogil=True, cache=True)
def grow_tree(X, y, n_classes, weights, counts, mtry, state):
    """Grow one unpruned tree on the samples with ``counts > 0``.

    ``weights`` are per-sample weights already multiplied by the draw counts.
    Nodes that are pure, hold fewer than two draws, or have no usable split
    among the ``mtry`` sampled features become leaves.
    """
    n, p = X.shape
    idx = np.where(counts > 0)[0]
    m = idx.shape[0]
    max_nodes = max(1, 2 * m - 1)
    feature = np.full(max_nodes, -1, np.int32)
    threshold = np.zeros(max_nodes, np.float64)
    left = np.full(max_nodes, -1, np.int32)
    right = np.full(max_nodes, -1, np.int32)
    value = np.zeros(max_nodes, np.int32)
    importance = np.zeros(p, np.float64)

    st_node = np.empty(max_nodes, np.int64)
    st_lo = np.empty(max_nodes, np.int64)
    st_hi = np.empty(max_nodes, np.int64)
    top = 0
    st_node[0] = 0
    st_lo[0] = 0
    st_hi[0] = m
    top = 1
    n_nodes = 1

    feats = np.arange(p)
    cw = np.zeros(n_classes)
    lw = np.zeros(n_classes)
    buf = np.empty(m, idx.dtype)

    while top > 0:
        top -= 1
        node = st_node[top]
        lo = st_lo[top]
        hi = st_hi[top]
        seg = idx[lo:hi]

        cw[:] = 0.0
        draws = 0
        for i in seg:
            cw[y[i]] += weights[i]
            draws += counts[i]
        best_k = 0
        present = 0
        for k in range(n_classes):
            if cw[k] > 0:
                present += 1
            if cw[k] > cw[best_k]:
                best_k = k
        value[node] = best_k
        if present <= 1 or draws < 2:
            continue

        w_total = 0.0
        parent = 0.0
        for k in range(n_classes):
            w_total += cw[k]
            parent += cw[k] * cw[k]
        parent /= w_total

        for j in range(mtry):
            r = j + nb_below(state, p - j)
            tmp = feats[j]
            feats[j] = feats[r]
            feats[r] = tmp
        cand = np.sort(feats[:mtry])

        best_score = -1.0
        best_f = -1
        best_thr = 0.0
        for f in cand:
            vals = X[seg, f]
            order = np.argsort(vals, kind="mergesort")
            if vals[order[0]] == vals[order[-1]]:
                continue
            lw[:] = 0.0
            for q in range(seg.shape[0] - 1):
                i = seg[order[q]]
                lw[y[i]] += weights[i]
                v = vals[order[q]]
                if v == vals[order[q + 1]]:
                    continue
                wl = 0.0
                wr = 0.0
                sl = 0.0
                sr = 0.0
                for k in range(n_classes):
                    rk = cw[k] - lw[k]
                    wl += lw[k]
                    wr += rk
                    sl += lw[k] * lw[k]
                    sr += rk * rk
                score = sl / wl + sr / wr
                if score > best_score + SCORE_RTOL * abs(best_score):
                    best_score = score
                    best_f = f
                    best_thr = 0.5 * v + 0.5 * vals[order[q + 1]]
                    if best_thr >= vals[order[q + 1]] or best_thr < v:
                        best_thr = v

        if best_f < 0:
            continue

        dec = best_score - parent
        if dec > 0:
            importance[best_f] += dec

        # stable partition of seg into <= thr and > thr
        nl = 0
        for i in seg:
            if X[i, best_f] <= best_thr:
                buf[nl] = i
                nl += 1
        nr = nl
        for i in seg:
            if X[i, best_f] > best_thr:
                buf[nr] = i
                nr += 1
        idx[lo:hi] = buf[:nr]

        feature[node] = best_f
        threshold[node] = best_thr
        lnode = n_nodes
        rnode = n_nodes + 1
        n_nodes += 2
        left[node] = lnode
        right[node] = rnode
        # push right first so the left subtree is numbered first
        st_node[top] = rnode
        st_lo[top] = lo + nl
        st_hi[top] = hi
        top += 1
        st_node[top] = lnode
        st_lo[top] = lo
        st_hi[top] = lo + nl
        top += 1

    return (
        feature[:n_nodes].copy(),
        threshold[:n_nodes].copy(),
        left[:n_nodes].copy(),
        right[:n_nodes].copy(),
        value[:n_nodes].copy(),
        importance,
    )


@njit(parallel=True, cache=True)
def vote(XT, packed, threshold, value, roots, depths, shift, n_classes):
    """Plurality vote of all trees; ties go to the lowest class index.

    ``XT`` is band-major (p, m).  Nodes are visited level-synchronously over
    blocks of pixels: leaves point to themselves with an infinite threshold,
    so every pixel takes exactly ``depths[t]`` branch-free steps in tree t.
    ``packed[k] = left[k] << shift | feature[k]``; right children sit at
    ``left + 1``.
    """
    m = XT.shape[1]
    out = np.empty(m, np.int32)
    mask = (1 << shift) - 1
    n_blocks = (m + VOTE_BLOCK - 1) // VOTE_BLOCK
    for b in prange(n_blocks):
        s = b * VOTE_BLOCK
        w = min(m, s + VOTE_BLOCK) - s
        votes = np.zeros((n_classes, w), np.int32)
        nodes = np.empty(w, np.int32)
        for t in range(roots.shape[0]):
            r = roots[t]
            for i in range(w):
                nodes[i] = r
            for _ in range(depths[t]):
                for i in range(w):
                    nd = nodes[i]
                    lf = packed[nd]
                    nodes[i] = (lf >> shift) + (XT[lf & mask, s + i] > threshold[nd])
            for i in range(w):
                votes[value[nodes[i]], i] += 1
        for i in range(w):
            best = 0
            for k in range(1, n_classes):
                if votes[k, i] > votes[best, i]:
                    best = k
            out[s + i] = best
    return out


@njit(nogil=True, cache=True)
def vote_serial(X, feature, threshold, left, right, value, roots, n_classes):
    """Reference pointer-chasing traversal, row-major ``X`` (m, p)."""
    m = X.shape[0]
    out = np.empty(m, np.int32)
    votes = np.zeros(n_classes, np.int32)
    for i in range(m):
        votes[:] = 0
        for t in range(roots.shape[0]):
            node = roots[t]
            while feature[node] >= 0:
                if X[i, feature[node]] <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            votes[value[node]] += 1
        best = 0
        for k in range(1, n_classes):
            if votes[k] > votes[best]:
                best = k
        out[i] = best
    return out
