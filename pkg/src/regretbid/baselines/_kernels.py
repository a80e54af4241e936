"""Compiled inner loops for forest growing and network training."""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True, error_model="numpy")
def grow_tree(X, y, order, weights, max_depth, features, thresholds, node_value):
    """Grow one weighted regression tree level by level.

    Nodes are numbered heap-style (children of ``k`` are ``2k+1`` and
    ``2k+2``). For each level, one pass over every feature's sort order
    scores all candidate splits of all nodes on that level. Candidates are
    midpoints between consecutive distinct in-bag values; ties keep the
    first candidate found (lowest feature, then lowest threshold).
    """
    n, n_feat = X.shape
    n_nodes = 2 ** (max_depth + 1) - 1
    node = np.zeros(n, dtype=np.int64)
    sw = np.zeros(n_nodes)
    sy = np.zeros(n_nodes)
    syy = np.zeros(n_nodes)
    for i in range(n):
        w = weights[i]
        sw[0] += w
        sy[0] += w * y[i]
        syy[0] += w * y[i] * y[i]
    node_value[0] = sy[0] / sw[0]
    for level in range(max_depth):
        first = 2**level - 1
        width = 2**level
        best_sse = np.full(width, np.inf)
        best_f = np.full(width, -1, dtype=np.int64)
        best_thr = np.full(width, np.inf)
        parent_sse = np.empty(width)
        for j in range(width):
            k = first + j
            parent_sse[j] = syy[k] - sy[k] * sy[k] / sw[k] if sw[k] > 0 else 0.0
        lw = np.zeros(width)
        ly = np.zeros(width)
        lyy = np.zeros(width)
        prev = np.zeros(width)
        seen = np.zeros(width, dtype=np.bool_)
        for f in range(n_feat):
            lw[:] = 0.0
            ly[:] = 0.0
            lyy[:] = 0.0
            seen[:] = False
            for r in range(n):
                i = order[f, r]
                w = weights[i]
                if w == 0.0:
                    continue
                j = node[i] - first
                x = X[i, f]
                if seen[j] and x > prev[j]:
                    k = first + j
                    rw = sw[k] - lw[j]
                    ry = sy[k] - ly[j]
                    ryy = syy[k] - lyy[j]
                    sse = (lyy[j] - ly[j] * ly[j] / lw[j]) + (ryy - ry * ry / rw)
                    if sse < best_sse[j]:
                        best_sse[j] = sse
                        best_f[j] = f
                        best_thr[j] = 0.5 * (prev[j] + x)
                lw[j] += w
                ly[j] += w * y[i]
                lyy[j] += w * y[i] * y[i]
                prev[j] = x
                seen[j] = True
        for j in range(width):
            k = first + j
            tol = 1e-12 * max(abs(parent_sse[j]), 1.0)
            if best_f[j] >= 0 and best_sse[j] < parent_sse[j] - tol:
                features[k] = best_f[j]
                thresholds[k] = best_thr[j]
            else:
                features[k] = -1
                thresholds[k] = np.inf
        for i in range(n):
            k = node[i]
            c = 2 * k + 1
            if features[k] >= 0 and X[i, features[k]] > thresholds[k]:
                c += 1
            node[i] = c
            w = weights[i]
            sw[c] += w
            sy[c] += w * y[i]
            syy[c] += w * y[i] * y[i]
        for j in range(2 * width):
            c = first + width + j
            parent = (c - 1) // 2
            node_value[c] = sy[c] / sw[c] if sw[c] > 0 else node_value[parent]


@njit(cache=True, error_model="numpy")
def grow_forest(X, y, order, counts, max_depth, features, thresholds, node_value):
    for t in range(counts.shape[0]):
        grow_tree(X, y, order, counts[t], max_depth, features[t], thresholds[t], node_value[t])


@njit(cache=True, error_model="numpy")
def _adam_update(p, g, m, v, beta1, beta2, lr_t, eps_t):
    for q in range(p.size):
        gq = g[q]
        m[q] = beta1 * m[q] + (1.0 - beta1) * gq
        v[q] = beta2 * v[q] + (1.0 - beta2) * gq * gq
        p[q] -= lr_t * m[q] / (np.sqrt(v[q]) + eps_t)


@njit(cache=True, error_model="numpy")
def adam_train(Z, y, W1, b1, W2, b2, W3, b3, perms, batch, lr, beta1, beta2, eps):
    """Minibatch Adam on squared error for a 2-hidden-layer ReLU network.

    Products go through BLAS into buffers allocated once; only the final,
    shorter batch of an epoch uses freshly sliced views.
    """
    n_in, hidden = W1.shape
    n = Z.shape[0]
    xb = np.empty((batch, n_in))
    xbT = np.empty((n_in, batch))
    z1 = np.empty((batch, hidden))
    z2 = np.empty((batch, hidden))
    h1T = np.empty((hidden, batch))
    d1 = np.empty((batch, hidden))
    d2 = np.empty((batch, hidden))
    out = np.empty((batch, 1))
    W2T = np.empty((hidden, hidden))
    gW1 = np.empty_like(W1)
    gW2 = np.empty_like(W2)
    gW3 = np.empty_like(W3)
    gb1 = np.empty_like(b1)
    gb2 = np.empty_like(b2)
    gb3 = np.empty_like(b3)
    mW1, vW1 = np.zeros(W1.size), np.zeros(W1.size)
    mW2, vW2 = np.zeros(W2.size), np.zeros(W2.size)
    mW3, vW3 = np.zeros(W3.size), np.zeros(W3.size)
    mb1, vb1 = np.zeros(hidden), np.zeros(hidden)
    mb2, vb2 = np.zeros(hidden), np.zeros(hidden)
    mb3, vb3 = np.zeros(1), np.zeros(1)
    step = 0
    for e in range(perms.shape[0]):
        for start in range(0, n, batch):
            bs = min(start + batch, n) - start
            full = bs == batch
            for i in range(bs):
                r = perms[e, start + i]
                for k in range(n_in):
                    xb[i, k] = Z[r, k]
                    xbT[k, i] = Z[r, k]
            X_ = xb if full else xb[:bs]
            Z1 = z1 if full else z1[:bs]
            Z2 = z2 if full else z2[:bs]
            O = out if full else out[:bs]
            np.dot(X_, W1, Z1)
            for i in range(bs):
                for j in range(hidden):
                    v = z1[i, j] + b1[j]
                    z1[i, j] = v if v > 0.0 else 0.0
                    h1T[j, i] = z1[i, j]
            np.dot(Z1, W2, Z2)
            for i in range(bs):
                for j in range(hidden):
                    v = z2[i, j] + b2[j]
                    z2[i, j] = v if v > 0.0 else 0.0
            np.dot(Z2, W3, O)
            gb3[0] = 0.0
            for i in range(bs):
                r = perms[e, start + i]
                out[i, 0] = (2.0 / bs) * (out[i, 0] + b3[0] - y[r])
                gb3[0] += out[i, 0]
            # backward
            for j in range(hidden):
                acc = 0.0
                for i in range(bs):
                    acc += z2[i, j] * out[i, 0]
                gW3[j, 0] = acc
            for j in range(hidden):
                gb2[j] = 0.0
            for i in range(bs):
                d = out[i, 0]
                for j in range(hidden):
                    d2[i, j] = d * W3[j, 0] if z2[i, j] > 0.0 else 0.0
                    gb2[j] += d2[i, j]
            D2 = d2 if full else d2[:bs]
            D1 = d1 if full else d1[:bs]
            np.dot(h1T if full else np.ascontiguousarray(h1T[:, :bs]), D2, gW2)
            for k in range(hidden):
                for j in range(hidden):
                    W2T[j, k] = W2[k, j]
            np.dot(D2, W2T, D1)
            for j in range(hidden):
                gb1[j] = 0.0
            for i in range(bs):
                for j in range(hidden):
                    if not z1[i, j] > 0.0:
                        d1[i, j] = 0.0
                    gb1[j] += d1[i, j]
            np.dot(xbT if full else np.ascontiguousarray(xbT[:, :bs]), D1, gW1)
            step += 1
            c1 = 1.0 - beta1**step
            c2 = 1.0 - beta2**step
            lr_t = lr * np.sqrt(c2) / c1
            eps_t = eps * np.sqrt(c2)
            _adam_update(W1.reshape(W1.size), gW1.reshape(W1.size), mW1, vW1, beta1, beta2, lr_t, eps_t)
            _adam_update(b1, gb1, mb1, vb1, beta1, beta2, lr_t, eps_t)
            _adam_update(W2.reshape(W2.size), gW2.reshape(W2.size), mW2, vW2, beta1, beta2, lr_t, eps_t)
            _adam_update(b2, gb2, mb2, vb2, beta1, beta2, lr_t, eps_t)
            _adam_update(W3.reshape(W3.size), gW3.reshape(W3.size), mW3, vW3, beta1, beta2, lr_t, eps_t)
            _adam_update(b3, gb3, mb3, vb3, beta1, beta2, lr_t, eps_t)
