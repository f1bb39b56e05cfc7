"""Naive reference implementations used to cross-check the package.

Everything here is written the slow, obvious way (explicit loops, direct
formulas) and stays independent of the package's own tensor code paths.
"""

from __future__ import annotations

import math

import numpy as np


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def gru_cell(wz, wr, wh, bz, br, bh, h_prev, x):
    """One gated recurrent step on numpy vectors."""
    hx = np.concatenate([h_prev, x])
    z = sigmoid(wz @ hx + bz)
    r = sigmoid(wr @ hx + br)
    rhx = np.concatenate([r * h_prev, x])
    c = np.tanh(wh @ rhx + bh)
    return (1.0 - z) * h_prev + z * c


def bigru_sequence(fwd_params, bwd_params, comb_w, comb_v, comb_b, xs):
    """Per-position combined hidden states for one unpadded sequence.

    ``xs`` is (steps, input_dim); each params tuple is (wz, wr, wh, bz, br,
    bh). Returns (steps, hidden).
    """
    hidden = fwd_params[0].shape[0]
    h = np.zeros(hidden)
    fwd = []
    for x in xs:
        h = gru_cell(*fwd_params, h, x)
        fwd.append(h)
    h = np.zeros(hidden)
    bwd = [None] * len(xs)
    for t in range(len(xs) - 1, -1, -1):
        h = gru_cell(*bwd_params, h, xs[t])
        bwd[t] = h
    return np.stack([comb_w * f + comb_v * b + comb_b
                     for f, b in zip(fwd, bwd)])


def depthwise_separable_conv(x, depth_w, depth_b, point_w, point_b, dilation):
    """Explicit-loop 3x3 depthwise plus 1x1 pointwise convolution.

    x: (C, H, W); depth_w: (C, 1, 3, 3); point_w: (C_out, C, 1, 1).
    Zero padding of ``dilation`` on each side keeps the spatial shape.
    """
    channels, height, width = x.shape
    pad = dilation
    padded = np.zeros((channels, height + 2 * pad, width + 2 * pad))
    padded[:, pad:height + pad, pad:width + pad] = x
    depth_out = np.zeros_like(x)
    for c in range(channels):
        for i in range(height):
            for j in range(width):
                acc = 0.0
                for di in range(3):
                    for dj in range(3):
                        acc += (depth_w[c, 0, di, dj]
                                * padded[c, i + di * dilation,
                                         j + dj * dilation])
                depth_out[c, i, j] = acc + depth_b[c]
    out_channels = point_w.shape[0]
    out = np.zeros((out_channels, height, width))
    for o in range(out_channels):
        for i in range(height):
            for j in range(width):
                out[o, i, j] = (point_w[o, :, 0, 0] @ depth_out[:, i, j]
                                + point_b[o])
    return out


def adaptive_avg_pool(x, grid):
    """Floor-rule adaptive average pooling of (C, H, W) onto grid x grid."""

    def bounds(n):
        out = []
        for a in range(grid):
            start = (a * n) // grid
            end = ((a + 1) * n) // grid
            if end <= start:
                end = start + 1
            out.append((start, end))
        return out

    channels, height, width = x.shape
    rows = bounds(height)
    cols = bounds(width)
    out = np.zeros((channels, grid, grid))
    for c in range(channels):
        for a, (r0, r1) in enumerate(rows):
            for b, (c0, c1) in enumerate(cols):
                out[c, a, b] = x[c, r0:r1, c0:c1].mean()
    return out


def attention_single_head(x, wq, bq, wk, bk, wv, bv, mask):
    """One attention head on (seq, d) numpy input with a 0/1 key mask."""
    q = x @ wq.T + bq
    k = x @ wk.T + bk
    v = x @ wv.T + bv
    scale = 1.0 / math.sqrt(q.shape[-1])
    out = np.zeros_like(v)
    for i in range(x.shape[0]):
        scores = np.array([
            (q[i] @ k[j]) * scale if mask[j] else -np.inf
            for j in range(x.shape[0])
        ])
        shifted = scores - scores.max()
        weights = np.exp(shifted)
        weights = weights / weights.sum()
        out[i] = weights @ v
    return out


def layer_norm(x, weight, bias, eps=1e-5):
    mean = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    return (x - mean) / np.sqrt(var + eps) * weight + bias


def gelu(x):
    return np.asarray(x) * 0.5 * (1.0 + np.vectorize(math.erf)(
        np.asarray(x) / math.sqrt(2.0)))


def cross_entropy(logits, labels):
    """Mean negative log-likelihood computed row by row."""
    total = 0.0
    for row, label in zip(logits, labels):
        shifted = row - max(row)
        log_z = math.log(sum(math.exp(v) for v in shifted))
        total += log_z - shifted[label]
    return total / len(labels)


def auc_pairs(scores, labels):
    """Brute force over every positive-negative pair; ties count half."""
    pos = [s for s, l in zip(scores, labels) if l == 1]
    neg = [s for s, l in zip(scores, labels) if l == 0]
    total = 0.0
    for p in pos:
        for n in neg:
            if p > n:
                total += 1.0
            elif p == n:
                total += 0.5
    return total / (len(pos) * len(neg))


def roc_points(scores, labels):
    """ROC by enumerating every distinct threshold, highest first."""
    n_pos = sum(1 for l in labels if l == 1)
    n_neg = len(labels) - n_pos
    points = [(0.0, 0.0)]
    for threshold in sorted(set(scores), reverse=True):
        tp = sum(1 for s, l in zip(scores, labels) if l == 1 and s >= threshold)
        fp = sum(1 for s, l in zip(scores, labels) if l == 0 and s >= threshold)
        points.append((fp / n_neg, tp / n_pos))
    return points


def tpr_at_fpr(points, target):
    return max(tpr for fpr, tpr in points if fpr <= target)


def prf_counts(preds, labels, positive):
    tp = sum(1 for p, l in zip(preds, labels) if p == positive and l == positive)
    fp = sum(1 for p, l in zip(preds, labels) if p == positive and l != positive)
    fn = sum(1 for p, l in zip(preds, labels) if p != positive and l == positive)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = (2 * precision * recall / (precision + recall)
          if precision + recall else 0.0)
    return precision, recall, f1
