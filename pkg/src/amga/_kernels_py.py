"""Numpy implementations of the fused elementwise kernels.

Same signatures and semantics as the compiled ``amga._kernels`` module.
Reductions accumulate in float64 and cast back to the input dtype.
"""
import numpy as np


def sq_group_means(h, bounds):
    """Per-row mean of squares, mean of per-group means of squares, and total sum of squares.

    ``bounds`` holds K+1 increasing column offsets delimiting contiguous
    groups. With fewer than two offsets the grouped mean equals the row mean.
    """
    sq = np.square(h, dtype=np.float64)
    d = h.shape[1]
    row_sums = sq.sum(axis=1)
    local = row_sums / d
    k = len(bounds) - 1
    if k < 1:
        inter = local.copy()
    else:
        inter = np.zeros(h.shape[0], dtype=np.float64)
        for lo, hi in zip(bounds[:-1], bounds[1:]):
            inter += sq[:, lo:hi].sum(axis=1) / (hi - lo)
        inter /= k
    return local.astype(h.dtype), inter.astype(h.dtype), float(row_sums.sum())


def goodness_grad(h, row_coef, col_coef, shared, out):
    """``out[i, j] = 2 h[i, j] (row_coef[i] col_coef[j] + shared)``.

    ``h`` is a ReLU output, so the ReLU derivative is already folded in:
    wherever the unit is inactive ``h`` is zero and so is the gradient.
    """
    coef = np.multiply.outer(row_coef.astype(np.float64), col_coef.astype(np.float64))
    coef += shared
    coef *= 2.0
    coef *= h
    out[...] = coef
    return out


def bias_relu_(z, b):
    np.add(z, b, out=z)
    np.maximum(z, 0, out=z)
    return z


def normalize_rows(h, eps):
    norms = np.sqrt(np.square(h, dtype=np.float64).sum(axis=1, keepdims=True))
    return (h / (norms + eps)).astype(h.dtype)
