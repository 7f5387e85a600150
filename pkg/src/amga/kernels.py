"""Backend selection for the fused elementwise kernels.

The compiled extension is used when it was built; otherwise (or when
``AMGA_PURE_PYTHON=1`` is set) the numpy implementations are used. ``BACKEND``
names the active one. Matrix products always go through numpy/BLAS.
"""
import os

import numpy as np

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("AMGA_PURE_PYTHON", "").lower() not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:
        pass
    else:
        _impl = _compiled
        BACKEND = "cython"


def group_bounds(d: int, k: int) -> np.ndarray:
    """Column offsets splitting ``d`` columns into ``k`` contiguous groups, larger groups first."""
    if k < 1:
        return np.zeros(1, dtype=np.intp)
    base, extra = divmod(d, k)
    sizes = [base + 1] * extra + [base] * (k - extra)
    return np.concatenate([[0], np.cumsum(sizes)]).astype(np.intp)


def sq_group_means(h, bounds, impl=None):
    impl = impl or _impl
    return impl.sq_group_means(np.ascontiguousarray(h), np.ascontiguousarray(bounds, dtype=np.intp))


def goodness_grad(h, row_coef, col_coef, shared, impl=None):
    impl = impl or _impl
    h = np.ascontiguousarray(h)
    out = np.empty_like(h)
    impl.goodness_grad(
        h,
        np.ascontiguousarray(row_coef, dtype=h.dtype),
        np.ascontiguousarray(col_coef, dtype=h.dtype),
        float(shared),
        out,
    )
    return out


def bias_relu_(z, b, impl=None):
    impl = impl or _impl
    if not z.flags.c_contiguous:
        raise ValueError("bias_relu_ works in place and needs a C-contiguous array")
    impl.bias_relu_(z, np.ascontiguousarray(b, dtype=z.dtype))
    return z


def normalize_rows(h, eps=1e-8, impl=None):
    impl = impl or _impl
    return impl.normalize_rows(np.ascontiguousarray(h), float(eps))
