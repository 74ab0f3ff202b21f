"""Kernel selection.

The compiled extension is used when it imports; otherwise the numpy
fallback.  Set ``SKETCHTENSOR_PURE_PYTHON=1`` to force the fallback.
"""

import os

import numpy as np

from . import _kernels_py

if os.environ.get("SKETCHTENSOR_PURE_PYTHON"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl

        BACKEND = "compiled"
    except ImportError:  # pragma: no cover - depends on the build
        _impl = _kernels_py
        BACKEND = "python"

IMPLEMENTATIONS = {"python": _kernels_py}
if BACKEND == "compiled":
    IMPLEMENTATIONS["compiled"] = _impl


def _tables(pairs):
    width = max(p.input_dim for p in pairs)
    buckets = np.zeros((len(pairs), width), dtype=np.int64)
    signs = np.zeros((len(pairs), width), dtype=np.float64)
    for n, p in enumerate(pairs):
        buckets[n, : p.input_dim] = p.bucket_map
        signs[n, : p.input_dim] = p.sign_map
    dims = np.array([p.input_dim for p in pairs], dtype=np.int64)
    return dims, buckets, signs


def scatter(values, pairs, strides, modulus, out_len, impl=None):
    """Signed scatter-add of a column-major flat tensor through composed hashes.

    Entry ``(i_1..i_N)`` lands in slot ``sum_n h_n(i_n) * strides[n]``,
    reduced mod ``modulus`` when ``modulus > 0``, with sign ``prod_n s_n(i_n)``.
    Zero entries are skipped.
    """
    mod = impl if impl is not None else _impl
    dims, buckets, signs = _tables(pairs)
    values = np.ascontiguousarray(values, dtype=np.float64)
    strides = np.ascontiguousarray(strides, dtype=np.int64)
    return mod.scatter_composed(values, dims, buckets, signs, strides, int(modulus), int(out_len))


def gather(sketch, pairs, strides, modulus, impl=None):
    """Transpose of :func:`scatter`: signed read of every tensor entry's slot."""
    mod = impl if impl is not None else _impl
    dims, buckets, signs = _tables(pairs)
    sketch = np.ascontiguousarray(sketch, dtype=np.float64)
    strides = np.ascontiguousarray(strides, dtype=np.int64)
    return mod.gather_composed(sketch, dims, buckets, signs, strides, int(modulus))
