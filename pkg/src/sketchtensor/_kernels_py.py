"""Pure-numpy versions of the compiled kernels in ``_kernels.pyx``.

Same signatures and results; the composed bucket/sign arrays are
materialized (``O(prod(dims))`` temporaries) instead of streamed.
"""

import numpy as np


def _composed(dims, buckets, signs, strides, modulus):
    order = len(dims)
    bucket = np.zeros((), dtype=np.int64)
    sign = np.ones((), dtype=np.float64)
    # Build C-order arrays over reversed modes so that a C ravel equals the
    # column-major (first index fastest) ravel of the tensor.
    for n in reversed(range(order)):
        size = int(dims[n])
        bucket = np.add.outer(bucket, buckets[n, :size] * strides[n])
        sign = np.multiply.outer(sign, signs[n, :size])
    bucket = bucket.ravel()
    if modulus > 0:
        bucket = bucket % modulus
    return bucket, sign.ravel()


def scatter_composed(values, dims, buckets, signs, strides, modulus, out_len):
    bucket, sign = _composed(dims, buckets, signs, strides, modulus)
    values = np.asarray(values)
    nz = values != 0.0
    return np.bincount(bucket[nz], weights=sign[nz] * values[nz], minlength=int(out_len)).astype(
        np.float64, copy=False
    )


def gather_composed(sketch, dims, buckets, signs, strides, modulus):
    bucket, sign = _composed(dims, buckets, signs, strides, modulus)
    return sign * np.asarray(sketch)[bucket]
