# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled scatter/gather kernels over column-major tensors.

Every sketch of a dense tensor is the same loop: walk the entries in
column-major order, combine the per-mode bucket tables into one output
slot ``(sum_n bucket_n[i_n] * stride_n) mod modulus`` and add the signed
value there.  The gather is the transpose of that map.
"""

import numpy as np
cimport numpy as cnp
from libc.stdlib cimport malloc, free

cnp.import_array()


def scatter_composed(const double[::1] values, const long long[::1] dims,
                     const long long[:, ::1] buckets, const double[:, ::1] signs,
                     const long long[::1] strides, long long modulus,
                     long long out_len):
    cdef Py_ssize_t order = dims.shape[0]
    cdef Py_ssize_t total = values.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out_arr = np.zeros(out_len, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef long long *idx = <long long *> malloc(order * sizeof(long long))
    cdef long long first = dims[0]
    cdef long long stride0 = strides[0]
    cdef long long outer_b, b
    cdef double outer_s, v
    cdef Py_ssize_t base, i0, n
    if idx == NULL:
        raise MemoryError()
    try:
        with nogil:
            for n in range(order):
                idx[n] = 0
            base = 0
            while base < total:
                outer_b = 0
                outer_s = 1.0
                for n in range(1, order):
                    outer_b += buckets[n, idx[n]] * strides[n]
                    outer_s *= signs[n, idx[n]]
                for i0 in range(first):
                    v = values[base + i0]
                    if v == 0.0:
                        continue
                    b = outer_b + buckets[0, i0] * stride0
                    if modulus > 0:
                        b = b % modulus
                    out[b] += outer_s * signs[0, i0] * v
                base += first
                for n in range(1, order):
                    idx[n] += 1
                    if idx[n] < dims[n]:
                        break
                    idx[n] = 0
    finally:
        free(idx)
    return out_arr


def gather_composed(const double[::1] sketch, const long long[::1] dims,
                    const long long[:, ::1] buckets, const double[:, ::1] signs,
                    const long long[::1] strides, long long modulus):
    cdef Py_ssize_t order = dims.shape[0]
    cdef Py_ssize_t total = 1
    cdef Py_ssize_t n
    for n in range(order):
        total *= dims[n]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out_arr = np.empty(total, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef long long *idx = <long long *> malloc(order * sizeof(long long))
    cdef long long first = dims[0]
    cdef long long stride0 = strides[0]
    cdef long long outer_b, b
    cdef double outer_s
    cdef Py_ssize_t base, i0
    if idx == NULL:
        raise MemoryError()
    try:
        with nogil:
            for n in range(order):
                idx[n] = 0
            base = 0
            while base < total:
                outer_b = 0
                outer_s = 1.0
                for n in range(1, order):
                    outer_b += buckets[n, idx[n]] * strides[n]
                    outer_s *= signs[n, idx[n]]
                for i0 in range(first):
                    b = outer_b + buckets[0, i0] * stride0
                    if modulus > 0:
                        b = b % modulus
                    out[base + i0] = outer_s * signs[0, i0] * sketch[b]
                base += first
                for n in range(1, order):
                    idx[n] += 1
                    if idx[n] < dims[n]:
                        break
                    idx[n] = 0
    finally:
        free(idx)
    return out_arr
