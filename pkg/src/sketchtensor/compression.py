"""Sketch-domain codecs for Kronecker products and tensor contractions.

``A (I1 x I2)`` and ``B (I3 x I4)`` define the order-4 tensor
``X[i1, i2, i3, i4] = A[i1, i2] * B[i3, i4]``, whose entries are those of
``kron(A, B)`` at row ``I3*i1 + i3`` and column ``I4*i2 + i4`` (0-based).
The fast count sketch of ``X`` is the linear convolution of the FCS of
``A`` (pairs 1, 2) with the FCS of ``B`` (pairs 3, 4), so ``A (x) B`` is
never formed.  A contraction over ``L`` sums ``L`` such convolutions, one
per slice pair.

HCS and long-pair CS codecs share the interface as baselines.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .estimators import median_reduce
from .hashing import HashFamily, HashPair, make_families
from .sketches import cs_long, fcs_cp, fcs_dense, fft, fft_real, hcs_dense, hcs_strides, linear_fft_len
from .tensor import CpTensor, as_tensor, contract_pair, unvec, vec

METHODS = ("FCS", "HCS", "CS")


@dataclass(frozen=True)
class KronSketch:
    """``D`` sketches of ``A (x) B`` with their hash families.

    ``values`` is ``D x J~`` for FCS/CS and ``D x J1 x J2 x J3 x J4`` for HCS.
    ``families`` holds four short pairs per copy (one long pair for CS).
    """

    values: np.ndarray
    families: tuple
    shapes: tuple
    method: str = "FCS"

    def __post_init__(self):
        if len(self.shapes) != 4:
            raise ValueError("shapes must be (I1, I2, I3, I4)")
        if self.values.shape[0] != len(self.families):
            raise ValueError("one family per sketch copy")
        if self.method == "FCS":
            for f in self.families:
                if f.order != 4 or f.input_dims != tuple(self.shapes):
                    raise ValueError("FCS families need four pairs matching the operand shapes")
            if self.values.shape[1:] != (self.families[0].composed_len,):
                raise ValueError("FCS sketch length must be sum(J_n) - 3")

    @property
    def sketch_count(self):
        return len(self.families)

    @property
    def sketch_size(self):
        return int(np.prod(self.values.shape[1:]))

    @property
    def full_size(self):
        return int(np.prod(self.shapes))

    @property
    def compression_ratio(self):
        return self.full_size / self.sketch_size

    @property
    def hash_memory(self):
        return sum(hash_memory(f) for f in self.families)


@dataclass(frozen=True)
class ContractionSketch(KronSketch):
    """Sketches of ``A (I1,I2,L)`` contracted with ``B (L,I3,I4)`` over ``L``."""

    contracted_dim: int = 1


def compression_ratio(family: HashFamily) -> float:
    """``prod(I_n) / (sum(J_n) - N + 1)``."""
    return family.composed_dim / family.composed_len


def hash_memory(obj) -> int:
    """Bytes of stored hash tables for a family or a single (long) pair."""
    if isinstance(obj, HashPair):
        return obj.nbytes
    if isinstance(obj, HashFamily):
        return obj.nbytes
    raise TypeError(f"expected HashFamily or HashPair, got {type(obj).__name__}")


def long_pair_memory(dims) -> int:
    """Bytes a single CS pair over ``prod(dims)`` indices would take."""
    n = int(np.prod(dims, dtype=np.int64))
    return n * (np.dtype(np.int64).itemsize + np.dtype(np.int8).itemsize)


def split_lengths(total, parts):
    """``parts`` positive integers, as equal as possible, summing to ``total``."""
    base, extra = divmod(int(total), int(parts))
    if base < 1:
        raise ValueError(f"cannot split {total} into {parts} positive parts")
    return tuple(base + 1 if n < extra else base for n in range(parts))


def hash_lengths_for_cr(dims, cr, method="FCS"):
    """Hash lengths giving a compression ratio close to ``cr``.

    FCS: ``J~ = ceil(prod(dims) / cr)`` with per-mode lengths as equal as
    possible (``sum(J_n) = J~ + N - 1``).  HCS: equal per-mode lengths with
    ``prod(J_n)`` closest to ``prod(dims) / cr``.  CS: one long length.
    """
    full = int(np.prod(dims))
    target = max(1, math.ceil(full / cr))
    order = len(dims)
    if method == "FCS":
        return split_lengths(target + order - 1, order)
    if method == "HCS":
        j = max(1, round(target ** (1.0 / order)))
        return (j,) * order
    if method == "CS":
        return (target,)
    raise ValueError(f"unknown method {method!r}")


def _families(method, dims, hash_len, sketch_count, seed):
    if method == "CS":
        length = hash_len if np.ndim(hash_len) == 0 else int(np.ravel(hash_len)[0])
        return tuple(make_families((int(np.prod(dims)),), length, seed, sketch_count))
    return tuple(make_families(dims, hash_len, seed, sketch_count))


def _identity_pair(n):
    return HashPair.from_maps(np.arange(n), np.ones(n), n)


def _slice_sketches(t, pairs):
    """FCS of every slice ``t[:, :, l]`` at once (columns of the result)."""
    slices = t.shape[2]
    inner = sum(p.hash_len for p in pairs) - len(pairs) + 1
    flat = kernels.scatter(
        vec(t),
        tuple(pairs) + (_identity_pair(slices),),
        np.array([1, 1, inner], dtype=np.int64),
        0,
        inner * slices,
    )
    return flat.reshape(inner, slices, order="F")


def _convolve_fcs(xa, xb, length):
    n = linear_fft_len(length)
    spec = fft(xa, n) * fft(xb, n)
    if spec.ndim == 2:
        spec = spec.sum(axis=1)
    return fft_real(spec)[:length]


def compress_kron(a, b, hash_len, sketch_count=20, seed=0, method="FCS") -> KronSketch:
    """Compress ``kron(a, b)`` into ``sketch_count`` independent sketches."""
    a = np.atleast_2d(as_tensor(a))
    b = np.atleast_2d(as_tensor(b))
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError("compress_kron takes two matrices")
    shapes = a.shape + b.shape
    families = _families(method, shapes, hash_len, sketch_count, seed)
    out = []
    for fam in families:
        if method == "FCS":
            xa = fcs_dense(a, fam.sub([0, 1])).values
            xb = fcs_dense(b, fam.sub([2, 3])).values
            out.append(_convolve_fcs(xa, xb, fam.composed_len))
        elif method == "HCS":
            ha = hcs_dense(a, fam.sub([0, 1])).values
            hb = hcs_dense(b, fam.sub([2, 3])).values
            out.append(np.multiply.outer(ha, hb))
        elif method == "CS":
            out.append(cs_long(np.multiply.outer(a, b), fam.pairs[0]).values)
        else:
            raise ValueError(f"unknown method {method!r}")
    return KronSketch(np.array(out), families, shapes, method)


def compress_contraction(a, b, hash_len, sketch_count=20, seed=0, method="FCS") -> ContractionSketch:
    """Compress ``A (I1,I2,L)`` contracted with ``B (L,I3,I4)`` over ``L``."""
    a = as_tensor(a)
    b = as_tensor(b)
    if a.ndim != 3 or b.ndim != 3:
        raise ValueError("compress_contraction takes two 3rd-order tensors")
    if a.shape[2] != b.shape[0]:
        raise ValueError(f"contracted dimensions differ: {a.shape[2]} vs {b.shape[0]}")
    shapes = a.shape[:2] + b.shape[1:]
    families = _families(method, shapes, hash_len, sketch_count, seed)
    b_front = np.moveaxis(b, 0, 2)
    out = []
    for fam in families:
        if method == "FCS":
            xa = _slice_sketches(a, fam.pairs[:2])
            xb = _slice_sketches(b_front, fam.pairs[2:])
            out.append(_convolve_fcs(xa, xb, fam.composed_len))
        elif method == "HCS":
            ha = hcs_dense(a, HashFamily(fam.pairs[:2] + (_identity_pair(a.shape[2]),))).values
            hb = hcs_dense(b, HashFamily((_identity_pair(b.shape[0]),) + fam.pairs[2:])).values
            out.append(np.tensordot(ha, hb, axes=([2], [0])))
        elif method == "CS":
            out.append(cs_long(contract_pair(a, b, 2, 0), fam.pairs[0]).values)
        else:
            raise ValueError(f"unknown method {method!r}")
    return ContractionSketch(np.array(out), families, shapes, method, contracted_dim=a.shape[2])


def _read(sk: KronSketch, i1, i2, i3, i4):
    idx = [np.asarray(i) for i in (i1, i2, i3, i4)]
    for n, (i, size) in enumerate(zip(idx, sk.shapes)):
        if i.size and (i.min() < 0 or i.max() >= size):
            raise IndexError(f"index out of range for mode {n} of size {size}")
    reads = []
    for fam, values in zip(sk.families, sk.values):
        if sk.method == "CS":
            pair = fam.pairs[0]
            flat = np.ravel_multi_index(idx, sk.shapes, order="F")
            reads.append(pair.sign_map[flat] * values[pair.bucket_map[flat]])
            continue
        sign = np.ones(np.broadcast(*idx).shape)
        buckets = []
        for p, i in zip(fam.pairs, idx):
            sign = sign * p.sign_map[i]
            buckets.append(p.bucket_map[i])
        if sk.method == "HCS":
            reads.append(sign * values[tuple(buckets)])
        else:
            # The modulo is a no-op (buckets never exceed J~ - 1); kept to mirror the stated rule.
            reads.append(sign * values[sum(buckets) % fam.composed_len])
    return median_reduce(reads)


def decompress_kron(sk: KronSketch, row, col):
    """Median-of-D estimate of ``kron(A, B)[row, col]`` (scalars or arrays)."""
    i1, i3 = np.divmod(np.asarray(row), sk.shapes[2])
    i2, i4 = np.divmod(np.asarray(col), sk.shapes[3])
    if np.any(np.asarray(row) < 0) or np.any(i1 >= sk.shapes[0]):
        raise IndexError("row out of range")
    if np.any(np.asarray(col) < 0) or np.any(i2 >= sk.shapes[1]):
        raise IndexError("column out of range")
    out = _read(sk, i1, i2, i3, i4)
    return float(out) if np.ndim(out) == 0 else out


def decompress_contraction(sk: ContractionSketch, i1, i2, i3, i4):
    """Median-of-D estimate of ``(A contracted with B)[i1, i2, i3, i4]``."""
    out = _read(sk, i1, i2, i3, i4)
    return float(out) if np.ndim(out) == 0 else out


def reconstruct(sk: KronSketch) -> np.ndarray:
    """Decompress every entry as an ``(I1, I2, I3, I4)`` tensor; ``O(prod(I_n))`` work."""
    reads = []
    for fam, values in zip(sk.families, sk.values):
        if sk.method == "FCS":
            flat = kernels.gather(values, fam.pairs, np.ones(4, dtype=np.int64), fam.composed_len)
        elif sk.method == "HCS":
            flat = kernels.gather(vec(values), fam.pairs, hcs_strides(fam), 0)
        else:
            pair = fam.pairs[0]
            flat = pair.sign_map * values[pair.bucket_map]
        reads.append(unvec(flat, sk.shapes))
    return median_reduce(reads)


def reconstruct_kron(sk: KronSketch) -> np.ndarray:
    """Full ``I1*I3 x I2*I4`` Kronecker estimate."""
    i1, i2, i3, i4 = sk.shapes
    return reconstruct(sk).transpose(0, 2, 1, 3).reshape(i1 * i3, i2 * i4)


def kron_as_tensor(a, b):
    """``kron(a, b)`` reshaped to the ``(I3, I1, I4, I2)`` tensor its column-major layout implies."""
    a = np.atleast_2d(a)
    b = np.atleast_2d(b)
    return np.kron(a, b).reshape((b.shape[0], a.shape[0], b.shape[1], a.shape[1]), order="F")


def relative_error(estimate, truth) -> float:
    truth = np.asarray(truth, dtype=np.float64)
    return float(np.linalg.norm(np.asarray(estimate) - truth) / np.linalg.norm(truth))


def sketched_regression_forward(x_rows, weights, bias, mode_shape, hash_len, sketch_count=1, seed=0):
    """Sketched tensor-regression layer: ``FCS(X)^T FCS(W) + b``, median over copies.

    ``x_rows`` is ``B x prod(mode_shape)`` (each row a column-major
    vectorized sample).  ``weights`` is either a ``C x prod(mode_shape)``
    matrix or a :class:`CpTensor` of shape ``mode_shape + (C,)``.
    """
    x_rows = np.atleast_2d(np.asarray(x_rows, dtype=np.float64))
    mode_shape = tuple(int(i) for i in mode_shape)
    full = int(np.prod(mode_shape))
    if x_rows.shape[1] != full:
        raise ValueError(f"input rows have {x_rows.shape[1]} entries, mode shape needs {full}")
    if isinstance(weights, CpTensor):
        if weights.shape[:-1] != mode_shape:
            raise ValueError("CP weight shape must be mode_shape + (C,)")
        classes = weights.shape[-1]
    else:
        weights = np.atleast_2d(np.asarray(weights, dtype=np.float64))
        if weights.shape[1] != full:
            raise ValueError(f"weight rows have {weights.shape[1]} entries, mode shape needs {full}")
        classes = weights.shape[0]
    bias = np.broadcast_to(np.asarray(bias, dtype=np.float64), (classes,))
    outs = []
    for fam in make_families(mode_shape, hash_len, seed, sketch_count):
        xs = np.array([fcs_dense(unvec(row, mode_shape), fam).values for row in x_rows])
        if isinstance(weights, CpTensor):
            head = weights.factors[:-1]
            cls_factor = weights.factors[-1]
            ws = np.array(
                [fcs_cp(CpTensor(weights.weights * cls_factor[j], head), fam).values for j in range(classes)]
            )
        else:
            ws = np.array([fcs_dense(unvec(row, mode_shape), fam).values for row in weights])
        outs.append(xs @ ws.T)
    return median_reduce(outs) + bias
