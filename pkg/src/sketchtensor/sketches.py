"""Count sketch (CS), tensor sketch (TS), higher-order count sketch (HCS)
and fast count sketch (FCS).

Dense inputs go through the compiled scatter kernel in ``O(nnz(T))``.  CP
inputs sketch each factor column with its mode's pair and combine the
short sketches: circular convolution of length ``J`` for TS, zero-padded
linear convolution of length ``sum(J_n) - N + 1`` for FCS, outer products
for HCS.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from . import kernels
from .hashing import HashFamily, HashPair
from .tensor import CpTensor, as_tensor, khatri_rao, vec

KINDS = ("CS", "TS", "HCS", "FCS")

# Inverse FFTs of real data are real up to round-off; anything larger is a bug.
IMAG_RESIDUE_TOL = 1e-9


@dataclass(frozen=True)
class SketchVec:
    """Vector-valued sketch (CS, TS or FCS) and the family that produced it."""

    values: np.ndarray
    family: HashFamily
    kind: str

    def __post_init__(self):
        expected = expected_length(self.kind, self.family)
        if self.values.shape != (expected,):
            raise ValueError(f"{self.kind} sketch must have length {expected}, got {self.values.shape}")

    def __len__(self):
        return self.values.size


@dataclass(frozen=True)
class SketchTensor:
    """HCS output: an order-N tensor of shape ``family.hash_lens``."""

    values: np.ndarray
    family: HashFamily
    kind: str = "HCS"

    def __post_init__(self):
        if self.values.shape != self.family.hash_lens:
            raise ValueError(
                f"HCS sketch must have shape {self.family.hash_lens}, got {self.values.shape}"
            )


def expected_length(kind, family):
    if kind == "FCS":
        return family.composed_len
    if kind == "TS":
        return family.hash_lens[0]
    if kind == "CS":
        if family.order != 1:
            raise ValueError("a CS family holds exactly one (possibly long) pair")
        return family.hash_lens[0]
    raise ValueError(f"unknown vector sketch kind {kind!r}")


def _check_dims(shape, family):
    if tuple(shape) != family.input_dims:
        raise ValueError(f"tensor shape {tuple(shape)} does not match family dims {family.input_dims}")


def _check_equal_lengths(family):
    lens = set(family.hash_lens)
    if len(lens) != 1:
        raise ValueError(f"tensor sketch needs equal hash lengths, got {family.hash_lens}")
    return lens.pop()


def cs_matrix(x, pair: HashPair) -> np.ndarray:
    """Column-wise count sketch: ``I x K`` -> ``J x K`` (a vector stays a vector)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] != pair.input_dim:
        raise ValueError(f"input has {x.shape[0]} rows, hash pair expects {pair.input_dim}")
    if x.ndim <= 2:
        return pair.operator @ x
    out = pair.operator @ x.reshape(x.shape[0], -1)
    return out.reshape((pair.hash_len,) + x.shape[1:])


def cs_vector(x, pair: HashPair) -> SketchVec:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("cs_vector expects a vector")
    return SketchVec(cs_matrix(x, pair), HashFamily((pair,)), "CS")


def cs_long(t, pair: HashPair) -> SketchVec:
    """Plain CS of ``vec(T)`` with one long pair over ``prod(I_n)`` indices."""
    return cs_vector(vec(t), pair)


def linear_fft_len(n):
    """Transform length for an exact linear convolution with ``n`` outputs."""
    return sfft.next_fast_len(int(n))


def fft(x, n):
    return sfft.fft(x, n=n, axis=0)


def fft_real(spectrum) -> np.ndarray:
    """Inverse FFT along axis 0 that insists on a real result."""
    out = sfft.ifft(spectrum, axis=0)
    scale = np.abs(out.real).max() if out.size else 0.0
    residue = np.abs(out.imag).max() if out.size else 0.0
    if residue > IMAG_RESIDUE_TOL * max(scale, 1.0):
        raise FloatingPointError(f"inverse FFT left an imaginary residue of {residue:.3g}")
    return out.real


def _weighted_spectrum(cp: CpTensor, family: HashFamily, n_fft: int):
    """``sum_r w_r prod_n fft(CS_n(U_n[:, r]))``; one inverse FFT then gives the sketch.

    Spectra are held as ``R x n`` so each transform runs over contiguous memory.
    """
    spectrum = None
    for f, pair in zip(cp.factors, family.pairs):
        rows = np.ascontiguousarray(cs_matrix(f, pair).T)
        spec_n = sfft.fft(rows, n=n_fft, axis=-1)
        if spectrum is None:
            spectrum = spec_n
        else:
            spectrum *= spec_n
    return cp.weights @ spectrum


def _check_cp(cp: CpTensor, family: HashFamily):
    if cp.order != family.order:
        raise ValueError(f"CP order {cp.order} does not match family order {family.order}")
    _check_dims(cp.shape, family)


def ts_dense(t, family: HashFamily) -> SketchVec:
    t = as_tensor(t)
    _check_dims(t.shape, family)
    j = _check_equal_lengths(family)
    ones = np.ones(family.order, dtype=np.int64)
    values = kernels.scatter(vec(t), family.pairs, ones, j, j)
    return SketchVec(values, family, "TS")


def ts_cp(cp: CpTensor, family: HashFamily) -> SketchVec:
    _check_cp(cp, family)
    j = _check_equal_lengths(family)
    return SketchVec(fft_real(_weighted_spectrum(cp, family, j)), family, "TS")


def hcs_strides(family: HashFamily):
    return np.concatenate([[1], np.cumprod(family.hash_lens[:-1])]).astype(np.int64)


def hcs_dense(t, family: HashFamily) -> SketchTensor:
    t = as_tensor(t)
    _check_dims(t.shape, family)
    size = int(np.prod(family.hash_lens))
    flat = kernels.scatter(vec(t), family.pairs, hcs_strides(family), 0, size)
    return SketchTensor(flat.reshape(family.hash_lens, order="F"), family)


def hcs_cp(cp: CpTensor, family: HashFamily) -> SketchTensor:
    _check_cp(cp, family)
    sketched = [cs_matrix(f, pair) for f, pair in zip(cp.factors, family.pairs)]
    return SketchTensor(_outer_sum(cp.weights, sketched), family)


def _outer_sum(weights, mats):
    """``sum_r w_r m_1[:, r] o ... o m_N[:, r]`` as one GEMM against a Khatri-Rao product."""
    head = mats[0] * weights
    shape = tuple(m.shape[0] for m in mats)
    if len(mats) == 1:
        return head.sum(axis=1)
    tail = khatri_rao(mats[:0:-1])
    return (head @ tail.T).reshape(shape, order="F")


def fcs_dense(t, family: HashFamily) -> SketchVec:
    t = as_tensor(t)
    _check_dims(t.shape, family)
    ones = np.ones(family.order, dtype=np.int64)
    values = kernels.scatter(vec(t), family.pairs, ones, 0, family.composed_len)
    return SketchVec(values, family, "FCS")


def fcs_cp(cp: CpTensor, family: HashFamily) -> SketchVec:
    _check_cp(cp, family)
    n = family.composed_len
    values = fft_real(_weighted_spectrum(cp, family, linear_fft_len(n)))[:n]
    return SketchVec(values, family, "FCS")


def sketch(kind: str, x, family: HashFamily):
    """Sketch a dense array or a :class:`CpTensor` with the named method.

    For ``kind == "CS"`` the family must hold one long pair over
    ``prod(I_n)`` indices.
    """
    kind = kind.upper()
    is_cp = isinstance(x, CpTensor)
    if kind == "CS":
        pair = family.pairs[0]
        if family.order != 1:
            raise ValueError("CS needs a family with one long pair")
        if is_cp:
            from .tensor import densify

            x = densify(x)
        return cs_long(x, pair)
    table = {
        "TS": (ts_dense, ts_cp),
        "HCS": (hcs_dense, hcs_cp),
        "FCS": (fcs_dense, fcs_cp),
    }
    if kind not in table:
        raise ValueError(f"unknown sketch kind {kind!r}; choose from {KINDS}")
    dense_fn, cp_fn = table[kind]
    return cp_fn(x, family) if is_cp else dense_fn(x, family)
