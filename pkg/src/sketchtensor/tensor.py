"""Dense and CP-form tensors and the exact contractions used around them.

Dense tensors are plain ``numpy.ndarray`` objects of float64.  Their
vectorization is column-major (first index fastest)::

    vec(T)[l] = T[i_1, ..., i_N],   l = sum_n i_n * prod_{j<n} I_j

so ``vec(u o v) == kron(v, u)``.  Unfoldings follow Kolda & Bader and are
consistent with that ordering.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


def as_tensor(t) -> np.ndarray:
    t = np.asarray(t, dtype=np.float64)
    if t.ndim == 0:
        raise ValueError("a tensor needs at least one mode")
    return t


def vec(t) -> np.ndarray:
    """Column-major vectorization."""
    return np.asarray(t, dtype=np.float64).ravel(order="F")


def unvec(v, shape) -> np.ndarray:
    """Inverse of :func:`vec`."""
    v = np.asarray(v, dtype=np.float64)
    if v.size != int(np.prod(shape)):
        raise ValueError(f"cannot fold {v.size} values into shape {tuple(shape)}")
    return v.reshape(tuple(shape), order="F")


def frobenius(t) -> float:
    return float(np.linalg.norm(vec(t)))


@dataclass(frozen=True)
class CpTensor:
    """Weighted sum of rank-1 tensors ``sum_r weights[r] * U1[:, r] o ... o UN[:, r]``."""

    weights: np.ndarray
    factors: tuple

    def __post_init__(self):
        weights = np.atleast_1d(np.asarray(self.weights, dtype=np.float64))
        factors = tuple(np.atleast_2d(np.asarray(f, dtype=np.float64)) for f in self.factors)
        if weights.ndim != 1:
            raise ValueError("weights must be a vector")
        if not factors:
            raise ValueError("a CP tensor needs at least one factor")
        for f in factors:
            if f.ndim != 2 or f.shape[1] != weights.size:
                raise ValueError(
                    f"every factor must have {weights.size} columns, got shape {f.shape}"
                )
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "factors", factors)

    @classmethod
    def rank_one(cls, *vectors, weight=1.0):
        return cls(np.array([weight]), tuple(np.asarray(v, dtype=np.float64)[:, None] for v in vectors))

    @property
    def rank(self):
        return self.weights.size

    @property
    def order(self):
        return len(self.factors)

    @property
    def shape(self):
        return tuple(f.shape[0] for f in self.factors)

    def scaled(self, c):
        return CpTensor(self.weights * c, self.factors)

    def normalized(self):
        """Unit-norm columns with the norms absorbed into the weights."""
        weights = self.weights.copy()
        factors = []
        for f in self.factors:
            norms = np.linalg.norm(f, axis=0)
            safe = np.where(norms > 0, norms, 1.0)
            weights *= norms
            factors.append(f / safe)
        return CpTensor(weights, tuple(factors))


def densify(cp: CpTensor) -> np.ndarray:
    """Materialize ``sum_r lambda_r u_r^(1) o ... o u_r^(N)``."""
    letters = "abcdefghijklmnopqrstuvwxy"
    if cp.order > len(letters):
        raise ValueError("order too large")
    idx = letters[: cp.order]
    spec = "z," + ",".join(f"{c}z" for c in idx) + "->" + idx
    return np.einsum(spec, cp.weights, *cp.factors, optimize=True)


def khatri_rao(matrices: Sequence[np.ndarray]) -> np.ndarray:
    """Column-wise Kronecker product ``M_1 (.) M_2 (.) ...`` (first matrix slowest)."""
    matrices = [np.asarray(m, dtype=np.float64) for m in matrices]
    ncol = matrices[0].shape[1]
    out = matrices[0]
    for m in matrices[1:]:
        if m.shape[1] != ncol:
            raise ValueError("Khatri-Rao operands need the same column count")
        out = (out[:, None, :] * m[None, :, :]).reshape(-1, ncol)
    return out


def mode_unfold(t, mode: int) -> np.ndarray:
    """Mode-``mode`` matricization (0-based), shape ``I_mode x prod_{i != mode} I_i``.

    Column index of entry ``(i_1..i_N)`` is ``sum_{k != mode} i_k * prod_{m<k, m != mode} I_m``.
    """
    t = as_tensor(t)
    if not 0 <= mode < t.ndim:
        raise ValueError(f"mode {mode} out of range for order-{t.ndim} tensor")
    return np.moveaxis(t, mode, 0).reshape(t.shape[mode], -1, order="F")


def refold(m, mode: int, shape) -> np.ndarray:
    """Inverse of :func:`mode_unfold`."""
    shape = tuple(shape)
    if not 0 <= mode < len(shape):
        raise ValueError(f"mode {mode} out of range for order-{len(shape)} tensor")
    moved = (shape[mode],) + shape[:mode] + shape[mode + 1 :]
    return np.moveaxis(np.asarray(m, dtype=np.float64).reshape(moved, order="F"), 0, mode)


def inner(a, b) -> float:
    a = as_tensor(a)
    b = as_tensor(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    return float(vec(a) @ vec(b))


def _check_cubical(t, u):
    t = as_tensor(t)
    u = np.asarray(u, dtype=np.float64)
    if t.ndim != 3 or u.ndim != 1 or t.shape != (u.size,) * 3:
        raise ValueError(f"need an IxIxI tensor and a length-I vector, got {t.shape} and {u.shape}")
    return t, u


def contract_uuu(t, u) -> float:
    """``T(u, u, u) = sum_ijk T_ijk u_i u_j u_k``."""
    t, u = _check_cubical(t, u)
    return float(np.einsum("ijk,i,j,k->", t, u, u, u, optimize=True))


def contract_Iuu(t, u) -> np.ndarray:
    """``T(I, u, u)_i = sum_jk T_ijk u_j u_k``."""
    t, u = _check_cubical(t, u)
    return np.einsum("ijk,j,k->i", t, u, u, optimize=True)


def contract_free(t, vectors, free_mode: int) -> np.ndarray:
    """Contract a 3rd-order tensor with vectors on every mode except ``free_mode``.

    ``vectors`` has three entries; the one at ``free_mode`` is ignored.
    """
    t = as_tensor(t)
    if t.ndim != 3:
        raise ValueError("expected a 3rd-order tensor")
    if free_mode not in (0, 1, 2):
        raise ValueError(f"free_mode must be 0, 1 or 2, got {free_mode}")
    ops = []
    subs = []
    for m, letter in enumerate("ijk"):
        if m == free_mode:
            continue
        v = np.asarray(vectors[m], dtype=np.float64)
        if v.shape != (t.shape[m],):
            raise ValueError(f"vector for mode {m} must have length {t.shape[m]}")
        ops.append(v)
        subs.append(letter)
    spec = "ijk," + ",".join(subs) + "->" + "ijk"[free_mode]
    return np.einsum(spec, t, *ops, optimize=True)


def kron(a, b) -> np.ndarray:
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    return np.kron(a, b)


def contract_pair(a, b, mode_a: int, mode_b: int) -> np.ndarray:
    """Contract mode ``mode_a`` of ``a`` with mode ``mode_b`` of ``b`` (0-based).

    Result modes are the free modes of ``a`` followed by those of ``b``.
    """
    a = as_tensor(a)
    b = as_tensor(b)
    if not (0 <= mode_a < a.ndim and 0 <= mode_b < b.ndim):
        raise ValueError("contraction mode out of range")
    if a.shape[mode_a] != b.shape[mode_b]:
        raise ValueError(
            f"contracted dimensions differ: {a.shape[mode_a]} vs {b.shape[mode_b]}"
        )
    return np.tensordot(a, b, axes=([mode_a], [mode_b]))


def rank_one_dense(*vectors) -> np.ndarray:
    return densify(CpTensor.rank_one(*vectors))
