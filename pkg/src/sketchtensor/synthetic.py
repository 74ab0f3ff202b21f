"""Synthetic CP tensors with orthonormal factors plus Gaussian noise."""

import numpy as np

from .tensor import CpTensor, densify


def _orthonormal(rng, size, rank):
    if rank > size:
        raise ValueError(f"cannot fit {rank} orthonormal vectors in dimension {size}")
    q, _ = np.linalg.qr(rng.standard_normal((size, rank)))
    return q


def gen_synthetic_symmetric(size, rank, sigma, seed, return_cp=False):
    """``sum_r u_r o u_r o u_r`` over a random orthonormal set, plus N(0, sigma^2) noise."""
    rng = np.random.default_rng(seed)
    u = _orthonormal(rng, size, rank)
    cp = CpTensor(np.ones(rank), (u, u, u))
    t = densify(cp)
    if sigma:
        t = t + sigma * rng.standard_normal(t.shape)
    return (t, cp) if return_cp else t


def gen_synthetic_asymmetric(size, rank, sigma, seed, return_cp=False):
    """``sum_r u_r o v_r o w_r`` with three independent orthonormal sets, plus noise.

    ``size`` is one dimension or a 3-tuple of dimensions.
    """
    rng = np.random.default_rng(seed)
    dims = (size,) * 3 if np.ndim(size) == 0 else tuple(size)
    factors = tuple(_orthonormal(rng, n, rank) for n in dims)
    cp = CpTensor(np.ones(rank), factors)
    t = densify(cp)
    if sigma:
        t = t + sigma * rng.standard_normal(t.shape)
    return (t, cp) if return_cp else t
