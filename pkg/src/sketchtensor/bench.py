"""Micro-benchmarks: compiled vs numpy kernels, and sketch-cost scaling in J."""

from __future__ import annotations

import timeit

import numpy as np

from . import kernels
from .hashing import HashFamily
from .sketches import fcs_cp, hcs_cp, hcs_strides
from .tensor import CpTensor, vec


def best_time(fn, reps=5):
    """Best per-call time over ``reps`` batches, each batch at least 0.2 s long."""
    timer = timeit.Timer(fn)
    number, _ = timer.autorange()
    return min(timer.repeat(reps, number)) / number


def kernel_benchmark(shapes=((64, 64, 64), (16, 16, 16, 16)), hash_len=32, reps=5, seed=0):
    """Time FCS and HCS scatter and the FCS gather under every available kernel."""
    rng = np.random.default_rng(seed)
    rows = []
    for shape in shapes:
        t = rng.standard_normal(shape)
        flat = vec(t)
        fam = HashFamily.from_seed(shape, hash_len, seed)
        ones = np.ones(len(shape), dtype=np.int64)
        hcs_len = int(np.prod(fam.hash_lens))
        fcs = kernels.scatter(flat, fam.pairs, ones, 0, fam.composed_len)
        cases = {
            "scatter-FCS": lambda impl: kernels.scatter(flat, fam.pairs, ones, 0, fam.composed_len, impl),
            "scatter-HCS": lambda impl: kernels.scatter(flat, fam.pairs, hcs_strides(fam), 0, hcs_len, impl),
            "gather-FCS": lambda impl: kernels.gather(fcs, fam.pairs, ones, 0, impl),
        }
        for op, fn in cases.items():
            for name, impl in kernels.IMPLEMENTATIONS.items():
                rows.append(
                    {
                        "op": op,
                        "shape": list(shape),
                        "hash_len": hash_len,
                        "kernel": name,
                        "seconds": best_time(lambda: fn(impl), reps),
                    }
                )
    return rows


def loglog_slope(x, y) -> float:
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def sketch_scaling(size=16, rank=256, hash_lens=None, reps=5, seed=0):
    """Time ``fcs_cp`` and ``hcs_cp`` on one CP tensor over a 16x sweep of per-mode ``J``.

    Returns ``{"J": ..., "fcs_len": ..., "fcs": ..., "hcs": ..., "fcs_slope": ..., "hcs_slope": ...}``;
    the FCS slope is taken in ``J~ = 3J - 2``, the HCS slope in ``J``.
    """
    if hash_lens is None:
        hash_lens = np.unique(np.round(20 * 2 ** np.linspace(0, 4, 9)).astype(int))
    rng = np.random.default_rng(seed)
    cp = CpTensor(rng.standard_normal(rank), tuple(rng.standard_normal((size, rank)) for _ in range(3)))
    families = [HashFamily.from_seed((size,) * 3, int(j), seed) for j in hash_lens]
    for fam in families:
        for p in fam.pairs:
            p.operator  # build outside the timed region
    fcs = [best_time(lambda: fcs_cp(cp, f), reps) for f in families]
    hcs = [best_time(lambda: hcs_cp(cp, f), reps) for f in families]
    fcs_len = [f.composed_len for f in families]
    return {
        "J": [int(j) for j in hash_lens],
        "fcs_len": fcs_len,
        "fcs": fcs,
        "hcs": hcs,
        "fcs_slope": loglog_slope(fcs_len, fcs),
        "hcs_slope": loglog_slope(hash_lens, hcs),
    }
