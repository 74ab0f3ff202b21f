"""Sketched estimators of inner products and 3rd-order tensor contractions.

With ``x_n = CS_n(v_n)``, the contraction of ``T`` with vectors on all
three modes is estimated by ``<FCS(T), x_1 * x_2 * x_3>`` (``*`` = linear
convolution).  Leaving mode ``m`` free, correlate ``FCS(T)`` with the two
other sketched vectors once::

    z = ifft(fft(FCS(T)) . conj(fft(x_a)) . conj(fft(x_b)))      (length J~)

and read entry ``i`` as ``s_m(i) * z[h_m(i)]``.  No wrap-around occurs
because ``h_m(i) + h_a + h_b <= J~ - 1``.  The TS variant is the same with
a circular length-``J`` transform.  Every estimate is the elementwise
median over ``D`` independently hashed sketches.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .hashing import HashFamily, derive_seed, make_families, new_hash_pair
from .sketches import (
    cs_long,
    cs_matrix,
    fcs_cp,
    fcs_dense,
    fft,
    fft_real,
    linear_fft_len,
    hcs_cp,
    hcs_dense,
    ts_cp,
    ts_dense,
)
from .tensor import CpTensor, as_tensor, densify, unvec, vec

BACKENDS = ("plain", "CS", "TS", "HCS", "FCS")


@dataclass(frozen=True)
class EstimatorConfig:
    """Hash length(s), number of independent sketches and master seed."""

    hash_len: int | tuple = 100
    sketch_count: int = 1
    seed: int = 0
    reduction: str = "median"

    def __post_init__(self):
        lens = (self.hash_len,) if np.ndim(self.hash_len) == 0 else tuple(self.hash_len)
        if self.sketch_count < 1 or min(lens) < 1:
            raise ValueError("sketch_count and hash lengths must be >= 1")
        if self.reduction != "median":
            raise ValueError(f"unsupported reduction {self.reduction!r}")

    def families(self, dims):
        return make_families(dims, self.hash_len, self.seed, self.sketch_count)


def median_reduce(estimates):
    """Elementwise median over the first axis (mean of the middle two for even D)."""
    estimates = np.asarray(estimates, dtype=np.float64)
    if estimates.ndim == 0 or estimates.shape[0] == 0:
        raise ValueError("median_reduce needs at least one estimate")
    return np.median(estimates, axis=0)


def inner_estimates(a, b, families, kind="FCS"):
    """Raw per-family estimates ``<S(a), S(b)>`` for ``kind`` in {FCS, TS}."""
    fn = {"FCS": fcs_dense, "TS": ts_dense}[kind]
    a = as_tensor(a)
    b = as_tensor(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    return np.array([fn(a, f).values @ fn(b, f).values for f in families])


def est_inner(a, b, cfg: EstimatorConfig) -> float:
    """Median-of-D fast-count-sketch estimate of ``<a, b>``."""
    a = as_tensor(a)
    return float(median_reduce(inner_estimates(a, b, cfg.families(a.shape))))


@dataclass(frozen=True)
class PrecomputedFcs:
    """FCS of a 3rd-order tensor plus its spectrum, reused for every contraction."""

    fcs_t: np.ndarray
    family: HashFamily
    spectrum: np.ndarray = field(repr=False)

    @classmethod
    def build(cls, t, family: HashFamily):
        values = fcs_cp(t, family).values if isinstance(t, CpTensor) else fcs_dense(t, family).values
        return cls.from_values(values, family)

    @classmethod
    def from_values(cls, values, family):
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (family.composed_len,):
            raise ValueError("sketch length does not match the family's composed length")
        return cls(values, family, fft(values, linear_fft_len(family.composed_len)))

    def correlate(self, mats, free_mode):
        """Cross-correlation ``z`` of the tensor sketch with the two non-free sketched vectors."""
        n = self.spectrum.shape[0]
        spec = self.spectrum.reshape((-1,) + (1,) * (np.ndim(mats[(free_mode + 1) % 3]) - 1))
        for m in range(3):
            if m == free_mode:
                continue
            x = cs_matrix(mats[m], self.family.pairs[m])
            spec = spec * np.conj(fft(x, n))
        return fft_real(spec)[: self.family.hash_lens[free_mode]]

    def deflated(self, cp: CpTensor):
        return PrecomputedFcs.from_values(self.fcs_t - fcs_cp(cp, self.family).values, self.family)


def precompute(t, cfg: EstimatorConfig):
    t_shape = t.shape if isinstance(t, CpTensor) else as_tensor(t).shape
    return [PrecomputedFcs.build(t, f) for f in cfg.families(t_shape)]


def _read_free(z, pair):
    return pair.sign_map.reshape((-1,) + (1,) * (z.ndim - 1)) * z[pair.bucket_map]


def est_Iuv_generic(pre, u, v, free_mode: int):
    """Estimate the contraction leaving ``free_mode`` (0-based) free.

    ``u`` goes to the first non-free mode and ``v`` to the second.  ``u``
    and ``v`` may be ``I x R`` matrices, giving one column per rank-1 term.
    """
    if free_mode not in (0, 1, 2):
        raise ValueError(f"free_mode must be 0, 1 or 2, got {free_mode}")
    others = [m for m in range(3) if m != free_mode]
    mats = [None, None, None]
    mats[others[0]] = np.asarray(u, dtype=np.float64)
    mats[others[1]] = np.asarray(v, dtype=np.float64)
    results = []
    for p in pre:
        for m in others:
            if mats[m].shape[0] != p.family.input_dims[m]:
                raise ValueError(f"vector for mode {m} must have length {p.family.input_dims[m]}")
        z = p.correlate(mats, free_mode)
        results.append(_read_free(z, p.family.pairs[free_mode]))
    return median_reduce(results)


def est_Iuu(pre, u):
    """Estimate ``T(I, u, u)``."""
    return est_Iuv_generic(pre, u, u, 0)


def est_uvw(pre, u, v, w):
    """Estimate ``T(u, v, w)``; matrix arguments give one value per column."""
    n = linear_fft_len(pre[0].family.composed_len) if pre else 0
    return median_reduce([p.fcs_t @ _convolved(p.family, (u, v, w), n)[: p.fcs_t.size] for p in pre])


def _cols(*vs):
    return tuple(np.asarray(v, dtype=np.float64).reshape(np.shape(v)[0], -1) for v in vs)


def _as_cols(x):
    x = np.asarray(x, dtype=np.float64)
    return x[:, None] if x.ndim == 1 else x


def _convolved(family, mats, n):
    """Length-``n`` convolution of the per-mode count sketches, column by column."""
    spec = None
    for mat, pair in zip(mats, family.pairs):
        s = fft(cs_matrix(mat, pair), n)
        spec = s if spec is None else spec * s
    return fft_real(spec)


def est_uuu(pre, u) -> float:
    """Estimate ``T(u, u, u)``."""
    return float(est_uvw(pre, u, u, u))


# --- contraction backends for the CP solvers --------------------------------


class ContractionBackend:
    """Answers the two contractions the CP solvers need, exactly or by sketching.

    ``contract_free(mats, free_mode)`` returns ``T(.., I, ..)`` column-wise for
    ``I x R`` factor matrices; ``contract_all(u, v, w)`` returns ``T(u, v, w)``
    per column; ``deflate`` subtracts a weighted rank-1 term.
    """

    name = "base"

    @property
    def hash_memory(self):
        """Bytes of stored hash tables over all sketch copies."""
        return sum(f.nbytes for f in getattr(self, "families", ()))

    def contract_free(self, mats, free_mode):
        raise NotImplementedError

    def contract_all(self, u, v, w):
        raise NotImplementedError

    def deflate(self, weight, u, v, w):
        raise NotImplementedError

    def sketch_fit(self, cp):
        """Relative residual of ``cp`` measured in the sketch domain."""
        raise NotImplementedError


_FREE_SUBSCRIPTS = {0: "ijk,jr,kr->ir", 1: "ijk,ir,kr->jr", 2: "ijk,ir,jr->kr"}


def _dense_free(t, mats, free_mode):
    ops = [_as_cols(mats[k]) for k in range(3) if k != free_mode]
    return np.einsum(_FREE_SUBSCRIPTS[free_mode], t, *ops, optimize=True)


def _dense_all(t, u, v, w):
    return np.einsum("ijk,ir,jr,kr->r", t, *_cols(u, v, w), optimize=True)


class PlainBackend(ContractionBackend):
    name = "plain"

    def __init__(self, t):
        self.t = as_tensor(t).copy()

    def contract_free(self, mats, free_mode):
        return _dense_free(self.t, mats, free_mode)

    def contract_all(self, u, v, w):
        return _dense_all(self.t, u, v, w)

    def deflate(self, weight, u, v, w):
        self.t -= weight * np.einsum("i,j,k->ijk", u, v, w)

    def sketch_fit(self, cp):
        return float(np.linalg.norm(self.t - densify(cp)) / max(np.linalg.norm(self.t), 1e-300))


class _ConvolutionBackend(ContractionBackend):
    """Shared machinery for FCS (linear convolution) and TS (circular)."""

    def __init__(self, t, families):
        self.families = list(families)
        self.sketches = [self._sketch_dense(t, f) for f in self.families]
        self._refresh()

    def _refresh(self):
        self.spectra = [fft(s, self._n(f)) for s, f in zip(self.sketches, self.families)]

    def _n(self, family):
        raise NotImplementedError

    def _sketch_cp(self, cp, family):
        raise NotImplementedError

    def contract_free(self, mats, free_mode):
        out = []
        for fam, spec0 in zip(self.families, self.spectra):
            n = self._n(fam)
            spec = spec0[:, None]
            for m in range(3):
                if m == free_mode:
                    continue
                x = cs_matrix(_as_cols(mats[m]), fam.pairs[m])
                spec = spec * np.conj(fft(x, n))
            z = fft_real(spec)[: fam.hash_lens[free_mode]]
            out.append(_read_free(z, fam.pairs[free_mode]))
        return median_reduce(out)

    def contract_all(self, u, v, w):
        mats = _cols(u, v, w)
        return median_reduce(
            [sk @ _convolved(f, mats, self._n(f))[: sk.size] for f, sk in zip(self.families, self.sketches)]
        )

    def deflate(self, weight, u, v, w):
        cp = CpTensor(np.array([weight]), _cols(u, v, w))
        self.sketches = [s - self._sketch_cp(cp, f).values for s, f in zip(self.sketches, self.families)]
        self._refresh()

    def sketch_fit(self, cp):
        errs = []
        for s, f in zip(self.sketches, self.families):
            errs.append(np.linalg.norm(s - self._sketch_cp(cp, f).values) / max(np.linalg.norm(s), 1e-300))
        return float(np.median(errs))


class FcsBackend(_ConvolutionBackend):
    name = "FCS"

    def _sketch_dense(self, t, family):
        if isinstance(t, CpTensor):
            return fcs_cp(t, family).values
        return fcs_dense(t, family).values

    def _sketch_cp(self, cp, family):
        return fcs_cp(cp, family)

    def _n(self, family):
        return linear_fft_len(family.composed_len)

    def precomputed(self):
        return [PrecomputedFcs.from_values(s, f) for s, f in zip(self.sketches, self.families)]


class TsBackend(_ConvolutionBackend):
    name = "TS"

    def _sketch_dense(self, t, family):
        if isinstance(t, CpTensor):
            return ts_cp(t, family).values
        return ts_dense(t, family).values

    def _sketch_cp(self, cp, family):
        return ts_cp(cp, family)

    def _n(self, family):
        return family.hash_lens[0]


class HcsBackend(ContractionBackend):
    name = "HCS"

    def __init__(self, t, families):
        self.families = list(families)
        self.sketches = [
            (hcs_cp(t, f) if isinstance(t, CpTensor) else hcs_dense(t, f)).values for f in self.families
        ]

    def contract_free(self, mats, free_mode):
        subs = {0: "abc,br,cr->ar", 1: "abc,ar,cr->br", 2: "abc,ar,br->cr"}[free_mode]
        out = []
        for fam, sk in zip(self.families, self.sketches):
            ops = [cs_matrix(_as_cols(mats[m]), fam.pairs[m]) for m in range(3) if m != free_mode]
            y = np.einsum(subs, sk, *ops, optimize=True)
            out.append(_read_free(y, fam.pairs[free_mode]))
        return median_reduce(out)

    def contract_all(self, u, v, w):
        u, v, w = _cols(u, v, w)
        out = []
        for fam, sk in zip(self.families, self.sketches):
            xs = [cs_matrix(m, p) for m, p in zip((u, v, w), fam.pairs)]
            out.append(np.einsum("abc,ar,br,cr->r", sk, *xs, optimize=True))
        return median_reduce(out)

    def deflate(self, weight, u, v, w):
        cp = CpTensor(np.array([weight]), _cols(u, v, w))
        self.sketches = [s - hcs_cp(cp, f).values for s, f in zip(self.sketches, self.families)]

    def sketch_fit(self, cp):
        errs = [
            np.linalg.norm(s - hcs_cp(cp, f).values) / max(np.linalg.norm(s), 1e-300)
            for s, f in zip(self.sketches, self.families)
        ]
        return float(np.median(errs))


class CsBackend(ContractionBackend):
    """Baseline: one long hash pair over ``vec(T)`` per copy.

    The long pair's hash length is ``J~ = sum(J_n) - N + 1`` so the sketch is
    as long as the FCS one.  Contractions read back the full ``O(I^3)``
    signed estimate of ``T``.
    """

    name = "CS"

    def __init__(self, t, families):
        t = densify(t) if isinstance(t, CpTensor) else as_tensor(t)
        self.shape = t.shape
        self.pairs = [
            new_hash_pair(t.size, f.composed_len, derive_seed(f.master_seed or 0, f.copy or 0, 1 << 20))
            for f in families
        ]
        self.sketches = [cs_long(t, p).values for p in self.pairs]
        self._refresh()

    @property
    def hash_memory(self):
        return sum(p.nbytes for p in self.pairs)

    def _refresh(self):
        self.readbacks = [
            unvec(p.sign_map * s[p.bucket_map], self.shape) for p, s in zip(self.pairs, self.sketches)
        ]

    def contract_free(self, mats, free_mode):
        return median_reduce([_dense_free(r, mats, free_mode) for r in self.readbacks])

    def contract_all(self, u, v, w):
        return median_reduce([_dense_all(r, u, v, w) for r in self.readbacks])

    def deflate(self, weight, u, v, w):
        term = vec(weight * np.einsum("i,j,k->ijk", u, v, w))
        self.sketches = [
            s - np.bincount(p.bucket_map, weights=p.sign_map * term, minlength=p.hash_len)
            for p, s in zip(self.pairs, self.sketches)
        ]
        self._refresh()

    def sketch_fit(self, cp):
        approx = vec(densify(cp))
        errs = []
        for p, s in zip(self.pairs, self.sketches):
            sk = np.bincount(p.bucket_map, weights=p.sign_map * approx, minlength=p.hash_len)
            errs.append(np.linalg.norm(s - sk) / max(np.linalg.norm(s), 1e-300))
        return float(np.median(errs))


def make_backend(kind: str, t, cfg: EstimatorConfig | None = None) -> ContractionBackend:
    """Contraction backend of the given kind over a 3rd-order tensor (dense or CP)."""
    if kind == "plain":
        return PlainBackend(densify(t) if isinstance(t, CpTensor) else t)
    if cfg is None:
        raise ValueError(f"backend {kind!r} needs an EstimatorConfig")
    shape = t.shape if isinstance(t, CpTensor) else as_tensor(t).shape
    if len(shape) != 3:
        raise ValueError("contraction backends work on 3rd-order tensors")
    families = cfg.families(shape)
    table = {"FCS": FcsBackend, "TS": TsBackend, "HCS": HcsBackend, "CS": CsBackend}
    if kind not in table:
        raise ValueError(f"unknown backend {kind!r}; choose from {BACKENDS}")
    return table[kind](t, families)
