"""Tabulated random hash pairs shared by every sketch.

A hash pair maps an index ``i`` in ``[0, I)`` to a bucket ``h(i)`` in
``[0, J)`` and a sign ``s(i)`` in ``{-1, +1}``.  Maps are stored as tables
of i.i.d. uniform draws, which are fully (hence 2-wise) independent.

Reproducibility
---------------
Each pair is generated from a 64-bit seed with numpy's ``PCG64`` bit
generator (PCG XSL RR 128/64)::

    rng = numpy.random.Generator(numpy.random.PCG64(seed))
    bucket_map = rng.integers(0, hash_len, size=input_dim)
    sign_map = 2 * rng.integers(0, 2, size=input_dim) - 1

A family of ``N`` pairs is derived from a master seed and a copy index
``d`` (the ``d``-th of ``D`` independent sketches).  The seed of mode
``n`` is the first 64-bit word of
``numpy.random.SeedSequence(master_seed, spawn_key=(d, n))``.  Spawn keys
keep the streams of different copies and modes disjoint.

All indices are 0-based, so the composed bucket of a multi-index is the
plain sum ``sum_n h_n(i_n)``; the 1-based ``- N + 1`` shift disappears.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy import sparse

PRNG_NAME = "PCG64"
SEED_DERIVATION = "SeedSequence(master_seed, spawn_key=(copy, mode)).generate_state(1, uint64)[0]"

BUCKET_DTYPE = np.int64
SIGN_DTYPE = np.int8


def _frozen(a):
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class HashPair:
    """One bucket map and one sign map over ``input_dim`` indices."""

    bucket_map: np.ndarray
    sign_map: np.ndarray
    input_dim: int
    hash_len: int
    seed: int

    def __eq__(self, other):
        if not isinstance(other, HashPair):
            return NotImplemented
        return (
            self.input_dim == other.input_dim
            and self.hash_len == other.hash_len
            and self.seed == other.seed
            and np.array_equal(self.bucket_map, other.bucket_map)
            and np.array_equal(self.sign_map, other.sign_map)
        )

    __hash__ = None

    @property
    def nbytes(self):
        return self.bucket_map.nbytes + self.sign_map.nbytes

    @cached_property
    def operator(self):
        """The ``J x I`` signed selection matrix as a sparse CSR matrix."""
        cols = np.arange(self.input_dim)
        return sparse.csr_matrix(
            (self.sign_map.astype(np.float64), (self.bucket_map, cols)), shape=(self.hash_len, self.input_dim)
        )

    @classmethod
    def from_maps(cls, bucket_map, sign_map, hash_len, seed=0):
        """Build a pair from explicit tables (tests and hand-made families)."""
        bucket_map = np.asarray(bucket_map, dtype=BUCKET_DTYPE).copy()
        sign_map = np.asarray(sign_map, dtype=SIGN_DTYPE).copy()
        if bucket_map.ndim != 1 or bucket_map.shape != sign_map.shape:
            raise ValueError("bucket_map and sign_map must be 1-D arrays of equal length")
        if bucket_map.size == 0 or hash_len < 1:
            raise ValueError("input_dim and hash_len must be >= 1")
        if bucket_map.min() < 0 or bucket_map.max() >= hash_len:
            raise ValueError(f"bucket_map entries must lie in [0, {hash_len})")
        if not np.all(np.abs(sign_map) == 1):
            raise ValueError("sign_map entries must be +1 or -1")
        return cls(_frozen(bucket_map), _frozen(sign_map), int(bucket_map.size), int(hash_len), int(seed))


def new_hash_pair(input_dim: int, hash_len: int, seed: int) -> HashPair:
    """Draw a hash pair from ``seed``; identical seeds give identical pairs."""
    if input_dim < 1 or hash_len < 1:
        raise ValueError(f"input_dim and hash_len must be >= 1, got {input_dim}, {hash_len}")
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    rng = np.random.Generator(np.random.PCG64(seed))
    buckets = rng.integers(0, hash_len, size=input_dim).astype(BUCKET_DTYPE)
    signs = (2 * rng.integers(0, 2, size=input_dim) - 1).astype(SIGN_DTYPE)
    return HashPair(_frozen(buckets), _frozen(signs), int(input_dim), int(hash_len), seed)


def derive_seed(master_seed: int, copy: int, mode: int) -> int:
    ss = np.random.SeedSequence(int(master_seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=(int(copy), int(mode)))
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass(frozen=True, eq=False)
class HashFamily:
    """Ordered hash pairs, one per tensor mode.

    ``master_seed`` and ``copy`` record how the pairs were derived; they are
    ``None`` for families assembled by hand from explicit pairs.
    """

    pairs: tuple
    master_seed: int | None = None
    copy: int | None = None
    _composed_len: int = field(init=False, repr=False)

    def __post_init__(self):
        pairs = tuple(self.pairs)
        if not pairs:
            raise ValueError("a hash family needs at least one pair")
        object.__setattr__(self, "pairs", pairs)
        object.__setattr__(self, "_composed_len", sum(p.hash_len for p in pairs) - len(pairs) + 1)

    @classmethod
    def from_seed(cls, input_dims: Sequence[int], hash_lens, master_seed: int, copy: int = 0):
        """Family over ``input_dims``; ``hash_lens`` is one length or one per mode."""
        input_dims = [int(i) for i in input_dims]
        if np.ndim(hash_lens) == 0:
            hash_lens = [int(hash_lens)] * len(input_dims)
        hash_lens = [int(j) for j in hash_lens]
        if len(hash_lens) != len(input_dims):
            raise ValueError("need one hash length per mode")
        pairs = tuple(
            new_hash_pair(i, j, derive_seed(master_seed, copy, n))
            for n, (i, j) in enumerate(zip(input_dims, hash_lens))
        )
        return cls(pairs, int(master_seed), int(copy))

    def __eq__(self, other):
        if not isinstance(other, HashFamily):
            return NotImplemented
        return self.pairs == other.pairs

    __hash__ = None

    @property
    def order(self):
        return len(self.pairs)

    @property
    def input_dims(self):
        return tuple(p.input_dim for p in self.pairs)

    @property
    def hash_lens(self):
        return tuple(p.hash_len for p in self.pairs)

    @property
    def composed_len(self):
        """Length ``sum(J_n) - N + 1`` of the composed (fast count sketch) hash."""
        return self._composed_len

    @property
    def composed_dim(self):
        return int(np.prod(self.input_dims, dtype=np.int64))

    @property
    def nbytes(self):
        return sum(p.nbytes for p in self.pairs)

    def sub(self, modes):
        """Family restricted to the given modes (in the given order)."""
        return HashFamily(tuple(self.pairs[m] for m in modes))

    def to_dict(self):
        if self.master_seed is None:
            raise ValueError("hand-assembled families have no seed; use dump_maps()")
        return {
            "prng": PRNG_NAME,
            "seed_derivation": SEED_DERIVATION,
            "master_seed": self.master_seed,
            "copy": self.copy,
            "input_dims": list(self.input_dims),
            "hash_lens": list(self.hash_lens),
            "pair_seeds": [p.seed for p in self.pairs],
        }

    @classmethod
    def from_dict(cls, d):
        fam = cls.from_seed(d["input_dims"], d["hash_lens"], d["master_seed"], d.get("copy", 0))
        if "pair_seeds" in d and [p.seed for p in fam.pairs] != list(d["pair_seeds"]):
            raise ValueError("sidecar pair seeds do not match the derivation from master_seed")
        return fam

    def dump_maps(self):
        """Debug dump including the tables themselves."""
        return {
            "input_dims": list(self.input_dims),
            "hash_lens": list(self.hash_lens),
            "bucket_maps": [p.bucket_map.tolist() for p in self.pairs],
            "sign_maps": [p.sign_map.tolist() for p in self.pairs],
        }

    @classmethod
    def from_maps(cls, d):
        return cls(
            tuple(
                HashPair.from_maps(b, s, j)
                for b, s, j in zip(d["bucket_maps"], d["sign_maps"], d["hash_lens"])
            )
        )


def make_families(input_dims, hash_lens, master_seed, count):
    """``count`` independent families (copies ``0..count-1``) from one master seed."""
    if count < 1:
        raise ValueError("need at least one family")
    return [HashFamily.from_seed(input_dims, hash_lens, master_seed, d) for d in range(count)]


def compose_family(family: HashFamily, multi_index) -> tuple[int, int]:
    """Composed ``(bucket, sign)`` of one multi-index, without building long maps."""
    if len(multi_index) != family.order:
        raise ValueError(f"expected a {family.order}-index, got {len(multi_index)}")
    bucket = 0
    sign = 1
    for p, i in zip(family.pairs, multi_index):
        i = int(i)
        if not 0 <= i < p.input_dim:
            raise IndexError(f"index {i} out of range for mode of size {p.input_dim}")
        bucket += int(p.bucket_map[i])
        sign *= int(p.sign_map[i])
    return bucket, sign


def compose_indices(family: HashFamily, indices):
    """Vectorized :func:`compose_family` over index arrays, one array per mode."""
    if len(indices) != family.order:
        raise ValueError(f"expected {family.order} index arrays")
    bucket = 0
    sign = 1
    for p, idx in zip(family.pairs, indices):
        idx = np.asarray(idx)
        if idx.size and (idx.min() < 0 or idx.max() >= p.input_dim):
            raise IndexError(f"index out of range for mode of size {p.input_dim}")
        bucket = bucket + p.bucket_map[idx]
        sign = sign * p.sign_map[idx].astype(np.int64)
    return np.asarray(bucket, dtype=np.int64), np.asarray(sign, dtype=np.int64)


def materialize_composed_pair(family: HashFamily) -> HashPair:
    """The long pair over ``prod(I_n)`` column-major indices (CS baseline, tests)."""
    grids = np.unravel_index(np.arange(family.composed_dim), family.input_dims, order="F")
    bucket, sign = compose_indices(family, grids)
    return HashPair.from_maps(bucket, sign, family.composed_len)


def family_to_json(families, path=None, dump_maps=False):
    """Sidecar text; seeded families store the seed, others (or ``dump_maps``) the tables."""
    doc = []
    for f in families:
        d = f.to_dict() if f.master_seed is not None else {}
        if dump_maps or f.master_seed is None:
            d.update(f.dump_maps())
        doc.append(d)
    text = json.dumps(doc, indent=2)
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def family_from_json(text_or_path):
    try:
        doc = json.loads(text_or_path)
    except json.JSONDecodeError:
        with open(text_or_path) as fh:
            doc = json.load(fh)
    if isinstance(doc, dict):
        doc = [doc]
    return [HashFamily.from_dict(d) if "master_seed" in d else HashFamily.from_maps(d) for d in doc]
